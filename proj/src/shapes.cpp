#include "plateau/shapes.hpp"

#include "plateau/polytope.hpp"

namespace plateau::geom {

EmbeddedMesh quad_patch(const PointN& origin, const PointN& u, const PointN& v, int nu, int nv) {
  if (nu < 1 || nv < 1) throw DomainError("quad_patch: cell counts must be positive");
  EmbeddedMesh mesh(2, origin.dim());
  for (int j = 0; j <= nv; ++j)
    for (int i = 0; i <= nu; ++i)
      mesh.add_vertex(origin + u * (static_cast<double>(i) / nu) + v * (static_cast<double>(j) / nv));
  auto id = [&](int i, int j) { return static_cast<std::uint32_t>(j * (nu + 1) + i); };
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      mesh.add_simplex({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.add_simplex({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return mesh;
}

EmbeddedMesh sector_fan(const PointN& apex, const PointN& e1, const PointN& e2, double angle, double radius,
                        int segments) {
  if (segments < 1) throw DomainError("sector_fan: need at least one segment");
  const double step = angle / segments;
  const double outer = radius / std::cos(0.5 * step);
  EmbeddedMesh mesh(2, apex.dim());
  const auto center = mesh.add_vertex(apex);
  const bool full = std::abs(angle - 2.0 * std::acos(-1.0)) < 1e-12;
  const int rim = full ? segments : segments + 1;
  for (int k = 0; k < rim; ++k) {
    const double phi = k * step;
    mesh.add_vertex(apex + (e1 * std::cos(phi) + e2 * std::sin(phi)) * outer);
  }
  for (int k = 0; k < segments; ++k) {
    const auto a = static_cast<std::uint32_t>(1 + k);
    const auto b = static_cast<std::uint32_t>(1 + (k + 1) % rim);
    mesh.add_simplex({center, a, b});
  }
  return mesh;
}

EmbeddedMesh annulus_patch(const PointN& center, const PointN& e1, const PointN& e2, double inner, double outer,
                           int rings, int segments) {
  if (rings < 1 || segments < 3 || !(inner > 0.0) || !(outer > inner))
    throw DomainError("annulus_patch: need 0 < inner < outer, rings >= 1, segments >= 3");
  const double step = 2.0 * std::acos(-1.0) / segments;
  const double rim = outer / std::cos(0.5 * step);
  EmbeddedMesh mesh(2, center.dim());
  for (int i = 0; i <= rings; ++i) {
    const double rho = inner + (rim - inner) * i / rings;
    for (int k = 0; k < segments; ++k)
      mesh.add_vertex(center + (e1 * std::cos(k * step) + e2 * std::sin(k * step)) * rho);
  }
  const auto id = [&](int i, int k) { return static_cast<std::uint32_t>(i * segments + (k % segments)); };
  for (int i = 0; i < rings; ++i)
    for (int k = 0; k < segments; ++k) {
      mesh.add_simplex({id(i, k), id(i + 1, k), id(i + 1, k + 1)});
      mesh.add_simplex({id(i, k), id(i + 1, k + 1), id(i, k + 1)});
    }
  return mesh;
}

EmbeddedMesh polyline(const std::vector<PointN>& points, bool closed) {
  if (points.empty()) throw DomainError("polyline: no points");
  EmbeddedMesh mesh(1, points[0].dim());
  for (const auto& p : points) mesh.add_vertex(p);
  const std::size_t n = points.size();
  for (std::size_t k = 0; k + 1 < n; ++k)
    mesh.add_simplex({static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k + 1), 0});
  if (closed && n > 2) mesh.add_simplex({static_cast<std::uint32_t>(n - 1), 0, 0});
  return mesh;
}

EmbeddedMesh height_field(double x0, double y0, double w, int cells,
                          const std::function<double(double, double)>& height) {
  EmbeddedMesh mesh = quad_patch(PointN{x0, y0, 0.0}, PointN{w, 0.0, 0.0}, PointN{0.0, w, 0.0}, cells, cells);
  for (auto& v : mesh.vertices) v[2] = height(v[0], v[1]);
  return mesh;
}

EmbeddedMesh sphere_octant(int levels) {
  std::vector<Polytope> tris{{PointN{1.0, 0.0, 0.0}, PointN{0.0, 1.0, 0.0}, PointN{0.0, 0.0, 1.0}}};
  auto on_sphere = [](const PointN& p) { return p * (1.0 / norm(p)); };
  for (int l = 0; l < levels; ++l) {
    std::vector<Polytope> next;
    for (const auto& t : tris) {
      const PointN ab = on_sphere(t[0] + t[1]), bc = on_sphere(t[1] + t[2]), ca = on_sphere(t[2] + t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({ab, t[1], bc});
      next.push_back({ca, bc, t[2]});
      next.push_back({ab, bc, ca});
    }
    tris = std::move(next);
  }
  MeshBuilder b(2, 3);
  for (const auto& t : tris) b.add_simplex(t);
  return b.take();
}

EmbeddedMesh rigid_motion(const EmbeddedMesh& mesh, const std::vector<double>& rotation, const PointN& shift) {
  const int n = mesh.ambient;
  if (rotation.size() != static_cast<std::size_t>(n * n)) throw DomainError("rigid_motion: rotation size mismatch");
  EmbeddedMesh out = mesh;
  for (auto& v : out.vertices) {
    PointN w(n);
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += rotation[static_cast<std::size_t>(i * n + j)] * v[j];
      w[i] = s + shift[i];
    }
    v = w;
  }
  return out;
}

}  // namespace plateau::geom
