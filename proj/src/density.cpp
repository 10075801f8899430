#include "plateau/density.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "plateau/parallel.hpp"
#include "plateau/shapes.hpp"

namespace plateau::density {

using geom::clip_to_ball;
using geom::measure;

double tetrahedral_density() { return 3.0 * std::acos(-1.0 / 3.0); }

DensityValue density(const EmbeddedMesh& e, const PointN& x, double r, const ClipOptions& clip) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("density radius must be positive");
  if (x.dim() != e.ambient) throw DomainError("density center and mesh differ in dimension");
  const double m = measure(clip_to_ball(e, Ball{x, r}, clip));
  DensityValue v;
  v.value = m / std::pow(r, e.dim);
  v.error = v.value * clip.tolerance;
  return v;
}

namespace {

void check_radii(const std::vector<double>& radii) {
  if (radii.empty()) throw DomainError("profile needs at least one radius");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || !std::isfinite(radii[i])) throw DomainError("profile radii must be positive");
    if (i > 0 && !(radii[i] > radii[i - 1])) throw DomainError("profile radii must increase strictly");
  }
}

std::string trend_of(const std::vector<double>& v, double tol) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (*hi - *lo <= tol * std::max(1.0, std::abs(*hi))) return "constant";
  bool up = true, down = true;
  for (std::size_t i = 1; i < v.size(); ++i) {
    up = up && v[i] >= v[i - 1] - tol;
    down = down && v[i] <= v[i - 1] + tol;
  }
  if (up) return "nondecreasing";
  if (down) return "nonincreasing";
  return "mixed";
}

}  // namespace

DensityProfile density_profile(const EmbeddedMesh& e, const PointN& x, const std::vector<double>& radii,
                               const ProfileOptions& opts) {
  check_radii(radii);
  geom::validate(opts.gauge);
  if (x.dim() != e.ambient) throw DomainError("profile center and mesh differ in dimension");
  const geom::SimplexLocator locator(e);
  const double gap = locator.empty() ? std::numeric_limits<double>::infinity() : locator.distance(x);
  if (!(gap <= opts.membership_tolerance)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "profile center is %.3g away from the set", gap);
    throw DomainError(buf);
  }
  DensityProfile p;
  p.center = x;
  p.radii = radii;
  p.theta.assign(radii.size(), 0.0);
  p.error.assign(radii.size(), 0.0);
  parallel_for(radii.size(), [&](std::size_t i) {
    const auto v = density(e, x, radii[i], opts.clip);
    p.theta[i] = v.value;
    p.error[i] = v.error;
  });
  p.adjusted.resize(radii.size());
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double dini = opts.gauge.dini_integral(radii[i]);
    p.adjusted[i] = dini == 0.0 ? p.theta[i] : p.theta[i] * std::exp(opts.alpha * dini);
  }
  p.limit = p.theta.front();
  p.trend = trend_of(p.theta, opts.constant_tolerance);
  const double floor = geom::unit_ball_volume(e.dim) * (1.0 - 1e-3);
  for (double t : p.theta) p.below_unit_density = p.below_unit_density || t < floor;
  return p;
}

EmbeddedMesh shade_patch(const SlidingContext& ctx, double radius) {
  if (ctx.x.dim() != 3 || ctx.gamma.base.dim() != 3) throw DomainError("the shade is defined in R^3");
  const PointN p = ctx.gamma.foot(ctx.x);
  const double t = geom::distance(ctx.x, p);
  if (!(t > 0.0)) throw DomainError("sliding point lies on the boundary line");
  const PointN u = (ctx.x - p) * (1.0 / t);
  const PointN e = ctx.gamma.direction * (1.0 / geom::norm(ctx.gamma.direction));
  const double a = 1.05 * radius + t;
  const double b = 1.05 * radius + t;
  // Points p + α e − β u with β ≥ 0: behind Γ as seen from x.
  return geom::quad_patch(p - e * a, e * (2.0 * a), u * (-b), 8, 4);
}

DensityProfile sliding_profile(const EmbeddedMesh& e, const SlidingContext& ctx, const std::vector<double>& radii,
                               const ProfileOptions& opts) {
  if (e.dim != 2) throw DomainError("the sliding functional is defined for two-dimensional sets");
  check_radii(radii);
  auto p = density_profile(e, ctx.x, radii, opts);
  const auto shade = shade_patch(ctx, radii.back());
  p.sliding.assign(radii.size(), 0.0);
  parallel_for(radii.size(), [&](std::size_t i) {
    const double r = radii[i];
    p.sliding[i] = p.theta[i] + measure(clip_to_ball(shade, Ball{ctx.x, r}, opts.clip)) / (r * r);
  });
  p.trend = trend_of(p.sliding, opts.constant_tolerance);
  return p;
}

SliceCheck cone_slice_check(const EmbeddedMesh& cone, const PointN& apex, double r, double eta,
                            const ClipOptions& clip) {
  if (!(r > 0.0)) throw DomainError("slice radius must be positive");
  if (!(eta >= 0.0)) throw DomainError("refinement length must be non-negative");
  const EmbeddedMesh mesh = eta > 0.0 ? geom::refine(cone, eta) : cone;
  const Ball ball{apex, r};
  SliceCheck s;
  s.inside = measure(clip_to_ball(mesh, ball, clip));
  s.slice = geom::sphere_slice_measure(mesh, ball);
  const double predicted = r / cone.dim * s.slice;
  s.residual = s.inside > 0.0 ? std::abs(s.inside - predicted) / s.inside : (predicted > 0.0 ? 1.0 : 0.0);
  return s;
}

EmbeddedMesh blowup(const EmbeddedMesh& e, const PointN& x, double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("blow-up radius must be positive");
  return geom::rescale(e, x, r);
}

BigProjection big_projection_check(const EmbeddedMesh& e, const PointN& x, double r, const AffinePlane& plane,
                                   double eps, double tau, const ClipOptions& clip) {
  const int n = e.ambient;
  const int d = e.dim;
  if (!(r > 0.0)) throw DomainError("projection radius must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau must lie in (0, 1)");
  if (!(eps >= 0.0)) throw DomainError("epsilon must be non-negative");
  if (static_cast<int>(plane.basis.size()) != d || plane.origin.dim() != n)
    throw DomainError("the plane must have the dimension of the set");
  for (int a = 0; a < d; ++a)
    for (int b = 0; b <= a; ++b)
      if (std::abs(geom::dot(plane.basis[a], plane.basis[b]) - (a == b ? 1.0 : 0.0)) > 1e-9)
        throw DomainError("plane basis must be orthonormal");

  auto coords = [&](const PointN& v) {
    std::array<double, 2> c{};
    const PointN w = v - plane.origin;
    for (int k = 0; k < d; ++k) c[static_cast<std::size_t>(k)] = geom::dot(w, plane.basis[k]);
    return c;
  };
  auto offset = [&](const PointN& v) {
    PointN w = v - plane.origin;
    for (int k = 0; k < d; ++k) w -= plane.basis[k] * geom::dot(w, plane.basis[k]);
    return geom::norm(w);
  };

  const EmbeddedMesh inside = clip_to_ball(e, Ball{x, r}, clip);
  BigProjection out;
  for (std::size_t i = 0; i < inside.vertices.size(); ++i) {
    const double off = offset(inside.vertices[i]);
    out.max_offset = std::max(out.max_offset, off / r);
    if (off > eps * r * (1.0 + 1e-12)) {
      std::string where;
      for (int k = 0; k < n; ++k) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%s%.6g", k ? ", " : "", inside.vertices[i][k]);
        where += buf;
      }
      char buf[160];
      std::snprintf(buf, sizeof buf, ") lies %.6g from the plane, above eps*r = %.6g", off, eps * r);
      throw DomainError("flatness violated: vertex (" + where + buf);
    }
  }

  const double rho = (1.0 - tau) * r;
  const double h = tau * r / 8.0;
  const auto c0 = coords(x);
  const int m = static_cast<int>(std::ceil(rho / h));
  const int side = 2 * m;
  std::vector<char> active(static_cast<std::size_t>(d == 2 ? side * side : side), 0);
  std::vector<char> hit(active.size(), 0);
  auto center_of = [&](int i, int j) {
    return std::array<double, 2>{c0[0] + (i - m + 0.5) * h, c0[1] + (j - m + 0.5) * h};
  };
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < (d == 2 ? side : 1); ++j) {
      const auto c = center_of(i, j);
      const double dx = c[0] - c0[0], dy = d == 2 ? c[1] - c0[1] : 0.0;
      if (dx * dx + dy * dy <= rho * rho) active[static_cast<std::size_t>(i * (d == 2 ? side : 1) + j)] = 1;
    }
  }
  const double slack = 1e-12 * r;
  for (std::size_t s = 0; s < inside.size(); ++s) {
    const auto pts = inside.corners(s);
    if (d == 1) {
      double a = coords(pts[0])[0], b = coords(pts[1])[0];
      if (a > b) std::swap(a, b);
      const int i0 = std::max(0, static_cast<int>(std::floor((a - c0[0]) / h + m - 0.5)));
      const int i1 = std::min(side - 1, static_cast<int>(std::ceil((b - c0[0]) / h + m - 0.5)));
      for (int i = i0; i <= i1; ++i) {
        const double c = center_of(i, 0)[0];
        if (c >= a - slack && c <= b + slack) hit[static_cast<std::size_t>(i)] = 1;
      }
      continue;
    }
    const auto p0 = coords(pts[0]), p1 = coords(pts[1]), p2 = coords(pts[2]);
    const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    if (det == 0.0) continue;  // edge-on: covers no cell center
    const double xmin = std::min({p0[0], p1[0], p2[0]}), xmax = std::max({p0[0], p1[0], p2[0]});
    const double ymin = std::min({p0[1], p1[1], p2[1]}), ymax = std::max({p0[1], p1[1], p2[1]});
    const int i0 = std::max(0, static_cast<int>(std::floor((xmin - c0[0]) / h + m - 0.5)));
    const int i1 = std::min(side - 1, static_cast<int>(std::ceil((xmax - c0[0]) / h + m - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor((ymin - c0[1]) / h + m - 0.5)));
    const int j1 = std::min(side - 1, static_cast<int>(std::ceil((ymax - c0[1]) / h + m - 0.5)));
    const double tol = 1e-12 * std::abs(det);
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        const auto c = center_of(i, j);
        const double w1 = ((c[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (c[1] - p0[1])) / det;
        const double w2 = ((p1[0] - p0[0]) * (c[1] - p0[1]) - (c[0] - p0[0]) * (p1[1] - p0[1])) / det;
        if (w1 >= -tol && w2 >= -tol && w1 + w2 <= 1.0 + tol) hit[static_cast<std::size_t>(i * side + j)] = 1;
      }
    }
  }
  for (std::size_t k = 0; k < active.size(); ++k) {
    if (!active[k]) continue;
    ++out.cells;
    if (hit[k]) {
      ++out.hit;
      continue;
    }
    const int i = d == 2 ? static_cast<int>(k) / side : static_cast<int>(k);
    const int j = d == 2 ? static_cast<int>(k) % side : 0;
    const auto c = center_of(i, j);
    PointN p = plane.origin;
    for (int a = 0; a < d; ++a) p += plane.basis[a] * c[static_cast<std::size_t>(a)];
    out.uncovered.push_back(p);
  }
  out.coverage = out.cells ? static_cast<double>(out.hit) / static_cast<double>(out.cells) : 1.0;
  out.pass = out.hit == out.cells;
  return out;
}

// ------------------------------------------------------------------ catalog

namespace {

double ray_distance(const PointN& q, const PointN& u) {
  const double t = std::max(0.0, geom::dot(q, u));
  return geom::norm(q - u * t);
}

PointN v3(double a, double b, double c) { return PointN{a, b, c}; }

PointN unit(const PointN& p) { return p * (1.0 / geom::norm(p)); }

}  // namespace

double ConeShape::distance(const PointN& q) const {
  double best = std::numeric_limits<double>::infinity();
  if (d == 1) {
    for (const auto& u : rays) best = std::min(best, ray_distance(q, u));
    return best;
  }
  for (const auto& w : wedges) {
    const double qa = geom::dot(q, w.a), qm = geom::dot(q, w.m);
    const double phi = std::atan2(qm, qa);
    if (phi >= 0.0 && phi <= w.angle) {
      best = std::min(best, std::sqrt(std::max(0.0, geom::norm2(q) - qa * qa - qm * qm)));
    } else {
      const PointN b = w.a * std::cos(w.angle) + w.m * std::sin(w.angle);
      best = std::min({best, ray_distance(q, w.a), ray_distance(q, b)});
    }
  }
  return best;
}

EmbeddedMesh ConeShape::mesh(double radius, int ambient, int segments) const {
  if (d == 2) {
    if (ambient != 3) throw DomainError("two-dimensional cones live in R^3");
    EmbeddedMesh out(2, 3);
    for (const auto& w : wedges) {
      const int segs = std::max(4, static_cast<int>(std::ceil(segments * w.angle / (2.0 * std::numbers::pi))));
      // Concentric rings keep the triangles small away from the apex, which keeps
      // nearest-simplex queries local.
      const int rings = 16;
      const double step = w.angle / segs;
      const double rim = radius / std::cos(0.5 * step);
      const auto base = static_cast<std::uint32_t>(out.vertices.size());
      out.add_vertex(PointN(3));
      for (int i = 1; i <= rings; ++i)
        for (int k = 0; k <= segs; ++k)
          out.add_vertex((w.a * std::cos(k * step) + w.m * std::sin(k * step)) * (rim * i / rings));
      const auto id = [&](int i, int k) {
        return i == 0 ? base : base + 1 + static_cast<std::uint32_t>((i - 1) * (segs + 1) + k);
      };
      for (int k = 0; k < segs; ++k) out.add_simplex({id(0, 0), id(1, k), id(1, k + 1)});
      for (int i = 1; i < rings; ++i)
        for (int k = 0; k < segs; ++k) {
          out.add_simplex({id(i, k), id(i + 1, k), id(i + 1, k + 1)});
          out.add_simplex({id(i, k), id(i + 1, k + 1), id(i, k + 1)});
        }
    }
    return out;
  }
  if (ambient != 2 && ambient != 3) throw DomainError("one-dimensional cones live in R^2 or R^3");
  EmbeddedMesh out(1, ambient);
  out.add_vertex(PointN(ambient));
  for (const auto& u : rays) {
    PointN p(ambient);
    for (int i = 0; i < ambient; ++i) p[i] = radius * u[i];
    const auto k = out.add_vertex(p);
    out.add_simplex({0, k});
  }
  return out;
}

std::vector<ConeEntry> cone_catalog(double beta) {
  if (!(beta >= 2.0 * std::numbers::pi / 3.0 - 1e-12 && beta <= std::numbers::pi))
    throw DomainError("V opening angle must lie in [2π/3, π]");
  const double pi = std::numbers::pi;
  const PointN ex = v3(1, 0, 0), ey = v3(0, 1, 0), ez = v3(0, 0, 1);
  std::vector<ConeEntry> cat;

  ConeEntry p{"P", 2, pi, false, 0.0, {}};
  p.shape.wedges = {{ex, ey, pi}, {ex * -1.0, ey * -1.0, pi}};
  cat.push_back(p);

  ConeEntry y{"Y", 2, 1.5 * pi, false, 0.0, {}};
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * pi * k / 3.0;
    y.shape.wedges.push_back({ez * -1.0, v3(std::cos(a), std::sin(a), 0), pi});
  }
  cat.push_back(y);

  ConeEntry t{"T", 2, tetrahedral_density(), false, 0.0, {}};
  const std::array<PointN, 4> tv{unit(v3(1, 1, 1)), unit(v3(1, -1, -1)), unit(v3(-1, 1, -1)), unit(v3(-1, -1, 1))};
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      const double c = geom::dot(tv[a], tv[b]);
      t.shape.wedges.push_back({tv[a], unit(tv[b] - tv[a] * c), std::acos(c)});
    }
  cat.push_back(t);

  ConeEntry h{"H", 2, 0.5 * pi, true, 0.0, {}};
  h.shape.wedges = {{ez * -1.0, ex, pi}};
  cat.push_back(h);

  ConeEntry v{"V", 2, pi, true, beta, {}};
  v.shape.wedges = {{ez * -1.0, ex, pi}, {ez * -1.0, v3(std::cos(beta), std::sin(beta), 0), pi}};
  cat.push_back(v);

  ConeEntry line{"line", 1, 2.0, false, 0.0, {}};
  line.shape.d = 1;
  line.shape.rays = {ex, ex * -1.0};
  cat.push_back(line);

  ConeEntry y1{"Y1", 1, 3.0, false, 0.0, {}};
  y1.shape.d = 1;
  for (int k = 0; k < 3; ++k) {
    const double a = 2.0 * pi * k / 3.0;
    y1.shape.rays.push_back(v3(std::cos(a), std::sin(a), 0));
  }
  cat.push_back(y1);

  ConeEntry v1{"V1", 1, 2.0, true, beta, {}};
  v1.shape.d = 1;
  v1.shape.rays = {ex, v3(std::cos(beta), std::sin(beta), 0)};
  cat.push_back(v1);
  return cat;
}

const ConeEntry& catalog_entry(const std::vector<ConeEntry>& catalog, const std::string& tag) {
  for (const auto& e : catalog)
    if (e.tag == tag) return e;
  throw ConfigError("unknown cone type '" + tag + "' (expected P, Y, T, H, V, line, Y1 or V1)");
}

namespace {

using Mat3 = Eigen::Matrix3d;

std::vector<double> flatten(const Mat3& m) {
  std::vector<double> out(9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(3 * i + j)] = m(i, j);
  return out;
}

Mat3 unflatten(const std::vector<double>& v) {
  if (v.size() != 9) throw DomainError("rotation must have 9 entries");
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = v[static_cast<std::size_t>(3 * i + j)];
  return m;
}

PointN pad3(const PointN& p) {
  PointN q(3);
  for (int i = 0; i < p.dim(); ++i) q[i] = p[i];
  return q;
}

PointN apply(const Mat3& r, const PointN& p) {
  const Eigen::Vector3d v = r * Eigen::Vector3d(p[0], p[1], p[2]);
  return PointN{v[0], v[1], v[2]};
}

PointN apply_t(const Mat3& r, const PointN& p) {
  const Eigen::Vector3d v = r.transpose() * Eigen::Vector3d(p[0], p[1], p[2]);
  return PointN{v[0], v[1], v[2]};
}

/// 64 Fibonacci axes × 8 angles in (0, π) (or a planar fan of angles).
std::vector<Mat3> rotation_net(int count, bool planar) {
  std::vector<Mat3> net;
  if (planar) {
    for (int k = 0; k < count; ++k)
      net.emplace_back(Eigen::AngleAxisd(2.0 * std::numbers::pi * k / count, Eigen::Vector3d::UnitZ()));
    return net;
  }
  const int angles = 8;
  const int axes = std::max(1, count / angles);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < axes; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / axes;
    const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Eigen::Vector3d axis(rad * std::cos(golden * i), rad * std::sin(golden * i), z);
    for (int k = 0; k < angles; ++k)
      net.emplace_back(Eigen::AngleAxisd(std::numbers::pi * (k + 0.5) / angles, axis.normalized()));
  }
  return net;
}

struct FitData {
  std::vector<PointN> set_samples;  // E ∩ B(x, r) − x, padded to R^3
  bool planar = false;
  double r = 1.0;
};

/// Stops once the sup reaches `give_up`; callers then only learn it is no better.
double set_to_cone(const FitData& f, const ConeShape& z, const Mat3& rot,
                   double give_up = std::numeric_limits<double>::infinity()) {
  double sup = 0.0;
  for (const auto& p : f.set_samples) {
    sup = std::max(sup, z.distance(apply_t(rot, p)));
    if (sup >= give_up) break;
  }
  return sup;
}

/// Pattern search over small left rotations. Only the set-to-cone side is scored: the
/// density filter has already matched the masses, and the exact two-sided distance is
/// measured afterwards on the ladder.
std::pair<double, Mat3> descend(const FitData& f, const ConeShape& z, Mat3 rot) {
  double best = set_to_cone(f, z, rot);
  double h = 0.25;
  const std::array<Eigen::Vector3d, 3> axes{Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                                            Eigen::Vector3d::UnitZ()};
  for (int iter = 0; iter < 4000 && h > 1e-8; ++iter) {
    bool improved = false;
    for (int a = f.planar ? 2 : 0; a < 3; ++a) {
      for (double sign : {1.0, -1.0}) {
        const Mat3 cand = Eigen::AngleAxisd(sign * h, axes[static_cast<std::size_t>(a)]).toRotationMatrix() * rot;
        const double s = set_to_cone(f, z, cand, best);
        if (s < best) {
          best = s;
          rot = cand;
          improved = true;
        }
      }
    }
    h = improved ? std::min(0.25, 2.0 * h) : 0.5 * h;
  }
  return {best / f.r, rot};
}

}  // namespace

EmbeddedMesh placed_cone(const ConeEntry& entry, const std::vector<double>& rotation, const PointN& x, double radius) {
  const Mat3 rot = unflatten(rotation);
  const int n = x.dim();
  EmbeddedMesh m = entry.shape.mesh(radius, 3);
  for (auto& v : m.vertices) {
    const PointN w = apply(rot, v);
    PointN out(n);
    for (int i = 0; i < n; ++i) out[i] = x[i] + w[i];
    v = out;
  }
  m.ambient = n;
  return m;
}

Classification classify_point(const EmbeddedMesh& e, const PointN& x, const std::vector<ConeEntry>& catalog,
                              const std::vector<double>& ladder, const ClassifyOptions& opts) {
  const int n = e.ambient;
  const int d = e.dim;
  const bool planar = n == 2;
  if (!(n == 3 || (planar && d == 1))) throw DomainError("classification needs R^3, or R^2 for curves");
  if (opts.rotations < 8) throw ConfigError("rotation net needs at least 8 rotations");

  Classification out;
  ProfileOptions popts;
  popts.clip = opts.clip;
  out.profile = density_profile(e, x, ladder, popts);
  out.theta = out.profile.limit;
  const auto [lo, hi] = std::minmax_element(out.profile.theta.begin(), out.profile.theta.end());
  out.flat = *hi - *lo <= opts.flatness;
  for (const auto& c : catalog)
    if (c.d == d) out.nearest.emplace_back(c.tag, c.density);
  std::stable_sort(out.nearest.begin(), out.nearest.end(), [&](const auto& a, const auto& b) {
    return std::abs(a.second - out.theta) < std::abs(b.second - out.theta);
  });
  if (!out.flat) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "density profile not flat: spread %.4g over the ladder", *hi - *lo);
    out.note = buf;
    return out;
  }
  std::vector<const ConeEntry*> candidates;
  for (const auto& c : catalog)
    if (c.d == d && std::abs(c.density - out.theta) <= opts.density_tolerance &&
        (!c.needs_boundary || opts.boundary.has_value()))
      candidates.push_back(&c);
  if (candidates.empty()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "no catalog density within %.3g of %.6g", opts.density_tolerance, out.theta);
    out.note = buf;
    return out;
  }

  const double r = ladder.back();
  FitData f;
  f.planar = planar;
  f.r = r;
  {
    // One sample per voxel of side r/16 is plenty for locating the fit.
    std::set<std::array<long, 3>> seen;
    for (const auto& p : geom::sample_points(clip_to_ball(e, Ball{x, r}, opts.clip), r / 16.0)) {
      const PointN q = pad3(p - x);
      const std::array<long, 3> key{std::lround(q[0] * 16.0 / r), std::lround(q[1] * 16.0 / r),
                                    std::lround(q[2] * 16.0 / r)};
      if (seen.insert(key).second) f.set_samples.push_back(q);
    }
  }
  const auto net = rotation_net(opts.rotations, planar);

  for (const ConeEntry* c : candidates) {
    std::vector<double> coarse(net.size());
    parallel_for(net.size(), [&](std::size_t i) { coarse[i] = set_to_cone(f, c->shape, net[i]); });
    std::vector<std::size_t> order(net.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return coarse[a] < coarse[b]; });
    const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, opts.refine_top)), net.size());
    std::vector<std::pair<double, Mat3>> fits(top);
    parallel_for(top, [&](std::size_t k) { fits[k] = descend(f, c->shape, net[order[k]]); });
    std::size_t best = 0;
    for (std::size_t k = 1; k < top; ++k)
      if (fits[k].first < fits[best].first) best = k;

    CandidateFit fit;
    fit.tag = c->tag;
    fit.density = c->density;
    fit.rotation = flatten(fits[best].second);
    double residual = 0.0;
    for (double rho : ladder) {
      const Ball ball{x, rho};
      const auto local = geom::touching_ball(e, Ball{x, 2.0 * rho});
      residual = std::max(residual, geom::local_hausdorff_distance(local, placed_cone(*c, fit.rotation, x, 2.0 * rho), ball));
    }
    fit.residual = residual;
    out.candidates.push_back(fit);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < out.candidates.size(); ++k)
    if (out.candidates[k].residual < out.candidates[best].residual) best = k;
  const auto& win = out.candidates[best];
  out.rotation = win.rotation;
  out.residual = win.residual;
  if (win.residual <= opts.delta) {
    out.tag = win.tag;
  } else {
    char buf[96];
    std::snprintf(buf, sizeof buf, "best fit %s has residual %.4g above delta %.4g", win.tag.c_str(), win.residual,
                  opts.delta);
    out.note = buf;
  }
  return out;
}

}  // namespace plateau::density
