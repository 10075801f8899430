#include "plateau/geometry.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <numbers>
#include <string>
#include <unordered_map>

#include "plateau/polytope.hpp"

namespace plateau::geom {

// ---------------------------------------------------------------- PointN

PointN::PointN(int dim) : dim_(dim) {
  if (dim < 1 || dim > kMaxDim) throw DomainError("PointN: dimension out of range");
}

PointN::PointN(std::initializer_list<double> coords) : PointN(std::span<const double>(coords.begin(), coords.size())) {}

PointN::PointN(std::span<const double> coords) : dim_(static_cast<int>(coords.size())) {
  if (dim_ < 1 || dim_ > kMaxDim) throw DomainError("PointN: dimension out of range");
  std::copy(coords.begin(), coords.end(), c_.begin());
}

PointN& PointN::operator+=(const PointN& o) {
  for (int i = 0; i < dim_; ++i) c_[i] += o.c_[i];
  return *this;
}

PointN& PointN::operator-=(const PointN& o) {
  for (int i = 0; i < dim_; ++i) c_[i] -= o.c_[i];
  return *this;
}

PointN& PointN::operator*=(double s) {
  for (int i = 0; i < dim_; ++i) c_[i] *= s;
  return *this;
}

bool PointN::finite() const {
  for (int i = 0; i < dim_; ++i)
    if (!std::isfinite(c_[i])) return false;
  return true;
}

PointN operator+(PointN a, const PointN& b) { return a += b; }
PointN operator-(PointN a, const PointN& b) { return a -= b; }
PointN operator*(PointN a, double s) { return a *= s; }
PointN operator*(double s, PointN a) { return a *= s; }

double dot(const PointN& a, const PointN& b) {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const PointN& a) { return dot(a, a); }
double norm(const PointN& a) { return std::sqrt(norm2(a)); }
double distance(const PointN& a, const PointN& b) { return norm(a - b); }

PointN lerp(const PointN& a, const PointN& b, double t) {
  PointN out(a.dim());
  for (int i = 0; i < a.dim(); ++i) out[i] = a[i] + t * (b[i] - a[i]);
  return out;
}

PointN unit_vector(int dim, int axis) {
  PointN e(dim);
  e[axis] = 1.0;
  return e;
}

void validate(const Ball& ball) {
  if (!(ball.radius > 0.0) || !std::isfinite(ball.radius)) throw DomainError("ball radius must be positive");
  if (ball.center.dim() == 0 || !ball.center.finite()) throw DomainError("ball center must be finite");
}

// ---------------------------------------------------------- EmbeddedMesh

std::uint32_t EmbeddedMesh::add_vertex(const PointN& p) {
  vertices.push_back(p);
  return static_cast<std::uint32_t>(vertices.size() - 1);
}

void EmbeddedMesh::add_simplex(const Simplex& s, int mult, bool flagged_degenerate) {
  simplices.push_back(s);
  if (mult != 1 && multiplicity.empty()) multiplicity.assign(simplices.size() - 1, 1);
  if (!multiplicity.empty()) multiplicity.push_back(mult);
  if (flagged_degenerate && degenerate.empty()) degenerate.assign(simplices.size() - 1, 0);
  if (!degenerate.empty()) degenerate.push_back(flagged_degenerate ? 1 : 0);
}

std::vector<PointN> EmbeddedMesh::corners(std::size_t s) const {
  std::vector<PointN> out;
  out.reserve(static_cast<std::size_t>(dim) + 1);
  for (int k = 0; k <= dim; ++k) out.push_back(vertices[simplices[s][static_cast<std::size_t>(k)]]);
  return out;
}

void validate(const EmbeddedMesh& mesh) {
  if (mesh.dim < 1 || mesh.dim > 2) throw DomainError("mesh dimension must be 1 or 2");
  if (mesh.ambient < 2 || mesh.ambient > kMaxDim) throw DomainError("ambient dimension out of range");
  if (mesh.ambient < mesh.dim) throw DomainError("ambient dimension below mesh dimension");
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (mesh.vertices[v].dim() != mesh.ambient)
      throw DomainError("vertex " + std::to_string(v) + " has wrong dimension");
    if (!mesh.vertices[v].finite()) throw DomainError("vertex " + std::to_string(v) + " is not finite");
  }
  if (!mesh.multiplicity.empty() && mesh.multiplicity.size() != mesh.simplices.size())
    throw DomainError("multiplicity table size mismatch");
  if (!mesh.degenerate.empty() && mesh.degenerate.size() != mesh.simplices.size())
    throw DomainError("degenerate flag table size mismatch");
  for (std::size_t s = 0; s < mesh.simplices.size(); ++s) {
    const auto& sx = mesh.simplices[s];
    for (int a = 0; a <= mesh.dim; ++a) {
      if (sx[a] >= mesh.vertices.size())
        throw DomainError("simplex " + std::to_string(s) + " has an invalid vertex index");
      for (int b = 0; b < a; ++b)
        if (sx[a] == sx[b]) throw DomainError("simplex " + std::to_string(s) + " repeats a vertex");
    }
    if (!mesh.is_degenerate(s) && !(simplex_volume(mesh, s) > 0.0))
      throw DomainError("simplex " + std::to_string(s) + " is degenerate but not flagged");
  }
}

double simplex_volume(std::span<const PointN> pts) {
  if (pts.size() <= 1) return pts.empty() ? 0.0 : 1.0;
  if (pts.size() == 2) return distance(pts[0], pts[1]);
  // Lagrange identity: |u ∧ v|² = Σ_{i<j} (u_i v_j - u_j v_i)².
  const PointN u = pts[1] - pts[0];
  const PointN v = pts[2] - pts[0];
  double s = 0.0;
  for (int i = 0; i < u.dim(); ++i)
    for (int j = i + 1; j < u.dim(); ++j) {
      const double w = u[i] * v[j] - u[j] * v[i];
      s += w * w;
    }
  return 0.5 * std::sqrt(s);
}

double simplex_volume(const EmbeddedMesh& mesh, std::size_t s) {
  const auto& sx = mesh.simplices[s];
  if (mesh.dim == 1) return distance(mesh.vertices[sx[0]], mesh.vertices[sx[1]]);
  const std::array<PointN, 3> pts{mesh.vertices[sx[0]], mesh.vertices[sx[1]], mesh.vertices[sx[2]]};
  return simplex_volume(pts);
}

double simplex_diameter(std::span<const PointN> pts) {
  double d = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) d = std::max(d, distance(pts[a], pts[b]));
  return d;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double measure(const EmbeddedMesh& mesh) {
  std::vector<double> vols(mesh.size());
  for (std::size_t s = 0; s < mesh.size(); ++s) vols[s] = mesh.is_degenerate(s) ? 0.0 : simplex_volume(mesh, s);
  return pairwise_sum(vols);
}

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// -------------------------------------------------------------- clipping

namespace {

struct PolygonTable {
  int sides = 0;
  double circum_factor = 1.0;  // circumradius / disk radius
  double apothem_factor = 1.0;  // apothem / disk radius
  std::vector<double> normal_cos, normal_sin;
};

PolygonTable make_polygon_table(int sides) {
  PolygonTable t;
  t.sides = sides;
  const double n = sides;
  t.circum_factor = std::sqrt(2.0 * std::numbers::pi / (n * std::sin(2.0 * std::numbers::pi / n)));
  t.apothem_factor = t.circum_factor * std::cos(std::numbers::pi / n);
  for (int k = 0; k < sides; ++k) {
    const double psi = (2.0 * k + 1.0) * std::numbers::pi / n;
    t.normal_cos.push_back(std::cos(psi));
    t.normal_sin.push_back(std::sin(psi));
  }
  return t;
}

const PolygonTable& polygon_table(double tolerance) {
  static thread_local std::map<int, PolygonTable> cache;
  const int sides = circle_polygon_sides(tolerance);
  auto it = cache.find(sides);
  if (it == cache.end()) it = cache.emplace(sides, make_polygon_table(sides)).first;
  return it->second;
}

/// Canonical orthonormal basis of the plane through a triangle: depends on the
/// plane only (up to rounding), never on which triangle of the plane is used.
void plane_basis(const PointN& p0, const PointN& p1, const PointN& p2, PointN& e1, PointN& e2) {
  const int n = p0.dim();
  PointN q1 = p1 - p0;
  q1 *= 1.0 / norm(q1);
  PointN q2 = p2 - p0;
  q2 -= q1 * dot(q2, q1);
  q2 *= 1.0 / norm(q2);
  auto proj = [&](int i) { return q1 * q1[i] + q2 * q2[i]; };
  int first = 0;
  for (int i = 0; i < n; ++i)
    if (q1[i] * q1[i] + q2[i] * q2[i] >= 1.5 / n) {
      first = i;
      break;
    }
  e1 = proj(first);
  e1 *= 1.0 / norm(e1);
  for (int j = 0; j < n; ++j) {
    if (j == first) continue;
    PointN r = proj(j);
    r -= e1 * dot(r, e1);
    if (norm2(r) >= 0.5 / n) {
      e2 = r * (1.0 / norm(r));
      return;
    }
  }
  // Unreachable for a nondegenerate triangle; fall back to the raw basis.
  e2 = q2 - e1 * dot(q2, e1);
  e2 *= 1.0 / norm(e2);
}

struct DiskInPlane {
  bool hits = false;
  PointN origin;  // projection of the ball center onto the plane
  PointN e1, e2;
  double rho = 0.0;
};

DiskInPlane plane_disk(std::span<const PointN> tri, const Ball& ball) {
  DiskInPlane d;
  plane_basis(tri[0], tri[1], tri[2], d.e1, d.e2);
  const PointN rel = ball.center - tri[0];
  d.origin = tri[0] + d.e1 * dot(rel, d.e1) + d.e2 * dot(rel, d.e2);
  const double h2 = norm2(ball.center - d.origin);
  const double r2 = ball.radius * ball.radius;
  if (h2 >= r2) return d;
  d.hits = true;
  d.rho = std::sqrt(r2 - h2);
  return d;
}

bool disjoint_from_ball(std::span<const PointN> corners, const Ball& ball, bool closed) {
  const double dist = point_simplex_distance(ball.center, corners);
  return closed ? dist > ball.radius : dist >= ball.radius;
}

struct ClipSink {
  MeshBuilder* inside = nullptr;
  MeshBuilder* outside = nullptr;
};

void clip_segment(std::span<const PointN> seg, int mult, const Ball& ball, bool closed, ClipSink& sink) {
  const PointN& a = seg[0];
  const PointN& b = seg[1];
  auto whole = [&](MeshBuilder* m) {
    if (m) m->add_simplex(seg, mult);
  };
  if (disjoint_from_ball(seg, ball, closed)) {
    whole(sink.outside);
    return;
  }
  const PointN ab = b - a;
  const PointN ca = a - ball.center;
  const double qa = norm2(ab);
  const double qb = 2.0 * dot(ab, ca);
  const double qc = norm2(ca) - ball.radius * ball.radius;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc <= 0.0) {
    whole(sink.outside);
    return;
  }
  const double sq = std::sqrt(disc);
  // Numerically stable roots.
  const double q = -0.5 * (qb + (qb >= 0 ? sq : -sq));
  double t1 = q / qa, t2 = qc / q;
  if (t1 > t2) std::swap(t1, t2);
  const double lo = std::max(0.0, t1), hi = std::min(1.0, t2);
  if (lo >= hi) {
    whole(sink.outside);
    return;
  }
  const PointN plo = lo == 0.0 ? a : lerp(a, b, lo);
  const PointN phi = hi == 1.0 ? b : lerp(a, b, hi);
  if (sink.inside) {
    const std::array<PointN, 2> in{plo, phi};
    sink.inside->add_simplex(in, mult);
  }
  if (sink.outside) {
    if (lo > 0.0) {
      const std::array<PointN, 2> o{a, plo};
      sink.outside->add_simplex(o, mult);
    }
    if (hi < 1.0) {
      const std::array<PointN, 2> o{phi, b};
      sink.outside->add_simplex(o, mult);
    }
  }
}

void clip_triangle(std::span<const PointN> tri, int mult, const Ball& ball, const ClipOptions& opts,
                   ClipSink& sink) {
  auto whole = [&](MeshBuilder* m) {
    if (m) m->add_simplex(tri, mult);
  };
  if (disjoint_from_ball(tri, ball, opts.closed)) {
    whole(sink.outside);
    return;
  }
  const DiskInPlane disk = plane_disk(tri, ball);
  if (!disk.hits) {
    whole(sink.outside);
    return;
  }
  const PolygonTable& table = polygon_table(opts.tolerance);
  const double apothem = table.apothem_factor * disk.rho;
  bool all_inside = true;
  for (const auto& p : tri)
    if (norm(p - disk.origin) > apothem) {
      all_inside = false;
      break;
    }
  if (all_inside) {
    whole(sink.inside);
    return;
  }
  Polytope remaining(tri.begin(), tri.end());
  std::vector<double> values;
  for (int k = 0; k < table.sides; ++k) {
    const PointN normal = disk.e1 * table.normal_cos[k] + disk.e2 * table.normal_sin[k];
    values.resize(remaining.size());
    bool any_negative = false;
    for (std::size_t v = 0; v < remaining.size(); ++v) {
      values[v] = apothem - dot(normal, remaining[v] - disk.origin);
      any_negative = any_negative || values[v] < 0.0;
    }
    if (!any_negative) continue;
    SplitResult parts = split_polytope(remaining, 2, values);
    if (sink.outside && normalize_polytope(parts.negative, 2)) sink.outside->add_polytope(parts.negative, mult);
    remaining = std::move(parts.nonnegative);
    if (!normalize_polytope(remaining, 2)) return;
  }
  if (sink.inside) sink.inside->add_polytope(remaining, mult);
}

void clip_mesh(const EmbeddedMesh& mesh, const Ball& ball, const ClipOptions& opts, ClipSink& sink) {
  validate(ball);
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    if (mesh.is_degenerate(s)) continue;
    const auto corners = mesh.corners(s);
    const int mult = mesh.multiplicity_of(s);
    if (mesh.dim == 1)
      clip_segment(corners, mult, ball, opts.closed, sink);
    else
      clip_triangle(corners, mult, ball, opts, sink);
  }
}

}  // namespace

int circle_polygon_sides(double tolerance) {
  if (!(tolerance > 0.0)) throw DomainError("clip tolerance must be positive");
  int sides = 16;
  for (;; sides += 4) {
    const double n = sides;
    const double circum = std::sqrt(2.0 * std::numbers::pi / (n * std::sin(2.0 * std::numbers::pi / n)));
    const double apothem = circum * std::cos(std::numbers::pi / n);
    if (circum - 1.0 <= tolerance && 1.0 - apothem <= tolerance) return sides;
    if (sides > 1'000'000) return sides;
  }
}

EmbeddedMesh touching_ball(const EmbeddedMesh& mesh, const Ball& ball) {
  validate(ball);
  EmbeddedMesh out(mesh.dim, mesh.ambient);
  std::vector<std::uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    if (point_simplex_distance(ball.center, mesh.corners(s)) > ball.radius) continue;
    Simplex ids{};
    for (int k = 0; k <= mesh.dim; ++k) {
      const auto v = mesh.simplices[s][static_cast<std::size_t>(k)];
      if (remap[v] == UINT32_MAX) remap[v] = out.add_vertex(mesh.vertices[v]);
      ids[static_cast<std::size_t>(k)] = remap[v];
    }
    out.add_simplex(ids, mesh.multiplicity_of(s), mesh.is_degenerate(s));
  }
  return out;
}

EmbeddedMesh clip_to_ball(const EmbeddedMesh& mesh, const Ball& ball, const ClipOptions& opts) {
  MeshBuilder inside(mesh.dim, mesh.ambient);
  ClipSink sink{&inside, nullptr};
  clip_mesh(mesh, ball, opts, sink);
  return inside.take();
}

EmbeddedMesh clip_outside_ball(const EmbeddedMesh& mesh, const Ball& ball, const ClipOptions& opts) {
  MeshBuilder outside(mesh.dim, mesh.ambient);
  ClipSink sink{nullptr, &outside};
  clip_mesh(mesh, ball, opts, sink);
  return outside.take();
}

namespace {

using Interval = std::pair<double, double>;

/// Arc set {φ : A + B cos(φ - φ0) ≥ 0} as intervals of [0, 2π).
std::vector<Interval> arc_constraint(double a, double b, double phi0) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a >= b) return {{0.0, two_pi}};
  if (a < -b || b <= 0.0) return {};
  const double half = std::acos(-a / b);
  double lo = std::fmod(phi0 - half, two_pi);
  if (lo < 0) lo += two_pi;
  const double hi = lo + 2.0 * half;
  if (hi <= two_pi) return {{lo, hi}};
  return {{0.0, hi - two_pi}, {lo, two_pi}};
}

std::vector<Interval> intersect(const std::vector<Interval>& x, const std::vector<Interval>& y) {
  std::vector<Interval> out;
  for (const auto& [a0, a1] : x)
    for (const auto& [b0, b1] : y) {
      const double lo = std::max(a0, b0), hi = std::min(a1, b1);
      if (hi > lo) out.emplace_back(lo, hi);
    }
  return out;
}

double triangle_arc_length(std::span<const PointN> tri, const Ball& ball) {
  const DiskInPlane disk = plane_disk(tri, ball);
  if (!disk.hits) return 0.0;
  std::vector<Interval> arcs{{0.0, 2.0 * std::numbers::pi}};
  for (int k = 0; k < 3; ++k) {
    const PointN& pi = tri[k];
    const PointN& pj = tri[(k + 1) % 3];
    const PointN& pk = tri[(k + 2) % 3];
    // In-plane normal of edge (pi, pj) pointing at pk.
    PointN edge = pj - pi;
    PointN nrm = (pk - pi) - edge * (dot(pk - pi, edge) / norm2(edge));
    nrm *= 1.0 / norm(nrm);
    const double a = dot(nrm, disk.origin - pi);
    const double c1 = dot(nrm, disk.e1), c2 = dot(nrm, disk.e2);
    const double b = disk.rho * std::hypot(c1, c2);
    arcs = intersect(arcs, arc_constraint(a, b, std::atan2(c2, c1)));
    if (arcs.empty()) return 0.0;
  }
  double total = 0.0;
  for (const auto& [lo, hi] : arcs) total += hi - lo;
  return disk.rho * total;
}

}  // namespace

double sphere_slice_measure(const EmbeddedMesh& mesh, const Ball& ball) {
  validate(ball);
  if (mesh.dim == 2) {
    std::vector<double> lengths;
    for (std::size_t s = 0; s < mesh.size(); ++s) {
      if (mesh.is_degenerate(s)) continue;
      const auto tri = mesh.corners(s);
      if (disjoint_from_ball(tri, ball, true)) continue;
      lengths.push_back(triangle_arc_length(tri, ball));
    }
    return pairwise_sum(lengths);
  }
  std::vector<PointN> crossings;
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    const auto seg = mesh.corners(s);
    const PointN ab = seg[1] - seg[0];
    const PointN ca = seg[0] - ball.center;
    const double qa = norm2(ab), qb = 2.0 * dot(ab, ca), qc = norm2(ca) - ball.radius * ball.radius;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) continue;
    const double sq = std::sqrt(disc);
    for (double t : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)})
      if (t >= 0.0 && t <= 1.0) crossings.push_back(lerp(seg[0], seg[1], t));
  }
  std::size_t count = 0;
  for (std::size_t i = 0; i < crossings.size(); ++i) {
    bool dup = false;
    for (std::size_t j = 0; j < i && !dup; ++j) dup = distance(crossings[i], crossings[j]) <= 1e-12 * ball.radius;
    if (!dup) ++count;
  }
  return static_cast<double>(count);
}

// ------------------------------------------------------------ refinement

namespace {

void bisect(const Polytope& s, double eta, std::size_t cap, int mult, MeshBuilder& out, std::size_t& count) {
  std::size_t n = s.size();
  double longest = -1.0;
  std::size_t ea = 0;
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t b = (a + 1) % n;
    if (n == 2 && a == 1) break;
    const double len = distance(s[a], s[b]);
    if (len > longest) {
      longest = len;
      ea = a;
    }
  }
  if (longest <= eta) {
    if (++count > cap) throw DomainError("refine: simplex count cap exceeded");
    out.add_simplex(s, mult);
    return;
  }
  const std::size_t eb = (ea + 1) % n;
  const PointN mid = (s[ea] + s[eb]) * 0.5;
  if (n == 2) {
    bisect({s[0], mid}, eta, cap, mult, out, count);
    bisect({mid, s[1]}, eta, cap, mult, out, count);
    return;
  }
  const std::size_t ec = (ea + 2) % 3;
  bisect({s[ea], mid, s[ec]}, eta, cap, mult, out, count);
  bisect({mid, s[eb], s[ec]}, eta, cap, mult, out, count);
}

}  // namespace

EmbeddedMesh refine(const EmbeddedMesh& mesh, double eta, const RefineOptions& opts) {
  if (!(eta > 0.0)) throw DomainError("refine: eta must be positive");
  MeshBuilder out(mesh.dim, mesh.ambient);
  for (const auto& v : mesh.vertices) out.vertex(v);
  std::size_t count = 0;
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    const auto c = mesh.corners(s);
    if (mesh.is_degenerate(s)) {
      if (++count > opts.max_simplices) throw DomainError("refine: simplex count cap exceeded");
      out.add_simplex(c, mesh.multiplicity_of(s), true);
      continue;
    }
    bisect(Polytope(c.begin(), c.end()), eta, opts.max_simplices, mesh.multiplicity_of(s), out, count);
  }
  return out.take();
}

// -------------------------------------------------------------- distance

double point_simplex_distance(const PointN& p, std::span<const PointN> c) {
  if (c.size() == 1) return distance(p, c[0]);
  if (c.size() == 2) {
    const PointN ab = c[1] - c[0];
    const double len2 = norm2(ab);
    double t = len2 > 0 ? dot(p - c[0], ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, lerp(c[0], c[1], t));
  }
  // Closest point on a triangle (Voronoi-region walk); only dot products, so
  // it is valid in any ambient dimension.
  const PointN& a = c[0];
  const PointN& b = c[1];
  const PointN& cc = c[2];
  const PointN ab = b - a, ac = cc - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return distance(p, a);
  const PointN bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return distance(p, b);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return distance(p, a + ab * (d1 / (d1 - d3)));
  const PointN cp = p - cc;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return distance(p, cc);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return distance(p, a + ac * (d2 / (d2 - d6)));
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return distance(p, b + (cc - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))));
  const double denom = 1.0 / (va + vb + vc);
  return distance(p, a + ab * (vb * denom) + ac * (vc * denom));
}

SimplexLocator::SimplexLocator(const EmbeddedMesh& mesh) : ambient_(mesh.ambient) {
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    auto c = mesh.corners(s);
    PointN center(mesh.ambient);
    for (const auto& p : c) center += p;
    center *= 1.0 / static_cast<double>(c.size());
    double rad = 0.0;
    for (const auto& p : c) rad = std::max(rad, geom::distance(p, center));
    corners_.push_back(std::move(c));
    centers_.push_back(center);
    radii_.push_back(rad);
  }
  if (corners_.size() < 64 || ambient_ > 3) return;
  PointN lo = corners_[0][0], hi = lo;
  for (const auto& c : corners_)
    for (const auto& p : c)
      for (int i = 0; i < ambient_; ++i) {
        lo[i] = std::min(lo[i], p[i]);
        hi[i] = std::max(hi[i], p[i]);
      }
  double extent = 0.0;
  for (int i = 0; i < ambient_; ++i) extent = std::max(extent, hi[i] - lo[i]);
  if (!(extent > 0.0)) return;
  const double per_axis = std::max(1.0, std::floor(std::pow(static_cast<double>(corners_.size()), 1.0 / ambient_)));
  cell_ = extent / per_axis;
  std::size_t total = 1;
  for (int i = 0; i < ambient_; ++i) {
    counts_[i] = std::max(1, static_cast<int>(std::ceil((hi[i] - lo[i]) / cell_)) + 1);
    total *= static_cast<std::size_t>(counts_[i]);
  }
  lo_ = lo;
  buckets_.assign(total, {});
  for (std::size_t s = 0; s < corners_.size(); ++s) {
    std::array<int, kMaxDim> a{}, b{};
    for (int i = 0; i < ambient_; ++i) {
      double mn = corners_[s][0][i], mx = mn;
      for (const auto& p : corners_[s]) {
        mn = std::min(mn, p[i]);
        mx = std::max(mx, p[i]);
      }
      a[i] = std::clamp(static_cast<int>(std::floor((mn - lo_[i]) / cell_)), 0, counts_[i] - 1);
      b[i] = std::clamp(static_cast<int>(std::floor((mx - lo_[i]) / cell_)), 0, counts_[i] - 1);
    }
    std::array<int, kMaxDim> idx = a;
    for (;;) {
      buckets_[bucket_of(idx)].push_back(static_cast<std::uint32_t>(s));
      int i = 0;
      for (; i < ambient_; ++i) {
        if (++idx[i] <= b[i]) break;
        idx[i] = a[i];
      }
      if (i == ambient_) break;
    }
  }
  bucketed_ = true;
}

std::size_t SimplexLocator::bucket_of(const std::array<int, kMaxDim>& idx) const {
  std::size_t key = 0;
  for (int i = ambient_ - 1; i >= 0; --i) key = key * static_cast<std::size_t>(counts_[i]) + static_cast<std::size_t>(idx[i]);
  return key;
}

double SimplexLocator::distance(const PointN& p, double enough) const {
  double best = std::numeric_limits<double>::infinity();
  if (corners_.empty()) return best;
  if (!bucketed_) {
    for (std::size_t s = 0; s < corners_.size(); ++s) {
      if (norm(p - centers_[s]) - radii_[s] >= best) continue;
      best = std::min(best, point_simplex_distance(p, corners_[s]));
      if (best <= enough) return best;
    }
    return best;
  }
  std::array<int, kMaxDim> home{};
  double outside = 0.0;
  int max_ring = 0;
  for (int i = 0; i < ambient_; ++i) {
    const double u = (p[i] - lo_[i]) / cell_;
    const double clamped = std::clamp(u, 0.0, static_cast<double>(counts_[i]));
    outside += (u - clamped) * (u - clamped);
    home[i] = std::clamp(static_cast<int>(std::floor(clamped)), 0, counts_[i] - 1);
    max_ring = std::max({max_ring, home[i], counts_[i] - 1 - home[i]});
  }
  outside = std::sqrt(outside) * cell_;
  for (int ring = 0; ring <= max_ring; ++ring) {
    std::array<int, kMaxDim> idx{};
    for (int i = 0; i < ambient_; ++i) idx[i] = home[i] - ring;
    for (;;) {
      bool on_shell = false, valid = true;
      for (int i = 0; i < ambient_; ++i) {
        if (idx[i] < 0 || idx[i] >= counts_[i]) valid = false;
        if (std::abs(idx[i] - home[i]) == ring) on_shell = true;
      }
      if (valid && on_shell)
        for (std::uint32_t s : buckets_[bucket_of(idx)]) {
          if (norm(p - centers_[s]) - radii_[s] >= best) continue;
          best = std::min(best, point_simplex_distance(p, corners_[s]));
          if (best <= enough) return best;
        }
      int i = 0;
      for (; i < ambient_; ++i) {
        if (++idx[i] <= home[i] + ring) break;
        idx[i] = home[i] - ring;
      }
      if (i == ambient_) break;
    }
    if (best <= ring * cell_ + outside) break;
  }
  return best;
}

namespace {

/// Rows parallel to the longest edge, spaced by h across the triangle's height.
void sample_triangle(const PointN& a, const PointN& b, const PointN& c, double spacing, std::vector<PointN>& out) {
  const std::array<const PointN*, 3> v{&a, &b, &c};
  int e = 0;
  double longest = -1.0;
  for (int k = 0; k < 3; ++k) {
    const double len = distance(*v[k], *v[(k + 1) % 3]);
    if (len > longest) {
      longest = len;
      e = k;
    }
  }
  const PointN& p = *v[e];
  const PointN& q = *v[(e + 1) % 3];
  const PointN& r = *v[(e + 2) % 3];
  const double height = longest > 0.0 ? 2.0 * simplex_volume(std::array<PointN, 3>{p, q, r}) / longest : 0.0;
  const int rows = std::max(1, static_cast<int>(std::ceil(height / spacing)));
  for (int k = 0; k <= rows; ++k) {
    const double t = static_cast<double>(k) / rows;
    const PointN from = lerp(p, r, t), to = lerp(q, r, t);
    const int cols = std::max(1, static_cast<int>(std::ceil(distance(from, to) / spacing)));
    for (int j = 0; j <= cols; ++j) out.push_back(lerp(from, to, static_cast<double>(j) / cols));
  }
}

}  // namespace

std::vector<PointN> sample_points(const EmbeddedMesh& mesh, double spacing) {
  std::vector<PointN> out;
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    const auto c = mesh.corners(s);
    if (mesh.dim == 1) {
      const int m = std::max(1, static_cast<int>(std::ceil(simplex_diameter(c) / spacing)));
      for (int i = 0; i <= m; ++i) out.push_back(lerp(c[0], c[1], static_cast<double>(i) / m));
      continue;
    }
    sample_triangle(c[0], c[1], c[2], spacing, out);
  }
  return out;
}

double local_hausdorff_distance(const EmbeddedMesh& e, const EmbeddedMesh& f, const Ball& ball,
                                const HausdorffOptions& opts) {
  validate(ball);
  if (e.vertices == f.vertices && e.simplices == f.simplices) return 0.0;
  const double spacing = opts.resolution * ball.radius;
  auto one_side = [&](const EmbeddedMesh& from, const EmbeddedMesh& to) {
    // sup { dist(y, to) : y ∈ from ∩ B }
    const EmbeddedMesh inside = clip_to_ball(from, ball, opts.clip);
    if (inside.empty() || to.empty()) return 0.0;
    const SimplexLocator locator(to);
    // A sample already within the running sup cannot raise it; stopping there
    // changes nothing except values below 1e-12·r.
    const double floor = 1e-12 * ball.radius;
    double sup = 0.0;
    for (const auto& y : sample_points(inside, spacing))
      sup = std::max(sup, locator.distance(y, std::max(sup, floor)));
    return sup;
  };
  return (one_side(f, e) + one_side(e, f)) / ball.radius;
}

// ---------------------------------------------------------------- Douglas

double douglas_energy(std::span<const PointN> samples) {
  const std::size_t m = samples.size();
  if (m < 8 || m % 2 != 0) throw DomainError("douglas_energy: need an even number m >= 8 of samples");
  for (const auto& p : samples)
    if (!p.finite()) throw DomainError("douglas_energy: non-finite sample");
  bool constant = true;
  for (const auto& p : samples) constant = constant && p == samples[0];
  if (constant) return 0.0;
  for (std::size_t i = 0; i < m; ++i)
    if (samples[i] == samples[(i + 1) % m])
      throw DomainError("douglas_energy: consecutive samples " + std::to_string(i) + " and " +
                        std::to_string((i + 1) % m) + " coincide");
  const double h = 2.0 * std::numbers::pi / static_cast<double>(m);
  std::vector<double> rows(m);
  for (std::size_t i = 0; i < m; ++i) {
    const PointN deriv = (samples[(i + 1) % m] - samples[(i + m - 1) % m]) * (0.5 / h);
    double row = 4.0 * norm2(deriv);  // diagonal limit
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      const double s = std::sin(0.5 * h * (static_cast<double>(i) - static_cast<double>(j)));
      row += norm2(samples[i] - samples[j]) / (s * s);
    }
    rows[i] = row;
  }
  return h * h * pairwise_sum(rows);
}

// ------------------------------------------------------------ utilities

EmbeddedMesh rescale(const EmbeddedMesh& mesh, const PointN& origin, double scale) {
  EmbeddedMesh out = mesh;
  for (auto& v : out.vertices) v = (v - origin) * (1.0 / scale);
  return out;
}

EmbeddedMesh merge(const EmbeddedMesh& a, const EmbeddedMesh& b) {
  if (a.dim != b.dim || a.ambient != b.ambient) throw DomainError("merge: mismatched mesh dimensions");
  EmbeddedMesh out = a;
  const auto offset = static_cast<std::uint32_t>(a.vertices.size());
  out.vertices.insert(out.vertices.end(), b.vertices.begin(), b.vertices.end());
  for (std::size_t s = 0; s < b.size(); ++s) {
    Simplex sx = b.simplices[s];
    for (int k = 0; k <= b.dim; ++k) sx[k] += offset;
    out.add_simplex(sx, b.multiplicity_of(s), b.is_degenerate(s));
  }
  return out;
}

double Gauge::operator()(double r) const {
  if (r > cutoff) return std::numeric_limits<double>::infinity();
  return coefficient * std::pow(r, exponent);
}

double Gauge::dini_integral(double r) const {
  if (coefficient == 0.0) return 0.0;
  if (2.0 * r > cutoff) return std::numeric_limits<double>::infinity();
  return coefficient * std::pow(2.0, exponent) * std::pow(r, exponent) / exponent;
}

void validate(const Gauge& g) {
  if (!(g.coefficient >= 0.0)) throw DomainError("gauge coefficient must be nonnegative");
  if (!(g.exponent > 0.0)) throw DomainError("gauge exponent must be positive");
  if (!(g.cutoff > 0.0)) throw DomainError("gauge cutoff must be positive");
}

double LineBoundary::distance(const PointN& p) const { return geom::distance(p, foot(p)); }

PointN LineBoundary::foot(const PointN& p) const { return base + direction * dot(p - base, direction); }

LineBoundary make_line(const PointN& base, const PointN& direction) {
  const double len = norm(direction);
  if (!(len > 0.0)) throw DomainError("line direction must be nonzero");
  if (base.dim() != direction.dim()) throw DomainError("line base and direction dimensions differ");
  return {base, direction * (1.0 / len)};
}

}  // namespace plateau::geom
