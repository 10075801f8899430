#include "plateau/ff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "plateau/parallel.hpp"
#include "plateau/seeding.hpp"

namespace plateau::ff {

using geom::MeshBuilder;
using geom::normalize_polytope;
using geom::polytope_measure;
using geom::split_polytope;

std::string to_string(Strategy s) { return s == Strategy::Far ? "far" : "chebyshev"; }

Strategy strategy_from_string(const std::string& s) {
  if (s == "far") return Strategy::Far;
  if (s == "chebyshev") return Strategy::Chebyshev;
  throw ConfigError("unknown center strategy '" + s + "' (expected far or chebyshev)");
}

namespace {

constexpr double kSnap = 1e-12;     // relative to the cell side
constexpr double kMissTol = 1e-9;   // relative to the face diameter
constexpr double kTrajTol = 1e-9;   // relative to the face diameter

struct Box {
  PointN lo, hi;
  std::uint32_t free = 0;

  int n() const { return lo.dim(); }
  int dim() const { return __builtin_popcount(free); }
  bool is_free(int i) const { return (free >> i) & 1u; }
  double diam() const { return geom::distance(lo, hi); }
};

Box box_of(const DyadicGrid& g, const FaceKey& key) {
  Box b;
  b.lo = PointN(g.n());
  b.hi = PointN(g.n());
  b.free = key.axes;
  for (int i = 0; i < g.n(); ++i) {
    b.lo[i] = g.plane(i, key.corner[i]);
    b.hi[i] = key.free(i) ? g.plane(i, key.corner[i] + 1) : b.lo[i];
  }
  return b;
}

Box box_from(const PointN& lo, const PointN& hi) {
  if (lo.dim() != hi.dim()) throw DomainError("face bounds differ in dimension");
  Box b{lo, hi, 0};
  for (int i = 0; i < lo.dim(); ++i) {
    if (!(hi[i] >= lo[i])) throw DomainError("face bounds are inverted on axis " + std::to_string(i));
    if (hi[i] > lo[i]) b.free |= 1u << i;
  }
  return b;
}

double piece_distance(const PointN& p, const Polytope& poly, int d) {
  if (d == 1 || poly.size() < 3) return geom::point_simplex_distance(p, std::span<const PointN>(poly.data(), poly.size()));
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
    const std::array<PointN, 3> tri{poly[0], poly[k], poly[k + 1]};
    best = std::min(best, geom::point_simplex_distance(p, tri));
  }
  return best;
}

double content_distance(const PointN& p, const std::vector<Polytope>& content, int d) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& poly : content) best = std::min(best, piece_distance(p, poly, d));
  return best;
}

struct Facet {
  int axis = 0;
  double value = 0.0;
};

std::vector<Facet> facets_of(const Box& b) {
  std::vector<Facet> out;
  for (int i = 0; i < b.n(); ++i) {
    if (!b.is_free(i)) continue;
    out.push_back({i, b.lo[i]});
    out.push_back({i, b.hi[i]});
  }
  return out;
}

inline double lambda(const Facet& f, const PointN& v, const PointN& xi) {
  return (v[f.axis] - xi[f.axis]) / (f.value - xi[f.axis]);
}

/// Parts of a piece inside the pyramid over each facet (apex ξ).
std::vector<std::pair<Polytope, std::size_t>> pyramid_parts(const Polytope& piece, int d,
                                                            const std::vector<Facet>& facets, const PointN& xi) {
  std::vector<std::pair<Polytope, std::size_t>> out;
  std::vector<double> vals;
  for (std::size_t f = 0; f < facets.size(); ++f) {
    Polytope part = piece;
    bool alive = true;
    for (std::size_t g = 0; g < facets.size() && alive; ++g) {
      if (g == f) continue;
      vals.resize(part.size());
      bool all_pos = true, all_neg = true;
      for (std::size_t v = 0; v < part.size(); ++v) {
        vals[v] = lambda(facets[f], part[v], xi) - lambda(facets[g], part[v], xi);
        all_pos = all_pos && vals[v] >= 0.0;
        all_neg = all_neg && vals[v] < 0.0;
      }
      if (all_pos) continue;
      if (all_neg) {
        alive = false;
        break;
      }
      part = split_polytope(part, d, vals).nonnegative;
      alive = normalize_polytope(part, d);
    }
    if (alive) out.emplace_back(std::move(part), f);
  }
  return out;
}

/// Image of v under the radial map restricted to the pyramid over facet f.
PointN map_vertex(const PointN& v, const Facet& f, const PointN& xi, const Box& box, double snap,
                  std::size_t& violations) {
  const double tol = kTrajTol * box.diam();
  for (int j = 0; j < box.n(); ++j)
    if (v[j] < box.lo[j] - tol || v[j] > box.hi[j] + tol) ++violations;
  if (v[f.axis] == f.value) return v;
  const double lam = lambda(f, v, xi);
  if (!(lam > 0.0)) throw DomainError("projection center lies on the mesh");
  PointN w = v;
  for (int j = 0; j < box.n(); ++j) {
    if (!box.is_free(j)) {
      w[j] = box.lo[j];
      continue;
    }
    if (j == f.axis) {
      w[j] = f.value;
      continue;
    }
    double x = xi[j] + (v[j] - xi[j]) / lam;
    if (x < box.lo[j] - tol || x > box.hi[j] + tol) ++violations;
    if (x - box.lo[j] <= snap) x = box.lo[j];
    if (box.hi[j] - x <= snap) x = box.hi[j];
    w[j] = x;
  }
  return w;
}

/// Radial images of one piece: d-dimensional pieces on the facets of the box.
void project_piece(const Polytope& piece, int d, const Box& box, const std::vector<Facet>& facets, const PointN& xi,
                   double snap, std::vector<Polytope>& out, std::size_t& violations) {
  for (auto& [part, f] : pyramid_parts(piece, d, facets, xi)) {
    Polytope img;
    img.reserve(part.size());
    for (const auto& v : part) img.push_back(map_vertex(v, facets[f], xi, box, snap, violations));
    if (normalize_polytope(img, d)) out.push_back(std::move(img));
  }
}

double image_measure(const std::vector<Polytope>& content, int d, const Box& box, const std::vector<Facet>& facets,
                     const PointN& xi, double snap) {
  std::vector<Polytope> imgs;
  std::size_t ignored = 0;
  for (const auto& p : content) project_piece(p, d, box, facets, xi, snap, imgs, ignored);
  double m = 0.0;
  for (const auto& p : imgs) m += polytope_measure(p, d);
  return m;
}

struct Picked {
  PointN center;
  double measure_in = 0.0;
  double measure_out = 0.0;
  double distance = 0.0;
};

PointN middle_half_sample(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointN xi = box.lo;
  for (int j = 0; j < box.n(); ++j) {
    if (!box.is_free(j)) continue;
    const double w = box.hi[j] - box.lo[j];
    xi[j] = box.lo[j] + 0.25 * w + 0.5 * w * u(rng);
  }
  return xi;
}

Picked pick_center(const std::vector<Polytope>& content, int d, const Box& box, Strategy strategy, int trials,
                   std::uint64_t seed, double snap) {
  const auto facets = facets_of(box);
  const double miss = kMissTol * box.diam();
  Picked best;
  for (const auto& p : content) best.measure_in += polytope_measure(p, d);

  if (strategy == Strategy::Far) {
    const int k = box.dim();
    const int per_axis = std::clamp(static_cast<int>(std::floor(std::pow(2000.0, 1.0 / std::max(k, 1)))), 2, 17);
    std::vector<int> idx(static_cast<std::size_t>(box.n()), 0);
    double best_dist = -1.0;
    for (;;) {
      PointN xi = box.lo;
      for (int j = 0; j < box.n(); ++j) {
        if (!box.is_free(j)) continue;
        const double w = box.hi[j] - box.lo[j];
        xi[j] = box.lo[j] + 0.25 * w + 0.5 * w * (idx[static_cast<std::size_t>(j)] + 0.5) / per_axis;
      }
      const double dist = content_distance(xi, content, d);
      if (dist > best_dist) {
        best_dist = dist;
        best.center = xi;
      }
      int j = 0;
      for (; j < box.n(); ++j) {
        if (!box.is_free(j)) continue;
        if (++idx[static_cast<std::size_t>(j)] < per_axis) break;
        idx[static_cast<std::size_t>(j)] = 0;
      }
      if (j == box.n()) break;
    }
    if (!(best_dist > miss)) throw DomainError("no projection center in the middle half misses the mesh");
    best.distance = best_dist;
    best.measure_out = image_measure(content, d, box, facets, best.center, snap);
    return best;
  }

  if (trials < 1) throw ConfigError("center trials must be positive");
  for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, {attempt}));
    bool found = false;
    for (int t = 0; t < trials; ++t) {
      const PointN xi = middle_half_sample(box, rng);
      const double dist = content_distance(xi, content, d);
      if (!(dist > miss)) continue;
      const double m = image_measure(content, d, box, facets, xi, snap);
      if (!found || m < best.measure_out) {
        found = true;
        best.center = xi;
        best.measure_out = m;
        best.distance = dist;
      }
    }
    if (found) return best;
  }
  throw DomainError("every sampled projection center hit the mesh");
}

std::vector<Polytope> polytopes_of(const EmbeddedMesh& mesh) {
  std::vector<Polytope> out;
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    if (mesh.is_degenerate(s)) continue;
    out.push_back(mesh.corners(s));
  }
  return out;
}

/// Snaps near-plane coordinates onto grid planes, wraps periodic axes, and
/// finds the carrier face. Writes the cube holding the piece to `cube`.
FaceKey classify(Polytope& poly, const DyadicGrid& g, CubeIndex& cube) {
  const int n = g.n();
  const int N = g.subdivisions();
  const double s = g.cell();
  const double tol = kSnap * s;
  auto snap_axis = [&](int i) {
    for (auto& v : poly) {
      const auto k = std::llround((v[i] - g.corner()[i]) / s);
      const double p = g.plane(i, k);
      if (std::abs(v[i] - p) <= tol) v[i] = p;
    }
  };
  for (int i = 0; i < n; ++i) snap_axis(i);
  PointN cent(n);
  for (const auto& v : poly) cent += v;
  cent *= 1.0 / static_cast<double>(poly.size());
  for (int i = 0; i < n; ++i) {
    if (!g.periodic(i)) continue;
    const double m = std::floor((cent[i] - g.corner()[i]) / g.size());
    if (m == 0.0) continue;
    for (auto& v : poly) v[i] -= m * g.size();
    cent[i] -= m * g.size();
    snap_axis(i);
  }
  FaceKey key;
  for (int i = 0; i < n; ++i) {
    auto r = static_cast<std::int64_t>(std::floor((cent[i] - g.corner()[i]) / s));
    r = std::clamp<std::int64_t>(r, 0, N - 1);
    const double lo = g.plane(i, r), hi = g.plane(i, r + 1);
    bool all_lo = true, all_hi = true;
    for (const auto& v : poly) {
      all_lo = all_lo && v[i] == lo;
      all_hi = all_hi && v[i] == hi;
    }
    if (all_lo) {
      key.corner[i] = static_cast<std::int32_t>(r);
    } else if (all_hi) {
      if (g.periodic(i) && r + 1 == N) {
        const double base = g.plane(i, 0);
        for (auto& v : poly) v[i] = base;
        r = 0;
        key.corner[i] = 0;
      } else {
        key.corner[i] = static_cast<std::int32_t>(r + 1);
      }
    } else {
      key.corner[i] = static_cast<std::int32_t>(r);
      key.axes |= 1u << i;
    }
    cube[i] = static_cast<std::int32_t>(r);
  }
  return key;
}

Piece make_piece(Polytope poly, int mult, std::uint32_t origin, const DyadicGrid& g, bool set_origin) {
  Piece p;
  CubeIndex cube{};
  p.carrier = classify(poly, g, cube);
  p.poly = std::move(poly);
  p.multiplicity = mult;
  p.origin = set_origin ? static_cast<std::uint32_t>(g.linear(cube)) : origin;
  return p;
}

/// Cuts a piece of Q along every grid plane it crosses.
void grid_split(Polytope piece, int d, int mult, const DyadicGrid& g, std::vector<Piece>& out) {
  std::vector<Polytope> cur{std::move(piece)};
  const double s = g.cell();
  for (int i = 0; i < g.n(); ++i) {
    std::vector<Polytope> next;
    for (auto& p : cur) {
      double lo = p[0][i], hi = p[0][i];
      for (const auto& v : p) {
        lo = std::min(lo, v[i]);
        hi = std::max(hi, v[i]);
      }
      const auto k0 = static_cast<std::int64_t>(std::floor((lo - g.corner()[i]) / s));
      const auto k1 = static_cast<std::int64_t>(std::ceil((hi - g.corner()[i]) / s));
      Polytope rest = std::move(p);
      for (auto k = k0; k <= k1; ++k) {
        const double plane = g.plane(i, k);
        if (!(plane > lo && plane < hi)) continue;
        auto parts = split_polytope(rest, d, [&](const PointN& v) { return v[i] - plane; });
        if (normalize_polytope(parts.negative, d)) next.push_back(std::move(parts.negative));
        rest = std::move(parts.nonnegative);
        if (!normalize_polytope(rest, d)) break;
        lo = plane;
      }
      if (rest.size() >= static_cast<std::size_t>(d + 1) && normalize_polytope(rest, d)) next.push_back(std::move(rest));
    }
    cur = std::move(next);
  }
  for (auto& p : cur) out.push_back(make_piece(std::move(p), mult, 0, g, true));
}

double pieces_measure(const std::vector<Piece>& pieces, int d) {
  double m = 0.0;
  for (const auto& p : pieces) m += polytope_measure(p.poly, d);
  return m;
}

EmbeddedMesh assemble(const EmbeddedMesh& outside, const std::vector<Piece>& pieces, const std::vector<Piece>& residue,
                      int d, int n) {
  MeshBuilder b(d, n);
  for (std::size_t s = 0; s < outside.size(); ++s) {
    const auto c = outside.corners(s);
    b.add_simplex(c, outside.multiplicity_of(s), outside.is_degenerate(s));
  }
  for (const auto& p : pieces) b.add_polytope(p.poly, p.multiplicity);
  for (const auto& r : residue) {
    if (d != 2 || r.poly.size() != 2) continue;
    const std::array<PointN, 3> tri{r.poly[0], r.poly[1], geom::lerp(r.poly[0], r.poly[1], 0.5)};
    b.add_simplex(tri, r.multiplicity, true);
  }
  return b.take();
}

void tabulate(ProjectionResult& r, const DyadicGrid& g) {
  const int d = r.d;
  const std::size_t count = g.cube_count();
  std::vector<double> in(count, 0.0), origin_in(count, 0.0), image(count, 0.0), out(count, 0.0);
  for (const auto& p : r.input) {
    const double m = polytope_measure(p.poly, d);
    for (const auto& c : g.incident_cubes(p.carrier)) in[g.linear(c)] += m;
    origin_in[p.origin] += m;
  }
  r.locality_violations = 0;
  for (const auto& p : r.pieces) {
    const double m = polytope_measure(p.poly, d);
    image[p.origin] += m;
    bool home = false;
    for (const auto& c : g.incident_cubes(p.carrier)) {
      const auto lin = g.linear(c);
      out[lin] += m;
      home = home || lin == p.origin;
    }
    if (!home) ++r.locality_violations;
  }
  r.empirical_constant = 0.0;
  r.cubes.assign(count, CubeRow{});
  for (std::size_t k = 0; k < count; ++k) {
    auto& row = r.cubes[k];
    row.cube = g.unlinear(k);
    row.in = in[k];
    row.origin_in = origin_in[k];
    row.image = image[k];
    row.out = out[k];
    row.ratio = origin_in[k] > 0.0 ? image[k] / origin_in[k] : 0.0;
    r.empirical_constant = std::max(r.empirical_constant, row.ratio);
  }
  r.locality_ok = r.locality_violations == 0;
  for (auto& row : r.cubes) {
    double bound = 0.0, neighbor_in = 0.0;
    for (const auto& c : g.neighbors(row.cube)) {
      bound += image[g.linear(c)];
      neighbor_in += in[g.linear(c)];
    }
    row.bound = bound;
    const double slack = 1e-9 * std::max(1.0, bound);
    row.ok = row.out <= bound + slack && row.out <= r.empirical_constant * neighbor_in * (1.0 + 1e-9) + slack;
    r.locality_ok = r.locality_ok && row.ok;
  }
}

}  // namespace

EmbeddedMesh radial_project_face(const EmbeddedMesh& sub, const PointN& face_low, const PointN& face_high,
                                 const PointN& xi) {
  const Box box = box_from(face_low, face_high);
  if (xi.dim() != box.n() || sub.ambient != box.n()) throw DomainError("projection center and face differ in dimension");
  const double tol = kTrajTol * box.diam();
  for (int j = 0; j < box.n(); ++j) {
    const double w = box.hi[j] - box.lo[j];
    if (!box.is_free(j) ? xi[j] != box.lo[j]
                        : (xi[j] < box.lo[j] + 0.25 * w - tol || xi[j] > box.hi[j] - 0.25 * w + tol))
      throw DomainError("projection center must lie in the middle half of the face");
  }
  for (const auto& v : sub.vertices)
    for (int j = 0; j < box.n(); ++j)
      if (v[j] < box.lo[j] - tol || v[j] > box.hi[j] + tol) throw DomainError("face content leaves the face");
  const auto content = polytopes_of(sub);
  if (!content.empty() && !(content_distance(xi, content, sub.dim) > kMissTol * box.diam()))
    throw DomainError("projection center lies on the mesh");
  const auto facets = facets_of(box);
  const double snap = kSnap * box.diam();
  MeshBuilder b(sub.dim, sub.ambient);
  std::size_t violations = 0;
  for (std::size_t s = 0, c = 0; s < sub.size(); ++s) {
    if (sub.is_degenerate(s)) continue;
    std::vector<Polytope> imgs;
    project_piece(content[c++], sub.dim, box, facets, xi, snap, imgs, violations);
    for (const auto& p : imgs) b.add_polytope(p, sub.multiplicity_of(s));
  }
  return b.take();
}

CenterChoice choose_center(const EmbeddedMesh& content, const PointN& face_low, const PointN& face_high,
                           Strategy strategy, int trials, std::uint64_t seed) {
  const Box box = box_from(face_low, face_high);
  if (box.dim() <= content.dim) throw DomainError("center selection needs a face of dimension above the mesh");
  const auto polys = polytopes_of(content);
  const Picked p = pick_center(polys, content.dim, box, strategy, trials, seed, kSnap * box.diam());
  CenterChoice c;
  c.center = p.center;
  c.distance = p.distance;
  c.ratio = p.measure_in > 0.0 ? p.measure_out / p.measure_in : 0.0;
  c.bound = std::isfinite(p.distance) ? std::pow(box.diam() / p.distance, content.dim) : 0.0;
  return c;
}

ProjectionResult project_to_skeleton(const EmbeddedMesh& mesh, const DyadicGrid& g, const ProjectionOptions& opts) {
  geom::validate(mesh);
  const int n = g.n();
  const int d = mesh.dim;
  if (mesh.ambient != n) throw DomainError("mesh and grid differ in ambient dimension");
  if (d >= n) throw DomainError("mesh dimension must be below the grid dimension");
  if (!(opts.eta >= 0.0)) throw ConfigError("eta must be non-negative");

  ProjectionResult r;
  r.d = d;
  const double s = g.cell();
  const double snap = kSnap * s;

  MeshBuilder outside(d, n);
  std::vector<Piece>& pieces = r.pieces;
  for (std::size_t si = 0; si < mesh.size(); ++si) {
    const auto corners = mesh.corners(si);
    const int mult = mesh.multiplicity_of(si);
    bool out = false, all_in = true;
    for (int i = 0; i < n && !out; ++i) {
      if (g.periodic(i)) continue;
      const double lo = g.plane(i, 0), hi = g.plane(i, g.subdivisions());
      bool le = true, eq_lo = true, ge = true, eq_hi = true;
      for (const auto& v : corners) {
        le = le && v[i] <= lo;
        eq_lo = eq_lo && v[i] == lo;
        ge = ge && v[i] >= hi;
        eq_hi = eq_hi && v[i] == hi;
        all_in = all_in && v[i] >= lo && v[i] <= hi;
      }
      out = (le && !eq_lo) || (ge && !eq_hi);
    }
    if (out) {
      outside.add_simplex(corners, mult, mesh.is_degenerate(si));
      continue;
    }
    if (mesh.is_degenerate(si)) continue;  // no d-measure to carry
    Polytope p = corners;
    bool alive = true;
    for (int i = 0; i < n && alive && !all_in; ++i) {
      if (g.periodic(i)) continue;
      for (int side = 0; side < 2 && alive; ++side) {
        const double plane = g.plane(i, side ? g.subdivisions() : 0);
        auto parts = split_polytope(p, d, [&](const PointN& v) { return side ? plane - v[i] : v[i] - plane; });
        if (normalize_polytope(parts.negative, d)) outside.add_polytope(parts.negative, mult);
        p = std::move(parts.nonnegative);
        alive = normalize_polytope(p, d);
      }
    }
    if (!alive) continue;
    grid_split(std::move(p), d, mult, g, pieces);
  }
  r.outside = outside.take();
  r.input = pieces;
  if (opts.keep_stage_meshes) r.stage_meshes.push_back(assemble(r.outside, pieces, {}, d, n));

  for (int k = n; k > d; --k) {
    StageRecord rec;
    rec.dimension = k;
    rec.measure_before = pieces_measure(pieces, d);
    std::map<FaceKey, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < pieces.size(); ++i)
      if (pieces[i].carrier.dim() == k && !g.on_boundary(pieces[i].carrier)) groups[pieces[i].carrier].push_back(i);
    std::vector<const std::pair<const FaceKey, std::vector<std::size_t>>*> faces;
    for (const auto& e : groups) faces.push_back(&e);

    std::vector<std::vector<Piece>> produced(faces.size());
    std::vector<FaceChoice> choices(faces.size());
    std::vector<std::size_t> violations(faces.size(), 0);
    parallel_for(faces.size(), [&](std::size_t f) {
      const auto& [key, members] = *faces[f];
      const Box box = box_of(g, key);
      std::vector<Polytope> content;
      for (auto idx : members) content.push_back(pieces[idx].poly);
      const auto seed = derive_seed(opts.seed, {static_cast<std::uint64_t>(k), grid::FaceKeyHash{}(key)});
      const Picked pick = pick_center(content, d, box, opts.strategy, opts.trials, seed, snap);
      const auto facets = facets_of(box);
      for (std::size_t m = 0; m < members.size(); ++m) {
        const Piece& src = pieces[members[m]];
        std::vector<Polytope> imgs;
        project_piece(content[m], d, box, facets, pick.center, snap, imgs, violations[f]);
        for (auto& img : imgs) produced[f].push_back(make_piece(std::move(img), src.multiplicity, src.origin, g, false));
      }
      FaceChoice& c = choices[f];
      c.face = key;
      c.center = pick.center;
      c.measure_in = pick.measure_in;
      c.measure_out = pieces_measure(produced[f], d);
      c.ratio = c.measure_in > 0.0 ? c.measure_out / c.measure_in : 0.0;
      c.distance = pick.distance;
      c.bound = std::pow(box.diam() / pick.distance, d);
    });

    std::vector<Piece> next;
    next.reserve(pieces.size());
    for (auto& p : pieces)
      if (!(p.carrier.dim() == k && !g.on_boundary(p.carrier))) next.push_back(std::move(p));
    for (auto& batch : produced)
      for (auto& p : batch) next.push_back(std::move(p));
    pieces = std::move(next);

    rec.faces = faces.size();
    rec.measure_after = pieces_measure(pieces, d);
    for (const auto& c : choices) rec.max_ratio = std::max(rec.max_ratio, c.ratio);
    for (auto v : violations) r.trajectory_violations += v;
    r.choices.insert(r.choices.end(), choices.begin(), choices.end());
    r.stages.push_back(rec);
    if (opts.keep_stage_meshes) r.stage_meshes.push_back(assemble(r.outside, pieces, {}, d, n));
  }

  tabulate(r, g);
  r.mesh = assemble(r.outside, r.pieces, r.residue, d, n);
  return r;
}

ProjectionResult extra_collapse(const ProjectionResult& result, const DyadicGrid& g, const ProjectionOptions& opts) {
  const int d = result.d;
  const int n = g.n();
  const double s = g.cell();
  const double snap = kSnap * s;
  std::map<FaceKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < result.pieces.size(); ++i) {
    const auto& p = result.pieces[i];
    if (g.on_boundary(p.carrier)) continue;
    if (p.carrier.dim() != d) return result;  // not a skeleton image
    groups[p.carrier].push_back(i);
  }

  const double half = std::pow(0.5 * s, d);
  std::vector<PointN> centers;
  std::vector<std::vector<Polytope>> contents;
  for (const auto& [key, members] : groups) {
    double m = 0.0;
    auto& content = contents.emplace_back();
    for (auto idx : members) {
      m += polytope_measure(result.pieces[idx].poly, d);
      content.push_back(result.pieces[idx].poly);
    }
    if (!(m < half)) {
      ProjectionResult blocked = result;
      blocked.collapsed = false;
      return blocked;
    }
    const Box box = box_of(g, key);
    const double miss = kMissTol * box.diam();
    std::mt19937_64 rng(derive_seed(opts.seed, {0xc011a95eull, grid::FaceKeyHash{}(key)}));
    PointN xi = g.face_center(key);
    bool ok = content_distance(xi, content, d) > miss;
    for (int t = 0; t < 256 && !ok; ++t) {
      xi = middle_half_sample(box, rng);
      ok = content_distance(xi, content, d) > miss;
    }
    if (!ok) {
      ProjectionResult blocked = result;
      blocked.collapsed = false;
      return blocked;
    }
    centers.push_back(xi);
  }

  ProjectionResult r = result;
  StageRecord rec;
  rec.dimension = d;
  rec.faces = groups.size();
  rec.measure_before = pieces_measure(r.pieces, d);
  std::vector<char> moved(r.pieces.size(), 0);
  std::size_t f = 0;
  for (const auto& [key, members] : groups) {
    const Box box = box_of(g, key);
    const auto facets = facets_of(box);
    const PointN& xi = centers[f++];
    FaceChoice c;
    c.face = key;
    c.center = xi;
    for (auto idx : members) {
      moved[idx] = 1;
      const Piece& src = result.pieces[idx];
      c.measure_in += polytope_measure(src.poly, d);
      for (auto& [part, fi] : pyramid_parts(src.poly, d, facets, xi)) {
        Polytope img;
        for (const auto& v : part) img.push_back(map_vertex(v, facets[fi], xi, box, snap, r.trajectory_violations));
        if (d != 2) continue;  // a segment collapses to points
        // The image lies on one edge: keep its extent along the other free axis.
        int other = -1;
        for (int j = 0; j < n; ++j)
          if (box.is_free(j) && j != facets[fi].axis) other = j;
        auto [lo_it, hi_it] = std::minmax_element(img.begin(), img.end(), [&](const PointN& a, const PointN& b) {
          return a[other] < b[other];
        });
        if ((*lo_it)[other] < (*hi_it)[other]) {
          Piece res;
          res.poly = {*lo_it, *hi_it};
          res.multiplicity = src.multiplicity;
          res.origin = src.origin;
          res.carrier = src.carrier;
          r.residue.push_back(std::move(res));
        }
      }
    }
    c.distance = content_distance(xi, contents[f - 1], d);
    c.bound = std::pow(box.diam() / c.distance, d);
    r.choices.push_back(c);
  }
  std::vector<Piece> kept;
  for (std::size_t i = 0; i < r.pieces.size(); ++i)
    if (!moved[i]) kept.push_back(std::move(r.pieces[i]));
  r.pieces = std::move(kept);
  rec.measure_after = pieces_measure(r.pieces, d);
  r.stages.push_back(rec);
  r.collapsed = true;
  tabulate(r, g);
  r.mesh = assemble(r.outside, r.pieces, r.residue, d, n);
  if (opts.keep_stage_meshes) r.stage_meshes.push_back(r.mesh);
  return r;
}

double skeleton_residual(const EmbeddedMesh& mesh, const DyadicGrid& g, int k) {
  const int n = g.n();
  const double s = g.cell();
  const double tol = 1e-9 * s;
  double worst = 0.0;
  if (k >= n) return 0.0;
  for (std::size_t si = 0; si < mesh.size(); ++si) {
    const auto c = mesh.corners(si);
    PointN cent(n);
    for (const auto& v : c) cent += v;
    cent *= 1.0 / static_cast<double>(c.size());
    bool skip = false;
    std::vector<double> dev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto plane_k = std::llround((cent[i] - g.corner()[i]) / s);
      double m = 0.0;
      for (const auto& v : c) m = std::max(m, std::abs(v[i] - g.plane(i, plane_k)));
      dev[static_cast<std::size_t>(i)] = m;
      if (!g.periodic(i)) {
        if (cent[i] < g.plane(i, 0) - tol || cent[i] > g.plane(i, g.subdivisions()) + tol) skip = true;
        if ((plane_k == 0 || plane_k == g.subdivisions()) && m <= tol) skip = true;
      }
    }
    if (skip) continue;
    std::sort(dev.begin(), dev.end());
    worst = std::max(worst, dev[static_cast<std::size_t>(n - k - 1)]);
  }
  return worst;
}

double interior_measure(const EmbeddedMesh& mesh, const DyadicGrid& g) {
  const int n = g.n();
  const double tol = 1e-9 * g.cell();
  double total = 0.0;
  for (std::size_t si = 0; si < mesh.size(); ++si) {
    if (mesh.is_degenerate(si)) continue;
    const auto c = mesh.corners(si);
    PointN cent(n);
    for (const auto& v : c) cent += v;
    cent *= 1.0 / static_cast<double>(c.size());
    bool inside = true;
    for (int i = 0; i < n && inside; ++i) {
      if (g.periodic(i)) continue;
      inside = cent[i] > g.plane(i, 0) + tol && cent[i] < g.plane(i, g.subdivisions()) - tol;
    }
    if (inside) total += geom::simplex_volume(c);
  }
  return total;
}

}  // namespace plateau::ff
