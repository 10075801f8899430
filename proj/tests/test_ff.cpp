#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "plateau/ff.hpp"
#include "plateau/shapes.hpp"

using namespace plateau;
using namespace plateau::geom;
using namespace plateau::ff;
using plateau::grid::DyadicGrid;

namespace {

EmbeddedMesh segment(const PointN& a, const PointN& b) {
  EmbeddedMesh m(1, a.dim());
  m.add_vertex(a);
  m.add_vertex(b);
  m.add_simplex({0, 1});
  return m;
}

/// Where the ray from c through p leaves the box [lo, hi] (p inside the box).
PointN ray_exit(const PointN& c, const PointN& p, const PointN& lo, const PointN& hi) {
  double t = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.dim(); ++i) {
    const double dir = p[i] - c[i];
    if (hi[i] == lo[i] || dir == 0.0) continue;
    const double target = dir > 0 ? hi[i] : lo[i];
    t = std::min(t, (target - c[i]) / dir);
  }
  return c + (p - c) * t;
}

/// Length of the image of a segment under the radial map, by dense sampling.
double pushed_length(const PointN& a, const PointN& b, const PointN& c, const PointN& lo, const PointN& hi,
                     int samples = 20000) {
  double len = 0.0;
  PointN prev = ray_exit(c, a, lo, hi);
  for (int k = 1; k <= samples; ++k) {
    const PointN q = ray_exit(c, lerp(a, b, static_cast<double>(k) / samples), lo, hi);
    len += distance(prev, q);
    prev = q;
  }
  return len;
}

EmbeddedMesh random_mesh(std::mt19937_64& rng, int d, int n, int count, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  EmbeddedMesh m(d, n);
  for (int t = 0; t < count; ++t) {
    Simplex s{};
    for (int k = 0; k <= d; ++k) {
      PointN p(n);
      for (int i = 0; i < n; ++i) p[i] = u(rng);
      s[static_cast<std::size_t>(k)] = m.add_vertex(p);
    }
    std::vector<PointN> c;
    for (int k = 0; k <= d; ++k) c.push_back(m.vertices[s[static_cast<std::size_t>(k)]]);
    if (simplex_volume(c) < 1e-6) {
      m.vertices.resize(m.vertices.size() - static_cast<std::size_t>(d + 1));
      --t;
      continue;
    }
    m.add_simplex(s);
  }
  return m;
}

bool same_mesh(const EmbeddedMesh& a, const EmbeddedMesh& b) {
  return a.vertices == b.vertices && a.simplices == b.simplices && a.multiplicity == b.multiplicity &&
         a.degenerate == b.degenerate;
}

}  // namespace

TEST_CASE("radial projection of the square diagonal") {
  const PointN lo{0, 0}, hi{1, 1}, xi{0.7, 0.3};
  auto img = radial_project_face(segment({0, 0}, {1, 1}), lo, hi, xi);
  CHECK(measure(img) == doctest::Approx(2.0).epsilon(1e-14));
  for (const auto& v : img.vertices) CHECK((v[0] == 0.0 || v[1] == 1.0));
  bool through_corner = false;
  for (const auto& v : img.vertices) through_corner = through_corner || (v[0] == 0.0 && v[1] == 1.0);
  CHECK(through_corner);
  CHECK(pushed_length({0, 0}, {1, 1}, xi, lo, hi) == doctest::Approx(measure(img)).epsilon(1e-3));

  CHECK(radial_project_face(EmbeddedMesh(1, 2), lo, hi, xi).empty());

  EmbeddedMesh rim(1, 2);
  rim.add_vertex({0, 0});
  rim.add_vertex({0, 0.4});
  rim.add_vertex({0.8, 1.0});
  rim.add_vertex({1.0, 1.0});
  rim.add_simplex({0, 1});
  rim.add_simplex({2, 3});
  auto same = radial_project_face(rim, lo, hi, xi);
  CHECK(measure(same) == doctest::Approx(measure(rim)).epsilon(1e-15));
  std::set<std::array<double, 2>> a, b;
  for (const auto& v : rim.vertices) a.insert({v[0], v[1]});
  for (const auto& v : same.vertices) b.insert({v[0], v[1]});
  CHECK(a == b);

  CHECK_THROWS_AS(radial_project_face(segment({0.2, 0.8}, {0.9, 0.1}), lo, hi, PointN{0.5, 0.5}), DomainError);
  CHECK_THROWS_AS(radial_project_face(segment({0, 0}, {1, 1}), lo, hi, PointN{0.1, 0.5}), DomainError);
}

TEST_CASE("radial projection of a triangle in a cube matches ray pushforward") {
  const PointN lo{0, 0, 0}, hi{1, 1, 1}, xi{0.4, 0.55, 0.6};
  EmbeddedMesh tri(1, 3);
  // Edge pushforward on a 3-d face (segment content), checked against sampling.
  for (auto [a, b] : std::vector<std::pair<PointN, PointN>>{{{0.1, 0.1, 0.2}, {0.9, 0.8, 0.3}},
                                                              {{0.2, 0.9, 0.9}, {0.8, 0.2, 0.95}}}) {
    auto img = radial_project_face(segment(a, b), lo, hi, xi);
    CHECK(measure(img) == doctest::Approx(pushed_length(a, b, xi, lo, hi)).epsilon(1e-4));
    for (const auto& v : img.vertices) {
      int on = 0;
      for (int i = 0; i < 3; ++i) on += v[i] == 0.0 || v[i] == 1.0;
      CHECK(on >= 1);
    }
  }
  // A 2-d piece: area of the image against a Monte Carlo-free check, the
  // image of a triangle with one vertex on the boundary stays on ∂S.
  EmbeddedMesh t(2, 3);
  t.add_vertex({0.1, 0.2, 0.3});
  t.add_vertex({0.9, 0.3, 0.2});
  t.add_vertex({0.5, 0.9, 0.9});
  t.add_simplex({0, 1, 2});
  auto img = radial_project_face(t, lo, hi, xi);
  CHECK(measure(img) > measure(t));
  for (const auto& v : img.vertices) {
    int on = 0;
    for (int i = 0; i < 3; ++i) on += v[i] == 0.0 || v[i] == 1.0;
    CHECK(on >= 1);
  }
}

TEST_CASE("center selection") {
  const PointN lo{0, 0}, hi{1, 1};
  auto diag = segment({0, 0}, {1, 1});
  auto c = choose_center(diag, lo, hi, Strategy::Chebyshev, 64, 3);
  CHECK(c.ratio <= 2.0);
  // Exhaustive ξ grid over the middle half: every valid ξ gives ratio √2.
  double best = 1e9;
  for (int i = 0; i <= 40; ++i)
    for (int j = 0; j <= 40; ++j) {
      const PointN xi{0.25 + 0.5 * i / 40, 0.25 + 0.5 * j / 40};
      if (i == j) continue;
      best = std::min(best, measure(radial_project_face(diag, lo, hi, xi)) / std::sqrt(2.0));
    }
  CHECK(c.ratio == doctest::Approx(best).epsilon(1e-9));
  CHECK(c.center[0] >= 0.25);
  CHECK(c.center[0] <= 0.75);

  auto corner = segment({0.02, 0.05}, {0.1, 0.01});
  auto far = choose_center(corner, lo, hi, Strategy::Far, 0, 0);
  CHECK(far.center[0] > 0.5);
  CHECK(far.center[1] > 0.5);
  // Distance-field argmax oracle on a finer grid.
  double best_dist = 0.0;
  for (int i = 0; i <= 200; ++i)
    for (int j = 0; j <= 200; ++j) {
      const PointN xi{0.25 + 0.5 * i / 200, 0.25 + 0.5 * j / 200};
      best_dist = std::max(best_dist, point_simplex_distance(xi, corner.corners(0)));
    }
  CHECK(far.distance >= best_dist - 0.5 / 17 * std::sqrt(2.0));
  CHECK(far.bound == doctest::Approx(std::sqrt(2.0) / far.distance));

  EmbeddedMesh vertex_only(1, 2);
  vertex_only.add_vertex({0, 0});
  auto v = choose_center(vertex_only, lo, hi, Strategy::Chebyshev, 8, 1);
  CHECK(v.ratio == 0.0);

  auto a = choose_center(diag, lo, hi, Strategy::Chebyshev, 16, 99);
  auto b = choose_center(diag, lo, hi, Strategy::Chebyshev, 16, 99);
  CHECK(a.center == b.center);
  CHECK_THROWS_AS(choose_center(diag, PointN{0, 0}, PointN{1, 0}, Strategy::Far, 1, 0), DomainError);
  CHECK_THROWS_AS(strategy_from_string("median"), ConfigError);
}

TEST_CASE("content already in the skeleton is unchanged") {
  DyadicGrid g(PointN(2), 1.0, 4);
  EmbeddedMesh m(1, 2);
  m.add_vertex({0.25, 0.0});
  m.add_vertex({0.25, 0.5});
  m.add_vertex({0.75, 0.5});
  m.add_simplex({0, 1});
  m.add_simplex({1, 2});
  auto r = project_to_skeleton(m, g);
  CHECK(measure(r.mesh) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.empirical_constant <= 1.0 + 1e-12);
  for (const auto& c : r.choices) CHECK(c.ratio <= 1.0);
  CHECK(r.locality_ok);
  std::set<std::array<double, 2>> pts;
  for (const auto& v : r.mesh.vertices) pts.insert({v[0], v[1]});
  CHECK(pts.count({0.25, 0.0}) == 1);
  CHECK(pts.count({0.75, 0.5}) == 1);
  for (const auto& v : r.mesh.vertices) CHECK((v[0] == 0.25 || v[1] == 0.5 || v[0] == 0.5));
}

TEST_CASE("tilted segment on a 2x2 grid") {
  DyadicGrid g(PointN(2), 1.0, 2);
  const PointN a{0.1, 0.2}, b{0.9, 0.75};
  auto r = project_to_skeleton(segment(a, b), g, {Strategy::Chebyshev, 32, 5});
  CHECK(skeleton_residual(r.mesh, g, 1) <= 1e-9 * g.cell());
  CHECK(r.locality_ok);
  CHECK(r.trajectory_violations == 0);
  CHECK(r.error_bound == 0.0);
  CHECK(measure(r.mesh) <= r.empirical_constant * distance(a, b) * (1 + 1e-12));
  CHECK(r.stages.size() == 1);
  CHECK(r.stages[0].dimension == 2);
  CHECK(r.stages[0].faces == 3);
  // Oracle: per-cell dense pushforward with the recorded centers.
  double oracle = 0.0;
  for (const auto& c : r.choices) {
    const PointN lo = g.face_low(c.face);
    const PointN hi{lo[0] + 0.5, lo[1] + 0.5};
    // Clip the segment to the cell by parameter range.
    double t0 = 0.0, t1 = 1.0;
    for (int i = 0; i < 2; ++i) {
      const double dir = b[i] - a[i];
      double ta = (lo[i] - a[i]) / dir, tb = (hi[i] - a[i]) / dir;
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    REQUIRE(t0 < t1);
    oracle += pushed_length(lerp(a, b, t0), lerp(a, b, t1), c.center, lo, hi);
  }
  CHECK(measure(r.mesh) == doctest::Approx(oracle).epsilon(1e-3));
  double out_total = 0.0;
  for (const auto& row : r.cubes) {
    CHECK(row.ok);
    out_total += row.image;
  }
  CHECK(out_total == doctest::Approx(measure(r.mesh)).epsilon(1e-12));
}

TEST_CASE("grid-parallel disk keeps its measure") {
  DyadicGrid g(PointN(3), 1.0, 2);
  auto disk = sector_fan(PointN{0.5, 0.5, 0.5}, PointN{1, 0, 0}, PointN{0, 1, 0}, 2 * std::numbers::pi, 0.3, 64);
  auto r = project_to_skeleton(disk, g);
  CHECK(measure(r.mesh) <= measure(disk) * (1 + 1e-6));
  CHECK(measure(r.mesh) == doctest::Approx(measure(disk)).epsilon(1e-12));
  CHECK(skeleton_residual(r.mesh, g, 2) <= 1e-9 * g.cell());

  // Off-plane disk: measure grows by a bounded factor, stays in the 2-skeleton.
  auto tilted = sector_fan(PointN{0.45, 0.5, 0.4}, PointN{1, 0, 0.3}, PointN{0, 1, -0.2}, 2 * std::numbers::pi, 0.3, 48);
  auto t = project_to_skeleton(tilted, g, {Strategy::Chebyshev, 16, 1});
  CHECK(skeleton_residual(t.mesh, g, 2) <= 1e-9 * g.cell());
  CHECK(t.locality_ok);
  CHECK(t.trajectory_violations == 0);
  CHECK(measure(t.mesh) > 0.0);
}

TEST_CASE("content outside the cube is untouched") {
  DyadicGrid g(PointN{0.0, 0.0}, 1.0, 4);
  EmbeddedMesh m(1, 2);
  m.add_vertex({-0.5, 0.3});
  m.add_vertex({1.5, 0.61});
  m.add_vertex({-0.3, -0.2});
  m.add_vertex({-0.1, 1.7});
  m.add_simplex({0, 1});
  m.add_simplex({2, 3});
  m.add_simplex({0, 2});
  auto r = project_to_skeleton(m, g, {Strategy::Far, 0, 0});
  std::set<std::array<double, 2>> out;
  for (const auto& v : r.mesh.vertices) out.insert({v[0], v[1]});
  for (const auto& v : m.vertices) CHECK(out.count({v[0], v[1]}) == 1);
  CHECK(skeleton_residual(r.mesh, g, 1) <= 1e-9 * g.cell());
  // The part outside Q keeps its length exactly.
  CHECK(measure(r.outside) == doctest::Approx(measure(m) - 1.0 * std::hypot(1.0, 0.31 / 2)).epsilon(1e-12));
}

TEST_CASE("random meshes land in the skeleton with local control") {
  std::mt19937_64 rng(2024);
  int runs = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 2;
    const int d = n == 2 ? 1 : 1 + (trial / 2) % 2;
    const int N = 2 + trial % 3;
    const std::uint32_t periodic = trial % 5 == 4 ? (1u << n) - 1 : 0;
    DyadicGrid g(PointN(n), 1.0, N, periodic);
    auto mesh = random_mesh(rng, d, n, 3, -0.2, 1.2);
    ProjectionOptions opts{trial % 3 == 0 ? Strategy::Far : Strategy::Chebyshev, 8, static_cast<std::uint64_t>(trial)};
    auto r = project_to_skeleton(mesh, g, opts);
    CHECK(skeleton_residual(r.mesh, g, d) <= 1e-9 * g.cell());
    CHECK(r.locality_ok);
    CHECK(r.trajectory_violations == 0);
    double inside = 0.0;
    for (const auto& p : r.input) inside += polytope_measure(p.poly, d);
    double imaged = 0.0;
    for (const auto& p : r.pieces) imaged += polytope_measure(p.poly, d);
    CHECK(imaged <= r.empirical_constant * inside * (1 + 1e-9) + 1e-12);
    for (const auto& row : r.cubes) CHECK(row.ok);
    if (periodic)
      for (const auto& v : r.mesh.vertices)
        for (int i = 0; i < n; ++i) {
          CHECK(v[i] >= 0.0);
          CHECK(v[i] <= 1.0);
        }
    auto again = project_to_skeleton(mesh, g, opts);
    CHECK(same_mesh(r.mesh, again.mesh));
    ++runs;
  }
  CHECK(runs == 100);
}

TEST_CASE("extra collapse") {
  DyadicGrid g(PointN(3), 1.0, 2);
  const double s = g.cell();
  EmbeddedMesh tiny(2, 3);
  const double h = std::sqrt(2e-6) * s;
  tiny.add_vertex({0.3, 0.2, 0.35});
  tiny.add_vertex({0.3 + h, 0.2, 0.35});
  tiny.add_vertex({0.3, 0.2 + h, 0.35});
  tiny.add_simplex({0, 1, 2});
  CHECK(measure(tiny) == doctest::Approx(1e-6 * s * s));
  auto r = project_to_skeleton(tiny, g, {Strategy::Chebyshev, 16, 4});
  CHECK(interior_measure(r.mesh, g) > 0.0);
  auto c = extra_collapse(r, g);
  CHECK(c.collapsed);
  CHECK(interior_measure(c.mesh, g) <= 1e-12);
  CHECK(skeleton_residual(c.mesh, g, 1) <= 1e-9 * s);

  // One interior 2-face filled: no free center.
  auto full = quad_patch(PointN{0.0, 0.0, 0.5}, PointN{0.5, 0, 0}, PointN{0, 0.5, 0}, 2, 2);
  auto rf = project_to_skeleton(full, g);
  auto cf = extra_collapse(rf, g);
  CHECK_FALSE(cf.collapsed);
  CHECK(same_mesh(cf.mesh, rf.mesh));

  auto re = project_to_skeleton(EmbeddedMesh(2, 3), g);
  auto ce = extra_collapse(re, g);
  CHECK(ce.collapsed);
  CHECK(ce.mesh.empty());

  // Segments collapse to points entirely.
  DyadicGrid g2(PointN(2), 1.0, 4);
  auto rs = project_to_skeleton(segment({0.3, 0.33}, {0.31, 0.34}), g2);
  auto cs = extra_collapse(rs, g2);
  CHECK(cs.collapsed);
  CHECK(interior_measure(cs.mesh, g2) == 0.0);
}

TEST_CASE("boundary faces of Q stay fixed") {
  DyadicGrid g(PointN(3), 1.0, 2);
  // A segment lying in the face z = 0 of Q but crossing open 2-faces there.
  auto r = project_to_skeleton(segment({0.1, 0.2, 0.0}, {0.4, 0.35, 0.0}), g);
  CHECK(measure(r.mesh) == doctest::Approx(std::hypot(0.3, 0.15)).epsilon(1e-14));
  for (const auto& v : r.mesh.vertices) CHECK(v[2] == 0.0);
}
