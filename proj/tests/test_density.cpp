#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "plateau/density.hpp"
#include "plateau/shapes.hpp"
#include "support.hpp"

using namespace plateau;
using namespace plateau::geom;
using namespace plateau::density;
namespace pd = plateau::density;

namespace {

constexpr double kPi = std::numbers::pi;

EmbeddedMesh plane_patch(double half, int cells = 4) {
  return quad_patch(PointN{-half, -half, 0.0}, PointN{2 * half, 0.0, 0.0}, PointN{0.0, 2 * half, 0.0}, cells, cells);
}

/// Half-plane {y ≥ 0, z = 0} truncated to a box.
EmbeddedMesh half_plane(double half) {
  return quad_patch(PointN{-half, 0.0, 0.0}, PointN{2 * half, 0.0, 0.0}, PointN{0.0, half, 0.0}, 6, 3);
}

/// Area of a disk of radius r on the side of a chord at signed distance t from its center.
double disk_side_area(double r, double t) {
  if (t >= r) return kPi * r * r;
  if (t <= -r) return 0.0;
  return r * r * (kPi - std::acos(t / r)) + t * std::sqrt(r * r - t * t);
}

std::vector<double> identity3() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }

}  // namespace

TEST_CASE("cone densities") {
  const auto cat = cone_catalog();
  const PointN o(3);
  CHECK(pd::density(plane_patch(3.0), o, 1.0).value == doctest::Approx(kPi).epsilon(1e-9));
  CHECK(std::abs(pd::density(plane_patch(3.0), PointN{0.3, -0.2, 0.0}, 0.7).value - kPi) <= 1e-6);
  const auto y = catalog_entry(cat, "Y").shape.mesh(2.0);
  CHECK(std::abs(pd::density(y, o, 1.0).value - 1.5 * kPi) <= 1e-6);
  const auto t = catalog_entry(cat, "T").shape.mesh(2.0);
  CHECK(tetrahedral_density() == doctest::Approx(5.7319).epsilon(1e-4));
  CHECK(std::abs(pd::density(t, o, 1.0).value - tetrahedral_density()) <= 1e-3);
  // Oracle for the T value: six planar sectors, each of area angle/2 at r = 1.
  const double sector = std::acos(-1.0 / 3.0) / 2.0;
  CHECK(6.0 * sector == doctest::Approx(tetrahedral_density()).epsilon(1e-15));
  for (const auto& c : cat) {
    const auto m = c.shape.mesh(2.0, 3);
    CHECK(std::abs(pd::density(m, o, 1.0).value - c.density) <= 1e-3);
    CHECK(std::abs(pd::density(m, o, 0.3).value - c.density) <= 1e-3);
  }
  CHECK_THROWS_AS(pd::density(y, o, 0.0), DomainError);
  CHECK(pd::density(y, o, 1.0).error > 0.0);
}

TEST_CASE("cone distance against brute force") {
  const auto cat = cone_catalog();
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& c : cat) {
    const auto m = c.shape.mesh(4.0, 3, 720);
    for (int k = 0; k < 60; ++k) {
      const PointN q{u(rng), u(rng), u(rng)};
      double brute = 1e300;
      for (std::size_t s = 0; s < m.size(); ++s) brute = std::min(brute, point_simplex_distance(q, m.corners(s)));
      CHECK(c.shape.distance(q) == doctest::Approx(brute).epsilon(1e-4).scale(1.0));
    }
  }
}

TEST_CASE("profiles") {
  const auto cat = cone_catalog();
  const PointN o(3);
  const std::vector<double> radii{0.25, 0.5, 1.0, 1.5};
  const auto y = density_profile(catalog_entry(cat, "Y").shape.mesh(2.0), o, radii);
  for (double v : y.theta) CHECK(std::abs(v - 1.5 * kPi) <= 2e-6);
  CHECK(y.limit == y.theta.front());
  for (std::size_t i = 0; i < radii.size(); ++i) CHECK(y.adjusted[i] == y.theta[i]);

  ProfileOptions g;
  g.gauge = Gauge{0.5, 0.5, 100.0};
  g.alpha = 2.0;
  const auto adj = density_profile(plane_patch(3.0), o, radii, g);
  for (std::size_t i = 0; i < radii.size(); ++i)
    CHECK(adj.adjusted[i] ==
          doctest::Approx(adj.theta[i] * std::exp(2.0 * 0.5 * std::sqrt(2.0) * std::sqrt(radii[i]) / 0.5)));

  // Half-plane, x at distance t from the edge: π up to t, then down toward π/2.
  const double t = 0.3;
  const PointN x{0.1, t, 0.0};
  std::vector<double> ladder;
  for (double r = 0.1; r <= 2.5; r += 0.2) ladder.push_back(r);
  const auto h = density_profile(half_plane(6.0), x, ladder);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const double r = ladder[i];
    CHECK(h.theta[i] == doctest::Approx(disk_side_area(r, t) / (r * r)).epsilon(1e-6));
    if (r <= t) CHECK(std::abs(h.theta[i] - kPi) <= 1e-6);
    if (i > 0 && ladder[i - 1] >= t) CHECK(h.theta[i] < h.theta[i - 1]);
  }
  CHECK(h.theta.back() < kPi / 2 + 2 * t / ladder.back() + 1e-3);
  CHECK(h.trend == "nonincreasing");
  CHECK(h.below_unit_density);

  CHECK_THROWS_AS(density_profile(plane_patch(3.0), PointN{0, 0, 0.1}, radii), DomainError);
  CHECK_THROWS_AS(density_profile(plane_patch(3.0), o, {0.5, 0.5}), DomainError);
}

TEST_CASE("sliding functional") {
  const double t = 0.4;
  const auto gamma = make_line(PointN{0, 0, 0}, PointN{1, 0, 0});
  const SlidingContext ctx{gamma, PointN{0.2, t, 0.0}};
  std::vector<double> radii;
  for (double r = t / 4; r <= 4 * t + 1e-12; r *= 1.25) radii.push_back(r);
  const auto f = sliding_profile(half_plane(5.0), ctx, radii);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double r = radii[i];
    CHECK(std::abs(f.sliding[i] - kPi) <= 1e-2);
    // Oracle: the two terms integrated independently.
    const double shade = (kPi * r * r - disk_side_area(r, t)) / (r * r);
    CHECK(f.sliding[i] == doctest::Approx(disk_side_area(r, t) / (r * r) + shade).epsilon(1e-6));
    if (r < t) CHECK(f.sliding[i] == f.theta[i]);
  }
  // Plane through Γ: the shade overlaps E and the profile is nondecreasing.
  const auto p = sliding_profile(plane_patch(5.0, 8), ctx, radii);
  for (std::size_t i = 1; i < radii.size(); ++i) CHECK(p.sliding[i] >= p.sliding[i - 1] - 1e-9);
  CHECK(p.sliding.back() > kPi + 1.0);

  EmbeddedMesh curve(1, 3);
  curve.add_vertex({0, 0.4, 0});
  curve.add_vertex({1, 0.4, 0});
  curve.add_simplex({0, 1});
  CHECK_THROWS_AS(sliding_profile(curve, ctx, radii), DomainError);
  CHECK_THROWS_AS(shade_patch(SlidingContext{gamma, PointN{0.5, 0, 0}}, 1.0), DomainError);
}

TEST_CASE("cone slice identity") {
  const auto cat = cone_catalog();
  const PointN o(3);
  auto y = cone_slice_check(catalog_entry(cat, "Y").shape.mesh(2.0), o, 1.0, 1e-2);
  CHECK(y.inside == doctest::Approx(1.5 * kPi).epsilon(1e-4));
  CHECK(y.slice == doctest::Approx(3 * kPi).epsilon(1e-6));
  CHECK(y.residual <= 1e-3);
  auto p = cone_slice_check(plane_patch(3.0), o, 1.0);
  CHECK(p.residual <= 1e-6);
  auto t = cone_slice_check(catalog_entry(cat, "T").shape.mesh(2.0), o, 1.0, 1e-2);
  CHECK(t.residual <= 1e-3);
  auto l = cone_slice_check(catalog_entry(cat, "Y1").shape.mesh(2.0), o, 0.5);
  CHECK(l.slice == 3.0);
  CHECK(l.residual <= 1e-12);
}

TEST_CASE("blow-ups") {
  const auto m = plane_patch(1.0, 3);
  const auto same = blowup(m, PointN(3), 1.0);
  CHECK(same.vertices == m.vertices);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  EmbeddedMesh tri(2, 3);
  for (int k = 0; k < 3; ++k) tri.add_vertex({u(rng), u(rng), u(rng)});
  tri.add_simplex({0, 1, 2});
  for (double r : {0.25, 0.5, 3.0})
    CHECK(measure(blowup(tri, PointN{0.1, 0.2, 0.3}, r)) == doctest::Approx(measure(tri) / (r * r)).epsilon(1e-12));
  CHECK_THROWS_AS(blowup(tri, PointN(3), -1.0), DomainError);

  // A C¹ graph flattens onto its tangent plane under blow-up.
  const auto graph = height_field(-1.0, -1.0, 2.0, 256, [](double a, double b) { return a * a + b * b; });
  const auto tangent = plane_patch(8.0, 2);
  double prev = 1e9;
  for (int k = 1; k <= 5; ++k) {
    const double r = std::ldexp(1.0, -k);
    const double dist = local_hausdorff_distance(blowup(graph, PointN(3), r), tangent, Ball{PointN(3), 1.0});
    // Each side is at most the height r·|x'|² ≤ r inside the unit ball.
    CHECK(dist <= 2.2 * r);
    CHECK(dist < prev);
    prev = dist;
  }
}

TEST_CASE("big projection") {
  const PointN o(3);
  const AffinePlane plane{o, {PointN{1, 0, 0}, PointN{0, 1, 0}}};
  const double r = 1.0, tau = 0.2, eps = 0.05;
  auto flat = big_projection_check(plane_patch(2.0), o, r, plane, eps, tau);
  CHECK(flat.pass);
  CHECK(flat.coverage == 1.0);
  CHECK(flat.cells > 100);

  auto holed = annulus_patch(o, PointN{1, 0, 0}, PointN{0, 1, 0}, tau * r / 2, 2.0, 24, 96);
  auto hole = big_projection_check(holed, o, r, plane, eps, tau);
  CHECK_FALSE(hole.pass);
  CHECK(hole.coverage < 1.0);
  REQUIRE_FALSE(hole.uncovered.empty());
  for (const auto& c : hole.uncovered) CHECK(norm(c) <= tau * r / 2 + 1e-12);
  // Raster oracle: the cells whose centers fall strictly inside the inner polygon.
  std::size_t expected = 0;
  const double h = tau * r / 8;
  for (int i = -8; i < 8; ++i)
    for (int j = -8; j < 8; ++j) {
      const double cx = (i + 0.5) * h, cy = (j + 0.5) * h;
      // Inner boundary is the regular 96-gon of circumradius τr/2.
      const double ang = std::atan2(cy, cx), step = 2 * kPi / 96;
      const double local = std::fmod(ang + 2 * kPi, step) - step / 2;
      const double apothem_dir = tau * r / 2 * std::cos(step / 2) / std::cos(local);
      if (std::hypot(cx, cy) < apothem_dir) ++expected;
    }
  CHECK(hole.uncovered.size() == expected);

  auto wavy = height_field(-2.0, -2.0, 4.0, 160, [&](double a, double) { return eps * r * 0.5 * std::sin(6 * a); });
  auto w = big_projection_check(wavy, o, r, plane, eps, tau);
  CHECK(w.pass);
  CHECK(w.max_offset <= eps);

  auto tall = height_field(-2.0, -2.0, 4.0, 40, [&](double a, double) { return 0.3 * std::sin(3 * a); });
  CHECK_THROWS_AS(big_projection_check(tall, o, r, plane, eps, tau), DomainError);
}

TEST_CASE("classification of catalog cones") {
  const auto cat = cone_catalog();
  const PointN o(3);
  const std::vector<double> ladder{0.25, 0.5, 1.0};
  for (const char* tag : {"P", "Y", "T"}) {
    const auto mesh = catalog_entry(cat, tag).shape.mesh(3.0);
    const auto c = classify_point(mesh, o, cat, ladder);
    CHECK(c.tag == tag);
    CHECK(c.residual <= 0.05);
    CHECK(c.flat);
  }
  // A point on an edge ray of T sees three faces meeting at 2π/3.
  const auto t = catalog_entry(cat, "T").shape.mesh(3.0);
  const PointN edge = PointN{1, 1, 1} * (0.8 / std::sqrt(3.0));
  const auto ce = classify_point(t, edge, cat, {0.05, 0.1, 0.15});
  CHECK(ce.tag == "Y");
  CHECK(ce.residual <= 0.05);
  // Interior point of a face.
  const auto& w = catalog_entry(cat, "T").shape.wedges[0];
  const PointN face = (w.a * std::cos(w.angle / 2) + w.m * std::sin(w.angle / 2)) * 1.0;
  const auto cf = classify_point(t, face, cat, {0.05, 0.1, 0.15});
  CHECK(cf.tag == "P");

  // Curves in the plane.
  const auto y1 = catalog_entry(cat, "Y1").shape.mesh(2.0, 2);
  const auto c1 = classify_point(y1, PointN(2), cat, {0.25, 0.5, 1.0});
  CHECK(c1.tag == "Y1");
  CHECK(c1.residual <= 0.05);

  // A right-angle corner has density 2 but is not a line.
  EmbeddedMesh corner(1, 2);
  corner.add_vertex({0, 0});
  corner.add_vertex({1.5, 0});
  corner.add_vertex({0, 1.5});
  corner.add_simplex({0, 1});
  corner.add_simplex({0, 2});
  const auto cc = classify_point(corner, PointN(2), cat, {0.25, 0.5, 1.0});
  CHECK(cc.tag == "unclassified");
  CHECK(cc.residual > 0.1);

  // Half-plane at its edge: density π/2 matches only the boundary cone H.
  const auto hp = half_plane(3.0);
  const auto ch = classify_point(hp, PointN{0.0, 0.0, 0.0}, cat, ladder);
  CHECK(ch.tag == "unclassified");
  ClassifyOptions with_gamma;
  with_gamma.boundary = make_line(PointN(3), PointN{1, 0, 0});
  CHECK(classify_point(hp, PointN(3), cat, ladder, with_gamma).tag == "H");
}

TEST_CASE("classification under rigid motions") {
  const auto cat = cone_catalog();
  const std::vector<double> ladder{0.25, 0.5, 1.0};
  std::mt19937_64 rng(77);
  const auto y = catalog_entry(cat, "Y").shape.mesh(3.0);
  const auto base = classify_point(y, PointN(3), cat, ladder);
  for (int k = 0; k < 3; ++k) {
    const auto rot = testing_support::random_rotation(3, rng);
    const PointN shift{0.3 * k, -0.2, 0.1};
    const auto moved = rigid_motion(y, rot, shift);
    const auto c = classify_point(moved, shift, cat, ladder);
    CHECK(c.tag == base.tag);
    CHECK(c.residual <= 0.05);
    // The fitted orientation is the conjugate: rot·R_base·(symmetry); compare cone sets instead.
    const auto placed = placed_cone(catalog_entry(cat, "Y"), c.rotation, shift, 2.0);
    CHECK(local_hausdorff_distance(moved, placed, Ball{shift, 1.0}) <= 0.05);
  }
  (void)identity3;
}
