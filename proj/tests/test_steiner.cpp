#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "plateau/steiner.hpp"
#include "support.hpp"

using namespace plateau;
using namespace plateau::steiner;
using geom::PointN;

namespace {

std::vector<Terminal> square_instance() {
  return {{PointN{0, 0}, 1}, {PointN{1, 0}, 1}, {PointN{1, 1}, 1}, {PointN{0, 1}, -3}};
}

double ternary_fermat(const std::vector<PointN>& pts) {
  auto total = [&](double x, double y) {
    double s = 0.0;
    for (const auto& p : pts) s += std::hypot(p[0] - x, p[1] - y);
    return s;
  };
  auto best_y = [&](double x) {
    double lo = -2, hi = 2;
    for (int it = 0; it < 200; ++it) {
      const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
      (total(x, m1) < total(x, m2) ? hi : lo) = (total(x, m1) < total(x, m2) ? m2 : m1);
    }
    return total(x, 0.5 * (lo + hi));
  };
  double lo = -2, hi = 2;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
    if (best_y(m1) < best_y(m2))
      hi = m2;
    else
      lo = m1;
  }
  return best_y(0.5 * (lo + hi));
}

}  // namespace

TEST_CASE("Kirchhoff checks") {
  const std::vector<Terminal> pair{{PointN{0, 0}, 1}, {PointN{1, 0}, -1}};
  MultiplicityNet net;
  net.nodes = {PointN{0, 0}, PointN{1, 0}};
  net.terminal_count = 2;
  net.edges = {{0, 1, 1}};
  CHECK(check_kirchhoff(net, pair).ok);
  net.edges[0].multiplicity = 2;
  const auto rep = check_kirchhoff(net, pair);
  CHECK_FALSE(rep.ok);
  CHECK(rep.violations.size() == 2);

  // Y-net: two unit sources into a center, double edge out to the sink.
  const std::vector<Terminal> y{{PointN{0, 0}, 1}, {PointN{1, 0}, 1}, {PointN{0.5, 1}, -2}};
  MultiplicityNet yn;
  yn.nodes = {y[0].position, y[1].position, y[2].position, PointN{0.5, 0.3}};
  yn.terminal_count = 3;
  yn.edges = {{0, 3, 1}, {1, 3, 1}, {3, 2, 2}};
  // Oracle: direct evaluation of outflow − inflow at the four nodes.
  const int expected[4] = {1, 1, -2, 0};
  for (int z = 0; z < 4; ++z) {
    int bal = 0;
    for (const auto& e : yn.edges) bal += (e.a == static_cast<std::uint32_t>(z) ? e.multiplicity : 0) -
                                         (e.b == static_cast<std::uint32_t>(z) ? e.multiplicity : 0);
    CHECK(bal == expected[z]);
  }
  CHECK(check_kirchhoff(yn, y).ok);
}

TEST_CASE("objective formulas") {
  MultiplicityNet net;
  net.nodes = {PointN{0, 0}, PointN{1, 0}, PointN{0, 5}};
  net.terminal_count = 3;
  net.edges = {{0, 1, 3}};
  CHECK(objective(net, Objective::Size) == doctest::Approx(1.0));
  CHECK(objective(net, Objective::Mass) == doctest::Approx(3.0));
  CHECK(objective(net, Objective::MBeta, 0.5) == doctest::Approx(std::sqrt(3.0)));
  net.edges.push_back({0, 2, 0});
  CHECK(objective(net, Objective::Size) == doctest::Approx(1.0));
  CHECK(objective(net, Objective::MBeta, 0.5) == doctest::Approx(std::sqrt(3.0)));
  CHECK_THROWS_AS(objective(net, Objective::MBeta, 1.5), DomainError);
}

TEST_CASE("full topology counts") {
  CHECK(full_topologies(2).size() == 1);
  CHECK(full_topologies(3).size() == 1);
  CHECK(full_topologies(4).size() == 3);
  CHECK(full_topologies(5).size() == 15);
  CHECK(full_topologies(6).size() == 105);
  for (const auto& t : full_topologies(6)) {
    CHECK(t.size() == 2 * 6 - 3);
    std::vector<int> deg(10, 0);
    for (auto [u, v] : t) ++deg[u], ++deg[v];
    for (int i = 0; i < 6; ++i) CHECK(deg[static_cast<std::size_t>(i)] == 1);
    for (int i = 6; i < 10; ++i) CHECK(deg[static_cast<std::size_t>(i)] == 3);
  }
}

TEST_CASE("square instance under the size objective") {
  const auto terms = square_instance();
  const auto sol = solve_steiner(terms, Objective::Size);
  CHECK(std::abs(objective(sol.net, Objective::Size) - (1.0 + std::sqrt(3.0))) <= 1e-6);
  CHECK(sol.net.steiner_count() == 2);
  CHECK(sol.certificate.scores.size() == 3);
  CHECK(sol.certificate.tied.size() == 2);
  CHECK(check_kirchhoff(sol.net, terms).ok);
  const auto audit = angle_audit(sol.net);
  CHECK(audit.pass);

  // Oracle: explicit coordinates relative to the center, horizontal or vertical axis.
  const double off = 0.5 - 1.0 / (2.0 * std::sqrt(3.0));
  const double oracle = 4.0 * std::hypot(0.5 - off, 0.5) + 2.0 * off;
  CHECK(std::abs(objective(sol.net, Objective::Size) - oracle) <= 1e-9);
  const auto& axis = sol.certificate.steiner_axis;
  REQUIRE(axis.dim() == 2);
  CHECK(std::abs(std::abs(axis[0]) + std::abs(axis[1]) - 1.0) <= 1e-6);
  for (std::size_t s = sol.net.terminal_count; s < sol.net.nodes.size(); ++s) {
    const PointN rel = sol.net.nodes[s] - PointN{0.5, 0.5};
    const double along = std::max(std::abs(rel[0]), std::abs(rel[1]));
    const double across = std::min(std::abs(rel[0]), std::abs(rel[1]));
    CHECK(along == doctest::Approx(off).epsilon(1e-6));
    CHECK(across <= 1e-6);
  }
}

TEST_CASE("opposite-corner unit pairing decouples into two segments") {
  const std::vector<Terminal> terms{{PointN{0, 0}, 1}, {PointN{1, 0}, 1}, {PointN{1, 1}, -1}, {PointN{0, 1}, -1}};
  const auto sol = solve_steiner(terms, Objective::Size);
  CHECK(objective(sol.net, Objective::Size) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(sol.net.steiner_count() == 0);
  CHECK(check_kirchhoff(sol.net, terms).ok);
}

TEST_CASE("size and mass minimizers differ on the square") {
  const auto terms = square_instance();
  const auto by_size = solve_steiner(terms, Objective::Size);
  const auto by_mass = solve_steiner(terms, Objective::Mass);
  const double size_of_size = objective(by_size.net, Objective::Size);
  const double mass_of_size = objective(by_size.net, Objective::Mass);
  const double size_of_mass = objective(by_mass.net, Objective::Size);
  const double mass_of_mass = objective(by_mass.net, Objective::Mass);
  CHECK(size_of_size <= size_of_mass + 1e-9);
  CHECK(mass_of_mass <= mass_of_size + 1e-9);
  CHECK(mass_of_mass < mass_of_size - 1e-3);
  // Mass with sink charge −3: all three sources route straight to the sink.
  CHECK(mass_of_mass == doctest::Approx(2.0 + std::sqrt(2.0)).epsilon(1e-6));
  CHECK(check_kirchhoff(by_mass.net, terms).ok);
}

TEST_CASE("equilateral triangle") {
  const double h = std::sqrt(3.0) / 2;
  const std::vector<Terminal> terms{{PointN{0, 0}, 1}, {PointN{1, 0}, 1}, {PointN{0.5, h}, -2}};
  const auto sol = solve_steiner(terms, Objective::Size);
  CHECK(std::abs(objective(sol.net, Objective::Size) - std::sqrt(3.0)) <= 1e-6);
  CHECK(std::abs(ternary_fermat({terms[0].position, terms[1].position, terms[2].position}) - std::sqrt(3.0)) <= 1e-6);
  CHECK(check_kirchhoff(sol.net, terms).ok);
  CHECK(angle_audit(sol.net).pass);
}

TEST_CASE("two terminals give the segment") {
  const std::vector<Terminal> terms{{PointN{0, 0, 0}, 2}, {PointN{1, 2, 2}, -2}};
  const auto sol = solve_steiner(terms, Objective::Size);
  CHECK(objective(sol.net, Objective::Size) == doctest::Approx(3.0));
  CHECK(angle_audit(sol.net).pass);
  CHECK(sol.net.edges.size() == 1);
}

TEST_CASE("infeasible and invalid charges") {
  const std::vector<Terminal> bad{{PointN{0, 0}, 1}, {PointN{1, 0}, 1}};
  CHECK_THROWS_AS(solve_steiner(bad, Objective::Size), DomainError);
  const std::vector<Terminal> zero{{PointN{0, 0}, 0}, {PointN{1, 0}, 0}};
  CHECK_THROWS_AS(solve_steiner(zero, Objective::Size), DomainError);
}

TEST_CASE("perturbed square net fails the angle audit") {
  auto sol = solve_steiner(square_instance(), Objective::Size);
  sol.net.nodes[sol.net.terminal_count][1] += 0.01;
  const auto audit = angle_audit(sol.net);
  CHECK_FALSE(audit.pass);
  // Oracle: recompute the worst angle directly.
  double worst = 0.0;
  const auto s = static_cast<std::uint32_t>(sol.net.terminal_count);
  std::vector<PointN> dirs;
  for (const auto& e : sol.net.edges) {
    if (e.a == s) dirs.push_back(sol.net.nodes[e.b] - sol.net.nodes[s]);
    if (e.b == s) dirs.push_back(sol.net.nodes[e.a] - sol.net.nodes[s]);
  }
  for (std::size_t i = 0; i < dirs.size(); ++i)
    for (std::size_t j = i + 1; j < dirs.size(); ++j) {
      const double c = geom::dot(dirs[i], dirs[j]) / (geom::norm(dirs[i]) * geom::norm(dirs[j]));
      worst = std::max(worst, std::abs(std::acos(c) - 2 * std::numbers::pi / 3));
    }
  CHECK(audit.max_deviation >= worst - 1e-12);
  CHECK(worst > 1e-3);
}

TEST_CASE("random instances: Kirchhoff, star bound, first variation, rigid motion") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 3 + trial % 4;
    std::vector<Terminal> terms;
    int total = 0;
    for (int i = 0; i < n - 1; ++i) {
      const int q = (i % 2 == 0) ? 1 + (trial % 2) : -1;
      terms.push_back({PointN{u(rng), u(rng)}, q});
      total += q;
    }
    if (total == 0) {
      terms.front().charge += 1;
      total += 1;
    }
    terms.push_back({PointN{u(rng), u(rng)}, -total});
    const auto sol = solve_steiner(terms, Objective::Size);
    CHECK(check_kirchhoff(sol.net, terms).ok);
    const double best = objective(sol.net, Objective::Size);
    CHECK(best <= sol.certificate.star_score + 1e-12);

    for (std::size_t s = sol.net.terminal_count; s < sol.net.nodes.size(); ++s)
      for (int k = 0; k < 8; ++k) {
        MultiplicityNet moved = sol.net;
        const double phi = k * std::numbers::pi / 4;
        moved.nodes[s] += PointN{1e-4 * std::cos(phi), 1e-4 * std::sin(phi)};
        CHECK(objective(moved, Objective::Size) >= best - 1e-8);
      }

    const auto rot = testing_support::random_rotation(2, rng);
    std::vector<Terminal> moved_terms = terms;
    for (auto& t : moved_terms) t.position = testing_support::apply(rot, t.position) + PointN{3.0, -1.0};
    const double moved_best = objective(solve_steiner(moved_terms, Objective::Size).net, Objective::Size);
    CHECK(std::abs(moved_best - best) <= 1e-9 * best);
  }
}

TEST_CASE("M_beta with equal multiplicities meets at 120 degrees") {
  const double h = std::sqrt(3.0) / 2;
  const std::vector<Terminal> terms{{PointN{0, 0}, 1}, {PointN{2, 0}, 1}, {PointN{1, 2 * h + 0.3}, -1},
                                    {PointN{1, -0.7}, -1}};
  const auto sol = solve_steiner(terms, Objective::MBeta, 0.5);
  CHECK(check_kirchhoff(sol.net, terms).ok);
  bool equal = true;
  for (const auto& e : sol.net.edges) equal = equal && e.multiplicity == sol.net.edges[0].multiplicity;
  if (equal) CHECK(angle_audit(sol.net).pass);
}

TEST_CASE("eight terminals run exhaustively") {
  std::vector<Terminal> terms;
  for (int i = 0; i < 8; ++i) {
    const double t = 2 * std::numbers::pi * i / 8;
    terms.push_back({PointN{std::cos(t), std::sin(t)}, i < 7 ? 1 : -7});
  }
  const auto sol = solve_steiner(terms, Objective::Size);
  CHECK(sol.certificate.scores.size() == 10395);
  CHECK(check_kirchhoff(sol.net, terms).ok);
  CHECK(objective(sol.net, Objective::Size) <= sol.certificate.star_score);
}
