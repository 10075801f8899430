// Runs the eleven acceptance criteria at their stated tolerances and prints
// one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "../support.hpp"
#include "plateau/cli.hpp"
#include "plateau/density.hpp"
#include "plateau/errors.hpp"
#include "plateau/ff.hpp"
#include "plateau/io.hpp"
#include "plateau/minimizer.hpp"
#include "plateau/shapes.hpp"
#include "plateau/steiner.hpp"

using namespace plateau;
using geom::EmbeddedMesh;
using geom::PointN;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

/// Failed checks of the current criterion, as short notes.
struct Checks {
  std::vector<std::string> failed;
  std::string info;
  void need(bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  }
  void note(const std::string& s) { info += (info.empty() ? "" : "; ") + s; }
};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void criterion(int id, const std::string& title, const std::function<void(Checks&)>& body) {
  Checks c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failed.push_back(std::string("threw: ") + e.what());
  }
  const double secs = seconds_since(t0);
  const bool ok = c.failed.empty();
  if (!ok) ++failures;
  std::printf("%s %2d %s (%.2f s)%s%s\n", ok ? "PASS" : "FAIL", id, title.c_str(), secs,
              c.info.empty() ? "" : " | ", c.info.c_str());
  for (const auto& f : c.failed) std::printf("       - %s\n", f.c_str());
  std::fflush(stdout);
}

EmbeddedMesh plane_patch(double half, int cells = 4) {
  return geom::quad_patch(PointN{-half, -half, 0.0}, PointN{2 * half, 0.0, 0.0}, PointN{0.0, 2 * half, 0.0}, cells,
                          cells);
}

EmbeddedMesh half_plane(double half) {
  return geom::quad_patch(PointN{-half, 0.0, 0.0}, PointN{2 * half, 0.0, 0.0}, PointN{0.0, half, 0.0}, 6, 3);
}

EmbeddedMesh random_mesh(std::mt19937_64& rng, int d, int n, int count, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  EmbeddedMesh m(d, n);
  for (int t = 0; t < count; ++t) {
    geom::Simplex s{};
    for (int k = 0; k <= d; ++k) {
      PointN p(n);
      for (int i = 0; i < n; ++i) p[i] = u(rng);
      s[static_cast<std::size_t>(k)] = m.add_vertex(p);
    }
    m.add_simplex(s);
  }
  return m;
}

std::vector<int> node_degrees(const steiner::MultiplicityNet& net) {
  std::vector<int> deg(net.nodes.size(), 0);
  for (const auto& e : net.edges)
    if (e.multiplicity != 0) {
      ++deg[e.a];
      ++deg[e.b];
    }
  return deg;
}

// ------------------------------------------------------------------ criteria

void steiner_square(Checks& c) {
  const std::vector<steiner::Terminal> terms{
      {PointN{0, 0}, 1}, {PointN{1, 0}, 1}, {PointN{1, 1}, 1}, {PointN{0, 1}, -3}};
  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = steiner::solve_steiner(terms, steiner::Objective::Size);
  const double secs = seconds_since(t0);
  const double score = steiner::objective(sol.net, steiner::Objective::Size);
  // Independent coordinates: Steiner points on the midline at 1/(2√3) from the sides.
  const double off = 0.5 - 1.0 / (2.0 * std::sqrt(3.0));
  const double oracle = 4.0 * std::hypot(0.5 - off, 0.5) + 2.0 * off;
  c.need(std::abs(oracle - (1 + std::sqrt(3.0))) <= 1e-12, "oracle formula");
  c.need(std::abs(score - (1 + std::sqrt(3.0))) <= 1e-6, "size " + fmt(score));
  c.need(sol.net.steiner_count() == 2, "Steiner points " + std::to_string(sol.net.steiner_count()));
  const auto deg = node_degrees(sol.net);
  for (std::size_t s = sol.net.terminal_count; s < deg.size(); ++s)
    c.need(deg[s] == 3, "Steiner node degree " + std::to_string(deg[s]));
  const auto angles = steiner::angle_audit(sol.net, 1e-4);
  c.need(angles.pass, "angle deviation " + fmt(angles.max_deviation));
  c.need(sol.certificate.scores.size() == 3, "full topologies enumerated");
  c.need(secs < 5.0, "runtime " + fmt(secs));
  c.note("size " + fmt(score) + ", max angle deviation " + fmt(angles.max_deviation) + " rad");
}

void steiner_triangle(Checks& c) {
  const double h = std::sqrt(3.0) / 2;
  const std::vector<steiner::Terminal> tri{{PointN{0, 0}, 1}, {PointN{1, 0}, 1}, {PointN{0.5, h}, -2}};
  const auto sol = steiner::solve_steiner(tri, steiner::Objective::Size);
  const double score = steiner::objective(sol.net, steiner::Objective::Size);
  c.need(std::abs(score - std::sqrt(3.0)) <= 1e-6, "size " + fmt(score));
  // Every net this run emits goes through the Kirchhoff audit.
  std::size_t audited = 0;
  auto audit = [&](std::span<const steiner::Terminal> terms, steiner::Objective kind) {
    const auto s = steiner::solve_steiner(terms, kind, 0.5);
    c.need(steiner::check_kirchhoff(s.net, terms).ok, "Kirchhoff audit failed");
    ++audited;
  };
  audit(tri, steiner::Objective::Size);
  const std::vector<steiner::Terminal> square{
      {PointN{0, 0}, 1}, {PointN{1, 0}, 1}, {PointN{1, 1}, 1}, {PointN{0, 1}, -3}};
  for (auto kind : {steiner::Objective::Size, steiner::Objective::Mass, steiner::Objective::MBeta}) audit(square, kind);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + trial % 3;
    std::vector<steiner::Terminal> terms;
    int total = 0;
    for (int k = 0; k + 1 < n; ++k) {
      const int q = 1 + static_cast<int>(rng() % 2);
      terms.push_back({PointN{u(rng), u(rng)}, q});
      total += q;
    }
    terms.push_back({PointN{u(rng), u(rng)}, -total});
    audit(terms, static_cast<steiner::Objective>(trial % 3));
  }
  c.note("size " + fmt(score) + ", " + std::to_string(audited) + " nets audited");
}

void cone_densities(Checks& c) {
  const auto cat = density::cone_catalog();
  const PointN o(3);
  auto timed = [&](const std::string& name, const std::function<double()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    const double v = f();
    c.need(seconds_since(t0) < 10.0, name + " took too long");
    return v;
  };
  const double p = timed("P", [&] { return density::density(plane_patch(3.0), o, 1.0).value; });
  const double y = timed("Y", [&] { return density::density(density::catalog_entry(cat, "Y").shape.mesh(2.0), o, 1.0).value; });
  const double t = timed("T", [&] { return density::density(density::catalog_entry(cat, "T").shape.mesh(2.0), o, 1.0).value; });
  c.need(std::abs(p - kPi) <= 1e-6, "plane " + fmt(p));
  c.need(std::abs(y - 1.5 * kPi) <= 1e-6, "Y " + fmt(y));
  c.need(std::abs(t - 3.0 * std::acos(-1.0 / 3.0)) <= 1e-3, "T " + fmt(t));

  // Half-plane, x at distance 0.3 from the edge.
  const double dist = 0.3;
  std::vector<double> ladder;
  for (double r = 0.4; r <= 3.0; r += 0.2) ladder.push_back(r);
  const auto prof = density::density_profile(half_plane(8.0), PointN{0.1, dist, 0.0}, ladder);
  bool decreasing = true;
  for (std::size_t i = 1; i < prof.theta.size(); ++i) decreasing = decreasing && prof.theta[i] < prof.theta[i - 1];
  c.need(decreasing, "half-plane profile not decreasing");
  c.need(prof.theta.front() <= kPi && prof.theta.back() > kPi / 2, "half-plane profile leaves (π/2, π]");
  // Closed form (disk side area) bounds the gap to π/2 by 2t/r.
  c.need(prof.theta.back() - kPi / 2 <= 2 * dist / ladder.back(), "half-plane not tending to π/2");
  c.note("P " + fmt(p) + ", Y " + fmt(y) + ", T " + fmt(t) + ", half-plane " + fmt(prof.theta.front()) + " → " +
         fmt(prof.theta.back()));
}

void cone_slice(Checks& c) {
  const auto cat = density::cone_catalog();
  const PointN o(3);
  for (const char* tag : {"P", "Y", "T"}) {
    const auto mesh = density::catalog_entry(cat, tag).shape.mesh(2.0);
    const auto chk = density::cone_slice_check(mesh, o, 1.0, 1e-2);
    c.need(chk.residual <= 1e-3, std::string(tag) + " residual " + fmt(chk.residual));
    c.note(std::string(tag) + " " + fmt(chk.residual));
  }
}

void ff_projection(Checks& c) {
  // (a) outside Q untouched, bit for bit.
  {
    grid::DyadicGrid g(PointN{0.0, 0.0}, 1.0, 4);
    EmbeddedMesh m(1, 2);
    m.add_vertex({-0.5, 0.3});
    m.add_vertex({1.5, 0.61});
    m.add_vertex({-0.3, -0.2});
    m.add_vertex({-0.1, 1.7});
    m.add_simplex({0, 1});
    m.add_simplex({2, 3});
    m.add_simplex({0, 2});
    const auto r = ff::project_to_skeleton(m, g);
    std::set<std::array<double, 2>> out;
    for (const auto& v : r.mesh.vertices) out.insert({v[0], v[1]});
    for (const auto& v : m.vertices) c.need(out.count({v[0], v[1]}) == 1, "(a) outside vertex moved");
    // Segment 2-3 and 0-2 never enter Q; segment 0-1 crosses it on a length of hypot(1, 0.155).
    const double expect = geom::measure(m) - std::hypot(1.0, 0.31 / 2);
    c.need(std::abs(geom::measure(r.outside) - expect) <= 1e-12, "(a) outside length");
  }
  // (b), (c) on 100 randomized meshes.
  std::mt19937_64 rng(2024);
  double worst_residual = 0.0;
  int local_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 2;
    const int d = n == 2 ? 1 : 1 + (trial / 2) % 2;
    const int N = 2 + trial % 3;
    grid::DyadicGrid g(PointN(n), 1.0, N, trial % 5 == 4 ? (1u << n) - 1 : 0);
    const auto mesh = random_mesh(rng, d, n, 3, -0.2, 1.2);
    ff::ProjectionOptions opts;
    opts.strategy = trial % 3 == 0 ? ff::Strategy::Far : ff::Strategy::Chebyshev;
    opts.trials = 8;
    opts.seed = static_cast<std::uint64_t>(trial);
    const auto r = ff::project_to_skeleton(mesh, g, opts);
    const double res = ff::skeleton_residual(r.mesh, g, d);
    worst_residual = std::max(worst_residual, res / g.cell());
    bool ok = r.locality_ok;
    for (const auto& row : r.cubes) ok = ok && row.ok && row.image <= row.bound * (1 + 1e-9) + 1e-12;
    local_ok += ok;
  }
  c.need(worst_residual <= 1e-9, "(b) skeleton residual " + fmt(worst_residual) + "·s");
  c.need(local_ok == 100, "(c) locality held on " + std::to_string(local_ok) + "/100");
  // (d) diagonal of the unit square from ξ = (0.7, 0.3).
  EmbeddedMesh diag(1, 2);
  diag.add_vertex({0, 0});
  diag.add_vertex({1, 1});
  diag.add_simplex({0, 1});
  const double len = geom::measure(ff::radial_project_face(diag, PointN{0, 0}, PointN{1, 1}, PointN{0.7, 0.3}));
  c.need(std::abs(len - 2.0) <= 1e-3, "(d) image length " + fmt(len));
  // (e) sparse inputs lose all interior d-measure.
  {
    grid::DyadicGrid g(PointN(3), 1.0, 2);
    const double s = g.cell(), h = std::sqrt(2e-6) * s;
    EmbeddedMesh tiny(2, 3);
    tiny.add_vertex({0.3, 0.2, 0.35});
    tiny.add_vertex({0.3 + h, 0.2, 0.35});
    tiny.add_vertex({0.3, 0.2 + h, 0.35});
    tiny.add_simplex({0, 1, 2});
    const auto r = ff::extra_collapse(ff::project_to_skeleton(tiny, g), g);
    c.need(r.collapsed && ff::interior_measure(r.mesh, g) <= 1e-12, "(e) sparse triangle kept interior measure");
    grid::DyadicGrid g2(PointN(2), 1.0, 4);
    EmbeddedMesh seg(1, 2);
    seg.add_vertex({0.3, 0.33});
    seg.add_vertex({0.31, 0.34});
    seg.add_simplex({0, 1});
    const auto r2 = ff::extra_collapse(ff::project_to_skeleton(seg, g2), g2);
    c.need(r2.collapsed && ff::interior_measure(r2.mesh, g2) <= 1e-12, "(e) sparse segment kept interior measure");
  }
  c.note("residual " + fmt(worst_residual) + "·s, locality " + std::to_string(local_ok) + "/100, diagonal " + fmt(len));
}

void sliding(Checks& c) {
  const double t = 0.4;
  const density::SlidingContext ctx{geom::make_line(PointN{0, 0, 0}, PointN{1, 0, 0}), PointN{0.2, t, 0.0}};
  std::vector<double> radii;
  for (double r = t / 4; r <= 4 * t + 1e-12; r *= 1.1) radii.push_back(r);
  radii.push_back(4 * t);
  const auto f = density::sliding_profile(half_plane(6.0), ctx, radii);
  double worst = 0.0;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    worst = std::max(worst, std::abs(f.sliding[i] - kPi));
    if (radii[i] < t) c.need(f.sliding[i] == f.theta[i], "shade nonzero at r = " + fmt(radii[i]));
  }
  c.need(worst <= 1e-2, "max |F − π| " + fmt(worst));
  c.note("max |F − π| " + fmt(worst) + " over " + std::to_string(radii.size()) + " radii");
}

void big_projection(Checks& c) {
  const PointN o(3);
  const density::AffinePlane plane{o, {PointN{1, 0, 0}, PointN{0, 1, 0}}};
  const double r = 1.0, tau = 0.2, eps = 0.05;
  const auto flat = density::big_projection_check(plane_patch(2.0), o, r, plane, eps, tau);
  c.need(flat.pass && flat.coverage == 1.0, "flat disk coverage " + fmt(flat.coverage));
  const auto holed = geom::annulus_patch(o, PointN{1, 0, 0}, PointN{0, 1, 0}, tau * r / 2, 2.0, 24, 96);
  const auto hole = density::big_projection_check(holed, o, r, plane, eps, tau);
  c.need(!hole.pass, "holed disk passed");
  c.need(!hole.uncovered.empty(), "hole not reported");
  for (const auto& q : hole.uncovered) c.need(geom::norm(q) <= tau * r / 2 + 1e-12, "uncovered cell outside the hole");
  c.note("flat " + fmt(flat.coverage) + ", holed " + fmt(hole.coverage) + " with " +
         std::to_string(hole.uncovered.size()) + " missed cells inside the hole");
}

void classifier(Checks& c) {
  const auto cat = density::cone_catalog();
  const PointN o(3);
  const std::vector<double> ladder{0.25, 0.5, 1.0};
  std::string seen;
  for (const auto& entry : cat) {
    const int ambient = entry.d == 1 ? 2 : 3;
    const auto mesh = entry.shape.mesh(3.0, ambient);
    density::ClassifyOptions opts;
    // Boundary cones carry their edge on Γ: the z axis in R³, a line through the apex in the plane.
    if (entry.needs_boundary)
      opts.boundary = geom::make_line(PointN(ambient), ambient == 3 ? PointN{0, 0, 1} : PointN{0, 1});
    const auto cls = density::classify_point(mesh, PointN(ambient), cat, ladder, opts);
    c.need(cls.tag == entry.tag && cls.residual <= 0.05,
           entry.tag + " classified as " + cls.tag + " residual " + fmt(cls.residual));
    seen += (seen.empty() ? "" : ",") + entry.tag;
  }
  const auto t = density::catalog_entry(cat, "T").shape.mesh(3.0);
  const PointN edge = PointN{1, 1, 1} * (0.8 / std::sqrt(3.0));
  const auto ce = density::classify_point(t, edge, cat, {0.05, 0.1, 0.15});
  c.need(ce.tag == "Y", "T edge point classified as " + ce.tag);

  std::mt19937_64 rng(20);
  int invariant = 0;
  for (int k = 0; k < 20; ++k) {
    const auto rot = testing_support::random_rotation(3, rng);
    const PointN shift{0.1 * k, -0.2, 0.05 * k};
    const char* tag = k % 3 == 0 ? "P" : k % 3 == 1 ? "Y" : "T";
    const auto moved = geom::rigid_motion(density::catalog_entry(cat, tag).shape.mesh(3.0), rot, shift);
    const auto cls = density::classify_point(moved, shift, cat, ladder);
    const bool ok = cls.tag == tag;
    c.need(ok, std::string(tag) + " under rotation " + std::to_string(k) + " classified as " + cls.tag);
    invariant += ok;
  }
  c.note("catalog " + seen + ", T edge → " + ce.tag + ", rotations " + std::to_string(invariant) + "/20");
}

void minimizer_run(Checks& c) {
  const grid::FlatManifold torus = grid::FlatManifold::torus(3);
  minimizer::SchemeOptions opts;
  opts.audit_trials = 10000;
  const auto flat_mesh =
      geom::quad_patch(PointN{0, 0, 0.5}, PointN{1, 0, 0}, PointN{0, 1, 0}, 4, 4);
  const auto flat = minimizer::run_scheme(flat_mesh, {4, 8, 16}, torus, 7, opts);
  for (const auto& l : flat.levels)
    c.need(l.minimized_measure == 1.0, "flat slice at N = " + std::to_string(l.subdivisions) + ": " +
                                           fmt(l.minimized_measure));

  const auto wiggly = geom::height_field(0, 0, 1, 32, [](double x, double y) {
    return 0.5 + 0.1 * std::sin(2 * kPi * x) * std::sin(2 * kPi * y);
  });
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = minimizer::run_scheme(wiggly, {4, 8, 16}, torus, 7, opts);
  const double secs = seconds_since(t0);
  std::string measures;
  for (const auto& l : res.levels) {
    c.need(l.minimized_measure <= 1.0 + 8.0 / l.subdivisions + 1e-12,
           "wiggly at N = " + std::to_string(l.subdivisions) + ": " + fmt(l.minimized_measure));
    measures += (measures.empty() ? "" : ", ") + fmt(l.minimized_measure);
  }
  c.need(res.nonincreasing, "level sequence increased");
  const auto& audit = res.levels.back().audit;
  c.need(audit.trials == 10000, "audit ran " + std::to_string(audit.trials) + " trials");
  c.need(audit.improving == 0, std::to_string(audit.improving) + " improving test moves");
  c.need(secs < 120.0, "runtime " + fmt(secs) + " s");
  c.note("wiggly " + measures + "; audit " + std::to_string(audit.legal) + " legal, " +
         std::to_string(audit.improving) + " improving; run " + fmt(secs) + " s");
}

void douglas(Checks& c) {
  std::vector<PointN> circle;
  for (int k = 0; k < 256; ++k) {
    const double t = 2 * kPi * k / 256;
    circle.push_back(PointN{std::cos(t), std::sin(t)});
  }
  const double e = geom::douglas_energy(circle);
  const double rel = std::abs(e - 16 * kPi * kPi) / (16 * kPi * kPi);
  c.need(rel <= 1e-3, "relative error " + fmt(rel));
  c.note("energy " + fmt(e) + ", relative error " + fmt(rel));
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

void determinism(Checks& c) {
  const std::string data = PLATEAU_TEST_DATA;
  const std::vector<std::vector<std::string>> runs = {
      {"steiner", "--instance", data + "/square.json"},
      {"ff-project", "--grid", data + "/grid4.json", "--mesh", data + "/wiggly.off", "--seed", "3"},
      {"density", "--mesh", data + "/y_cone.off", "--x", "0,0,0", "--radii", "0.25,0.5,1"},
      {"classify", "--mesh", data + "/y_cone.off", "--x", "0,0,0"},
      {"cone-check", "--cone", "T", "--r", "0.5"},
      {"blowup", "--mesh", data + "/y_cone.off", "--x", "0,0,1", "--r", "0.5"},
      {"hausdorff", "--mesh-a", data + "/plane.off", "--mesh-b", data + "/y_cone.off", "--x", "0,0,0", "--radii",
       "0.5,1"},
      {"minimize", "--config", data + "/minimize_config.json", "--init", data + "/wiggly.off", "--audit-trials",
       "1000"},
      {"douglas"},
  };
  const fs::path root = fs::temp_directory_path() / "plateau_acceptance_rerun";
  std::string names;
  for (const auto& base : runs) {
    std::uint64_t hash[2] = {0, 0};
    std::size_t count = 0;
    for (int k = 0; k < 2; ++k) {
      const fs::path dir = root / std::to_string(k);
      fs::remove_all(dir);
      auto args = base;
      args.insert(args.end(), {"--out", dir.string()});
      std::ostringstream out, err;
      const int code = cli::run(args, out, err);
      c.need(code == 0, base[0] + " exited " + std::to_string(code) + ": " + err.str());
      if (code != 0) break;
      const auto summary = nlohmann::json::parse(out.str());
      hash[k] = fnv1a("");
      count = summary["artifacts"].size();
      for (const auto& p : summary["artifacts"]) hash[k] = fnv1a(io::read_file(p.get<std::string>()), hash[k]);
      fs::remove_all(dir);
    }
    c.need(count > 0, base[0] + " wrote nothing");
    c.need(hash[0] == hash[1], base[0] + " artifacts differ across reruns");
    names += (names.empty() ? "" : ",") + base[0];
  }
  fs::remove_all(root);
  c.note(std::to_string(runs.size()) + " subcommands: " + names);
}

}  // namespace

int main() {
  criterion(1, "Steiner square", steiner_square);
  criterion(2, "Steiner triangle and Kirchhoff audit", steiner_triangle);
  criterion(3, "cone densities", cone_densities);
  criterion(4, "cone-slice identity", cone_slice);
  criterion(5, "FF projection", ff_projection);
  criterion(6, "sliding functional", sliding);
  criterion(7, "big-projection check", big_projection);
  criterion(8, "classifier", classifier);
  criterion(9, "minimizer", minimizer_run);
  criterion(10, "Douglas energy", douglas);
  criterion(11, "determinism", determinism);
  std::printf("%d of 11 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
