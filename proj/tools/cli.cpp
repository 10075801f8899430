#include "plateau/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <json.hpp>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include "plateau/density.hpp"
#include "plateau/dyadic.hpp"
#include "plateau/errors.hpp"
#include "plateau/ff.hpp"
#include "plateau/geometry.hpp"
#include "plateau/io.hpp"
#include "plateau/minimizer.hpp"
#include "plateau/steiner.hpp"

namespace plateau::cli {

using json = nlohmann::ordered_json;
using geom::EmbeddedMesh;
using geom::PointN;

namespace {

// ------------------------------------------------------------------ helpers

/// Collects every bad field before failing, so one run reports them all.
class Problems {
 public:
  void need(bool ok, const std::string& field, const std::string& why) {
    if (!ok) list_.push_back("--" + field + ": " + why);
  }
  void add(const std::string& msg) { list_.push_back(msg); }
  void raise() const {
    if (list_.empty()) return;
    std::string msg = "invalid configuration";
    for (const auto& p : list_) msg += "\n  " + p;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> list_;
};

std::vector<double> parse_list(const std::string& text, const std::string& field, Problems& probs) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      probs.add("--" + field + ": '" + tok + "' is not a number");
    }
  }
  if (text.empty()) probs.add("--" + field + ": empty list");
  return out;
}

std::optional<PointN> parse_point(const std::string& text, const std::string& field, Problems& probs,
                                  int expected_dim = 0) {
  const auto v = parse_list(text, field, probs);
  if (v.empty() || v.size() > static_cast<std::size_t>(geom::kMaxDim)) {
    probs.add("--" + field + ": expected 1 to 6 coordinates");
    return std::nullopt;
  }
  if (expected_dim > 0 && static_cast<int>(v.size()) != expected_dim) {
    probs.add("--" + field + ": expected " + std::to_string(expected_dim) + " coordinates");
    return std::nullopt;
  }
  return PointN(std::span<const double>(v));
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

json point_json(const PointN& p) {
  json a = json::array();
  for (int i = 0; i < p.dim(); ++i) a.push_back(num(p[i]));
  return a;
}

json list_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Ordered artifacts of one run, written together at the end.
struct Outputs {
  std::string dir = ".";
  std::vector<io::Artifact> files;
  void add(const std::string& name, std::string content) {
    files.push_back({(std::filesystem::path(dir) / name).string(), std::move(content)});
  }
  json paths() const {
    json a = json::array();
    for (const auto& f : files) a.push_back(f.path);
    return a;
  }
};

geom::Gauge gauge_of(double c, double alpha, double cutoff, Problems& probs) {
  geom::Gauge g{c, alpha, cutoff > 0 ? cutoff : std::numeric_limits<double>::infinity()};
  probs.need(c >= 0, "gauge-c", "must be nonnegative");
  probs.need(alpha > 0, "gauge-alpha", "must be positive");
  return g;
}

std::optional<geom::LineBoundary> boundary_of(const std::string& base, const std::string& dir, int n,
                                              Problems& probs) {
  if (base.empty() && dir.empty()) return std::nullopt;
  if (base.empty() || dir.empty()) {
    probs.add("--gamma-base and --gamma-dir go together");
    return std::nullopt;
  }
  const auto b = parse_point(base, "gamma-base", probs, n);
  const auto d = parse_point(dir, "gamma-dir", probs, n);
  if (!b || !d) return std::nullopt;
  if (geom::norm(*d) == 0.0) {
    probs.add("--gamma-dir: must be nonzero");
    return std::nullopt;
  }
  return geom::make_line(*b, *d);
}

grid::FlatManifold manifold_of(const std::string& name, double size, Problems& probs) {
  static const std::map<std::string, std::pair<int, bool>> known = {
      {"torus2", {2, true}}, {"torus3", {3, true}}, {"cube2", {2, false}}, {"cube3", {3, false}}};
  const auto it = known.find(name);
  if (it == known.end()) {
    probs.add("--manifold: unknown '" + name + "' (expected torus2, torus3, cube2 or cube3)");
    return grid::FlatManifold::torus(3);
  }
  probs.need(size > 0, "size", "must be positive");
  auto m = grid::FlatManifold::torus(it->second.first, size > 0 ? size : 1.0);
  if (!it->second.second) m.periodic_mask = 0;
  return m;
}

grid::DyadicGrid grid_from_json(const json& j) {
  Problems probs;
  if (!j.is_object()) throw ConfigError("grid file must hold a JSON object");
  for (const char* k : {"corner", "size", "N"})
    if (!j.contains(k)) probs.add(std::string("grid.") + k + ": missing");
  probs.raise();
  std::vector<double> c;
  try {
    c = j.at("corner").get<std::vector<double>>();
  } catch (const json::exception&) {
    probs.add("grid.corner: expected a list of numbers");
  }
  if (!j.at("size").is_number() || j.at("size").get<double>() <= 0) probs.add("grid.size: must be a positive number");
  if (!j.at("N").is_number_integer() || j.at("N").get<long>() < 1) probs.add("grid.N: must be a positive integer");
  std::uint32_t mask = 0;
  if (j.contains("identifications")) {
    try {
      for (int axis : j.at("identifications").get<std::vector<int>>()) {
        if (axis < 0 || axis >= static_cast<int>(c.size())) probs.add("grid.identifications: axis out of range");
        else mask |= 1u << axis;
      }
    } catch (const json::exception&) {
      probs.add("grid.identifications: expected a list of axes");
    }
  }
  if (c.empty() || c.size() > static_cast<std::size_t>(geom::kMaxDim)) probs.add("grid.corner: 1 to 6 coordinates");
  probs.raise();
  return grid::DyadicGrid(PointN(std::span<const double>(c)), j.at("size").get<double>(), j.at("N").get<int>(),
                          mask);
}

json grid_json(const grid::DyadicGrid& g) {
  json ids = json::array();
  for (int i = 0; i < g.n(); ++i)
    if (g.periodic(i)) ids.push_back(i);
  return json{{"corner", point_json(g.corner())}, {"size", g.size()}, {"N", g.subdivisions()},
              {"identifications", ids}};
}

json faceset_json(const minimizer::FaceSet& fs) {
  json faces = json::array();
  for (const auto& f : fs.faces()) {
    json c = json::array();
    for (int i = 0; i < fs.grid().n(); ++i) c.push_back(f.corner[i]);
    faces.push_back(json{{"axes", f.axes}, {"corner", c}});
  }
  return json{{"schema", 1}, {"grid", grid_json(fs.grid())}, {"d", fs.d()}, {"measure", fs.measure()},
              {"d_faces", fs.count(fs.d())}, {"faces", faces}};
}

json profile_json(const density::DensityProfile& p) {
  return json{{"center", point_json(p.center)}, {"radii", list_json(p.radii)},   {"theta", list_json(p.theta)},
              {"adjusted", list_json(p.adjusted)}, {"F", list_json(p.sliding)}, {"error", list_json(p.error)},
              {"limit", num(p.limit)},           {"trend", p.trend},           {"below_unit_density", p.below_unit_density}};
}

// ------------------------------------------------------------------ subcommands

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = ".";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "JSON file of option values; flags override it");
  sub->add_option("--seed", c.seed, "Seed for every random choice");
  sub->add_option("--out", c.out, "Artifact directory");
}

struct SteinerArgs {
  std::string instance, objective;
  double beta = -1.0;
};

json run_steiner(const SteinerArgs& a, const Common&, Outputs& outs) {
  Problems probs;
  probs.need(!a.instance.empty(), "instance", "required");
  probs.raise();
  const json inst = read_json(a.instance);
  if (!inst.is_object() || !inst.contains("terminals") || !inst.at("terminals").is_array())
    throw ConfigError("instance: needs a 'terminals' list");
  std::vector<steiner::Terminal> terms;
  for (std::size_t i = 0; i < inst.at("terminals").size(); ++i) {
    const auto& t = inst.at("terminals")[i];
    const std::string where = "instance.terminals[" + std::to_string(i) + "]";
    try {
      const auto pos = t.at("pos").get<std::vector<double>>();
      if (pos.empty() || pos.size() > static_cast<std::size_t>(geom::kMaxDim)) throw ConfigError("bad");
      terms.push_back({PointN(std::span<const double>(pos)), t.at("charge").get<int>()});
    } catch (const std::exception&) {
      probs.add(where + ": needs 'pos' (list of numbers) and integer 'charge'");
    }
  }
  std::string obj = !a.objective.empty() ? a.objective : inst.value("objective", std::string("size"));
  double beta = a.beta >= 0 ? a.beta : inst.value("beta", 0.5);
  steiner::Objective kind = steiner::Objective::Size;
  try {
    kind = steiner::objective_from_string(obj);
  } catch (const ConfigError& e) {
    probs.add(std::string("--objective: ") + e.what());
  }
  probs.need(beta > 0 && beta < 1, "beta", "must lie in (0, 1)");
  probs.raise();

  const auto sol = steiner::solve_steiner(terms, kind, beta);
  const auto kirch = steiner::check_kirchhoff(sol.net, terms);
  const auto angles = steiner::angle_audit(sol.net);
  const double score = steiner::objective(sol.net, kind, beta);
  json nodes = json::array(), edges = json::array(), viol = json::array();
  for (const auto& p : sol.net.nodes) nodes.push_back(point_json(p));
  for (const auto& e : sol.net.edges)
    edges.push_back(json{{"a", e.a}, {"b", e.b}, {"multiplicity", e.multiplicity},
                         {"length", steiner::edge_length(sol.net, e)}});
  for (const auto& v : kirch.violations) viol.push_back(json{{"node", v.node}, {"expected", v.expected}, {"actual", v.actual}});
  json sol_json{{"schema", 1},
                {"objective", steiner::to_string(kind)},
                {"beta", beta},
                {"score", score},
                {"terminal_count", sol.net.terminal_count},
                {"steiner_points", sol.net.steiner_count()},
                {"nodes", nodes},
                {"edges", edges},
                {"kirchhoff", json{{"ok", kirch.ok}, {"violations", viol}}},
                {"angles", json{{"pass", angles.pass}, {"max_deviation", angles.max_deviation}}},
                {"topologies", sol.certificate.scores.size()},
                {"best_topology", sol.certificate.scores.empty() ? "" : sol.certificate.scores[sol.certificate.best].encoding},
                {"tied", sol.certificate.tied},
                {"star_score", sol.certificate.star_score}};
  outs.add("solution.json", dump(sol_json));
  {
    EmbeddedMesh support(1, sol.net.nodes.empty() ? 2 : sol.net.nodes[0].dim());
    for (const auto& e : sol.net.edges) {
      if (e.multiplicity == 0) continue;
      const auto i = support.add_vertex(sol.net.nodes[e.a]);
      const auto j = support.add_vertex(sol.net.nodes[e.b]);
      support.add_simplex({i, j, 0}, std::abs(e.multiplicity));
    }
    if (support.size() > 0) outs.add("support.csv", io::write_csv(support));
  }
  return json{{"score", score},
              {"steiner_points", sol.net.steiner_count()},
              {"kirchhoff_ok", kirch.ok},
              {"angles_pass", angles.pass}};
}

struct FfArgs {
  std::string grid, mesh, strategy = "chebyshev", eta = "auto";
  int trials = 32;
  bool extra = false;
};

json run_ff(const FfArgs& a, const Common& c, Outputs& outs) {
  Problems probs;
  probs.need(!a.grid.empty(), "grid", "required");
  probs.need(!a.mesh.empty(), "mesh", "required");
  probs.need(a.trials >= 1, "trials", "must be at least 1");
  ff::Strategy strategy = ff::Strategy::Chebyshev;
  try {
    strategy = ff::strategy_from_string(a.strategy);
  } catch (const ConfigError& e) {
    probs.add(std::string("--strategy: ") + e.what());
  }
  double eta = 0.0;
  if (a.eta != "auto") {
    try {
      eta = std::stod(a.eta);
    } catch (const std::exception&) {
      eta = -1.0;
    }
    probs.need(eta >= 0, "eta", "must be 'auto' or a nonnegative length");
  }
  probs.raise();
  const auto g = grid_from_json(read_json(a.grid));
  const auto mesh = io::read_mesh(a.mesh);
  ff::ProjectionOptions opts;
  opts.strategy = strategy;
  opts.trials = a.trials;
  opts.seed = c.seed;
  opts.eta = eta;  // auto: images are exact, no refinement needed
  opts.keep_stage_meshes = false;
  auto res = ff::project_to_skeleton(mesh, g, opts);
  if (a.extra) res = ff::extra_collapse(res, g, opts);

  json stages = json::array(), cubes = json::array();
  for (const auto& s : res.stages)
    stages.push_back(json{{"dimension", s.dimension}, {"faces", s.faces}, {"measure_before", s.measure_before},
                          {"measure_after", s.measure_after}, {"max_ratio", num(s.max_ratio)}});
  for (const auto& r : res.cubes) {
    json idx = json::array();
    for (int i = 0; i < g.n(); ++i) idx.push_back(r.cube[static_cast<std::size_t>(i)]);
    cubes.push_back(json{{"cube", idx}, {"in", r.in}, {"origin_in", r.origin_in}, {"image", r.image}, {"out", r.out},
                         {"ratio", num(r.ratio)}, {"bound", r.bound}, {"ok", r.ok}});
  }
  const double m_in = geom::measure(mesh), m_out = geom::measure(res.mesh);
  json report{{"schema", 1},
              {"grid", grid_json(g)},
              {"d", res.d},
              {"strategy", ff::to_string(strategy)},
              {"measure_in", m_in},
              {"measure_out", m_out},
              {"stages", stages},
              {"choices", res.choices.size()},
              {"cubes", cubes},
              {"empirical_constant", num(res.empirical_constant)},
              {"locality_ok", res.locality_ok},
              {"locality_violations", res.locality_violations},
              {"trajectory_violations", res.trajectory_violations},
              {"collapsed", res.collapsed},
              {"error_bound", res.error_bound},
              {"skeleton_residual", ff::skeleton_residual(res.mesh, g, res.d)}};
  outs.add("projected.off", io::write_off(res.mesh));
  outs.add("ff_report.json", dump(report));
  return json{{"measure_in", m_in}, {"measure_out", m_out}, {"locality_ok", res.locality_ok},
              {"collapsed", res.collapsed}};
}

struct DensityArgs {
  std::string mesh, x, radii, gamma_base, gamma_dir;
  double gauge_c = 0.0, gauge_alpha = 1.0, gauge_cutoff = 0.0, adjust_alpha = 1.0;
};

json run_density(const DensityArgs& a, const Common&, Outputs& outs) {
  Problems probs;
  probs.need(!a.mesh.empty(), "mesh", "required");
  probs.need(!a.x.empty(), "x", "required");
  probs.need(!a.radii.empty(), "radii", "required");
  const auto x = a.x.empty() ? std::nullopt : parse_point(a.x, "x", probs);
  const auto radii = a.radii.empty() ? std::vector<double>{} : parse_list(a.radii, "radii", probs);
  for (double r : radii) probs.need(r > 0, "radii", "must be positive");
  density::ProfileOptions opts;
  opts.gauge = gauge_of(a.gauge_c, a.gauge_alpha, a.gauge_cutoff, probs);
  opts.alpha = a.adjust_alpha;
  const auto gamma = boundary_of(a.gamma_base, a.gamma_dir, x ? x->dim() : 3, probs);
  probs.raise();
  const auto mesh = io::read_mesh(a.mesh);
  const auto prof = gamma ? density::sliding_profile(mesh, density::SlidingContext{*gamma, *x}, radii, opts)
                          : density::density_profile(mesh, *x, radii, opts);
  std::string csv = "r,theta,adjusted,F,err\n";
  for (std::size_t i = 0; i < prof.radii.size(); ++i) {
    const double f = prof.sliding.empty() ? prof.theta[i] : prof.sliding[i];
    csv += io::format_double(prof.radii[i]) + "," + io::format_double(prof.theta[i]) + "," +
           io::format_double(prof.adjusted[i]) + "," + io::format_double(f) + "," + io::format_double(prof.error[i]) +
           "\n";
  }
  outs.add("density.csv", csv);
  return json{{"theta", list_json(prof.theta)}, {"limit", num(prof.limit)}, {"trend", prof.trend}};
}

struct ClassifyArgs {
  std::string mesh, x, ladder = "0.25,0.5,1", gamma_base, gamma_dir;
  double delta = 0.1, beta = 2.0 * std::numbers::pi / 3.0;
  int rotations = 512;
};

json run_classify(const ClassifyArgs& a, const Common&, Outputs& outs) {
  Problems probs;
  probs.need(!a.mesh.empty(), "mesh", "required");
  probs.need(!a.x.empty(), "x", "required");
  const auto x = a.x.empty() ? std::nullopt : parse_point(a.x, "x", probs);
  const auto ladder = parse_list(a.ladder, "ladder", probs);
  for (double r : ladder) probs.need(r > 0, "ladder", "radii must be positive");
  probs.need(a.delta > 0, "delta", "must be positive");
  probs.need(a.rotations >= 1, "rotations", "must be at least 1");
  probs.need(a.beta >= 2.0 * std::numbers::pi / 3.0 - 1e-12 && a.beta <= std::numbers::pi, "beta",
             "must lie in [2π/3, π]");
  density::ClassifyOptions opts;
  opts.delta = a.delta;
  opts.rotations = a.rotations;
  opts.boundary = boundary_of(a.gamma_base, a.gamma_dir, x ? x->dim() : 3, probs);
  probs.raise();
  const auto mesh = io::read_mesh(a.mesh);
  const auto catalog = density::cone_catalog(a.beta);
  const auto cls = density::classify_point(mesh, *x, catalog, ladder, opts);
  json cands = json::array(), nearest = json::array();
  for (const auto& f : cls.candidates)
    cands.push_back(json{{"tag", f.tag}, {"density", f.density}, {"residual", num(f.residual)},
                         {"rotation", list_json(f.rotation)}});
  for (const auto& [tag, dens] : cls.nearest) nearest.push_back(json{{"tag", tag}, {"density", dens}});
  json report{{"schema", 1},        {"tag", cls.tag},           {"residual", num(cls.residual)},
              {"theta", cls.theta}, {"flat", cls.flat},         {"rotation", list_json(cls.rotation)},
              {"note", cls.note},   {"candidates", cands},      {"nearest", nearest},
              {"profile", profile_json(cls.profile)}};
  outs.add("classify.json", dump(report));
  return json{{"tag", cls.tag}, {"residual", num(cls.residual)}, {"theta", cls.theta}};
}

struct ConeArgs {
  std::string cone, mesh, apex;
  double big_r = 1.0, r = 0.5, eta = 1e-2, beta = 2.0 * std::numbers::pi / 3.0;
};

json run_cone(const ConeArgs& a, const Common&, Outputs& outs) {
  Problems probs;
  probs.need(a.cone.empty() != a.mesh.empty(), "cone", "give exactly one of --cone and --mesh");
  probs.need(a.big_r > 0, "R", "must be positive");
  probs.need(a.r > 0 && a.r < a.big_r, "r", "must lie in (0, R)");
  probs.need(a.eta >= 0, "eta", "must be nonnegative");
  std::optional<PointN> apex;
  if (!a.apex.empty()) apex = parse_point(a.apex, "apex", probs);
  probs.need(a.mesh.empty() || !a.apex.empty(), "apex", "required with --mesh");
  probs.raise();
  EmbeddedMesh cone;
  if (!a.cone.empty()) {
    const auto catalog = density::cone_catalog(a.beta);
    const density::ConeEntry* entry = nullptr;
    try {
      entry = &density::catalog_entry(catalog, a.cone);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("--cone: ") + e.what());
    }
    if (!apex) apex = PointN(3);
    cone = density::placed_cone(*entry, {1, 0, 0, 0, 1, 0, 0, 0, 1}, *apex, a.big_r);
  } else {
    cone = io::read_mesh(a.mesh);
  }
  const auto chk = density::cone_slice_check(cone, *apex, a.r, a.eta);
  json report{{"schema", 1}, {"cone", a.cone.empty() ? a.mesh : a.cone}, {"r", a.r}, {"R", a.big_r}, {"eta", a.eta},
              {"inside", chk.inside}, {"slice", chk.slice}, {"residual", num(chk.residual)}};
  outs.add("cone_check.json", dump(report));
  return json{{"residual", num(chk.residual)}, {"inside", chk.inside}, {"slice", chk.slice}};
}

struct BlowupArgs {
  std::string mesh, x;
  double r = 0.0;
};

json run_blowup(const BlowupArgs& a, const Common&, Outputs& outs) {
  Problems probs;
  probs.need(!a.mesh.empty(), "mesh", "required");
  probs.need(!a.x.empty(), "x", "required");
  probs.need(a.r > 0, "r", "must be positive");
  const auto x = a.x.empty() ? std::nullopt : parse_point(a.x, "x", probs);
  probs.raise();
  const auto mesh = io::read_mesh(a.mesh);
  const auto b = density::blowup(mesh, *x, a.r);
  const auto theta = density::density(b, PointN(x->dim()), 1.0);
  outs.add("blowup.off", io::write_off(b));
  json report{{"schema", 1}, {"r", a.r}, {"measure", geom::measure(b)}, {"theta_unit_ball", theta.value},
              {"theta_error", theta.error}};
  outs.add("blowup.json", dump(report));
  return json{{"measure", geom::measure(b)}, {"theta_unit_ball", theta.value}};
}

struct HausdorffArgs {
  std::string mesh_a, mesh_b, x, radii;
  double resolution = 1.0 / 48.0;
};

json run_hausdorff(const HausdorffArgs& a, const Common&, Outputs& outs) {
  Problems probs;
  probs.need(!a.mesh_a.empty(), "mesh-a", "required");
  probs.need(!a.mesh_b.empty(), "mesh-b", "required");
  probs.need(!a.x.empty(), "x", "required");
  probs.need(!a.radii.empty(), "radii", "required");
  probs.need(a.resolution > 0 && a.resolution <= 1, "resolution", "must lie in (0, 1]");
  const auto x = a.x.empty() ? std::nullopt : parse_point(a.x, "x", probs);
  const auto radii = a.radii.empty() ? std::vector<double>{} : parse_list(a.radii, "radii", probs);
  for (double r : radii) probs.need(r > 0, "radii", "must be positive");
  probs.raise();
  const auto ea = io::read_mesh(a.mesh_a), eb = io::read_mesh(a.mesh_b);
  geom::HausdorffOptions opts;
  opts.resolution = a.resolution;
  std::string csv = "r,distance\n";
  std::vector<double> dist;
  for (double r : radii) {
    dist.push_back(geom::local_hausdorff_distance(ea, eb, geom::Ball{*x, r}, opts));
    csv += io::format_double(r) + "," + io::format_double(dist.back()) + "\n";
  }
  outs.add("hausdorff.csv", csv);
  return json{{"radii", list_json(radii)}, {"distance", list_json(dist)}};
}

struct MinimizeArgs {
  std::string manifold = "torus3", init, levels = "4,8,16", policy = "priority",
              strategy = "chebyshev", ladder = "0.125,0.25,0.375";
  double size = 1.0, threshold = 0.5, audit_cells = 2.0;
  int trials = 32;
  std::size_t audit_trials = 10000;
};

json audit_json(const minimizer::Audit& a) {
  json j{{"trials", a.trials},       {"legal", a.legal},
         {"improving", a.improving}, {"min_ratio", num(a.min_ratio)},
         {"empirical_m", num(a.empirical_m)}};
  if (a.worst)
    j["worst"] = json{{"kind", a.worst->kind}, {"before", a.worst->before}, {"after", a.worst->after}};
  return j;
}

json run_minimize(const MinimizeArgs& a, const Common& c, Outputs& outs) {
  Problems probs;
  probs.need(!a.init.empty(), "init", "required");
  const auto m = manifold_of(a.manifold, a.size, probs);
  std::vector<int> levels;
  for (double v : parse_list(a.levels, "levels", probs)) {
    if (v != std::floor(v) || v < 1 || v > 1024) probs.add("--levels: '" + io::format_double(v) + "' is not a grid size in [1, 1024]");
    else levels.push_back(static_cast<int>(v));
  }
  for (std::size_t k = 1; k < levels.size(); ++k)
    if (levels[k] <= levels[k - 1]) probs.add("--levels: must increase");
  minimizer::SchemeOptions opts;
  try {
    opts.policy = minimizer::policy_from_string(a.policy);
  } catch (const ConfigError& e) {
    probs.add(std::string("--policy: ") + e.what());
  }
  try {
    opts.init.strategy = ff::strategy_from_string(a.strategy);
  } catch (const ConfigError& e) {
    probs.add(std::string("--strategy: ") + e.what());
  }
  probs.need(a.threshold > 0 && a.threshold <= 1, "threshold", "must lie in (0, 1]");
  probs.need(a.trials >= 1, "trials", "must be at least 1");
  probs.need(a.audit_cells > 0, "audit-cells", "must be positive");
  opts.init.threshold = a.threshold;
  opts.init.trials = a.trials;
  opts.audit_trials = a.audit_trials;
  opts.audit_cells = a.audit_cells;
  opts.ladder = parse_list(a.ladder, "ladder", probs);
  for (double r : opts.ladder) probs.need(r > 0, "ladder", "radii must be positive");
  probs.raise();
  const auto e0 = io::read_mesh(a.init);
  const auto res = minimizer::run_scheme(e0, levels, m, c.seed, opts);

  json lv = json::array();
  for (std::size_t k = 0; k < res.levels.size(); ++k) {
    const auto& l = res.levels[k];
    lv.push_back(json{{"N", l.subdivisions},
                      {"input_measure", l.input_measure},
                      {"projected_measure", l.projected_measure},
                      {"rounded_measure", l.rounded_measure},
                      {"minimized_measure", l.minimized_measure},
                      {"inflation", num(l.inflation)},
                      {"moves", l.moves},
                      {"move_ratios", list_json(l.move_ratios)},
                      {"audit", audit_json(l.audit)},
                      {"distance_to_previous", list_json(l.distance_to_previous)},
                      {"quantization", l.quantization}});
    outs.add("level_N" + std::to_string(l.subdivisions) + ".off", io::write_off(res.minimizers[k].mesh()));
  }
  json report{{"schema", 1},
              {"manifold", a.manifold},
              {"policy", minimizer::to_string(opts.policy)},
              {"seed", c.seed},
              {"levels", lv},
              {"nonincreasing", res.nonincreasing},
              {"ladder", list_json(opts.ladder)}};
  outs.add("final.json", dump(faceset_json(res.final_set)));
  outs.add("minimize_report.json", dump(report));
  json measures = json::array();
  for (const auto& l : res.levels) measures.push_back(l.minimized_measure);
  return json{{"measures", measures}, {"nonincreasing", res.nonincreasing},
              {"improving_audit_moves", res.levels.back().audit.improving}};
}

struct DouglasArgs {
  std::string curve;
  int samples = 256;
  double radius = 1.0;
};

json run_douglas(const DouglasArgs& a, const Common&, Outputs& outs) {
  Problems probs;
  probs.need(a.samples >= 8, "samples", "must be at least 8");
  probs.need(a.radius > 0, "radius", "must be positive");
  probs.raise();
  std::vector<PointN> pts;
  if (!a.curve.empty()) {
    const auto mesh = io::parse_mesh(io::read_file(a.curve), io::MeshFormat::Csv);
    pts = mesh.vertices;
  } else {
    for (int k = 0; k < a.samples; ++k) {
      const double t = 2.0 * std::numbers::pi * k / a.samples;
      pts.push_back(PointN{a.radius * std::cos(t), a.radius * std::sin(t)});
    }
  }
  const double e = geom::douglas_energy(pts);
  json report{{"schema", 1}, {"samples", pts.size()}, {"energy", e}};
  if (a.curve.empty()) {
    const double ref = 16.0 * std::numbers::pi * std::numbers::pi * a.radius * a.radius;
    report["circle_reference"] = ref;
    report["relative_error"] = std::abs(e - ref) / ref;
  }
  outs.add("douglas.json", dump(report));
  return json{{"energy", e}, {"samples", pts.size()}};
}

// ------------------------------------------------------------------ config

std::string option_name(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

/// Config entries as flag tokens, placed before the explicit arguments so
/// that those win.
std::vector<std::string> config_tokens(const json& cfg, CLI::App* sub) {
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  Problems probs;
  std::vector<std::string> toks;
  for (const auto& [key, val] : cfg.items()) {
    const std::string name = option_name(key);
    if (name == "--config") continue;
    CLI::Option* opt = sub->get_option_no_throw(name);
    if (opt == nullptr) {
      probs.add("config." + key + ": not an option of '" + sub->get_name() + "'");
      continue;
    }
    if (val.is_boolean()) {
      if (!opt->get_expected_min()) {
        if (val.get<bool>()) toks.push_back(name);
        continue;
      }
      toks.push_back(name);
      toks.push_back(val.get<bool>() ? "true" : "false");
    } else if (val.is_array()) {
      std::string joined;
      for (const auto& v : val) {
        if (!joined.empty()) joined += ",";
        joined += v.is_string() ? v.get<std::string>() : v.dump();
      }
      toks.push_back(name);
      toks.push_back(joined);
    } else if (val.is_string()) {
      toks.push_back(name);
      toks.push_back(val.get<std::string>());
    } else if (val.is_number()) {
      toks.push_back(name);
      toks.push_back(val.is_number_float() ? io::format_double(val.get<double>()) : val.dump());
    } else {
      probs.add("config." + key + ": unsupported value");
    }
  }
  probs.raise();
  return toks;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"steiner", "ff-project", "density",  "classify", "cone-check",
                                                 "blowup",  "hausdorff",  "minimize", "douglas"};
  return names;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Computational experiments on almost minimal sets", "plateau"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  int verbosity = 0;
  app.add_flag("-v,--verbose", verbosity, "More diagnostics on stderr");

  Common common;
  SteinerArgs st;
  FfArgs ffa;
  DensityArgs da;
  ClassifyArgs ca;
  ConeArgs cone;
  BlowupArgs ba;
  HausdorffArgs ha;
  MinimizeArgs ma;
  DouglasArgs dg;

  auto* s = app.add_subcommand("steiner", "Minimal nets for point charges");
  add_common(s, common);
  s->add_option("--instance", st.instance, "Instance JSON {terminals:[{pos,charge}], objective, beta}");
  s->add_option("--objective", st.objective, "size, mass or m_beta");
  s->add_option("--beta", st.beta, "Exponent for m_beta");

  auto* f = app.add_subcommand("ff-project", "Project a mesh onto the skeleton of a dyadic grid");
  add_common(f, common);
  f->add_option("--grid", ffa.grid, "Grid JSON {corner, size, N, identifications}");
  f->add_option("--mesh", ffa.mesh, "Input mesh (.off, .obj, .csv)");
  f->add_option("--strategy", ffa.strategy, "far or chebyshev");
  f->add_option("--trials", ffa.trials, "Center candidates per face");
  f->add_option("--eta", ffa.eta, "Pre-refinement length or auto");
  f->add_flag("--extra-collapse", ffa.extra, "Run the extra collapse stage");

  auto* d = app.add_subcommand("density", "Density ratio profile at a point");
  add_common(d, common);
  d->add_option("--mesh", da.mesh, "Input mesh");
  d->add_option("--x", da.x, "Center, comma separated");
  d->add_option("--radii", da.radii, "Increasing radii, comma separated");
  d->add_option("--gauge-c", da.gauge_c, "Gauge coefficient");
  d->add_option("--gauge-alpha", da.gauge_alpha, "Gauge exponent");
  d->add_option("--gauge-cutoff", da.gauge_cutoff, "Gauge cutoff radius (0: none)");
  d->add_option("--adjust-alpha", da.adjust_alpha, "Exponent weight of the gauge adjustment");
  d->add_option("--gamma-base", da.gamma_base, "Boundary line point (sliding functional)");
  d->add_option("--gamma-dir", da.gamma_dir, "Boundary line direction");

  auto* cl = app.add_subcommand("classify", "Classify a point against the minimal cone catalog");
  add_common(cl, common);
  cl->add_option("--mesh", ca.mesh, "Input mesh");
  cl->add_option("--x", ca.x, "Point, comma separated");
  cl->add_option("--ladder", ca.ladder, "Ball radii, comma separated");
  cl->add_option("--delta", ca.delta, "Acceptance threshold on the residual");
  cl->add_option("--rotations", ca.rotations, "Orientation samples");
  cl->add_option("--beta", ca.beta, "Opening angle of the V cones");
  cl->add_option("--gamma-base", ca.gamma_base, "Boundary line point");
  cl->add_option("--gamma-dir", ca.gamma_dir, "Boundary line direction");

  auto* cc = app.add_subcommand("cone-check", "Cone slice identity residual");
  add_common(cc, common);
  cc->add_option("--cone", cone.cone, "Catalog tag (P, Y, T, ...)");
  cc->add_option("--mesh", cone.mesh, "Cone mesh instead of a catalog tag");
  cc->add_option("--apex", cone.apex, "Apex, comma separated");
  cc->add_option("--R", cone.big_r, "Truncation radius of a catalog cone");
  cc->add_option("--r", cone.r, "Ball radius");
  cc->add_option("--eta", cone.eta, "Refinement length");
  cc->add_option("--beta", cone.beta, "Opening angle of the V cones");

  auto* b = app.add_subcommand("blowup", "Rescale a mesh around a point");
  add_common(b, common);
  b->add_option("--mesh", ba.mesh, "Input mesh");
  b->add_option("--x", ba.x, "Center, comma separated");
  b->add_option("--r", ba.r, "Scale");

  auto* h = app.add_subcommand("hausdorff", "Local Hausdorff distances on a ball ladder");
  add_common(h, common);
  h->add_option("--mesh-a", ha.mesh_a, "First mesh");
  h->add_option("--mesh-b", ha.mesh_b, "Second mesh");
  h->add_option("--x", ha.x, "Ball center, comma separated");
  h->add_option("--radii", ha.radii, "Ball radii, comma separated");
  h->add_option("--resolution", ha.resolution, "Sampling pitch over radius");

  auto* mz = app.add_subcommand("minimize", "Discrete minimization over grid face sets");
  add_common(mz, common);
  mz->add_option("--manifold", ma.manifold, "torus2, torus3, cube2 or cube3");
  mz->add_option("--size", ma.size, "Side of the fundamental cube");
  mz->add_option("--init", ma.init, "Initial mesh");
  mz->add_option("--levels", ma.levels, "Increasing grid sizes, comma separated");
  mz->add_option("--policy", ma.policy, "priority or greedy");
  mz->add_option("--threshold", ma.threshold, "Covered fraction needed to keep a face");
  mz->add_option("--strategy", ma.strategy, "Projection center strategy");
  mz->add_option("--trials", ma.trials, "Center candidates per face");
  mz->add_option("--audit-trials", ma.audit_trials, "Test deformations per level");
  mz->add_option("--audit-cells", ma.audit_cells, "Audit ball radius in cells");
  mz->add_option("--ladder", ma.ladder, "Radii for distances between levels, fractions of the size");

  auto* dgs = app.add_subcommand("douglas", "Douglas boundary energy of a closed curve");
  add_common(dgs, common);
  dgs->add_option("--curve", dg.curve, "Closed curve samples (CSV), uniform in angle");
  dgs->add_option("--samples", dg.samples, "Samples of the circle when no curve is given");
  dgs->add_option("--radius", dg.radius, "Circle radius");

  std::string command = args.empty() ? "" : args[0];
  json summary{{"schema", 1}, {"command", command}};
  auto fail = [&](int code, const std::string& msg) {
    err << "error: " << msg << "\n";
    summary["status"] = "error";
    summary["exit"] = code;
    summary["error"] = msg;
    out << dump(summary);
    return code;
  };

  try {
    std::vector<std::string> argv = args;
    // Config values go right after the subcommand name.
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config") path = args[i + 1];
      if (path.empty()) continue;
      CLI::App* sub = nullptr;
      try {
        sub = app.get_subcommand(command);
      } catch (const CLI::OptionNotFound&) {
        break;  // the parser reports the bad subcommand
      }
      const auto toks = config_tokens(read_json(path), sub);
      argv.insert(argv.begin() + 1, toks.begin(), toks.end());
      break;
    }
    for (const auto& a : args)
      if (a.rfind("--config=", 0) == 0) throw ConfigError("use '--config <file>'");
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(2, e.what());
  } catch (const ConfigError& e) {
    return fail(2, e.what());
  } catch (const DomainError& e) {
    return fail(1, e.what());
  }

  Outputs outs;
  outs.dir = common.out;
  try {
    json result;
    if (s->parsed()) result = run_steiner(st, common, outs);
    else if (f->parsed()) result = run_ff(ffa, common, outs);
    else if (d->parsed()) result = run_density(da, common, outs);
    else if (cl->parsed()) result = run_classify(ca, common, outs);
    else if (cc->parsed()) result = run_cone(cone, common, outs);
    else if (b->parsed()) result = run_blowup(ba, common, outs);
    else if (h->parsed()) result = run_hausdorff(ha, common, outs);
    else if (mz->parsed()) result = run_minimize(ma, common, outs);
    else if (dgs->parsed()) result = run_douglas(dg, common, outs);
    io::write_atomically(outs.files);
    summary["status"] = "ok";
    summary["seed"] = common.seed;
    summary["result"] = result;
    summary["artifacts"] = outs.paths();
    out << dump(summary);
    if (verbosity > 0) err << "wrote " << outs.files.size() << " artifact(s)\n";
    return 0;
  } catch (const ConfigError& e) {
    return fail(2, e.what());
  } catch (const DomainError& e) {
    return fail(1, e.what());
  } catch (const json::exception& e) {
    return fail(2, e.what());
  }
}

}  // namespace plateau::cli
