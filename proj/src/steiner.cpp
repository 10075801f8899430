#include "plateau/steiner.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>

#include "plateau/parallel.hpp"

namespace plateau::steiner {

namespace {

constexpr double kTieTolerance = 1e-9;
constexpr double kCollapseLength = 1e-9;
constexpr int kQuickIterations = 2000;
constexpr double kContenderMargin = 1e-2;

using EdgeList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

}  // namespace

std::string to_string(Objective o) {
  switch (o) {
    case Objective::Size: return "size";
    case Objective::Mass: return "mass";
    case Objective::MBeta: return "m_beta";
  }
  return "size";
}

Objective objective_from_string(const std::string& s) {
  if (s == "size") return Objective::Size;
  if (s == "mass") return Objective::Mass;
  if (s == "m_beta" || s == "mbeta") return Objective::MBeta;
  throw ConfigError("unknown objective '" + s + "' (expected size, mass or m_beta)");
}

KirchhoffReport check_kirchhoff(const MultiplicityNet& net, std::span<const Terminal> terminals) {
  std::vector<int> balance(net.nodes.size(), 0);
  for (const auto& e : net.edges) {
    balance[e.a] += e.multiplicity;
    balance[e.b] -= e.multiplicity;
  }
  KirchhoffReport rep;
  for (std::size_t z = 0; z < net.nodes.size(); ++z) {
    const int expected = z < terminals.size() && z < net.terminal_count ? terminals[z].charge : 0;
    if (balance[z] != expected) {
      rep.ok = false;
      rep.violations.push_back({static_cast<std::uint32_t>(z), expected, balance[z]});
    }
  }
  return rep;
}

double edge_weight(int multiplicity, Objective kind, double beta) {
  if (multiplicity == 0) return 0.0;
  const double m = std::abs(multiplicity);
  switch (kind) {
    case Objective::Size: return 1.0;
    case Objective::Mass: return m;
    case Objective::MBeta: return std::pow(m, beta);
  }
  return 1.0;
}

double edge_length(const MultiplicityNet& net, const Edge& e) { return geom::distance(net.nodes[e.a], net.nodes[e.b]); }

double objective(const MultiplicityNet& net, Objective kind, double beta) {
  if (kind == Objective::MBeta && !(beta > 0.0 && beta < 1.0)) throw DomainError("M_beta needs beta in (0, 1)");
  std::vector<double> terms;
  for (const auto& e : net.edges) terms.push_back(edge_weight(e.multiplicity, kind, beta) * edge_length(net, e));
  return geom::pairwise_sum(terms);
}

std::vector<EdgeList> full_topologies(std::size_t n) {
  if (n < 2) return {};
  if (n == 2) return {{{0u, 1u}}};
  std::vector<EdgeList> out;
  const auto first_steiner = static_cast<std::uint32_t>(n);
  std::function<void(EdgeList&, std::uint32_t)> grow = [&](EdgeList& edges, std::uint32_t k) {
    if (k == n) {
      out.push_back(edges);
      return;
    }
    const std::size_t count = edges.size();
    const std::uint32_t s = first_steiner + (k - 2);
    for (std::size_t i = 0; i < count; ++i) {
      const auto [u, v] = edges[i];
      edges[i] = {u, s};
      edges.push_back({s, v});
      edges.push_back({k, s});
      grow(edges, k + 1);
      edges.pop_back();
      edges.pop_back();
      edges[i] = {u, v};
    }
  };
  EdgeList start{{0u, first_steiner}, {1u, first_steiner}, {2u, first_steiner}};
  grow(start, 3);
  return out;
}

namespace {

std::vector<std::vector<std::uint32_t>> adjacency(std::size_t nodes, const EdgeList& edges) {
  std::vector<std::vector<std::uint32_t>> adj(nodes);
  for (const auto& [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  return adj;
}

/// Canonical encoding: for every edge, the terminal set on the side away from
/// terminal 0, as a sorted list of bitmasks.
std::string encode(std::size_t n_terminals, std::size_t nodes, const EdgeList& edges) {
  const auto adj = adjacency(nodes, edges);
  std::vector<std::uint32_t> parent(nodes, UINT32_MAX), order;
  std::vector<std::uint32_t> stack{0};
  parent[0] = 0;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    order.push_back(u);
    for (auto v : adj[u])
      if (parent[v] == UINT32_MAX) {
        parent[v] = u;
        stack.push_back(v);
      }
  }
  std::vector<std::uint32_t> mask(nodes, 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (*it < n_terminals) mask[*it] |= 1u << *it;
    if (*it != 0) mask[parent[*it]] |= mask[*it];
  }
  std::vector<std::uint32_t> splits;
  for (std::size_t v = 1; v < nodes; ++v) splits.push_back(mask[v]);
  std::sort(splits.begin(), splits.end());
  std::string s;
  for (auto m : splits) {
    if (!s.empty()) s += '.';
    s += std::to_string(m);
  }
  return s;
}

/// Flow on each tree edge (u, v): signed amount from u to v.
std::vector<int> tree_flows(std::span<const Terminal> terms, std::size_t nodes, const EdgeList& edges) {
  const auto adj = adjacency(nodes, edges);
  std::vector<std::uint32_t> parent(nodes, UINT32_MAX), order;
  std::vector<std::uint32_t> stack{0};
  parent[0] = 0;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    order.push_back(u);
    for (auto v : adj[u])
      if (parent[v] == UINT32_MAX) {
        parent[v] = u;
        stack.push_back(v);
      }
  }
  std::vector<int> sub(nodes, 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if (*it < terms.size()) sub[*it] += terms[*it].charge;
    if (*it != 0) sub[parent[*it]] += sub[*it];
  }
  std::vector<int> flows;
  for (const auto& [u, v] : edges) {
    // The subtree side of the edge exports its total charge.
    flows.push_back(parent[v] == u ? -sub[v] : sub[u]);
  }
  return flows;
}

/// Steiner positions minimizing Σ w_e |x_a − x_b| with terminals fixed.
std::vector<PointN> optimize_positions(std::span<const Terminal> terms, std::size_t nodes, const EdgeList& edges,
                                       const std::vector<double>& weights, const SolveOptions& opts) {
  const std::size_t n = terms.size();
  const int dim = terms[0].position.dim();
  std::vector<PointN> pos(nodes, PointN(dim));
  for (std::size_t t = 0; t < n; ++t) pos[t] = terms[t].position;
  const std::size_t ns = nodes - n;
  if (ns == 0) return pos;

  // Start each Steiner point at a graph-distance weighted centroid of the terminals.
  const auto adj = adjacency(nodes, edges);
  for (std::size_t s = n; s < nodes; ++s) {
    std::vector<int> hop(nodes, -1);
    std::vector<std::uint32_t> queue{static_cast<std::uint32_t>(s)};
    hop[s] = 0;
    for (std::size_t q = 0; q < queue.size(); ++q)
      for (auto v : adj[queue[q]])
        if (hop[v] < 0) {
          hop[v] = hop[queue[q]] + 1;
          queue.push_back(v);
        }
    PointN c(dim);
    double wsum = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double w = 1.0 / (hop[t] * hop[t]);
      c += pos[t] * w;
      wsum += w;
    }
    pos[s] = c * (1.0 / wsum);
  }

  double scale = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) scale = std::max(scale, geom::distance(pos[a], pos[b]));
  if (!(scale > 0.0)) scale = 1.0;

  // rep[v]: node that v has been merged into. Edges that keep shrinking are
  // contracted, which turns the slow approach to a boundary stratum into a
  // fast solve on the smaller tree.
  std::vector<std::uint32_t> rep(nodes);
  std::iota(rep.begin(), rep.end(), 0u);
  auto find = [&](std::uint32_t v) {
    while (rep[v] != v) v = rep[v];
    return v;
  };
  std::vector<int> slot(nodes, -1);
  std::vector<std::uint32_t> free_nodes;
  auto reindex = [&] {
    free_nodes.clear();
    std::fill(slot.begin(), slot.end(), -1);
    for (std::size_t v = n; v < nodes; ++v)
      if (find(static_cast<std::uint32_t>(v)) == v) {
        slot[v] = static_cast<int>(free_nodes.size());
        free_nodes.push_back(static_cast<std::uint32_t>(v));
      }
  };
  reindex();

  for (int it = 0; it < opts.max_iterations && !free_nodes.empty(); ++it) {
    const auto m = static_cast<Eigen::Index>(free_nodes.size());
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, dim);
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (weights[e] == 0.0) continue;
      const auto u = find(edges[e].first), v = find(edges[e].second);
      if (u == v) continue;
      const double len = std::max(geom::distance(pos[u], pos[v]), 1e-12 * scale);
      const double w = weights[e] / len;
      const int su = slot[u], sv = slot[v];
      if (su >= 0) lap(su, su) += w;
      if (sv >= 0) lap(sv, sv) += w;
      if (su >= 0 && sv >= 0) {
        lap(su, sv) -= w;
        lap(sv, su) -= w;
      } else if (su >= 0) {
        for (int i = 0; i < dim; ++i) rhs(su, i) += w * pos[v][i];
      } else if (sv >= 0) {
        for (int i = 0; i < dim; ++i) rhs(sv, i) += w * pos[u][i];
      }
    }
    for (Eigen::Index k = 0; k < m; ++k)
      if (lap(k, k) == 0.0) {
        // No weighted edge: the point is irrelevant, keep it where it is.
        lap(k, k) = 1.0;
        for (int i = 0; i < dim; ++i) rhs(k, i) = pos[free_nodes[static_cast<std::size_t>(k)]][i];
      }
    const Eigen::MatrixXd x = lap.ldlt().solve(rhs);
    double change = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      PointN& p = pos[free_nodes[static_cast<std::size_t>(k)]];
      for (int i = 0; i < dim; ++i) {
        change = std::max(change, std::abs(x(k, i) - p[i]));
        p[i] = x(k, i);
      }
    }
    if (change <= opts.tolerance * scale) break;
    if (it % 100 != 99) continue;
    bool contracted = false;
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (weights[e] == 0.0) continue;
      auto u = find(edges[e].first), v = find(edges[e].second);
      if (u == v || (u < n && v < n)) continue;
      if (geom::distance(pos[u], pos[v]) >= 1e-6 * scale) continue;
      if (v < n || (u >= n && v < u)) std::swap(u, v);  // keep u
      rep[v] = u;
      contracted = true;
    }
    if (contracted) reindex();
  }
  for (std::size_t v = n; v < nodes; ++v) pos[v] = pos[find(static_cast<std::uint32_t>(v))];
  return pos;
}

/// Drop zero edges, contract collapsed edges, prune and smooth Steiner nodes,
/// renumber Steiner nodes compactly.
MultiplicityNet canonicalize(std::size_t n_terminals, std::vector<PointN> pos, const EdgeList& edges,
                             const std::vector<int>& flows, Objective kind, double beta) {
  std::vector<Edge> es;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (flows[e] == 0) continue;
    const auto [u, v] = edges[e];
    if (flows[e] > 0)
      es.push_back({u, v, flows[e]});
    else
      es.push_back({v, u, -flows[e]});
  }
  auto is_steiner = [&](std::uint32_t v) { return v >= n_terminals; };

  bool changed = true;
  while (changed) {
    changed = false;
    // Contract collapsed edges.
    for (std::size_t i = 0; i < es.size() && !changed; ++i) {
      const Edge e = es[i];
      if (geom::distance(pos[e.a], pos[e.b]) >= kCollapseLength) continue;
      if (!is_steiner(e.a) && !is_steiner(e.b)) continue;
      std::uint32_t keep = e.a, drop = e.b;
      if (!is_steiner(e.b) || (is_steiner(e.a) && e.a > e.b)) std::swap(keep, drop);
      es.erase(es.begin() + static_cast<std::ptrdiff_t>(i));
      for (auto& f : es) {
        if (f.a == drop) f.a = keep;
        if (f.b == drop) f.b = keep;
      }
      changed = true;
    }
    if (changed) continue;
    // Smooth degree-2 Steiner nodes (in one edge, out one edge with equal flow).
    std::vector<std::vector<std::size_t>> inc(pos.size());
    for (std::size_t i = 0; i < es.size(); ++i) {
      inc[es[i].a].push_back(i);
      inc[es[i].b].push_back(i);
    }
    for (std::uint32_t v = static_cast<std::uint32_t>(n_terminals); v < pos.size() && !changed; ++v) {
      if (inc[v].size() != 2) continue;
      Edge e1 = es[inc[v][0]], e2 = es[inc[v][1]];
      if (e1.b != v) std::swap(e1, e2);
      if (e1.b != v || e2.a != v || e1.multiplicity != e2.multiplicity || e1.a == e2.b) continue;
      const std::size_t hi = std::max(inc[v][0], inc[v][1]), lo = std::min(inc[v][0], inc[v][1]);
      es.erase(es.begin() + static_cast<std::ptrdiff_t>(hi));
      es.erase(es.begin() + static_cast<std::ptrdiff_t>(lo));
      es.push_back({e1.a, e2.b, e1.multiplicity});
      changed = true;
    }
  }

  // Renumber: terminals keep their index, surviving Steiner nodes follow.
  std::vector<std::uint32_t> remap(pos.size(), UINT32_MAX);
  MultiplicityNet net;
  net.terminal_count = n_terminals;
  net.objective = kind;
  net.beta = beta;
  for (std::size_t t = 0; t < n_terminals; ++t) {
    remap[t] = static_cast<std::uint32_t>(t);
    net.nodes.push_back(pos[t]);
  }
  std::vector<bool> used(pos.size(), false);
  for (const auto& e : es) used[e.a] = used[e.b] = true;
  for (std::size_t v = n_terminals; v < pos.size(); ++v)
    if (used[v]) {
      remap[v] = static_cast<std::uint32_t>(net.nodes.size());
      net.nodes.push_back(pos[v]);
    }
  for (auto e : es) net.edges.push_back({remap[e.a], remap[e.b], e.multiplicity});
  std::sort(net.edges.begin(), net.edges.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.a, x.b, x.multiplicity) < std::tie(y.a, y.b, y.multiplicity);
  });
  return net;
}

void validate_terminals(std::span<const Terminal> terms) {
  if (terms.size() < 2 || terms.size() > 8) throw DomainError("solve_steiner handles 2 to 8 terminals");
  const int dim = terms[0].position.dim();
  long total = 0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].position.dim() != dim || !terms[i].position.finite())
      throw DomainError("terminal " + std::to_string(i) + " has an invalid position");
    if (terms[i].charge == 0) throw DomainError("terminal " + std::to_string(i) + " has zero charge");
    total += terms[i].charge;
    for (std::size_t j = 0; j < i; ++j)
      if (terms[i].position == terms[j].position)
        throw DomainError("terminals " + std::to_string(j) + " and " + std::to_string(i) + " coincide");
  }
  if (total != 0)
    throw DomainError("infeasible charges: the charges sum to " + std::to_string(total) +
                      ", but Kirchhoff balance over all terminals requires a zero sum");
}

}  // namespace

MultiplicityNet star_net(std::span<const Terminal> terms, Objective kind, double beta) {
  MultiplicityNet net;
  net.objective = kind;
  net.beta = beta;
  net.terminal_count = terms.size();
  PointN c(terms[0].position.dim());
  for (const auto& t : terms) {
    net.nodes.push_back(t.position);
    c += t.position;
  }
  net.nodes.push_back(c * (1.0 / static_cast<double>(terms.size())));
  const auto center = static_cast<std::uint32_t>(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const int q = terms[i].charge;
    if (q > 0)
      net.edges.push_back({static_cast<std::uint32_t>(i), center, q});
    else if (q < 0)
      net.edges.push_back({center, static_cast<std::uint32_t>(i), -q});
  }
  return net;
}

Solution solve_steiner(std::span<const Terminal> terms, Objective kind, double beta, const SolveOptions& opts) {
  validate_terminals(terms);
  if (kind == Objective::MBeta && !(beta > 0.0 && beta < 1.0)) throw DomainError("M_beta needs beta in (0, 1)");
  const std::size_t n = terms.size();
  const std::size_t nodes = n == 2 ? 2 : 2 * n - 2;
  const auto topologies = full_topologies(n);

  struct Candidate {
    MultiplicityNet net;
    double score = 0.0;
    std::string encoding;
  };
  std::vector<Candidate> cands(topologies.size());
  auto evaluate = [&](std::size_t t, int iterations) {
    const EdgeList& edges = topologies[t];
    const auto flows = tree_flows(terms, nodes, edges);
    std::vector<double> weights;
    for (int f : flows) weights.push_back(edge_weight(f, kind, beta));
    SolveOptions o = opts;
    o.max_iterations = iterations;
    auto pos = optimize_positions(terms, nodes, edges, weights, o);
    cands[t].net = canonicalize(n, std::move(pos), edges, flows, kind, beta);
    cands[t].score = objective(cands[t].net, kind, beta);
    cands[t].encoding = encode(n, nodes, edges);
  };
  // Every score is the objective of a feasible net, hence an upper bound for
  // its topology. A short budget ranks all topologies; the ones near the top
  // are then solved to full precision.
  const int quick = std::min(opts.max_iterations, kQuickIterations);
  parallel_for(topologies.size(), [&](std::size_t t) { evaluate(t, quick); });
  if (quick < opts.max_iterations) {
    double lead = cands[0].score;
    for (const auto& c : cands) lead = std::min(lead, c.score);
    std::vector<std::size_t> contenders;
    for (std::size_t t = 0; t < cands.size(); ++t)
      if (cands[t].score <= lead * (1.0 + kContenderMargin) + kTieTolerance) contenders.push_back(t);
    parallel_for(contenders.size(), [&](std::size_t k) { evaluate(contenders[k], opts.max_iterations); });
  }

  Solution sol;
  std::size_t best = 0;
  for (std::size_t t = 1; t < cands.size(); ++t) {
    const double diff = cands[t].score - cands[best].score;
    if (diff < -kTieTolerance || (std::abs(diff) <= kTieTolerance && cands[t].encoding < cands[best].encoding))
      best = t;
  }
  for (std::size_t t = 0; t < cands.size(); ++t) {
    sol.certificate.scores.push_back({cands[t].encoding, cands[t].score});
    if (std::abs(cands[t].score - cands[best].score) <= kTieTolerance) sol.certificate.tied.push_back(cands[t].encoding);
  }
  sol.certificate.best = best;
  sol.certificate.star_score = objective(star_net(terms, kind, beta), kind, beta);
  sol.net = std::move(cands[best].net);

  double longest = 0.0;
  for (const auto& e : sol.net.edges) {
    if (e.a < n || e.b < n) continue;
    const double len = edge_length(sol.net, e);
    if (len > longest) {
      longest = len;
      PointN dir = sol.net.nodes[e.b] - sol.net.nodes[e.a];
      dir *= 1.0 / len;
      // Sign convention: first nonzero coordinate positive.
      for (int i = 0; i < dir.dim(); ++i)
        if (std::abs(dir[i]) > 1e-12) {
          if (dir[i] < 0) dir *= -1.0;
          break;
        }
      sol.certificate.steiner_axis = dir;
    }
  }
  return sol;
}

AngleReport angle_audit(const MultiplicityNet& net, double tol) {
  constexpr double target = 2.0 * std::numbers::pi / 3.0;
  std::vector<std::vector<PointN>> dirs(net.nodes.size());
  for (const auto& e : net.edges) {
    const PointN d = net.nodes[e.b] - net.nodes[e.a];
    const double len = geom::norm(d);
    if (!(len > 0.0)) continue;
    dirs[e.a].push_back(d * (1.0 / len));
    dirs[e.b].push_back(d * (-1.0 / len));
  }
  AngleReport rep;
  for (std::size_t v = 0; v < net.nodes.size(); ++v) {
    const bool terminal = v < net.terminal_count;
    const auto& ds = dirs[v];
    if (terminal && ds.size() < 2) continue;
    NodeAngles na;
    na.node = static_cast<std::uint32_t>(v);
    na.terminal = terminal;
    for (std::size_t i = 0; i < ds.size(); ++i)
      for (std::size_t j = i + 1; j < ds.size(); ++j)
        na.angles.push_back(std::acos(std::clamp(geom::dot(ds[i], ds[j]), -1.0, 1.0)));
    if (terminal) {
      for (double a : na.angles) na.deviation = std::max(na.deviation, target - a);
      na.pass = na.deviation <= tol;
    } else {
      if (ds.size() != 3) {
        na.deviation = std::numbers::pi;
        na.pass = false;
      } else {
        for (double a : na.angles) na.deviation = std::max(na.deviation, std::abs(a - target));
        na.pass = na.deviation <= tol;
      }
    }
    rep.pass = rep.pass && na.pass;
    rep.max_deviation = std::max(rep.max_deviation, na.deviation);
    rep.nodes.push_back(std::move(na));
  }
  return rep;
}

}  // namespace plateau::steiner
