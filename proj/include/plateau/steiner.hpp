#pragma once

// Nets with integer multiplicities: Kirchhoff balance, the size / mass / M_β
// objectives, and an exhaustive full-topology solver for up to 8 terminals.
//
// Orientation: an edge (a, b, m) carries m units from a to b. At every node,
// outflow minus inflow equals the node's charge (0 at Steiner points), so
// positive charges are sources.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plateau/geometry.hpp"

namespace plateau::steiner {

using geom::PointN;

struct Terminal {
  PointN position;
  int charge = 0;
};

enum class Objective { Size, Mass, MBeta };

std::string to_string(Objective o);
Objective objective_from_string(const std::string& s);

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  int multiplicity = 0;
};

struct MultiplicityNet {
  /// Terminals first (in input order), then Steiner points.
  std::vector<PointN> nodes;
  std::size_t terminal_count = 0;
  std::vector<Edge> edges;
  Objective objective = Objective::Size;
  double beta = 0.5;

  std::size_t steiner_count() const { return nodes.size() - terminal_count; }
};

struct KirchhoffViolation {
  std::uint32_t node = 0;
  int expected = 0;  // charge
  int actual = 0;    // outflow − inflow
};

struct KirchhoffReport {
  bool ok = true;
  std::vector<KirchhoffViolation> violations;
};

KirchhoffReport check_kirchhoff(const MultiplicityNet& net, std::span<const Terminal> terminals);

/// S = Σ_{m≠0} |I|, M = Σ |m||I|, M_β = Σ_{m≠0} |m|^β |I|.
double objective(const MultiplicityNet& net, Objective kind, double beta = 0.5);
double edge_weight(int multiplicity, Objective kind, double beta);
double edge_length(const MultiplicityNet& net, const Edge& e);

struct TopologyScore {
  std::string encoding;
  double score = 0.0;
};

struct Certificate {
  std::vector<TopologyScore> scores;  // every full topology, in enumeration order
  std::size_t best = 0;
  std::vector<std::string> tied;       // encodings within 1e-9 of the best
  double star_score = 0.0;             // terminals joined to their centroid
  /// Direction of the longest Steiner–Steiner edge of the winner (empty point if none).
  PointN steiner_axis;
};

struct Solution {
  MultiplicityNet net;
  Certificate certificate;
};

struct SolveOptions {
  double tolerance = 1e-10;
  int max_iterations = 200000;
};

/// Exhaustive search over full topologies, multiplicities from the unique tree
/// flow, Steiner positions by iterated weighted-median solves.
Solution solve_steiner(std::span<const Terminal> terminals, Objective kind, double beta = 0.5,
                       const SolveOptions& opts = {});

/// Every full topology on n terminals as edge lists over nodes 0..2n−3
/// (terminals 0..n−1). There are (2n−5)!! of them for n ≥ 3.
std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> full_topologies(std::size_t n);

/// Each terminal joined to the centroid, carrying its own charge.
MultiplicityNet star_net(std::span<const Terminal> terminals, Objective kind, double beta = 0.5);

struct NodeAngles {
  std::uint32_t node = 0;
  bool terminal = false;
  std::vector<double> angles;  // pairwise angles between incident edges, radians
  double deviation = 0.0;
  bool pass = true;
};

struct AngleReport {
  bool pass = true;
  double max_deviation = 0.0;
  std::vector<NodeAngles> nodes;
};

/// Steiner nodes need degree 3 with all angles 2π/3 ± tol; terminals of degree
/// ≥ 2 need every angle ≥ 2π/3 − tol.
AngleReport angle_audit(const MultiplicityNet& net, double tol = 1e-4);

}  // namespace plateau::steiner
