#pragma once

// Discrete Plateau scheme on flat manifolds. A set is projected onto the
// d-skeleton of a dyadic grid, rounded to whole faces, then improved by local
// moves that are deformations by construction:
//
//  * free collapse: a d-face with a (d−1)-face no other retained d-face uses
//    retracts onto the rest of its boundary;
//  * box push: the retained faces inside a grid box C are mapped onto one side
//    of C. Let K be where they meet the rest of the set and X the closed side
//    plus K. When X is contractible the inclusion K ⊂ X extends to a map of the
//    box contents into X, and the straight-line homotopy inside the convex box
//    is a deformation supported in C. For d ≤ 2, X is (up to homotopy) a graph,
//    so contractible means connected with Euler characteristic 1.
//
// Local search over these moves is a surrogate for minimizing over the whole
// deformation class; nothing here searches that class globally.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "plateau/dyadic.hpp"
#include "plateau/ff.hpp"
#include "plateau/geometry.hpp"

namespace plateau::minimizer {

using geom::Ball;
using geom::EmbeddedMesh;
using geom::PointN;
using grid::DyadicGrid;
using grid::FaceKey;
using grid::FlatManifold;

/// A finite union of closed grid faces of dimension ≤ d. Lower-dimensional
/// faces are kept only where no retained face contains them.
class FaceSet {
 public:
  FaceSet(const DyadicGrid& grid, int d);

  const DyadicGrid& grid() const { return grid_; }
  int d() const { return d_; }
  const std::set<FaceKey>& faces() const { return faces_; }
  bool empty() const { return faces_.empty(); }

  bool contains(const FaceKey& key) const;
  /// Canonicalizes; throws DomainError for keys outside the grid or of dimension > d.
  void insert(const FaceKey& key);
  void erase(const FaceKey& key);

  std::size_t count(int k) const;
  /// Number of d-faces times s^d.
  double measure() const;
  /// Drops lower-dimensional faces lying in another retained face.
  void normalize();

  /// The d-faces as a simplicial mesh (squares split along a diagonal).
  EmbeddedMesh mesh() const;

 private:
  DyadicGrid grid_;
  int d_ = 2;
  std::set<FaceKey> faces_;
};

/// All faces of the closure of `key` (itself included), canonical.
std::vector<FaceKey> closure(const DyadicGrid& grid, const FaceKey& key);

/// Faces of dimension ≤ max_dim that contain `key` (itself included), canonical.
std::vector<FaceKey> cofaces(const DyadicGrid& grid, const FaceKey& key, int max_dim);

enum class MoveKind { FfStage, FreeCollapse, InteriorProjection };
std::string to_string(MoveKind kind);

/// Axis-aligned box of grid cells: lower corner in lattice units (lifted, so it
/// may pass plane N on periodic axes) and extent per axis (0 on fixed axes).
struct Box {
  std::array<std::int32_t, geom::kMaxDim> lo{};
  std::array<std::int32_t, geom::kMaxDim> size{};
  std::uint32_t axes = 0;
};

struct Move {
  MoveKind kind = MoveKind::FreeCollapse;
  Ball ball;
  std::vector<FaceKey> removed;  // faces whose points move (W)
  std::vector<FaceKey> added;
  double before = 0.0;  // H^d of E ∩ W
  double after = 0.0;   // H^d of its image
  /// Free collapse: the free (d−1)-face. Box push: unused.
  FaceKey through;
  /// Box push: the box and the target side (axis, 0 low / 1 high).
  Box box;
  int side_axis = -1;
  int side_high = 0;
  /// Target is the rest of the box boundary instead of that side.
  bool cap = false;
};

struct DeformationLog {
  std::vector<Move> moves;
};

/// Every face touched by the move lies in its closed ball (quotient metric).
bool move_within_ball(const Move& move, const DyadicGrid& grid);

enum class Policy { Greedy, Priority };
std::string to_string(Policy p);
Policy policy_from_string(const std::string& s);

struct MoveOptions {
  /// Largest box extent per axis in cells; 0 means N − 1 on periodic axes, N otherwise.
  int max_box = 0;
  /// Thickness along the pushed direction when no push of thickness 1 or 2 exists.
  int max_thickness = 4;
  /// Topology checks per search round before giving up on box pushes.
  std::size_t check_budget = 1000;
  /// Box pushes returned by admissible_moves.
  std::size_t list_limit = 64;
};

/// Free collapses if any exist, otherwise measure-reducing box pushes in
/// priority order (delta, then box). Every returned move is legal.
std::vector<Move> admissible_moves(const FaceSet& fs, const MoveOptions& opts = {});

/// The push of the box contents onto one side (axis, 0 low / 1 high), when
/// legal. With cap, the target is instead every other side of the box (the
/// audit uses these to raise measure). With require_gain, only
/// measure-reducing pushes are returned.
std::optional<Move> box_push(const FaceSet& fs, const Box& box, int axis, int high, bool cap = false,
                             bool require_gain = true);

/// Applies a move produced for this set.
void apply_move(FaceSet& fs, const Move& move);

struct MinimizeResult {
  FaceSet faces;
  DeformationLog log;
};

MinimizeResult minimize_faceset(const FaceSet& fs, Policy policy = Policy::Priority, std::uint64_t seed = 0,
                                const MoveOptions& opts = {});

/// Keeps exactly the d-faces.
FaceSet core_reduce(const FaceSet& fs);

struct InitOptions {
  double threshold = 0.5;
  ff::Strategy strategy = ff::Strategy::Chebyshev;
  int trials = 32;
  /// Raster resolution per face axis for covered-area estimates (d = 2).
  int raster = 64;
};

struct Initialization {
  FaceSet faces;
  DeformationLog log;
  double input_measure = 0.0;      // H^d(E0)
  double projected_measure = 0.0;  // H^d of the FF image, counting multiplicity
  std::size_t dropped = 0;         // faces with content below the threshold
};

Initialization initialize_from_mesh(const EmbeddedMesh& e0, const DyadicGrid& grid,
                                    const std::optional<FlatManifold>& manifold, std::uint64_t seed,
                                    const InitOptions& opts = {});

struct AuditTrial {
  std::string kind;
  double before = 0.0;
  double after = 0.0;
  FaceKey anchor;
};

struct Audit {
  std::size_t trials = 0;
  std::size_t legal = 0;
  std::size_t improving = 0;
  double min_ratio = 1.0;    // min after/before over legal trials
  double empirical_m = 1.0;  // max before/after
  std::vector<double> ratios;
  std::optional<AuditTrial> worst;
};

/// Random legal test deformations in balls of radius ≤ delta0 anchored at
/// retained d-faces: free collapses and box pushes.
Audit quasiminimality_audit(const FaceSet& fs, std::size_t trials, double delta0, std::uint64_t seed);

struct LevelReport {
  int subdivisions = 0;
  double input_measure = 0.0;      // E_k
  double projected_measure = 0.0;  // FF image
  double rounded_measure = 0.0;    // E_k^d
  double minimized_measure = 0.0;  // F_k
  double inflation = 0.0;          // E_k^d / E_k
  std::size_t moves = 0;
  std::vector<double> move_ratios;  // after/before per accepted move
  Audit audit;
  std::vector<double> distance_to_previous;  // d_{x,r} on the ladder; empty at the first level
  double quantization = 0.0;                 // 8/N
};

struct SchemeOptions {
  Policy policy = Policy::Priority;
  InitOptions init{};
  MoveOptions moves{};
  std::size_t audit_trials = 10000;
  /// Audit ball radius as a multiple of the cell side.
  double audit_cells = 2.0;
  /// Ball radii for distances between levels, as fractions of the domain size.
  std::vector<double> ladder{0.125, 0.25, 0.375};
};

struct SchemeResult {
  FaceSet final_set;
  std::vector<LevelReport> levels;
  std::vector<FaceSet> minimizers;
  bool nonincreasing = true;  // F_k within quantization of the previous level
};

SchemeResult run_scheme(const EmbeddedMesh& e0, const std::vector<int>& levels, const FlatManifold& manifold,
                        std::uint64_t seed, const SchemeOptions& opts = {});

}  // namespace plateau::minimizer
