#pragma once

// Federer–Fleming projection of a d-mesh onto the d-skeleton of a dyadic grid.
//
// Each stage maps the content of every open k-face S radially from a center
// ξ ∈ ½S onto ∂S, for k = n down to d+1. On the pyramid over a facet F of S
// the radial map is v ↦ ξ + (v − ξ)/λ_F(v) with λ_F affine, i.e. projective,
// so convex pieces clipped to that pyramid map to convex pieces. Images are
// therefore computed exactly rather than vertex by vertex on a refined mesh.

#include <cstdint>
#include <string>
#include <vector>

#include "plateau/dyadic.hpp"
#include "plateau/geometry.hpp"
#include "plateau/polytope.hpp"

namespace plateau::ff {

using geom::EmbeddedMesh;
using geom::PointN;
using geom::Polytope;
using grid::CubeIndex;
using grid::DyadicGrid;
using grid::FaceKey;

enum class Strategy { Far, Chebyshev };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct ProjectionOptions {
  Strategy strategy = Strategy::Chebyshev;
  int trials = 32;
  std::uint64_t seed = 0;
  /// Optional pre-refinement length; 0 keeps the input pieces as they are.
  double eta = 0.0;
  bool keep_stage_meshes = true;
};

/// A convex piece of the current image, carried by the lowest-dimensional
/// grid face containing it.
struct Piece {
  Polytope poly;
  int multiplicity = 1;
  FaceKey carrier;
  std::uint32_t origin = 0;  // linear index of the cube the piece started in
};

struct FaceChoice {
  FaceKey face;
  PointN center;
  double measure_in = 0.0;
  double measure_out = 0.0;
  double ratio = 0.0;     // measure_out / measure_in, 0 when the face held nothing
  double distance = 0.0;  // dist(ξ, content)
  double bound = 0.0;     // (diam S / distance)^d
};

struct StageRecord {
  int dimension = 0;  // k of the faces projected at this stage
  std::size_t faces = 0;
  double measure_before = 0.0;  // d-measure inside Q
  double measure_after = 0.0;
  double max_ratio = 0.0;
};

struct CubeRow {
  CubeIndex cube{};
  double in = 0.0;         // input content in the closed cube
  double origin_in = 0.0;  // input content assigned to this cube
  double image = 0.0;      // final measure of that content
  double out = 0.0;        // output content in the closed cube
  double ratio = 0.0;      // image / origin_in
  double bound = 0.0;      // Σ_{R' ∈ V(R)} image(R')
  bool ok = true;
};

struct ProjectionResult {
  int d = 0;
  EmbeddedMesh mesh;
  std::vector<EmbeddedMesh> stage_meshes;  // E_n, E_{n−1}, …, after each stage
  std::vector<StageRecord> stages;
  std::vector<FaceChoice> choices;
  std::vector<CubeRow> cubes;
  double empirical_constant = 0.0;
  bool locality_ok = true;
  bool collapsed = false;
  std::size_t trajectory_violations = 0;
  std::size_t locality_violations = 0;
  /// Exact images: no refinement error to certify.
  double error_bound = 0.0;

  EmbeddedMesh outside;           // part of the input outside Q, untouched
  std::vector<Piece> pieces;      // current content of Q
  std::vector<Piece> input;       // content of Q before any stage
  std::vector<Piece> residue;     // (d−1)-dimensional images left by the extra collapse
};

/// Radial projection of a face's content from ξ onto the face boundary.
/// `face_low`/`face_high` bound the face; axes with equal bounds are fixed.
/// Throws DomainError when ξ is within 1e-9·diam(S) of the content.
EmbeddedMesh radial_project_face(const EmbeddedMesh& sub, const PointN& face_low, const PointN& face_high,
                                 const PointN& xi);

struct CenterChoice {
  PointN center;
  double ratio = 0.0;
  double distance = 0.0;
  double bound = 0.0;
};

/// Picks ξ ∈ ½S for the content of one face (same face box convention).
CenterChoice choose_center(const EmbeddedMesh& content, const PointN& face_low, const PointN& face_high,
                           Strategy strategy, int trials, std::uint64_t seed);

ProjectionResult project_to_skeleton(const EmbeddedMesh& mesh, const DyadicGrid& grid,
                                     const ProjectionOptions& opts = {});

/// Stage g_d: when every interior d-face holds less than (s/2)^d and a free
/// center exists, push all interior content into the (d−1)-skeleton.
ProjectionResult extra_collapse(const ProjectionResult& result, const DyadicGrid& grid,
                                const ProjectionOptions& opts = {});

/// Largest deviation of an interior simplex from the k-skeleton: for each
/// simplex, the (n−k)-th smallest per-axis spread from a common grid plane.
/// Simplices outside Q or lying in ∂Q are skipped.
double skeleton_residual(const EmbeddedMesh& mesh, const DyadicGrid& grid, int k);

/// d-measure of the non-degenerate simplices whose barycenter is inside Q and
/// not on ∂Q.
double interior_measure(const EmbeddedMesh& mesh, const DyadicGrid& grid);

}  // namespace plateau::ff
