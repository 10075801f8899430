#pragma once

// Density ratios θ_x(r) = r^{-d} H^d(E ∩ B(x, r)), gauge-adjusted profiles, the
// sliding functional with its shade half-plane, the cone-slice identity, blow-up
// rescalings, the no-big-hole projection test, and classification of points
// against a small catalog of minimal cones.

#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "plateau/geometry.hpp"

namespace plateau::density {

using geom::Ball;
using geom::ClipOptions;
using geom::EmbeddedMesh;
using geom::Gauge;
using geom::LineBoundary;
using geom::PointN;

/// 3·arccos(−1/3): six sectors of angle arccos(−1/3), each of density half its angle.
double tetrahedral_density();

struct DensityValue {
  double value = 0.0;
  double error = 0.0;
};

DensityValue density(const EmbeddedMesh& e, const PointN& x, double r, const ClipOptions& clip = {});

struct DensityProfile {
  PointN center;
  std::vector<double> radii;
  std::vector<double> theta;
  std::vector<double> adjusted;
  std::vector<double> sliding;  // F_x(r); empty unless computed
  std::vector<double> error;
  double limit = 0.0;           // value at the smallest radius
  std::string trend;            // constant | nondecreasing | nonincreasing | mixed
  bool below_unit_density = false;  // some θ below ω_d·(1 − tol)
};

struct ProfileOptions {
  Gauge gauge{};
  double alpha = 1.0;
  ClipOptions clip{};
  /// Spread under which a profile is reported as constant.
  double constant_tolerance = 1e-6;
  /// x must lie within this distance of E.
  double membership_tolerance = 1e-9;
};

/// Throws DomainError unless radii are positive and strictly increasing and x ∈ E.
DensityProfile density_profile(const EmbeddedMesh& e, const PointN& x, const std::vector<double>& radii,
                               const ProfileOptions& opts = {});

struct SlidingContext {
  LineBoundary gamma;
  PointN x;
};

/// The shade of Γ seen from x, as a flat patch covering B(x, radius).
EmbeddedMesh shade_patch(const SlidingContext& ctx, double radius);

/// θ_x(r) plus r^{-2}·H²(S_x ∩ B(x, r)). Two-dimensional sets only.
DensityProfile sliding_profile(const EmbeddedMesh& e, const SlidingContext& ctx, const std::vector<double>& radii,
                               const ProfileOptions& opts = {});

struct SliceCheck {
  double inside = 0.0;  // H^d(X ∩ B)
  double slice = 0.0;   // H^{d−1}(X ∩ ∂B)
  double residual = 0.0;
};

/// |H^d(X∩B) − (r/d) H^{d−1}(X∩∂B)| / H^d(X∩B) for a cone X with apex x.
/// With eta > 0 the mesh is first refined to that edge length.
SliceCheck cone_slice_check(const EmbeddedMesh& cone, const PointN& apex, double r, double eta = 0.0,
                            const ClipOptions& clip = {});

/// r^{-1}(E − x).
EmbeddedMesh blowup(const EmbeddedMesh& e, const PointN& x, double r);

struct AffinePlane {
  PointN origin;
  std::vector<PointN> basis;  // orthonormal, d vectors
};

struct BigProjection {
  double coverage = 0.0;
  bool pass = false;
  std::size_t cells = 0;
  std::size_t hit = 0;
  std::vector<PointN> uncovered;  // centers of missed cells, ambient coordinates
  double max_offset = 0.0;        // largest vertex distance from P inside B(x, r), over r
};

/// Rasterizes π_P(E ∩ B(x, r)) at pitch τr/8 over P ∩ B(x, (1 − τ)r).
/// Throws DomainError naming the vertex when E strays more than εr from P.
BigProjection big_projection_check(const EmbeddedMesh& e, const PointN& x, double r, const AffinePlane& plane,
                                   double eps, double tau, const ClipOptions& clip = {});

// ------------------------------------------------------------------ catalog

/// Planar sector with apex at the origin: directions cos φ·a + sin φ·m, φ ∈ [0, angle], angle ≤ π.
struct Wedge {
  PointN a;
  PointN m;
  double angle = 0.0;
};

/// A cone centered at the origin of R³: a union of wedges (d = 2) or rays (d = 1).
struct ConeShape {
  int d = 2;
  std::vector<Wedge> wedges;
  std::vector<PointN> rays;

  double distance(const PointN& q) const;
  /// Mesh of the cone truncated to radius R, in R^ambient (ambient 2 keeps x, y).
  EmbeddedMesh mesh(double radius, int ambient = 3, int segments = 64) const;
};

struct ConeEntry {
  std::string tag;  // P, Y, T, H, V, line, Y1, V1
  int d = 2;
  double density = 0.0;
  bool needs_boundary = false;
  double beta = 0.0;  // opening angle for V and V1
  ConeShape shape;
};

/// The catalog; V and V1 use the given opening angle (≥ 2π/3).
std::vector<ConeEntry> cone_catalog(double beta = 2.0 * std::numbers::pi / 3.0);
const ConeEntry& catalog_entry(const std::vector<ConeEntry>& catalog, const std::string& tag);

/// Cone mesh rotated by `rotation` (3×3 row-major) and moved to apex x.
EmbeddedMesh placed_cone(const ConeEntry& entry, const std::vector<double>& rotation, const PointN& x, double radius);

struct ClassifyOptions {
  double flatness = 0.05;
  double density_tolerance = 0.1;
  double delta = 0.1;
  int rotations = 512;
  int refine_top = 6;
  std::optional<LineBoundary> boundary;
  ClipOptions clip{};
};

struct CandidateFit {
  std::string tag;
  double density = 0.0;
  double residual = 0.0;
  std::vector<double> rotation;
};

struct Classification {
  std::string tag = "unclassified";
  std::vector<double> rotation;
  double residual = 0.0;
  double theta = 0.0;
  bool flat = false;
  DensityProfile profile;
  std::vector<CandidateFit> candidates;
  std::vector<std::pair<std::string, double>> nearest;  // catalog densities by closeness
  std::string note;
};

/// Ambient 3 (d = 1 or 2) or ambient 2 (d = 1, rotations about the normal only).
Classification classify_point(const EmbeddedMesh& e, const PointN& x, const std::vector<ConeEntry>& catalog,
                              const std::vector<double>& ladder, const ClassifyOptions& opts = {});

}  // namespace plateau::density
