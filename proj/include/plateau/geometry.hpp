#pragma once

// Points, balls and simplicial meshes with exact d-dimensional measure.
//
// Meshes are the computable stand-in for rectifiable sets: the Hausdorff
// measure H^d of a finite union of flat simplices is the sum of their
// d-volumes, so no covering estimates are ever needed.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "plateau/errors.hpp"

namespace plateau::geom {

inline constexpr int kMaxDim = 6;

class PointN {
 public:
  PointN() = default;
  explicit PointN(int dim);
  PointN(std::initializer_list<double> coords);
  explicit PointN(std::span<const double> coords);

  int dim() const { return dim_; }
  double operator[](int i) const { return c_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return c_[static_cast<std::size_t>(i)]; }
  std::span<const double> coords() const { return {c_.data(), static_cast<std::size_t>(dim_)}; }

  PointN& operator+=(const PointN& o);
  PointN& operator-=(const PointN& o);
  PointN& operator*=(double s);

  bool operator==(const PointN& o) const = default;

  bool finite() const;

 private:
  std::array<double, kMaxDim> c_{};
  int dim_ = 0;
};

PointN operator+(PointN a, const PointN& b);
PointN operator-(PointN a, const PointN& b);
PointN operator*(PointN a, double s);
PointN operator*(double s, PointN a);
double dot(const PointN& a, const PointN& b);
double norm2(const PointN& a);
double norm(const PointN& a);
double distance(const PointN& a, const PointN& b);
PointN lerp(const PointN& a, const PointN& b, double t);
PointN unit_vector(int dim, int axis);

struct Ball {
  PointN center;
  double radius = 1.0;
};

/// Throws DomainError unless radius > 0 and the center is finite.
void validate(const Ball& ball);

/// Vertex indices of one simplex; only the first dim+1 entries are used.
using Simplex = std::array<std::uint32_t, 3>;

/// A d-dimensional simplicial set (d = 1 segments, d = 2 triangles) in R^n.
struct EmbeddedMesh {
  int dim = 1;
  int ambient = 2;
  std::vector<PointN> vertices;
  std::vector<Simplex> simplices;
  /// Per-simplex integer tag; empty means every simplex carries 1.
  std::vector<int> multiplicity;
  /// Per-simplex flag for explicitly degenerate simplices; empty means none.
  std::vector<std::uint8_t> degenerate;

  EmbeddedMesh() = default;
  EmbeddedMesh(int simplex_dim, int ambient_dim) : dim(simplex_dim), ambient(ambient_dim) {}

  std::size_t size() const { return simplices.size(); }
  bool empty() const { return simplices.empty(); }
  int multiplicity_of(std::size_t s) const { return multiplicity.empty() ? 1 : multiplicity[s]; }
  bool is_degenerate(std::size_t s) const { return !degenerate.empty() && degenerate[s] != 0; }

  std::uint32_t add_vertex(const PointN& p);
  void add_simplex(const Simplex& s, int mult = 1, bool flagged_degenerate = false);

  /// The points of simplex s.
  std::vector<PointN> corners(std::size_t s) const;
};

/// Throws DomainError on bad indices, repeated vertices, non-finite coordinates,
/// or an unflagged simplex of zero volume.
void validate(const EmbeddedMesh& mesh);

/// d-volume of the simplex spanned by pts (d = pts.size() - 1 in {0,1,2}).
double simplex_volume(std::span<const PointN> pts);
double simplex_volume(const EmbeddedMesh& mesh, std::size_t s);
double simplex_diameter(std::span<const PointN> pts);

/// Exact H^d of the mesh: sum of simplex volumes by pairwise summation.
double measure(const EmbeddedMesh& mesh);

/// Fixed-order pairwise summation; deterministic for a given input order.
double pairwise_sum(std::span<const double> values);

/// Volume of the unit ball of R^d.
double unit_ball_volume(int d);

struct ClipOptions {
  bool closed = true;
  /// Relative tolerance of the polygonal stand-in for circular boundaries.
  double tolerance = 1e-4;
};

/// Number of sides of the area-preserving polygon used for a circular
/// boundary at the given relative tolerance.
int circle_polygon_sides(double tolerance);

/// E ∩ B. Segments are clipped exactly; triangles are clipped against an
/// area-preserving regular polygon inscribed in the plane ∩ ball disk.
EmbeddedMesh clip_to_ball(const EmbeddedMesh& mesh, const Ball& ball, const ClipOptions& opts = {});

/// E ∖ B, using the same polygonalization so that the two pieces partition E.
/// Whole simplices that meet the closed ball, unclipped. Nearest points of the mesh
/// to anything in B(c, ρ) lie in the result when the mesh meets B(c, 0).
EmbeddedMesh touching_ball(const EmbeddedMesh& mesh, const Ball& ball);

EmbeddedMesh clip_outside_ball(const EmbeddedMesh& mesh, const Ball& ball,
                               const ClipOptions& opts = {});

/// H^{d-1}(E ∩ ∂B): arc length of the sphere slice for d = 2 (exact arcs),
/// number of crossing points for d = 1.
double sphere_slice_measure(const EmbeddedMesh& mesh, const Ball& ball);

struct RefineOptions {
  std::size_t max_simplices = 4'000'000;
};

/// Longest-edge bisection until every simplex has diameter ≤ eta.
EmbeddedMesh refine(const EmbeddedMesh& mesh, double eta, const RefineOptions& opts = {});

/// Closest-point distance from p to a simplex given by its corners.
double point_simplex_distance(const PointN& p, std::span<const PointN> corners);

/// Nearest-simplex queries over a fixed mesh via a uniform bucket grid.
class SimplexLocator {
 public:
  explicit SimplexLocator(const EmbeddedMesh& mesh);
  bool empty() const { return corners_.empty(); }
  /// Distance to the nearest simplex. With enough > 0 the search may stop at
  /// any simplex closer than that, returning an upper bound ≤ enough.
  double distance(const PointN& p, double enough = 0.0) const;

 private:
  std::vector<std::vector<PointN>> corners_;
  std::vector<PointN> centers_;
  std::vector<double> radii_;
  int ambient_ = 0;
  bool bucketed_ = false;
  PointN lo_;
  double cell_ = 1.0;
  std::array<int, kMaxDim> counts_{};
  std::vector<std::vector<std::uint32_t>> buckets_;

  std::size_t bucket_of(const std::array<int, kMaxDim>& idx) const;
};

/// Points covering every simplex with spacing about h (vertices included).
std::vector<PointN> sample_points(const EmbeddedMesh& mesh, double spacing);

struct HausdorffOptions {
  /// Sampling pitch as a fraction of the ball radius.
  double resolution = 1.0 / 48.0;
  ClipOptions clip{};
};

/// Normalized local Hausdorff distance d_{x,r}(E,F). A supremum over an empty
/// set is 0, and a distance to an empty set is taken as 0 as well.
double local_hausdorff_distance(const EmbeddedMesh& e, const EmbeddedMesh& f, const Ball& ball,
                                const HausdorffOptions& opts = {});

/// Douglas boundary energy of a closed curve sampled uniformly in angle.
/// The removable diagonal singularity is replaced by its limit 4|f'|².
double douglas_energy(std::span<const PointN> samples);

/// Apply p -> (p - origin) / scale to every vertex.
EmbeddedMesh rescale(const EmbeddedMesh& mesh, const PointN& origin, double scale);

/// Concatenate meshes of equal dimension.
EmbeddedMesh merge(const EmbeddedMesh& a, const EmbeddedMesh& b);

/// h(r) = C r^alpha for r ≤ cutoff, +∞ beyond.
struct Gauge {
  double coefficient = 0.0;
  double exponent = 1.0;
  double cutoff = std::numeric_limits<double>::infinity();

  double operator()(double r) const;
  /// ∫_0^r h(2t) dt / t in closed form.
  double dini_integral(double r) const;
};
void validate(const Gauge& g);

struct LineBoundary {
  PointN base;
  PointN direction;

  double distance(const PointN& p) const;
  PointN foot(const PointN& p) const;
};
/// Normalizes the direction; throws on a zero direction.
LineBoundary make_line(const PointN& base, const PointN& direction);

}  // namespace plateau::geom
