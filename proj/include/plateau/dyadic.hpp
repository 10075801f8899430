#pragma once

// Axis-aligned cube Q cut into N^n subcubes, with faces of every dimension
// addressed by integer keys, neighbor and annulus queries, and flat tori
// obtained by identifying opposite faces.

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "plateau/geometry.hpp"

namespace plateau::grid {

using geom::kMaxDim;
using geom::PointN;

/// Face of the subdivision: lattice corner (in units of the cell side) plus
/// the set of free axes. Corners on periodic axes are reduced mod N.
struct FaceKey {
  std::uint32_t axes = 0;
  std::array<std::int32_t, kMaxDim> corner{};

  int dim() const { return __builtin_popcount(axes); }
  bool free(int i) const { return (axes >> i) & 1u; }
  auto operator<=>(const FaceKey&) const = default;
};

struct FaceKeyHash {
  std::size_t operator()(const FaceKey& k) const;
};

std::string to_string(const FaceKey& key, int n);

using CubeIndex = std::array<std::int32_t, kMaxDim>;

class DyadicGrid {
 public:
  /// Q = corner + [0, size]^n cut into N^n cubes. Axes in periodic_mask are
  /// identified end to end (a flat torus in those directions).
  DyadicGrid(const PointN& corner, double size, int subdivisions, std::uint32_t periodic_mask = 0,
             std::size_t max_cubes = 20'000'000);

  int n() const { return n_; }
  int subdivisions() const { return N_; }
  double size() const { return size_; }
  double cell() const { return size_ / N_; }
  const PointN& corner() const { return corner_; }
  std::uint32_t periodic_mask() const { return periodic_; }
  bool periodic(int axis) const { return (periodic_ >> axis) & 1u; }
  double diameter() const { return size_ * std::sqrt(static_cast<double>(n_)); }

  /// Coordinate of grid plane k on the given axis; every module uses this one
  /// expression so that plane values agree bit for bit.
  double plane(int axis, std::int64_t k) const { return corner_[axis] + size_ * static_cast<double>(k) / N_; }

  std::size_t cube_count() const { return cube_count_; }
  std::size_t face_count(int k) const;
  /// All k-faces, sorted.
  std::vector<FaceKey> faces(int k) const;
  std::vector<CubeIndex> cubes() const;

  FaceKey canonical(FaceKey key) const;
  FaceKey cube_key(const CubeIndex& c) const;
  std::size_t linear(const CubeIndex& c) const;
  CubeIndex unlinear(std::size_t idx) const;
  bool valid(const FaceKey& key) const;

  /// Facets of a face (dimension dim−1), each canonical.
  std::vector<FaceKey> facets(const FaceKey& key) const;
  /// Faces of dimension dim+1 having this face as a facet.
  std::vector<FaceKey> cofacets(const FaceKey& key) const;
  /// Cubes whose closure contains the face.
  std::vector<CubeIndex> incident_cubes(const FaceKey& key) const;

  /// Face lies in ∂Q (a non-periodic boundary plane).
  bool on_boundary(const FaceKey& key) const;

  PointN face_low(const FaceKey& key) const;
  PointN face_center(const FaceKey& key) const;
  double face_measure(const FaceKey& key) const;

  /// V(R): cubes touching R, including R.
  std::vector<CubeIndex> neighbors(const CubeIndex& c) const;
  bool touches(const CubeIndex& a, const CubeIndex& b) const;

  /// A: cubes touching ∂Q. A²: union of V(R) over R ∈ A.
  std::vector<CubeIndex> annulus() const;
  std::vector<CubeIndex> annulus2() const;

  /// Total d-measure of the d-skeleton, and C·N^{n−d}·diam(Q)^d with
  /// C = binom(n, d)·2^{n−d}.
  double skeleton_measure(int d) const;
  double skeleton_bound(int d) const;

 private:
  PointN corner_;
  double size_ = 1.0;
  int N_ = 1;
  int n_ = 2;
  std::uint32_t periodic_ = 0;
  std::size_t cube_count_ = 0;
};

/// Flat manifold with a single fundamental cube and opposite-face identifications.
struct FlatManifold {
  PointN corner;
  double size = 1.0;
  std::uint32_t periodic_mask = 0;

  int n() const { return corner.dim(); }
  static FlatManifold torus(int n, double size = 1.0);
};

void validate(const FlatManifold& m);

/// Canonical representative in [corner, corner + size) along periodic axes.
PointN wrap(const FlatManifold& m, const PointN& p);

/// Quotient distance: minimum over identification translates.
double quotient_distance(const FlatManifold& m, const PointN& a, const PointN& b);

std::uint64_t binomial(int n, int k);

}  // namespace plateau::grid
