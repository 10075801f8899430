#pragma once

// Convex pieces of simplices (segments and convex polygons) and their exact
// splitting by affine functionals. Both halves of a split share the very same
// crossing points, so splitting never creates or loses measure beyond
// rounding.

#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "plateau/geometry.hpp"

namespace plateau::geom {

/// d = 1: two endpoints. d = 2: convex polygon, vertices in cyclic order.
using Polytope = std::vector<PointN>;

struct SplitResult {
  Polytope nonnegative;
  Polytope negative;
};

/// Split by the sign of per-vertex values of an affine functional.
SplitResult split_polytope(const Polytope& piece, int dim, std::span<const double> values);

SplitResult split_polytope(const Polytope& piece, int dim,
                           const std::function<double(const PointN&)>& functional);

/// Drops repeated consecutive vertices; returns false if nothing of
/// dimension dim remains.
bool normalize_polytope(Polytope& piece, int dim);

double polytope_measure(const Polytope& piece, int dim);

/// Assembles meshes with exact-bit vertex deduplication.
class MeshBuilder {
 public:
  MeshBuilder(int dim, int ambient) : mesh_(dim, ambient) {}

  std::uint32_t vertex(const PointN& p);
  /// Fan-triangulates a convex polygon (or adds a segment).
  void add_polytope(const Polytope& piece, int mult = 1);
  void add_simplex(std::span<const PointN> corners, int mult = 1, bool degenerate = false);

  EmbeddedMesh take() { return std::move(mesh_); }
  const EmbeddedMesh& mesh() const { return mesh_; }

 private:
  struct KeyHash {
    std::size_t operator()(const std::array<double, kMaxDim>& k) const;
  };
  EmbeddedMesh mesh_;
  std::unordered_map<std::array<double, kMaxDim>, std::uint32_t, KeyHash> index_;
};

}  // namespace plateau::geom
