#pragma once

// Mesh generators for flat pieces: parallelogram patches, planar sectors,
// polylines and the icosphere octant.

#include <functional>

#include "plateau/geometry.hpp"

namespace plateau::geom {

/// origin + a u + b v for (a, b) ∈ [0,1]², cut into nu × nv cells of two triangles.
EmbeddedMesh quad_patch(const PointN& origin, const PointN& u, const PointN& v, int nu, int nv);

/// Flat sector {apex + ρ(cos φ e1 + sin φ e2) : 0 ≤ φ ≤ angle, ρ ≤ R} as a fan of
/// triangles. The outer vertices sit at R / cos(step/2), so the fan contains the
/// true sector of radius R and agrees with it inside B(apex, R).
EmbeddedMesh sector_fan(const PointN& apex, const PointN& e1, const PointN& e2, double angle, double radius,
                        int segments);

/// Flat annulus around center: the inner rim is the regular polygon with circumradius
/// `inner`, the outer rim circumscribes the circle of radius `outer`.
EmbeddedMesh annulus_patch(const PointN& center, const PointN& e1, const PointN& e2, double inner, double outer,
                           int rings, int segments);

/// Polyline through the given points (d = 1), optionally closed.
EmbeddedMesh polyline(const std::vector<PointN>& points, bool closed = false);

/// Graph z = height(x, y) over [x0, x0 + w] × [y0, y0 + w] in R^3.
EmbeddedMesh height_field(double x0, double y0, double w, int cells, const std::function<double(double, double)>& height);

/// Geodesic subdivision of the spherical octant x, y, z ≥ 0 of the unit sphere.
EmbeddedMesh sphere_octant(int levels);

/// Apply p -> rotation * p + shift to every vertex (rotation given row-major).
EmbeddedMesh rigid_motion(const EmbeddedMesh& mesh, const std::vector<double>& rotation, const PointN& shift);

}  // namespace plateau::geom
