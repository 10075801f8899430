#pragma once

// Anisotropic integrands f(x, T) built from a matrix field A(x), and the
// boundary-weighted measure H^d(E \ Γ) + α H^d(E ∩ Γ).

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "plateau/geometry.hpp"

namespace plateau::geom {

enum class Interpolation { Nearest, Multilinear };

/// A(x) sampled on a regular grid of the box [origin, origin + spacing*(counts-1)].
/// Points outside the box are clamped to it.
struct IntegrandField {
  PointN origin;
  double spacing = 1.0;
  std::array<int, kMaxDim> counts{};
  std::vector<Eigen::MatrixXd> samples;  // x-fastest ordering
  Interpolation interpolation = Interpolation::Multilinear;
  double bound = 1.0;  // declared bound on ‖A‖ and ‖A⁻¹‖

  static IntegrandField constant(const Eigen::MatrixXd& a, double bound);
  int ambient() const { return origin.dim(); }
  Eigen::MatrixXd at(const PointN& x) const;
};

/// Throws DomainError if a sample violates ‖A‖ ≤ bound or ‖A⁻¹‖ ≤ bound.
void validate(const IntegrandField& field);

/// f(x, T) = H^d(A(T ∩ B(0,1))) = ω_d · J, J the d-dimensional Jacobian of A on
/// the d-plane T spanned by the simplex corners.
double integrand_density(const Eigen::MatrixXd& a, std::span<const PointN> simplex);

/// Σ f(x_c, T_s) vol(s), x_c the barycenter of simplex s.
double integrand_measure(const EmbeddedMesh& mesh, const IntegrandField& field);

/// True iff every vertex of simplex s lies within tol of the line.
bool simplex_on_line(const EmbeddedMesh& mesh, std::size_t s, const LineBoundary& line, double tol);

/// H^d(E \ Γ) + α H^d(E ∩ Γ) with α ∈ [0, 1].
double weighted_measure(const EmbeddedMesh& mesh, const LineBoundary& line, double alpha, double tol = 1e-9);

}  // namespace plateau::geom
