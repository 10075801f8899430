#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "plateau/geometry.hpp"

namespace testing_support {

/// Haar-ish random rotation in dimension n (row-major), from the QR of a Gaussian matrix.
inline std::vector<double> random_rotation(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  if (q.determinant() < 0) q.col(0) *= -1.0;
  std::vector<double> out(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i * n + j)] = q(i, j);
  return out;
}

inline plateau::geom::PointN apply(const std::vector<double>& rot, const plateau::geom::PointN& p) {
  const int n = p.dim();
  plateau::geom::PointN out(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out[i] += rot[static_cast<std::size_t>(i * n + j)] * p[j];
  return out;
}

}  // namespace testing_support
