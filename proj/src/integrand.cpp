#include "plateau/integrand.hpp"

#include <string>

namespace plateau::geom {

IntegrandField IntegrandField::constant(const Eigen::MatrixXd& a, double bound) {
  if (a.rows() != a.cols() || a.rows() < 2 || a.rows() > kMaxDim)
    throw DomainError("integrand matrix must be square of size 2..6");
  IntegrandField f;
  f.origin = PointN(static_cast<int>(a.rows()));
  for (int i = 0; i < f.ambient(); ++i) f.counts[i] = 1;
  f.samples = {a};
  f.bound = bound;
  f.interpolation = Interpolation::Nearest;
  return f;
}

Eigen::MatrixXd IntegrandField::at(const PointN& x) const {
  const int n = ambient();
  std::array<int, kMaxDim> lo{};
  std::array<double, kMaxDim> frac{};
  for (int i = 0; i < n; ++i) {
    const double u = std::clamp((x[i] - origin[i]) / spacing, 0.0, static_cast<double>(counts[i] - 1));
    lo[i] = std::min(static_cast<int>(std::floor(u)), std::max(0, counts[i] - 2));
    frac[i] = u - lo[i];
    if (counts[i] == 1) {
      lo[i] = 0;
      frac[i] = 0.0;
    }
  }
  auto index = [&](const std::array<int, kMaxDim>& idx) {
    std::size_t k = 0;
    for (int i = n - 1; i >= 0; --i) k = k * static_cast<std::size_t>(counts[i]) + static_cast<std::size_t>(idx[i]);
    return k;
  };
  if (interpolation == Interpolation::Nearest) {
    std::array<int, kMaxDim> idx{};
    for (int i = 0; i < n; ++i) idx[i] = std::min(counts[i] - 1, lo[i] + (frac[i] >= 0.5 ? 1 : 0));
    return samples[index(idx)];
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int corner = 0; corner < (1 << n); ++corner) {
    double w = 1.0;
    std::array<int, kMaxDim> idx{};
    bool used = true;
    for (int i = 0; i < n; ++i) {
      const bool up = (corner >> i) & 1;
      if (up && counts[i] == 1) used = false;
      idx[i] = lo[i] + (up ? 1 : 0);
      w *= up ? frac[i] : 1.0 - frac[i];
    }
    if (used && w != 0.0) out += w * samples[index(idx)];
  }
  return out;
}

namespace {

void check_matrix(const Eigen::MatrixXd& a, double bound, const std::string& where) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& sv = svd.singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  if (!(smax <= bound)) throw DomainError(where + ": operator norm exceeds the declared bound");
  if (!(smin > 0.0) || !(1.0 / smin <= bound)) throw DomainError(where + ": inverse norm exceeds the declared bound");
}

}  // namespace

void validate(const IntegrandField& field) {
  const int n = field.ambient();
  if (n < 2 || n > kMaxDim) throw DomainError("integrand field: bad ambient dimension");
  if (!(field.spacing > 0.0)) throw DomainError("integrand field: spacing must be positive");
  std::size_t total = 1;
  for (int i = 0; i < n; ++i) {
    if (field.counts[i] < 1) throw DomainError("integrand field: empty sample grid");
    total *= static_cast<std::size_t>(field.counts[i]);
  }
  if (field.samples.size() != total) throw DomainError("integrand field: sample count mismatch");
  for (std::size_t k = 0; k < total; ++k) {
    if (field.samples[k].rows() != n || field.samples[k].cols() != n)
      throw DomainError("integrand field: sample " + std::to_string(k) + " has wrong shape");
    check_matrix(field.samples[k], field.bound, "integrand field sample " + std::to_string(k));
  }
}

double integrand_density(const Eigen::MatrixXd& a, std::span<const PointN> simplex) {
  const int d = static_cast<int>(simplex.size()) - 1;
  const int n = simplex[0].dim();
  Eigen::MatrixXd v(n, d);
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < n; ++i) v(i, k) = simplex[static_cast<std::size_t>(k + 1)][i] - simplex[0][i];
  const Eigen::MatrixXd av = a * v;
  const double num = (av.transpose() * av).determinant();
  const double den = (v.transpose() * v).determinant();
  if (!(den > 0.0)) return 0.0;
  return unit_ball_volume(d) * std::sqrt(std::max(0.0, num) / den);
}

double integrand_measure(const EmbeddedMesh& mesh, const IntegrandField& field) {
  if (field.ambient() != mesh.ambient) throw DomainError("integrand field dimension does not match the mesh");
  std::vector<double> terms;
  terms.reserve(mesh.size());
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    if (mesh.is_degenerate(s)) continue;
    const auto c = mesh.corners(s);
    PointN bary(mesh.ambient);
    for (const auto& p : c) bary += p;
    bary *= 1.0 / static_cast<double>(c.size());
    const Eigen::MatrixXd a = field.at(bary);
    check_matrix(a, field.bound, "integrand field at barycenter of simplex " + std::to_string(s));
    terms.push_back(integrand_density(a, c) * simplex_volume(c));
  }
  return pairwise_sum(terms);
}

bool simplex_on_line(const EmbeddedMesh& mesh, std::size_t s, const LineBoundary& line, double tol) {
  for (int k = 0; k <= mesh.dim; ++k)
    if (line.distance(mesh.vertices[mesh.simplices[s][static_cast<std::size_t>(k)]]) > tol) return false;
  return true;
}

double weighted_measure(const EmbeddedMesh& mesh, const LineBoundary& line, double alpha, double tol) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("boundary weight must lie in [0, 1]");
  std::vector<double> terms;
  for (std::size_t s = 0; s < mesh.size(); ++s) {
    if (mesh.is_degenerate(s)) continue;
    const double v = simplex_volume(mesh, s);
    terms.push_back(simplex_on_line(mesh, s, line, tol) ? alpha * v : v);
  }
  return pairwise_sum(terms);
}

}  // namespace plateau::geom
