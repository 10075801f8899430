#include "plateau/polytope.hpp"

#include <bit>
#include <cstring>

namespace plateau::geom {

namespace {

bool lex_less(const PointN& a, const PointN& b) {
  for (int i = 0; i < a.dim(); ++i) {
    if (a[i] < b[i]) return true;
    if (a[i] > b[i]) return false;
  }
  return false;
}

/// Zero of the affine interpolant on [a, b]. Computed from a canonical
/// endpoint order so that an edge shared by two pieces yields the same bits.
PointN crossing(const PointN& a, double va, const PointN& b, double vb) {
  if (va == 0.0) return a;
  if (vb == 0.0) return b;
  if (lex_less(b, a)) return crossing(b, vb, a, va);
  return lerp(a, b, va / (va - vb));
}

}  // namespace

SplitResult split_polytope(const Polytope& piece, int dim, std::span<const double> values) {
  SplitResult out;
  const std::size_t n = piece.size();
  if (dim == 1) {
    const double va = values[0], vb = values[1];
    if (va >= 0 && vb >= 0) {
      out.nonnegative = piece;
    } else if (va < 0 && vb < 0) {
      out.negative = piece;
    } else {
      const PointN p = crossing(piece[0], va, piece[1], vb);
      if (va >= 0) {
        out.nonnegative = {piece[0], p};
        out.negative = {p, piece[1]};
      } else {
        out.negative = {piece[0], p};
        out.nonnegative = {p, piece[1]};
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = (i + 1) % n;
    (values[i] >= 0 ? out.nonnegative : out.negative).push_back(piece[i]);
    if ((values[i] >= 0) != (values[j] >= 0)) {
      const PointN p = crossing(piece[i], values[i], piece[j], values[j]);
      out.nonnegative.push_back(p);
      out.negative.push_back(p);
    }
  }
  return out;
}

SplitResult split_polytope(const Polytope& piece, int dim,
                           const std::function<double(const PointN&)>& functional) {
  std::vector<double> values(piece.size());
  for (std::size_t i = 0; i < piece.size(); ++i) values[i] = functional(piece[i]);
  return split_polytope(piece, dim, values);
}

bool normalize_polytope(Polytope& piece, int dim) {
  Polytope out;
  for (const auto& p : piece)
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  while (out.size() > 1 && out.back() == out.front()) out.pop_back();
  piece = std::move(out);
  if (dim == 1) return piece.size() == 2;
  return piece.size() >= 3 && polytope_measure(piece, 2) > 0.0;
}

double polytope_measure(const Polytope& piece, int dim) {
  if (dim == 1) return piece.size() == 2 ? distance(piece[0], piece[1]) : 0.0;
  double total = 0.0;
  for (std::size_t k = 1; k + 1 < piece.size(); ++k) {
    const std::array<PointN, 3> tri{piece[0], piece[k], piece[k + 1]};
    total += simplex_volume(tri);
  }
  return total;
}

std::size_t MeshBuilder::KeyHash::operator()(const std::array<double, kMaxDim>& k) const {
  std::size_t h = 1469598103934665603ull;
  for (double x : k) {
    h ^= std::bit_cast<std::uint64_t>(x);
    h *= 1099511628211ull;
  }
  return h;
}

std::uint32_t MeshBuilder::vertex(const PointN& p) {
  std::array<double, kMaxDim> key{};
  for (int i = 0; i < p.dim(); ++i) key[static_cast<std::size_t>(i)] = p[i] + 0.0;  // folds -0 into +0
  auto [it, inserted] = index_.try_emplace(key, 0u);
  if (inserted) it->second = mesh_.add_vertex(p);
  return it->second;
}

void MeshBuilder::add_simplex(std::span<const PointN> corners, int mult, bool degenerate) {
  if (!degenerate && !(simplex_volume(corners) > 0.0)) return;
  Simplex s{};
  for (std::size_t k = 0; k < corners.size(); ++k) s[k] = vertex(corners[k]);
  for (std::size_t a = 0; a < corners.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      if (s[a] == s[b]) return;
  mesh_.add_simplex(s, mult, degenerate);
}

void MeshBuilder::add_polytope(const Polytope& piece, int mult) {
  if (mesh_.dim == 1) {
    if (piece.size() == 2) add_simplex(piece, mult);
    return;
  }
  for (std::size_t k = 1; k + 1 < piece.size(); ++k) {
    const std::array<PointN, 3> tri{piece[0], piece[k], piece[k + 1]};
    add_simplex(tri, mult);
  }
}

}  // namespace plateau::geom
