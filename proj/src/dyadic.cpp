#include "plateau/dyadic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace plateau::grid {

std::size_t FaceKeyHash::operator()(const FaceKey& k) const {
  std::size_t h = 0x9e3779b97f4a7c15ull ^ k.axes;
  for (auto c : k.corner) {
    h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(c)) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

std::string to_string(const FaceKey& key, int n) {
  std::string s = "(";
  for (int i = 0; i < n; ++i) {
    if (i) s += ',';
    s += std::to_string(key.corner[static_cast<std::size_t>(i)]);
  }
  s += ")/";
  for (int i = 0; i < n; ++i) s += key.free(i) ? '1' : '0';
  return s;
}

std::uint64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

DyadicGrid::DyadicGrid(const PointN& corner, double size, int subdivisions, std::uint32_t periodic_mask,
                       std::size_t max_cubes)
    : corner_(corner), size_(size), N_(subdivisions), n_(corner.dim()), periodic_(periodic_mask) {
  if (n_ < 1 || n_ > kMaxDim) throw DomainError("grid dimension out of range");
  if (!(size > 0.0) || !corner.finite()) throw DomainError("grid cube must have positive size and finite corner");
  if (subdivisions < 1) throw DomainError("grid subdivision count must be positive");
  if (periodic_mask >> n_) throw DomainError("periodic mask names an axis beyond the dimension");
  double cubes = std::pow(static_cast<double>(N_), n_);
  if (cubes > static_cast<double>(max_cubes))
    throw DomainError("grid of " + std::to_string(N_) + "^" + std::to_string(n_) + " cubes exceeds the resource cap");
  cube_count_ = static_cast<std::size_t>(cubes);
}

std::size_t DyadicGrid::face_count(int k) const {
  std::size_t total = 0;
  for (std::uint32_t axes = 0; axes < (1u << n_); ++axes) {
    if (__builtin_popcount(axes) != k) continue;
    std::size_t c = 1;
    for (int i = 0; i < n_; ++i) c *= ((axes >> i) & 1u) || periodic(i) ? N_ : N_ + 1;
    total += c;
  }
  return total;
}

std::vector<FaceKey> DyadicGrid::faces(int k) const {
  std::vector<FaceKey> out;
  out.reserve(face_count(k));
  for (std::uint32_t axes = 0; axes < (1u << n_); ++axes) {
    if (__builtin_popcount(axes) != k) continue;
    std::array<int, kMaxDim> ext{};
    for (int i = 0; i < n_; ++i) ext[i] = ((axes >> i) & 1u) || periodic(i) ? N_ : N_ + 1;
    FaceKey key;
    key.axes = axes;
    for (;;) {
      out.push_back(key);
      int i = 0;
      for (; i < n_; ++i) {
        if (++key.corner[i] < ext[i]) break;
        key.corner[i] = 0;
      }
      if (i == n_) break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CubeIndex> DyadicGrid::cubes() const {
  std::vector<CubeIndex> out;
  out.reserve(cube_count_);
  for (std::size_t i = 0; i < cube_count_; ++i) out.push_back(unlinear(i));
  return out;
}

FaceKey DyadicGrid::canonical(FaceKey key) const {
  for (int i = 0; i < n_; ++i)
    if (periodic(i)) key.corner[i] = ((key.corner[i] % N_) + N_) % N_;
  return key;
}

FaceKey DyadicGrid::cube_key(const CubeIndex& c) const {
  FaceKey k;
  k.axes = (1u << n_) - 1;
  k.corner = c;
  return canonical(k);
}

std::size_t DyadicGrid::linear(const CubeIndex& c) const {
  std::size_t idx = 0;
  for (int i = n_ - 1; i >= 0; --i) idx = idx * static_cast<std::size_t>(N_) + static_cast<std::size_t>(c[i]);
  return idx;
}

CubeIndex DyadicGrid::unlinear(std::size_t idx) const {
  CubeIndex c{};
  for (int i = 0; i < n_; ++i) {
    c[i] = static_cast<std::int32_t>(idx % static_cast<std::size_t>(N_));
    idx /= static_cast<std::size_t>(N_);
  }
  return c;
}

bool DyadicGrid::valid(const FaceKey& key) const {
  if (key.axes >> n_) return false;
  for (int i = 0; i < n_; ++i) {
    const int hi = key.free(i) || periodic(i) ? N_ - 1 : N_;
    if (key.corner[i] < 0 || key.corner[i] > hi) return false;
  }
  for (int i = n_; i < kMaxDim; ++i)
    if (key.corner[i] != 0) return false;
  return true;
}

std::vector<FaceKey> DyadicGrid::facets(const FaceKey& key) const {
  std::vector<FaceKey> out;
  for (int i = 0; i < n_; ++i) {
    if (!key.free(i)) continue;
    for (int side = 0; side < 2; ++side) {
      FaceKey f = key;
      f.axes &= ~(1u << i);
      f.corner[i] += side;
      out.push_back(canonical(f));
    }
  }
  return out;
}

std::vector<FaceKey> DyadicGrid::cofacets(const FaceKey& key) const {
  std::vector<FaceKey> out;
  for (int i = 0; i < n_; ++i) {
    if (key.free(i)) continue;
    for (int side = -1; side <= 0; ++side) {
      FaceKey f = key;
      f.axes |= 1u << i;
      f.corner[i] += side;
      if (!periodic(i) && (f.corner[i] < 0 || f.corner[i] > N_ - 1)) continue;
      out.push_back(canonical(f));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<CubeIndex> DyadicGrid::incident_cubes(const FaceKey& key) const {
  std::vector<CubeIndex> out;
  std::array<int, kMaxDim> lo{}, hi{};
  for (int i = 0; i < n_; ++i) {
    if (key.free(i)) {
      lo[i] = hi[i] = key.corner[i];
    } else {
      lo[i] = key.corner[i] - 1;
      hi[i] = key.corner[i];
    }
  }
  CubeIndex c{};
  for (int i = 0; i < n_; ++i) c[i] = lo[i];
  for (;;) {
    bool ok = true;
    CubeIndex w = c;
    for (int i = 0; i < n_; ++i) {
      if (periodic(i))
        w[i] = ((w[i] % N_) + N_) % N_;
      else if (w[i] < 0 || w[i] >= N_)
        ok = false;
    }
    if (ok) out.push_back(w);
    int i = 0;
    for (; i < n_; ++i) {
      if (++c[i] <= hi[i]) break;
      c[i] = lo[i];
    }
    if (i == n_) break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool DyadicGrid::on_boundary(const FaceKey& key) const {
  for (int i = 0; i < n_; ++i)
    if (!key.free(i) && !periodic(i) && (key.corner[i] == 0 || key.corner[i] == N_)) return true;
  return false;
}

PointN DyadicGrid::face_low(const FaceKey& key) const {
  PointN p(n_);
  for (int i = 0; i < n_; ++i) p[i] = plane(i, key.corner[i]);
  return p;
}

PointN DyadicGrid::face_center(const FaceKey& key) const {
  PointN p(n_);
  for (int i = 0; i < n_; ++i)
    p[i] = key.free(i) ? 0.5 * (plane(i, key.corner[i]) + plane(i, key.corner[i] + 1)) : plane(i, key.corner[i]);
  return p;
}

double DyadicGrid::face_measure(const FaceKey& key) const { return std::pow(cell(), key.dim()); }

bool DyadicGrid::touches(const CubeIndex& a, const CubeIndex& b) const {
  for (int i = 0; i < n_; ++i) {
    int d = std::abs(a[i] - b[i]);
    if (periodic(i)) d = std::min(d, N_ - d);
    if (d > 1) return false;
  }
  return true;
}

std::vector<CubeIndex> DyadicGrid::neighbors(const CubeIndex& c) const {
  std::vector<CubeIndex> out;
  CubeIndex off{};
  for (int i = 0; i < n_; ++i) off[i] = -1;
  for (;;) {
    CubeIndex w = c;
    bool ok = true;
    for (int i = 0; i < n_; ++i) {
      w[i] += off[i];
      if (periodic(i))
        w[i] = ((w[i] % N_) + N_) % N_;
      else if (w[i] < 0 || w[i] >= N_)
        ok = false;
    }
    if (ok) out.push_back(w);
    int i = 0;
    for (; i < n_; ++i) {
      if (++off[i] <= 1) break;
      off[i] = -1;
    }
    if (i == n_) break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<CubeIndex> DyadicGrid::annulus() const {
  std::vector<CubeIndex> out;
  for (std::size_t k = 0; k < cube_count_; ++k) {
    const CubeIndex c = unlinear(k);
    bool edge = false;
    for (int i = 0; i < n_; ++i) edge = edge || (!periodic(i) && (c[i] == 0 || c[i] == N_ - 1));
    if (edge) out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CubeIndex> DyadicGrid::annulus2() const {
  std::set<CubeIndex> s;
  for (const auto& r : annulus())
    for (const auto& w : neighbors(r)) s.insert(w);
  return {s.begin(), s.end()};
}

double DyadicGrid::skeleton_measure(int d) const {
  return static_cast<double>(face_count(d)) * std::pow(cell(), d);
}

double DyadicGrid::skeleton_bound(int d) const {
  const double c = static_cast<double>(binomial(n_, d)) * std::pow(2.0, n_ - d);
  return c * std::pow(static_cast<double>(N_), n_ - d) * std::pow(diameter(), d);
}

FlatManifold FlatManifold::torus(int n, double size) {
  FlatManifold m;
  m.corner = PointN(n);
  m.size = size;
  m.periodic_mask = (1u << n) - 1;
  return m;
}

void validate(const FlatManifold& m) {
  if (m.corner.dim() < 1 || !m.corner.finite()) throw DomainError("manifold corner must be finite");
  if (!(m.size > 0.0)) throw DomainError("manifold size must be positive");
  if (m.periodic_mask >> m.n()) throw DomainError("identification names an axis beyond the dimension");
}

PointN wrap(const FlatManifold& m, const PointN& p) {
  PointN q = p;
  for (int i = 0; i < m.n(); ++i) {
    if (!((m.periodic_mask >> i) & 1u)) continue;
    double t = std::fmod(p[i] - m.corner[i], m.size);
    if (t < 0) t += m.size;
    if (t >= m.size) t = 0.0;
    q[i] = m.corner[i] + t;
    if (q[i] >= m.corner[i] + m.size) q[i] = m.corner[i];
  }
  return q;
}

double quotient_distance(const FlatManifold& m, const PointN& a, const PointN& b) {
  const PointN wa = wrap(m, a), wb = wrap(m, b);
  double s = 0.0;
  for (int i = 0; i < m.n(); ++i) {
    double d = std::abs(wa[i] - wb[i]);
    if ((m.periodic_mask >> i) & 1u) d = std::min(d, m.size - d);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace plateau::grid
