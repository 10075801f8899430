#include "plateau/minimizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include "plateau/errors.hpp"
#include "plateau/parallel.hpp"
#include "plateau/polytope.hpp"
#include "plateau/seeding.hpp"

namespace plateau::minimizer {

using FaceHashSet = std::unordered_set<FaceKey, grid::FaceKeyHash>;

// ------------------------------------------------------------------ FaceSet

FaceSet::FaceSet(const DyadicGrid& grid, int d) : grid_(grid), d_(d) {
  if (d < 1 || d > grid.n()) throw DomainError("face sets need 1 <= d <= n");
}

bool FaceSet::contains(const FaceKey& key) const { return faces_.count(grid_.canonical(key)) != 0; }

void FaceSet::insert(const FaceKey& key) {
  const FaceKey k = grid_.canonical(key);
  if (!grid_.valid(k)) throw DomainError("face " + grid::to_string(k, grid_.n()) + " is not in the grid");
  if (k.dim() > d_) throw DomainError("face of dimension " + std::to_string(k.dim()) + " exceeds d");
  faces_.insert(k);
}

void FaceSet::erase(const FaceKey& key) { faces_.erase(grid_.canonical(key)); }

std::size_t FaceSet::count(int k) const {
  return static_cast<std::size_t>(std::count_if(faces_.begin(), faces_.end(), [&](const FaceKey& f) { return f.dim() == k; }));
}

double FaceSet::measure() const { return static_cast<double>(count(d_)) * std::pow(grid_.cell(), d_); }

void FaceSet::normalize() {
  std::vector<FaceKey> drop;
  for (const auto& f : faces_) {
    if (f.dim() == d_) continue;
    for (const auto& h : cofaces(grid_, f, d_))
      if (h != f && faces_.count(h)) {
        drop.push_back(f);
        break;
      }
  }
  for (const auto& f : drop) faces_.erase(f);
}

EmbeddedMesh FaceSet::mesh() const {
  const int n = grid_.n();
  if (d_ > 2) throw DomainError("meshes exist for d = 1 and d = 2 only");
  geom::MeshBuilder builder(d_, n);
  for (const auto& f : faces_) {
    if (f.dim() != d_) continue;
    std::vector<int> free_axes;
    for (int i = 0; i < n; ++i)
      if (f.free(i)) free_axes.push_back(i);
    auto corner = [&](int da, int db) {
      PointN p(n);
      for (int i = 0; i < n; ++i) {
        int off = 0;
        if (i == free_axes[0]) off = da;
        if (d_ == 2 && i == free_axes[1]) off = db;
        p[i] = grid_.plane(i, static_cast<std::int64_t>(f.corner[i]) + off);
      }
      return p;
    };
    if (d_ == 1) {
      const std::array<PointN, 2> seg{corner(0, 0), corner(1, 0)};
      builder.add_simplex(seg);
    } else {
      const std::array<PointN, 3> t1{corner(0, 0), corner(1, 0), corner(1, 1)};
      const std::array<PointN, 3> t2{corner(0, 0), corner(1, 1), corner(0, 1)};
      builder.add_simplex(t1);
      builder.add_simplex(t2);
    }
  }
  return builder.take();
}

std::vector<FaceKey> closure(const DyadicGrid& grid, const FaceKey& key) {
  std::vector<int> free_axes;
  for (int i = 0; i < grid.n(); ++i)
    if (key.free(i)) free_axes.push_back(i);
  const int k = static_cast<int>(free_axes.size());
  std::vector<FaceKey> out;
  // Each free axis stays free (2), or is fixed low (0) or high (1).
  int total = 1;
  for (int i = 0; i < k; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    FaceKey f = key;
    int c = code;
    for (int i = 0; i < k; ++i, c /= 3) {
      const int a = free_axes[static_cast<std::size_t>(i)];
      const int choice = c % 3;
      if (choice == 2) continue;
      f.axes &= ~(1u << a);
      f.corner[a] += choice;
    }
    out.push_back(grid.canonical(f));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<FaceKey> cofaces(const DyadicGrid& grid, const FaceKey& key, int max_dim) {
  std::vector<int> fixed_axes;
  for (int i = 0; i < grid.n(); ++i)
    if (!key.free(i)) fixed_axes.push_back(i);
  const int k = static_cast<int>(fixed_axes.size());
  std::vector<FaceKey> out;
  int total = 1;
  for (int i = 0; i < k; ++i) total *= 3;
  for (int code = 0; code < total; ++code) {
    FaceKey f = key;
    int c = code;
    bool ok = true;
    for (int i = 0; i < k; ++i, c /= 3) {
      const int a = fixed_axes[static_cast<std::size_t>(i)];
      const int choice = c % 3;  // 2 stays fixed, 0 spans [c, c+1], 1 spans [c−1, c]
      if (choice == 2) continue;
      f.axes |= 1u << a;
      f.corner[a] -= choice;
      if (!grid.periodic(a) && (f.corner[a] < 0 || f.corner[a] > grid.subdivisions() - 1)) ok = false;
    }
    if (!ok || f.dim() > max_dim) continue;
    out.push_back(grid.canonical(f));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string to_string(MoveKind kind) {
  switch (kind) {
    case MoveKind::FfStage: return "ff-stage";
    case MoveKind::FreeCollapse: return "free-collapse";
    case MoveKind::InteriorProjection: return "interior-projection";
  }
  return "unknown";
}

std::string to_string(Policy p) { return p == Policy::Greedy ? "greedy" : "priority"; }

Policy policy_from_string(const std::string& s) {
  if (s == "greedy") return Policy::Greedy;
  if (s == "priority") return Policy::Priority;
  throw ConfigError("unknown policy '" + s + "' (expected greedy or priority)");
}

namespace {

FlatManifold manifold_of(const DyadicGrid& grid) {
  return FlatManifold{grid.corner(), grid.size(), grid.periodic_mask()};
}

Ball face_ball(const DyadicGrid& grid, const FaceKey& f) {
  return Ball{grid.face_center(f), 0.5 * grid.cell() * std::sqrt(static_cast<double>(f.dim()))};
}

// ------------------------------------------------------------------ boxes

int max_extent(const DyadicGrid& grid, int axis, int cap) {
  const int N = grid.subdivisions();
  const int limit = grid.periodic(axis) ? N - 1 : N;
  return cap > 0 ? std::min(cap, limit) : limit;
}

/// Lifted corner of `key` inside the box along one axis, or nullopt.
std::optional<std::int32_t> lift(const DyadicGrid& grid, const Box& box, const FaceKey& key, int j) {
  const std::int32_t lo = box.lo[j], hi = lo + box.size[j];
  const int N = grid.subdivisions();
  const bool free_axis = key.free(j);
  for (int wrap = 0; wrap < (grid.periodic(j) ? 3 : 1); ++wrap) {
    const std::int32_t c = key.corner[j] + (wrap == 0 ? 0 : wrap == 1 ? N : -N);
    if (free_axis ? (c >= lo && c + 1 <= hi) : (c >= lo && c <= hi)) return c;
  }
  return std::nullopt;
}

bool inside(const DyadicGrid& grid, const Box& box, const FaceKey& key) {
  for (int j = 0; j < grid.n(); ++j)
    if (!lift(grid, box, key, j)) return false;
  return true;
}

bool box_fits(const DyadicGrid& grid, const Box& box) {
  const int N = grid.subdivisions();
  for (int j = 0; j < grid.n(); ++j) {
    const bool in = (box.axes >> j) & 1u;
    if (!in && box.size[j] != 0) return false;
    if (in && box.size[j] < 1) return false;
    if (grid.periodic(j)) {
      if (box.lo[j] < 0 || box.lo[j] >= N || box.size[j] > N - 1) return false;
    } else if (box.lo[j] < 0 || box.lo[j] + box.size[j] > N) {
      return false;
    }
  }
  return true;
}

Ball box_ball(const DyadicGrid& grid, const Box& box) {
  const int n = grid.n();
  const double s = grid.cell();
  PointN c(n);
  double r2 = 0.0;
  for (int j = 0; j < n; ++j) {
    c[j] = grid.corner()[j] + s * (box.lo[j] + 0.5 * box.size[j]);
    r2 += static_cast<double>(box.size[j]) * box.size[j];
  }
  return Ball{grid::wrap(manifold_of(grid), c), 0.5 * s * std::sqrt(r2)};
}

/// d-faces of the side of `box` normal to `axis` (low or high).
std::vector<FaceKey> side_faces(const DyadicGrid& grid, const Box& box, int axis, int high) {
  const int n = grid.n();
  std::vector<int> axes;
  for (int j = 0; j < n; ++j)
    if (((box.axes >> j) & 1u) && j != axis) axes.push_back(j);
  std::vector<FaceKey> out;
  std::array<std::int32_t, geom::kMaxDim> off{};
  for (;;) {
    FaceKey f;
    for (int j = 0; j < n; ++j) f.corner[j] = box.lo[j];
    f.corner[axis] = box.lo[axis] + (high ? box.size[axis] : 0);
    for (std::size_t k = 0; k < axes.size(); ++k) {
      f.axes |= 1u << axes[k];
      f.corner[axes[k]] += off[k];
    }
    out.push_back(grid.canonical(f));
    std::size_t k = 0;
    for (; k < axes.size(); ++k) {
      if (++off[k] < box.size[axes[k]]) break;
      off[k] = 0;
    }
    if (k == axes.size()) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// X connected with χ(X) = 1. X is given closed under faces.
bool contractible(const std::vector<FaceKey>& cells, const DyadicGrid& grid) {
  if (cells.empty()) return false;
  long chi = 0;
  std::map<FaceKey, std::size_t> vertex;
  for (const auto& c : cells) {
    chi += (c.dim() % 2 == 0) ? 1 : -1;
    if (c.dim() == 0) vertex.emplace(c, vertex.size());
  }
  if (chi != 1) return false;
  std::vector<std::size_t> parent(vertex.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (const auto& c : cells) {
    if (c.dim() != 1) continue;
    const auto ends = grid.facets(c);
    parent[find(vertex.at(ends[0]))] = find(vertex.at(ends[1]));
  }
  for (std::size_t v = 0; v < parent.size(); ++v)
    if (find(v) != find(0)) return false;
  return true;
}

/// The box push onto one side, if legal and measure-reducing.
/// The closed box boundary without the open side (axis, high): a d-disk.
std::vector<FaceKey> cap_faces(const DyadicGrid& grid, const Box& box, int axis, int high) {
  std::vector<FaceKey> out;
  for (int j = 0; j < grid.n(); ++j) {
    if (!((box.axes >> j) & 1u)) continue;
    for (int h = 0; h < 2; ++h) {
      if (j == axis && h == high) continue;
      const auto f = side_faces(grid, box, j, h);
      out.insert(out.end(), f.begin(), f.end());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::optional<Move> box_move(const FaceSet& fs, const Box& box, int axis, int high, bool cap, bool require_gain) {
  const auto& grid = fs.grid();
  const int d = fs.d();
  std::vector<FaceKey> a;
  for (const auto& f : fs.faces())
    if (inside(grid, box, f)) a.push_back(f);
  if (a.empty()) return std::nullopt;
  const auto side = cap ? cap_faces(grid, box, axis, high) : side_faces(grid, box, axis, high);
  const FaceHashSet side_set(side.begin(), side.end());
  const FaceHashSet a_set(a.begin(), a.end());
  std::size_t a_d = 0, gained = 0;
  for (const auto& f : a)
    if (f.dim() == d && !side_set.count(f)) ++a_d;
  for (const auto& f : side)
    if (!a_set.count(f)) ++gained;
  if (require_gain && gained >= a_d) return std::nullopt;

  // K: faces of the closure of A that also lie in a retained face outside the box.
  FaceHashSet cl;
  for (const auto& f : a)
    for (const auto& g : closure(grid, f)) cl.insert(g);
  std::set<FaceKey> x;
  for (const auto& g : cl) {
    for (const auto& h : cofaces(grid, g, d))
      if (h != g && fs.faces().count(h) && !inside(grid, box, h)) {
        x.insert(g);
        break;
      }
  }
  for (const auto& f : side)
    for (const auto& g : closure(grid, f)) x.insert(g);
  if (!contractible(std::vector<FaceKey>(x.begin(), x.end()), grid)) return std::nullopt;

  Move m;
  m.kind = MoveKind::InteriorProjection;
  m.ball = box_ball(grid, box);
  const double unit = std::pow(grid.cell(), d);
  for (const auto& f : a)
    if (!side_set.count(f)) m.removed.push_back(f);
  for (const auto& f : side)
    if (!a_set.count(f)) m.added.push_back(f);
  m.before = static_cast<double>(a_d) * unit;
  m.after = static_cast<double>(gained) * unit;
  m.box = box;
  m.side_axis = axis;
  m.side_high = high;
  m.cap = cap;
  return m;
}

/// Collapses of k-faces through a free facet. For k = d the measure drops by
/// s^d; for k < d nothing of H^d changes and the move only removes a hair.
std::vector<Move> free_collapses(const FaceSet& fs, int k) {
  const auto& grid = fs.grid();
  const int d = fs.d();
  const double unit = k == d ? std::pow(grid.cell(), d) : 0.0;
  auto held_elsewhere = [&](const FaceKey& g, const FaceKey& f) {
    for (const auto& h : cofaces(grid, g, d))
      if (h != g && h != f && fs.faces().count(h)) return true;
    return false;
  };
  std::vector<Move> out;
  if (k < 1) return out;
  for (const auto& f : fs.faces()) {
    if (f.dim() != k) continue;
    const auto raw = grid.facets(f);
    auto facets = raw;
    std::sort(facets.begin(), facets.end());
    facets.erase(std::unique(facets.begin(), facets.end()), facets.end());
    for (const auto& e : facets) {
      // A facet appearing twice (N = 1 wrap) is never free.
      if (std::count(raw.begin(), raw.end(), e) > 1) continue;
      if (held_elsewhere(e, f) || fs.faces().count(e)) continue;
      Move m;
      m.kind = MoveKind::FreeCollapse;
      m.ball = face_ball(grid, f);
      m.removed = {f};
      m.through = e;
      for (const auto& g : facets)
        if (g != e && !held_elsewhere(g, f)) m.added.push_back(g);
      m.before = unit;
      m.after = 0.0;
      out.push_back(std::move(m));
      break;  // one collapse per face
    }
  }
  return out;
}

// ------------------------------------------------------------ box search

struct Candidate {
  long delta = 0;
  Box box;
  int axis = 0;
  int high = 0;

  auto key() const { return std::tie(delta, box.axes, box.lo, box.size, axis, high); }
};

/// Retained face counts per orientation over lifted lattice positions, as
/// prefix sums. Periodic axes are doubled so boxes may pass plane N.
class FaceCounts {
 public:
  explicit FaceCounts(const FaceSet& fs) : grid_(fs.grid()), n_(fs.grid().n()), d_(fs.d()) {
    const int N = grid_.subdivisions();
    for (int j = 0; j < n_; ++j) len_[j] = grid_.periodic(j) ? 2 * N : N + 1;
    std::size_t total = 1;
    for (int j = 0; j < n_; ++j) {
      stride_[j] = total;
      total *= static_cast<std::size_t>(len_[j] + 1);
    }
    std::map<std::uint32_t, std::vector<std::int32_t>> by_axes;
    for (const auto& f : fs.faces()) {
      auto& p = by_axes[f.axes];
      if (p.empty()) p.assign(total, 0);
      for (std::uint32_t mask = 0; mask < (1u << n_); ++mask) {
        bool ok = true;
        std::size_t idx = 0;
        for (int j = 0; j < n_ && ok; ++j) {
          std::int32_t c = f.corner[j];
          if ((mask >> j) & 1u) {
            ok = grid_.periodic(j);
            c += N;
          }
          idx += static_cast<std::size_t>(c + 1) * stride_[j];
        }
        if (ok) p[idx] += 1;
      }
    }
    for (auto& [axes, p] : by_axes) {
      for (int j = 0; j < n_; ++j)
        for (std::size_t idx = 0; idx < total; ++idx)
          if ((idx / stride_[j]) % static_cast<std::size_t>(len_[j] + 1) != 0) p[idx] += p[idx - stride_[j]];
      prefix_.emplace_back(axes, std::move(p));
    }
  }

  /// Retained d-faces inside the closed box.
  long inside_d(const Box& box) const { return inside(box, true); }

  /// Retained faces (any dimension) meeting the box minus its closed side
  /// (axis, high), which are not themselves inside the box. Zero means
  /// everything the rest of the set shares with the box lies in that side.
  long touching_off_side(const Box& box, int axis, int high) const {
    long touch = 0;
    const int N = grid_.subdivisions();
    for (const auto& [axes, p] : prefix_) {
      Range r{};
      bool empty = false;
      for (int j = 0; j < n_; ++j) {
        const bool fr = (axes >> j) & 1u;
        std::int32_t lo = box.lo[j] - (fr ? 1 : 0), hi = box.lo[j] + box.size[j];
        if (j == axis) {
          // Drop the target plane itself.
          if (high) hi -= 1;
          else lo += 1;
        }
        if (grid_.periodic(j)) {
          if (lo < 0) lo += N, hi += N;
        } else {
          lo = std::max(lo, 0);
          hi = std::min(hi, len_[j] - 1);
        }
        if (hi < lo) empty = true;
        r.lo[j] = lo;
        r.hi[j] = hi;
      }
      if (!empty) touch += rect(p, r);
    }
    Box side = box;
    side.lo[axis] += high ? box.size[axis] : 0;
    side.size[axis] = 0;
    return touch - (inside(box, false) - inside(side, false));
  }

 private:
  struct Range {
    std::array<std::int32_t, geom::kMaxDim> lo, hi;
  };

  long inside(const Box& box, bool d_only) const {
    long total = 0;
    for (const auto& [axes, p] : prefix_) {
      if (d_only && __builtin_popcount(axes) != d_) continue;
      bool ok = true;
      Range r{};
      for (int j = 0; j < n_; ++j) {
        const bool fr = (axes >> j) & 1u;
        if (fr && box.size[j] == 0) ok = false;
        r.lo[j] = box.lo[j];
        r.hi[j] = box.lo[j] + box.size[j] - (fr ? 1 : 0);
      }
      if (ok) total += rect(p, r);
    }
    return total;
  }

  long rect(const std::vector<std::int32_t>& p, const Range& r) const {
    long sum = 0;
    for (std::uint32_t mask = 0; mask < (1u << n_); ++mask) {
      std::size_t idx = 0;
      int sign = 1;
      for (int j = 0; j < n_; ++j) {
        // prefix index k covers positions < k
        const std::int32_t k = ((mask >> j) & 1u) ? r.lo[j] : r.hi[j] + 1;
        if ((mask >> j) & 1u) sign = -sign;
        idx += static_cast<std::size_t>(k) * stride_[j];
      }
      sum += sign * p[idx];
    }
    return sum;
  }

  const DyadicGrid& grid_;
  int n_;
  int d_;
  std::array<int, geom::kMaxDim> len_{};
  std::array<std::size_t, geom::kMaxDim> stride_{};
  std::vector<std::pair<std::uint32_t, std::vector<std::int32_t>>> prefix_;
};

/// Candidate pushes whose face counts promise a gain. thick selects the
/// thickness range along the side normal: [1, 2] or [3, max_thickness].
std::vector<Candidate> box_candidates(const FaceSet& fs, const FaceCounts& counts, const MoveOptions& opts,
                                      bool thick) {
  const auto& grid = fs.grid();
  const int n = grid.n(), d = fs.d(), N = grid.subdivisions();
  std::vector<Candidate> out;
  for (std::uint32_t s = 0; s < (1u << n); ++s) {
    if (__builtin_popcount(s) != d + 1) continue;
    for (int axis = 0; axis < n; ++axis) {
      if (!((s >> axis) & 1u)) continue;
      const int tmax = max_extent(grid, axis, opts.max_box);
      const int t_lo = thick ? 3 : 1, t_hi = thick ? std::min(tmax, opts.max_thickness) : std::min(2, tmax);
      std::vector<int> others;
      for (int j = 0; j < n; ++j)
        if (((s >> j) & 1u) && j != axis) others.push_back(j);
      for (int t = t_lo; t <= t_hi; ++t) {
        Box box;
        box.axes = s;
        std::vector<int> size(others.size(), 1);
        for (;;) {
          box.size = {};
          box.size[axis] = t;
          long side = 1;
          for (std::size_t k = 0; k < others.size(); ++k) {
            box.size[others[k]] = size[k];
            side *= size[k];
          }
          std::array<std::int32_t, geom::kMaxDim> lo{}, span{};
          bool any = true;
          for (int j = 0; j < n; ++j) {
            span[j] = grid.periodic(j) ? N : N - box.size[j] + 1;
            any = any && span[j] > 0;
          }
          while (any) {
            box.lo = lo;
            const long inside = counts.inside_d(box);
            if (inside > side)
              for (int high = 0; high < 2; ++high) out.push_back(Candidate{side - inside, box, axis, high});
            int j = 0;
            for (; j < n; ++j) {
              if (++lo[j] < span[j]) break;
              lo[j] = 0;
            }
            if (j == n) break;
          }
          std::size_t k = 0;
          for (; k < others.size(); ++k) {
            if (++size[k] <= max_extent(grid, others[k], opts.max_box)) break;
            size[k] = 1;
          }
          if (k == others.size()) break;
        }
      }
    }
  }
  return out;
}

/// Legal box pushes, at most `limit`. Candidates whose shared part with the
/// rest of the set already lies in the target side are legal outright and
/// go first; the others need the topology check and share a budget.
std::vector<Move> search_boxes(const FaceSet& fs, const MoveOptions& opts, std::size_t limit, Policy policy,
                               std::uint64_t seed) {
  std::vector<Move> found;
  const FaceCounts counts(fs);
  auto order = [&](std::vector<Candidate>& cands) {
    if (policy == Policy::Priority) {
      std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.key() < b.key(); });
    } else if (!cands.empty()) {
      std::rotate(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(splitmix64(seed) % cands.size()),
                  cands.end());
    }
  };
  for (bool thick : {false, true}) {
    auto cands = box_candidates(fs, counts, opts, thick);
    std::vector<Candidate> sure, unsure;
    for (const auto& c : cands) (counts.touching_off_side(c.box, c.axis, c.high) == 0 ? sure : unsure).push_back(c);
    order(sure);
    order(unsure);
    for (const auto& c : sure) {
      if (found.size() >= limit) break;
      if (auto m = box_move(fs, c.box, c.axis, c.high, false, true)) found.push_back(std::move(*m));
    }
    std::size_t checks = 0;
    for (const auto& c : unsure) {
      if (checks++ >= opts.check_budget || found.size() >= limit) break;
      if (auto m = box_move(fs, c.box, c.axis, c.high, false, true)) found.push_back(std::move(*m));
    }
    if (!found.empty()) break;
  }
  return found;
}

}  // namespace

std::optional<Move> box_push(const FaceSet& fs, const Box& box, int axis, int high, bool cap, bool require_gain) {
  if (!box_fits(fs.grid(), box) || !((box.axes >> axis) & 1u) || __builtin_popcount(box.axes) != fs.d() + 1)
    return std::nullopt;
  return box_move(fs, box, axis, high, cap, require_gain);
}

bool move_within_ball(const Move& move, const DyadicGrid& grid) {
  const auto m = manifold_of(grid);
  const double tol = 1e-12 * std::max(1.0, grid.size());
  auto check = [&](const FaceKey& f) {
    for (const auto& v : closure(grid, f)) {
      if (v.dim() != 0) continue;
      if (grid::quotient_distance(m, move.ball.center, grid.face_low(v)) > move.ball.radius + tol) return false;
    }
    return true;
  };
  for (const auto& f : move.removed)
    if (!check(f)) return false;
  for (const auto& f : move.added)
    if (!check(f)) return false;
  return true;
}

std::vector<Move> admissible_moves(const FaceSet& fs, const MoveOptions& opts) {
  for (int k = fs.d(); k >= 1; --k) {
    auto frees = free_collapses(fs, k);
    if (!frees.empty()) return frees;
  }
  return search_boxes(fs, opts, opts.list_limit, Policy::Priority, 0);
}

void apply_move(FaceSet& fs, const Move& move) {
  for (const auto& f : move.removed) fs.erase(f);
  for (const auto& f : move.added) fs.insert(f);
  fs.normalize();
}

MinimizeResult minimize_faceset(const FaceSet& fs, Policy policy, std::uint64_t seed, const MoveOptions& opts) {
  MinimizeResult res{fs, {}};
  res.faces.normalize();
  for (std::uint64_t round = 0;; ++round) {
    std::vector<Move> frees;
    for (int k = res.faces.d(); k >= 1 && frees.empty(); --k) frees = free_collapses(res.faces, k);
    std::optional<Move> pick;
    if (!frees.empty()) {
      // Priority: equal deltas, so the smallest face key; greedy: seeded pick.
      const std::size_t idx = policy == Policy::Priority ? 0 : derive_seed(seed, {round}) % frees.size();
      pick = std::move(frees[idx]);
    } else {
      auto boxes = search_boxes(res.faces, opts, 1, policy, derive_seed(seed, {round, 1}));
      if (boxes.empty()) break;
      pick = std::move(boxes.front());
    }
    if (pick->after > pick->before) throw DomainError("internal: move increases measure");
    apply_move(res.faces, *pick);
    res.log.moves.push_back(std::move(*pick));
  }
  return res;
}

FaceSet core_reduce(const FaceSet& fs) {
  FaceSet out(fs.grid(), fs.d());
  for (const auto& f : fs.faces())
    if (f.dim() == fs.d()) out.insert(f);
  return out;
}

// ------------------------------------------------------------ initialization

namespace {

/// Local coordinate of p along a free axis of face f, in cell units, unwrapped.
double local_coord(const DyadicGrid& grid, const FaceKey& f, const PointN& p, int axis) {
  double t = (p[axis] - grid.plane(axis, f.corner[axis])) / grid.cell();
  if (grid.periodic(axis)) {
    const double N = grid.subdivisions();
    t -= N * std::round((t - 0.5) / N);
  }
  return t;
}

struct Coverage {
  double fraction = 0.0;
  /// Facets receiving the content when it is pushed radially from an
  /// uncovered point of the face.
  std::vector<FaceKey> pushed_to;
};

FaceKey facet_of(const DyadicGrid& grid, const FaceKey& f, int axis, int high) {
  FaceKey g = f;
  g.axes &= ~(1u << axis);
  g.corner[axis] += high;
  return grid.canonical(g);
}

Coverage coverage(const DyadicGrid& grid, const FaceKey& f, const std::vector<const ff::Piece*>& pieces, int raster) {
  std::vector<int> axes;
  for (int i = 0; i < grid.n(); ++i)
    if (f.free(i)) axes.push_back(i);
  Coverage out;
  if (axes.size() == 1) {
    std::vector<std::pair<double, double>> iv;
    for (const auto* p : pieces) {
      double a = local_coord(grid, f, p->poly[0], axes[0]), b = local_coord(grid, f, p->poly[1], axes[0]);
      if (a > b) std::swap(a, b);
      iv.emplace_back(std::clamp(a, 0.0, 1.0), std::clamp(b, 0.0, 1.0));
    }
    std::sort(iv.begin(), iv.end());
    double reach = 0.0, gap = 0.0, xi = 0.5;
    for (const auto& [a, b] : iv) {
      const double start = std::max(a, reach);
      if (b > start) out.fraction += b - start;
      if (a - reach > gap) gap = a - reach, xi = 0.5 * (a + reach);
      reach = std::max(reach, b);
    }
    if (1.0 - reach > gap) xi = 0.5 * (1.0 + reach);
    bool low = false, high = false;
    for (const auto& [a, b] : iv) {
      if (a < xi) low = true;
      if (b > xi) high = true;
    }
    if (low) out.pushed_to.push_back(facet_of(grid, f, axes[0], 0));
    if (high) out.pushed_to.push_back(facet_of(grid, f, axes[0], 1));
    return out;
  }
  if (axes.size() != 2) throw DomainError("coverage is defined for d = 1 and d = 2");
  std::vector<std::uint8_t> hit(static_cast<std::size_t>(raster * raster), 0);
  for (const auto* p : pieces) {
    std::vector<std::array<double, 2>> q;
    for (const auto& v : p->poly) q.push_back({local_coord(grid, f, v, axes[0]), local_coord(grid, f, v, axes[1])});
    double area2 = 0.0;
    for (std::size_t k = 0; k < q.size(); ++k) {
      const auto& a = q[k];
      const auto& b = q[(k + 1) % q.size()];
      area2 += a[0] * b[1] - a[1] * b[0];
    }
    if (area2 == 0.0) continue;
    const double orient = area2 > 0 ? 1.0 : -1.0;
    double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
    for (const auto& v : q) {
      umin = std::min(umin, v[0]);
      umax = std::max(umax, v[0]);
      vmin = std::min(vmin, v[1]);
      vmax = std::max(vmax, v[1]);
    }
    const int i0 = std::max(0, static_cast<int>(std::floor(umin * raster - 0.5)));
    const int i1 = std::min(raster - 1, static_cast<int>(std::ceil(umax * raster - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor(vmin * raster - 0.5)));
    const int j1 = std::min(raster - 1, static_cast<int>(std::ceil(vmax * raster - 0.5)));
    for (int i = i0; i <= i1; ++i)
      for (int j = j0; j <= j1; ++j) {
        const double u = (i + 0.5) / raster, v = (j + 0.5) / raster;
        bool in = true;
        for (std::size_t k = 0; k < q.size() && in; ++k) {
          const auto& a = q[k];
          const auto& b = q[(k + 1) % q.size()];
          in = orient * ((b[0] - a[0]) * (v - a[1]) - (b[1] - a[1]) * (u - a[0])) >= 0.0;
        }
        if (in) hit[static_cast<std::size_t>(i * raster + j)] = 1;
      }
  }
  const auto count = std::count(hit.begin(), hit.end(), std::uint8_t{1});
  out.fraction = static_cast<double>(count) / (static_cast<double>(raster) * raster);
  if (count == raster * raster) return out;
  // Center of projection: the uncovered pixel nearest the middle.
  double best = 1e300, xu = 0.5, xv = 0.5;
  for (int i = 0; i < raster; ++i)
    for (int j = 0; j < raster; ++j) {
      if (hit[static_cast<std::size_t>(i * raster + j)]) continue;
      const double u = (i + 0.5) / raster - 0.5, v = (j + 0.5) / raster - 0.5;
      if (u * u + v * v < best) best = u * u + v * v, xu = u + 0.5, xv = v + 0.5;
    }
  std::array<bool, 4> sides{};
  auto push = [&](double u, double v) {
    const double du = u - xu, dv = v - xv;
    if (du == 0.0 && dv == 0.0) return;
    const double tu = du > 0 ? (1.0 - xu) / du : du < 0 ? -xu / du : 1e300;
    const double tv = dv > 0 ? (1.0 - xv) / dv : dv < 0 ? -xv / dv : 1e300;
    if (tu <= tv) sides[du > 0 ? 1 : 0] = true;
    if (tv <= tu) sides[dv > 0 ? 3 : 2] = true;
  };
  for (int i = 0; i < raster; ++i)
    for (int j = 0; j < raster; ++j)
      if (hit[static_cast<std::size_t>(i * raster + j)]) push((i + 0.5) / raster, (j + 0.5) / raster);
  // Slivers thinner than a pixel still reach the boundary somewhere.
  for (const auto* p : pieces)
    for (const auto& v : p->poly)
      push(std::clamp(local_coord(grid, f, v, axes[0]), 0.0, 1.0), std::clamp(local_coord(grid, f, v, axes[1]), 0.0, 1.0));
  for (int k = 0; k < 4; ++k)
    if (sides[static_cast<std::size_t>(k)]) out.pushed_to.push_back(facet_of(grid, f, axes[k / 2], k % 2));
  return out;
}

}  // namespace

Initialization initialize_from_mesh(const EmbeddedMesh& e0, const DyadicGrid& grid,
                                    const std::optional<FlatManifold>& manifold, std::uint64_t seed,
                                    const InitOptions& opts) {
  if (!(opts.threshold > 0.0 && opts.threshold <= 1.0)) throw ConfigError("threshold must lie in (0, 1]");
  if (opts.raster < 2) throw ConfigError("raster must be at least 2");
  const int d = e0.dim;
  Initialization init{FaceSet(grid, d), {}, 0.0, 0.0, 0};
  if (manifold) {
    grid::validate(*manifold);
    bool same = manifold->periodic_mask == grid.periodic_mask() && manifold->size == grid.size() &&
                manifold->corner.dim() == grid.n();
    for (int i = 0; same && i < grid.n(); ++i) same = manifold->corner[i] == grid.corner()[i];
    if (!same) throw ConfigError("grid does not tile the given manifold");
    const double tol = 1e-9 * manifold->size;
    for (std::size_t v = 0; v < e0.vertices.size(); ++v)
      for (int i = 0; i < grid.n(); ++i) {
        const double x = e0.vertices[v][i];
        if (x < manifold->corner[i] - tol || x > manifold->corner[i] + manifold->size + tol)
          throw DomainError("vertex " + std::to_string(v) + " lies outside the fundamental domain");
      }
  }
  if (e0.empty()) return init;
  init.input_measure = geom::measure(e0);

  ff::ProjectionOptions popts;
  popts.strategy = opts.strategy;
  popts.trials = opts.trials;
  popts.seed = seed;
  popts.keep_stage_meshes = false;
  const auto res = ff::project_to_skeleton(e0, grid, popts);
  if (!res.outside.empty() && geom::measure(res.outside) > 0.0)
    throw DomainError("initial set leaves the grid domain");

  std::map<FaceKey, std::vector<const ff::Piece*>> by_face;
  for (const auto& p : res.pieces) {
    init.projected_measure += p.multiplicity * geom::polytope_measure(p.poly, d);
    by_face[p.carrier].push_back(&p);
  }
  for (const auto& [f, pieces] : by_face) {
    if (f.dim() > d) throw DomainError("projection left content off the d-skeleton");
    if (f.dim() < d) {
      init.faces.insert(f);
      continue;
    }
    const auto cov = coverage(grid, f, pieces, opts.raster);
    if (cov.fraction >= opts.threshold) {
      init.faces.insert(f);
    } else {
      // Content below the threshold is pushed radially onto the face boundary.
      ++init.dropped;
      for (const auto& g : cov.pushed_to) init.faces.insert(g);
    }
  }
  init.faces.normalize();
  for (const auto& c : res.choices) {
    Move m;
    m.kind = MoveKind::FfStage;
    m.ball = face_ball(grid, c.face);
    m.removed = {c.face};
    m.before = c.measure_in;
    m.after = c.measure_out;
    init.log.moves.push_back(std::move(m));
  }
  return init;
}

// ------------------------------------------------------------------ audit

Audit quasiminimality_audit(const FaceSet& fs, std::size_t trials, double delta0, std::uint64_t seed) {
  Audit out;
  if (trials == 0) return out;
  const auto& grid = fs.grid();
  const int n = grid.n(), d = fs.d(), N = grid.subdivisions();
  const double s = grid.cell();
  std::vector<FaceKey> anchors;
  for (const auto& f : fs.faces())
    if (f.dim() == d) anchors.push_back(f);
  out.trials = trials;
  if (anchors.empty()) return out;

  struct Slot {
    bool legal = false;
    AuditTrial t;
  };
  std::vector<Slot> slots(trials);
  parallel_for(trials, [&](std::size_t i) {
    std::mt19937_64 rng(derive_seed(seed, {i}));
    const FaceKey anchor = anchors[rng() % anchors.size()];
    Slot& slot = slots[i];
    slot.t.anchor = anchor;
    if (rng() % 4 == 0) {
      auto facets = grid.facets(anchor);
      const FaceKey e = facets[rng() % facets.size()];
      if (std::count(facets.begin(), facets.end(), e) > 1) return;
      for (const auto& h : cofaces(grid, e, d))
        if (h != anchor && fs.faces().count(h)) return;
      slot.legal = true;
      slot.t.kind = "free-collapse";
      slot.t.before = std::pow(s, d);
      slot.t.after = 0.0;
      return;
    }
    std::vector<int> extra;
    for (int j = 0; j < n; ++j)
      if (!anchor.free(j)) extra.push_back(j);
    if (extra.empty()) return;
    Box box;
    const int normal = extra[rng() % extra.size()];
    box.axes = anchor.axes | (1u << normal);
    const double r = std::uniform_real_distribution<double>(s, std::max(s, delta0))(rng);
    const int reach = std::max(1, static_cast<int>(std::floor(2.0 * r / s)));
    double r2 = 0.0;
    for (int j = 0; j < n; ++j) {
      if (!((box.axes >> j) & 1u)) {
        box.lo[j] = anchor.corner[j];
        continue;
      }
      box.size[j] = 1 + static_cast<int>(rng() % static_cast<unsigned>(reach));
      r2 += static_cast<double>(box.size[j]) * box.size[j];
      const int slack = anchor.free(j) ? box.size[j] - 1 : box.size[j];
      box.lo[j] = anchor.corner[j] - static_cast<int>(rng() % static_cast<unsigned>(slack + 1));
      if (grid.periodic(j)) box.lo[j] = ((box.lo[j] % N) + N) % N;
    }
    if (0.5 * s * std::sqrt(r2) > r || !box_fits(grid, box)) return;
    std::vector<int> sides;
    for (int j = 0; j < n; ++j)
      if ((box.axes >> j) & 1u) sides.push_back(j);
    // Half the trials push along the direction leaving the anchor's plane.
    const int axis = rng() % 2 ? normal : sides[rng() % sides.size()];
    const int high = static_cast<int>(rng() % 2);
    const bool cap = rng() % 2 == 0;
    auto m = box_move(fs, box, axis, high, cap, false);
    if (!m || m->before == 0.0) return;
    slot.legal = true;
    slot.t.kind = cap ? "interior-projection-cap" : "interior-projection";
    slot.t.before = m->before;
    slot.t.after = m->after;
  });
  for (const auto& slot : slots) {
    if (!slot.legal) continue;
    ++out.legal;
    const double ratio = slot.t.after / slot.t.before;
    out.ratios.push_back(ratio);
    if (ratio < 1.0) ++out.improving;
    if (!out.worst || ratio < out.min_ratio) {
      out.min_ratio = std::min(out.min_ratio, ratio);
      if (!out.worst || ratio < out.worst->after / out.worst->before) out.worst = slot.t;
    }
    const double m = slot.t.after > 0.0 ? slot.t.before / slot.t.after : std::numeric_limits<double>::infinity();
    out.empirical_m = std::max(out.empirical_m, m);
  }
  return out;
}

// ------------------------------------------------------------------ scheme

SchemeResult run_scheme(const EmbeddedMesh& e0, const std::vector<int>& levels, const FlatManifold& manifold,
                        std::uint64_t seed, const SchemeOptions& opts) {
  grid::validate(manifold);
  if (levels.empty()) throw ConfigError("at least one grid level is required");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k] < 1) throw ConfigError("grid levels must be positive");
    if (k > 0 && levels[k] <= levels[k - 1]) throw ConfigError("grid levels must increase");
  }
  if (e0.ambient != manifold.n()) throw DomainError("mesh and manifold dimensions differ");
  std::optional<SchemeResult> res;
  std::vector<LevelReport> reports;
  std::vector<FaceSet> minimizers;
  PointN mid(manifold.n());
  for (int i = 0; i < manifold.n(); ++i) mid[i] = manifold.corner[i] + 0.5 * manifold.size;
  bool nonincreasing = true;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const int N = levels[k];
    const DyadicGrid grid(manifold.corner, manifold.size, N, manifold.periodic_mask);
    const std::uint64_t level_seed = derive_seed(seed, {static_cast<std::uint64_t>(N)});
    auto init = initialize_from_mesh(e0, grid, manifold, level_seed, opts.init);
    auto mini = minimize_faceset(init.faces, opts.policy, level_seed, opts.moves);
    FaceSet core = core_reduce(mini.faces);

    LevelReport rep;
    rep.subdivisions = N;
    rep.input_measure = init.input_measure;
    rep.projected_measure = init.projected_measure;
    rep.rounded_measure = init.faces.measure();
    rep.minimized_measure = core.measure();
    rep.inflation = init.input_measure > 0.0 ? rep.rounded_measure / init.input_measure : 0.0;
    rep.moves = mini.log.moves.size();
    for (const auto& m : mini.log.moves) rep.move_ratios.push_back(m.before > 0 ? m.after / m.before : 0.0);
    rep.audit = quasiminimality_audit(core, opts.audit_trials, opts.audit_cells * grid.cell(), level_seed);
    rep.quantization = 8.0 * std::pow(manifold.size, e0.dim) / N;
    if (!minimizers.empty()) {
      const auto prev = minimizers.back().mesh();
      const auto cur = core.mesh();
      for (double rho : opts.ladder)
        rep.distance_to_previous.push_back(
            geom::local_hausdorff_distance(prev, cur, Ball{mid, rho * manifold.size}));
      if (rep.minimized_measure > reports.back().minimized_measure + 1e-12) nonincreasing = false;
    }
    reports.push_back(std::move(rep));
    minimizers.push_back(std::move(core));
  }
  SchemeResult out{minimizers.back(), std::move(reports), std::move(minimizers), nonincreasing};
  return out;
}

}  // namespace plateau::minimizer
