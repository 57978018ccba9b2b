#include "driftmon/ort.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include "driftmon/error.hpp"
#include "driftmon/parallel.hpp"
#include "driftmon/rng.hpp"
#include "driftmon/stats.hpp"

namespace driftmon {

namespace {

constexpr double kGainRelTol = 1e-12;
constexpr std::size_t kCoarseSampleSize = 8192;
constexpr double kFineRounds = 4.0;

using Index = std::uint32_t;

// Structure-of-arrays view of the points being split, addressed by point index.
struct PointTable {
  std::vector<double> x, y, t, w;
  std::size_t size() const { return w.size(); }
};

struct DirectionOrder {
  std::vector<Index> order;  // point indices ascending by (projection, index)
  std::vector<double> proj;  // projections, parallel to order
};

using OrderSet = std::vector<DirectionOrder>;

// Sorts `members` (ascending point indices) by (projection, index): counting
// sort into one bucket per point on the projection range, then an insertion
// pass that orders each bucket exactly. Bucket fill preserves member order, so
// exact ties stay in index order.
void sort_by_projection(const PointTable& pts, const Vec3& dir, std::span<const Index> members,
                        std::vector<Index>& out_idx, std::vector<double>& out_proj) {
  const std::size_t n = members.size();
  out_idx.resize(n);
  out_proj.resize(n);
  if (n == 0) return;
  std::vector<double> p(n);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < n; ++k) {
    const Index i = members[k];
    p[k] = project(dir, pts.x[i], pts.y[i], pts.t[i]);
    lo = std::min(lo, p[k]);
    hi = std::max(hi, p[k]);
  }
  if (!(hi > lo)) {
    std::copy(members.begin(), members.end(), out_idx.begin());
    std::copy(p.begin(), p.end(), out_proj.begin());
    return;
  }
  const double top = static_cast<double>(n - 1);
  const double scale = top / (hi - lo);
  std::vector<Index> bucket(n);
  std::vector<Index> start(n + 1, 0);
  for (std::size_t k = 0; k < n; ++k) {
    bucket[k] = static_cast<Index>(std::min((p[k] - lo) * scale, top));
    ++start[bucket[k] + 1];
  }
  for (std::size_t b = 0; b < n; ++b) start[b + 1] += start[b];
  for (std::size_t k = 0; k < n; ++k) {
    const Index dst = start[bucket[k]]++;
    out_idx[dst] = members[k];
    out_proj[dst] = p[k];
  }
  // Buckets are monotone in the projection, so disorder is confined to
  // within a bucket; a plain insertion pass fixes it.
  for (std::size_t k = 1; k < n; ++k) {
    if (!(out_proj[k - 1] > out_proj[k])) continue;
    const double pv = out_proj[k];
    const Index iv = out_idx[k];
    std::size_t j = k;
    while (j > 0 && out_proj[j - 1] > pv) {
      out_proj[j] = out_proj[j - 1];
      out_idx[j] = out_idx[j - 1];
      --j;
    }
    out_proj[j] = pv;
    out_idx[j] = iv;
  }
}

double midpoint(double a, double b) {
  const double c = 0.5 * (a + b);
  return (c >= b || c < a) ? a : c;
}

struct ScanResult {
  bool found = false;
  double gain = 0.0;
  double c = 0.0;
  double gap = 0.0;  // distance between the projections either side of c
};

// One direction's view of a node: positions `rank` (ascending) into arrays
// sorted along that direction. An empty rank list means all positions.
struct SortedView {
  std::span<const Index> rank;
  const double* proj = nullptr;
  const double* w = nullptr;
  std::size_t size = 0;
};

// Exact scan over all midpoint thresholds of one sorted direction. `total` is
// the node's sum of centered intensities.
ScanResult scan(const SortedView& v, double mean, double total, std::size_t min_leaf) {
  ScanResult best;
  const std::size_t n = v.size;
  if (n < 2) return best;
  const bool identity = v.rank.empty();
  const Index* rank = v.rank.data();
  const double* P = v.proj;
  const double* W = v.w;
  const double dn = static_cast<double>(n);
  const double nn = dn * dn;
  // gain = (L*n - T*nl)^2 / (n^2 * nl * nr) with L the left sum of centered
  // values; candidates are screened on the numerator before dividing.
  double screen = -1.0;
  double left_sum = 0.0;
  std::size_t r = identity ? 0 : rank[0];
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const std::size_t rn = identity ? i + 1 : rank[i + 1];
    left_sum += W[r] - mean;
    const std::size_t nl = i + 1;
    const std::size_t nr = n - nl;
    if (nr < min_leaf) break;
    const double pa = P[r];
    const double pb = P[rn];
    r = rn;
    if (nl < min_leaf || !(pa < pb)) continue;
    const double dl = static_cast<double>(nl);
    const double den = dl * static_cast<double>(nr);
    const double num = (left_sum * dn - total * dl) * (left_sum * dn - total * dl);
    if (!(num >= screen * den)) continue;
    const double g = num / (nn * den);
    if (!best.found || gain_improves(g, best.gain)) {
      best.found = true;
      best.gain = g;
      best.c = midpoint(pa, pb);
      best.gap = pb - pa;
      screen = (g + kGainRelTol * g) * nn * (1.0 - 1e-9);
    }
  }
  return best;
}

Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  return {v[0] / n, v[1] / n, v[2] / n};
}

std::pair<Vec3, Vec3> tangent_basis(const Vec3& u) {
  std::size_t k = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(u[i]) < std::abs(u[k])) k = i;
  Vec3 axis{0.0, 0.0, 0.0};
  axis[k] = 1.0;
  const Vec3 e1 = normalized(cross(u, axis));
  return {e1, cross(u, e1)};
}

double fibonacci_spacing(const FitConfig& cfg) {
  const double g = static_cast<double>(std::max<std::size_t>(cfg.n_grid_directions - 3, 1));
  return std::sqrt(2.0 * std::numbers::pi / g);
}

struct NodeStats {
  double mean = 0.0;
  double sse = 0.0;
  double total = 0.0;  // sum of centered values, ~0
};

NodeStats node_stats(const PointTable& pts, std::span<const Index> members) {
  NodeStats s;
  if (members.empty()) return s;
  CompensatedSum sum;
  for (Index i : members) sum.add(pts.w[i]);
  s.mean = sum.value() / static_cast<double>(members.size());
  CompensatedSum sse, tot;
  for (Index i : members) {
    const double d = pts.w[i] - s.mean;
    sse.add(d * d);
    tot.add(d);
  }
  s.sse = sse.value();
  s.total = tot.value();
  return s;
}

// Grid scan plus refinement for one node. `slices[d]` holds the node's
// members sorted along candidate direction d.
std::optional<SplitCandidate> search_node(const PointTable& pts, const std::vector<Vec3>& dirs,
                                          const std::vector<SortedView>& views,
                                          std::span<const Index> members, const NodeStats& st,
                                          const FitConfig& cfg, double cutoff) {
  if (members.size() < 2 * cfg.min_leaf || members.size() < 2) return std::nullopt;
  std::vector<ScanResult> results(dirs.size());
  parallel_for(dirs.size(), [&](std::size_t d) { results[d] = scan(views[d], st.mean, st.total, cfg.min_leaf); });
  std::optional<SplitCandidate> best;
  double best_gap = 0.0;
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    if (!results[d].found) continue;
    if (!best || gain_improves(results[d].gain, best->gain)) {
      best = SplitCandidate{SplitRule{dirs[d], results[d].c}, results[d].gain, d};
      best_gap = results[d].gap;
    }
  }
  if (!best || !cfg.refinement_enabled() || !(best->gain > 0.0) || !(best->gain > cfg.refine_gate * cutoff))
    return best;

  auto evaluate = [&](const Vec3& dir, std::span<const Index> subset, const NodeStats& s, std::size_t leaf) {
    std::vector<Index> idx;
    std::vector<double> proj;
    sort_by_projection(pts, dir, subset, idx, proj);
    std::vector<double> w(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) w[k] = pts.w[idx[k]];
    return scan(SortedView{{}, proj.data(), w.data(), idx.size()}, s.mean, s.total, leaf);
  };
  // A move must raise the gain. Once both children are pure, equal-gain moves
  // that widen the gap around the threshold are also taken: among exact
  // separators the widest one extrapolates best.
  auto pure_gain = [](const NodeStats& s, std::size_t count) {
    return s.sse / static_cast<double>(count) * (1.0 - 1e-9);
  };
  auto beats = [](const ScanResult& r, const ScanResult& cur, double pure) {
    if (!r.found) return false;
    if (gain_improves(r.gain, cur.gain)) return true;
    return cur.gain >= pure && !gain_improves(cur.gain, r.gain) && r.gap > cur.gap * (1.0 + 1e-9);
  };
  // Pattern search on the sphere: four tangent moves per round, the best
  // accepted move is taken, otherwise the step halves.
  auto pattern_search = [&](Vec3& u, ScanResult& cur, double& step, double stop, std::size_t& evals,
                            std::span<const Index> subset, const NodeStats& s, std::size_t leaf) {
    bool moved_any = false;
    const double pure = pure_gain(s, subset.size());
    while (step >= stop && evals < cfg.refine_max_evals) {
      const auto [e1, e2] = tangent_basis(u);
      const Vec3 moves[4] = {e1, {-e1[0], -e1[1], -e1[2]}, e2, {-e2[0], -e2[1], -e2[2]}};
      std::array<Vec3, 4> cand;
      for (int m = 0; m < 4; ++m)
        cand[m] = canonical_direction({u[0] + step * moves[m][0], u[1] + step * moves[m][1], u[2] + step * moves[m][2]});
      std::array<ScanResult, 4> res;
      parallel_for(4, [&](std::size_t m) { res[m] = evaluate(cand[m], subset, s, leaf); });
      evals += 4;
      bool moved = false;
      for (int m = 0; m < 4; ++m) {
        if (beats(res[m], cur, pure)) {
          cur = res[m];
          u = cand[m];
          moved = true;
        }
      }
      moved_any = moved_any || moved;
      if (!moved) step *= 0.5;
    }
    return moved_any;
  };

  double step = cfg.refine_initial_step > 0.0 ? cfg.refine_initial_step : 0.5 * fibonacci_spacing(cfg);
  std::size_t evals = 0;
  Vec3 u = best->rule.alpha;
  const std::size_t stride = members.size() / kCoarseSampleSize;
  if (stride >= 2) {
    // Coarse rounds on a strided subsample; only the last few halvings see
    // every point.
    std::vector<Index> sub;
    sub.reserve(members.size() / stride + 1);
    for (std::size_t k = 0; k < members.size(); k += stride) sub.push_back(members[k]);
    const NodeStats sub_st = node_stats(pts, sub);
    const std::size_t sub_leaf = std::max<std::size_t>(1, (cfg.min_leaf + stride - 1) / stride);
    ScanResult sub_cur = evaluate(u, sub, sub_st, sub_leaf);
    const double fine = kFineRounds * cfg.refine_min_step;
    if (sub_cur.found && pattern_search(u, sub_cur, step, fine, evals, sub, sub_st, sub_leaf)) {
      const ScanResult full = evaluate(u, members, st, cfg.min_leaf);
      if (beats(full, ScanResult{true, best->gain, best->rule.c, best_gap}, pure_gain(st, members.size()))) {
        *best = SplitCandidate{SplitRule{u, full.c}, full.gain, dirs.size()};
        best_gap = full.gap;
      } else {
        u = best->rule.alpha;
      }
    }
    step = std::min(step, fine);
  }
  ScanResult cur{true, best->gain, best->rule.c, best_gap};
  if (pattern_search(u, cur, step, cfg.refine_min_step, evals, members, st, cfg.min_leaf))
    *best = SplitCandidate{SplitRule{u, cur.c}, cur.gain, dirs.size() + 1};
  return best;
}

// Shared cache of root orders for the grid directions. Every window of the
// same lattice and time grid has identical geometry, so sorting is done once.
struct OrderCacheKey {
  Dims dims;
  std::vector<double> times;
  std::vector<Vec3> dirs;
  bool operator==(const OrderCacheKey&) const = default;
};

class OrderCache {
 public:
  std::shared_ptr<const OrderSet> get(const OrderCacheKey& key, const PointTable& pts) {
    {
      std::lock_guard lock(mutex_);
      for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->first == key) {
          entries_.splice(entries_.begin(), entries_, it);
          return entries_.front().second;
        }
      }
    }
    auto built = std::make_shared<OrderSet>(key.dirs.size());
    std::vector<Index> all(pts.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);
    parallel_for(key.dirs.size(), [&](std::size_t d) {
      sort_by_projection(pts, key.dirs[d], all, (*built)[d].order, (*built)[d].proj);
    });
    std::lock_guard lock(mutex_);
    entries_.emplace_front(key, built);
    if (entries_.size() > kCapacity) entries_.pop_back();
    return built;
  }

 private:
  static constexpr std::size_t kCapacity = 3;
  std::mutex mutex_;
  std::list<std::pair<OrderCacheKey, std::shared_ptr<const OrderSet>>> entries_;
};

OrderCache& order_cache() {
  static OrderCache cache;
  return cache;
}

}  // namespace

void FitConfig::validate() const {
  if (gain_cutoff && !(*gain_cutoff > 0.0)) throw PreconditionError("gain_cutoff must be positive");
  if (min_leaf < 1) throw PreconditionError("min_leaf must be >= 1");
  if (max_depth < 1) throw PreconditionError("max_depth must be >= 1");
  if (n_grid_directions < 3) throw PreconditionError("n_grid_directions must be >= 3");
  if (!(time_scale > 0.0)) throw PreconditionError("time_scale must be positive");
  if (refine_min_step < 0.0 || refine_initial_step < 0.0)
    throw PreconditionError("refinement steps must be nonnegative");
}

FitConfig FitConfig::axis_aligned() {
  FitConfig cfg;
  cfg.n_grid_directions = 3;
  cfg.n_random_directions = 0;
  cfg.refine_min_step = 0.0;
  return cfg;
}

double cutoff_from_noise(double theta_sq) { return 0.25 * theta_sq; }

double fallback_cutoff(std::span<const double> intensities) {
  const double n = static_cast<double>(intensities.size());
  if (n < 3) return 0.25 * sample_variance(intensities);
  return 0.25 * sample_variance(intensities) / std::log(n);
}

bool gain_improves(double gain, double best) { return gain > best + kGainRelTol * std::abs(best); }

std::vector<Vec3> candidate_directions(const FitConfig& cfg) {
  std::vector<Vec3> dirs{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}};
  const std::size_t g = cfg.n_grid_directions > 3 ? cfg.n_grid_directions - 3 : 0;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < g; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(g);
    const double r = std::sqrt(1.0 - u * u);
    const double phi = golden * static_cast<double>(i);
    dirs.push_back(canonical_direction({u, r * std::cos(phi), r * std::sin(phi)}));
  }
  Rng rng(derive_seed(cfg.seed, "directions"));
  for (std::size_t i = 0; i < cfg.n_random_directions; ++i) {
    Vec3 v{};
    do {
      v = {rng.normal(), rng.normal(), rng.normal()};
    } while (v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0);
    dirs.push_back(canonical_direction(v));
  }
  return dirs;
}

double impurity_gain(std::span<const LatticePoint> node, const SplitRule& rule) {
  if (node.size() < 2) throw PreconditionError("impurity_gain needs at least 2 points");
  auto sse = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    const double m = mean(v);
    CompensatedSum s;
    for (double x : v) s.add((x - m) * (x - m));
    return s.value();
  };
  std::vector<double> all, left, right;
  for (const auto& p : node) {
    all.push_back(p.intensity);
    (rule.goes_left(p.x, p.y, p.t_scaled) ? left : right).push_back(p.intensity);
  }
  if (left.empty() || right.empty()) return 0.0;
  const double g = (sse(all) - sse(left) - sse(right)) / static_cast<double>(node.size());
  return std::max(0.0, g);
}

std::optional<SplitCandidate> best_split(std::span<const LatticePoint> node, const FitConfig& cfg) {
  cfg.validate();
  if (node.size() < 2) throw PreconditionError("best_split needs at least 2 points");
  if (node.size() < 2 * cfg.min_leaf) return std::nullopt;
  PointTable pts;
  for (const auto& p : node) {
    pts.x.push_back(p.x);
    pts.y.push_back(p.y);
    pts.t.push_back(p.t_scaled);
    pts.w.push_back(p.intensity);
  }
  std::vector<Index> members(node.size());
  for (std::size_t i = 0; i < members.size(); ++i) members[i] = static_cast<Index>(i);
  const auto dirs = candidate_directions(cfg);
  std::vector<std::vector<double>> proj(dirs.size()), w(dirs.size());
  std::vector<SortedView> views(dirs.size());
  for (std::size_t d = 0; d < dirs.size(); ++d) {
    std::vector<Index> order;
    sort_by_projection(pts, dirs[d], members, order, proj[d]);
    for (Index i : order) w[d].push_back(pts.w[i]);
    views[d] = SortedView{{}, proj[d].data(), w[d].data(), members.size()};
  }
  const double cutoff = cfg.gain_cutoff ? *cfg.gain_cutoff : fallback_cutoff(pts.w);
  return search_node(pts, dirs, views, members, node_stats(pts, members), cfg, cutoff);
}

std::vector<LatticePoint> window_points(const ImageSequence& window, double time_scale) {
  if (window.size() < 2) throw PreconditionError("window needs at least 2 frames");
  const TimeMap tm = TimeMap::for_window(window[0].time(), window[window.size() - 1].time(), time_scale);
  std::vector<LatticePoint> out;
  out.reserve(window.size() * window.dims().pixels());
  for (const auto& f : window) {
    const double ts = tm(f.time());
    for (std::size_t r = 0; r < f.ny(); ++r)
      for (std::size_t c = 0; c < f.nx(); ++c) out.push_back({f.x(c), f.y(r), ts, f.at(c, r)});
  }
  return out;
}

FittedTree fit_tree(const ImageSequence& window, const FitConfig& cfg) {
  cfg.validate();
  if (window.size() < 2) throw PreconditionError("window needs at least 2 frames");
  const Dims dims = window.dims();
  const TimeMap tm = TimeMap::for_window(window[0].time(), window[window.size() - 1].time(), cfg.time_scale);

  const std::size_t per_frame = dims.pixels();
  const std::size_t n = per_frame * window.size();
  if (n > std::numeric_limits<Index>::max()) throw PreconditionError("window too large");
  PointTable pts;
  pts.x.resize(n);
  pts.y.resize(n);
  pts.t.resize(n);
  pts.w.resize(n);
  OrderCacheKey key{dims, {}, candidate_directions(cfg)};
  for (std::size_t k = 0; k < window.size(); ++k) {
    const ImageFrame& f = window[k];
    const double ts = tm(f.time());
    key.times.push_back(ts);
    auto vals = f.values();
    for (std::size_t r = 0; r < dims.ny; ++r) {
      for (std::size_t c = 0; c < dims.nx; ++c) {
        const std::size_t i = k * per_frame + r * dims.nx + c;
        pts.x[i] = f.x(c);
        pts.y[i] = f.y(r);
        pts.t[i] = ts;
        pts.w[i] = vals[r * dims.nx + c];
      }
    }
  }
  const double cutoff = cfg.gain_cutoff ? *cfg.gain_cutoff : fallback_cutoff(pts.w);
  const auto grid = order_cache().get(key, pts);

  const std::vector<Vec3>& dirs = key.dirs;
  const std::size_t nd = dirs.size();
  // Intensities laid out in each direction's root order.
  std::vector<std::vector<double>> sorted_w(nd);
  parallel_for(nd, [&](std::size_t d) {
    const auto& order = (*grid)[d].order;
    sorted_w[d].resize(n);
    for (std::size_t r = 0; r < n; ++r) sorted_w[d][r] = pts.w[order[r]];
  });

  struct Pending {
    std::size_t node = 0;
    std::vector<Index> members;
    std::vector<std::vector<Index>> ranks;  // empty at the root
  };
  std::vector<TreeNode> nodes(1);
  std::vector<Pending> stack(1);
  stack[0].members.resize(n);
  for (std::size_t i = 0; i < n; ++i) stack[0].members[i] = static_cast<Index>(i);
  stack[0].ranks.resize(nd);

  std::vector<unsigned char> goes_left(n, 0);
  std::vector<SortedView> views(nd);
  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    const NodeStats st = node_stats(pts, cur.members);
    {
      TreeNode& node = nodes[cur.node];
      node.mean = st.mean;
      node.sse = st.sse;
      node.count = cur.members.size();
    }
    const int depth = nodes[cur.node].depth;
    if (depth >= cfg.max_depth || cur.members.size() < 2 * cfg.min_leaf || !(st.sse > 0.0)) continue;
    for (std::size_t d = 0; d < nd; ++d)
      views[d] = SortedView{cur.ranks[d], (*grid)[d].proj.data(), sorted_w[d].data(), cur.members.size()};
    const auto split = search_node(pts, dirs, views, cur.members, st, cfg, cutoff);
    if (!split || !(split->gain > cutoff)) continue;

    const SplitRule rule = split->rule;
    for (Index i : cur.members) goes_left[i] = rule.goes_left(pts.x[i], pts.y[i], pts.t[i]);

    Pending left, right;
    for (Index i : cur.members) (goes_left[i] ? left.members : right.members).push_back(i);
    left.ranks.resize(nd);
    right.ranks.resize(nd);
    const bool root = cur.ranks[0].empty();
    parallel_for(nd, [&](std::size_t d) {
      const Index* order = (*grid)[d].order.data();
      auto& l = left.ranks[d];
      auto& r = right.ranks[d];
      l.resize(left.members.size() + 1);
      r.resize(right.members.size() + 1);
      std::size_t nl = 0, nr = 0;
      auto route = [&](Index k) {
        const bool go = goes_left[order[k]];
        l[nl] = k;
        r[nr] = k;
        nl += go;
        nr += !go;
      };
      if (root) {
        for (std::size_t k = 0; k < n; ++k) route(static_cast<Index>(k));
      } else {
        for (Index k : cur.ranks[d]) route(k);
      }
      l.resize(nl);
      r.resize(nr);
      std::vector<Index>().swap(cur.ranks[d]);
    });

    left.node = nodes.size();
    right.node = nodes.size() + 1;
    nodes[cur.node].rule = rule;
    nodes[cur.node].left = static_cast<int>(left.node);
    nodes[cur.node].right = static_cast<int>(right.node);
    TreeNode child;
    child.depth = depth + 1;
    nodes.push_back(child);
    nodes.push_back(child);
    stack.push_back(std::move(right));
    stack.push_back(std::move(left));
  }
  return FittedTree(std::move(nodes), tm, dims);
}

}  // namespace driftmon
