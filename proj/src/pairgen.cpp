#include "parclust/pairgen.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace parclust {

std::size_t default_block_count(std::size_t n) noexcept {
  return std::max<std::size_t>(1, (n + kDefaultBlockPoints - 1) / kDefaultBlockPoints);
}

BlockPlan plan_blocks(std::size_t n, std::size_t B) {
  if (n == 0) throw InvalidInput("cannot plan blocks over zero points");
  B = std::clamp<std::size_t>(B, 1, n);
  BlockPlan plan;
  plan.n = n;
  plan.ranges.reserve(B);
  const std::size_t base = n / B;
  const std::size_t extra = n % B;
  std::size_t begin = 0;
  for (std::size_t k = 0; k < B; ++k) {
    std::size_t len = base + (k < extra ? 1 : 0);
    plan.ranges.push_back({begin, begin + len});
    begin += len;
  }
  plan.tasks.reserve(B * (B + 1) / 2);
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = i; j < B; ++j) plan.tasks.push_back({i, j});
  return plan;
}

TopPBuffer::TopPBuffer(std::size_t capacity, std::vector<CandidatePair> sorted)
    : capacity_(capacity), pairs_(std::move(sorted)) {
  if (pairs_.size() > capacity_) throw InvalidInput("buffer exceeds its capacity");
  if (!std::is_sorted(pairs_.begin(), pairs_.end(), PairKeyLess{}))
    throw InvalidInput("buffer contents are not in key order");
}

TopPSelector::TopPSelector(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw InvalidInput("pairs-per-batch must be at least 1");
  heap_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void TopPSelector::offer(const CandidatePair& c) {
  if (heap_.size() < capacity_) {
    heap_.push_back(c);
    std::push_heap(heap_.begin(), heap_.end(), PairKeyLess{});
    if (heap_.size() == capacity_) bound_ = heap_.front().dist;
  } else if (key_less(c, heap_.front())) {
    std::pop_heap(heap_.begin(), heap_.end(), PairKeyLess{});
    heap_.back() = c;
    std::push_heap(heap_.begin(), heap_.end(), PairKeyLess{});
    bound_ = heap_.front().dist;
  }
}

TopPBuffer TopPSelector::finish() && {
  std::sort_heap(heap_.begin(), heap_.end(), PairKeyLess{});
  return TopPBuffer(capacity_, std::move(heap_));
}

TopPBuffer reduce_topp(const TopPBuffer& lhs, const TopPBuffer& rhs, std::size_t P) {
  std::vector<CandidatePair> out;
  out.reserve(std::min(P, lhs.size() + rhs.size()));
  auto x = lhs.pairs().begin(), xe = lhs.pairs().end();
  auto y = rhs.pairs().begin(), ye = rhs.pairs().end();
  while (out.size() < P && (x != xe || y != ye)) {
    if (y == ye || (x != xe && key_less(*x, *y))) {
      out.push_back(*x++);
    } else if (x != xe && *x == *y) {
      // Same pair offered by both sides: keep one.
      out.push_back(*x++);
      ++y;
    } else {
      out.push_back(*y++);
    }
  }
  return TopPBuffer(P, std::move(out));
}

EligibilitySnapshot EligibilitySnapshot::singletons(std::size_t n, MetricKind metric,
                                                    const ConstraintSet& constraints) {
  ClusterForest forest(n);
  return capture(forest, metric, constraints);
}

EligibilitySnapshot EligibilitySnapshot::capture(ClusterForest& forest, MetricKind metric,
                                                 const ConstraintSet& constraints) {
  EligibilitySnapshot s;
  s.metric = metric;
  s.constraints = constraints;
  if (constraints.dmax) s.threshold = effective_threshold(metric, *constraints.dmax);
  const std::size_t n = forest.size();
  s.root.resize(n);
  s.size.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    Index r = forest.find(i);
    s.root[i] = r;
    s.size[r] = forest.root_size(r);
  }
  return s;
}

namespace {

constexpr std::size_t kLanes = 16;

// Candidates from one strip of computed distances against row point `a`.
inline void collect(const EligibilitySnapshot& s, TopPSelector& sel, Index a,
                    const Index* others, const double* dist, std::size_t count) {
  for (std::size_t l = 0; l < count; ++l) {
    if (dist[l] > sel.bound()) continue;
    const Index b = others[l];
    const CandidatePair c{dist[l], std::min(a, b), std::max(a, b)};
    if (!sel.admits(c)) continue;
    if (!pair_eligible(s, c.a, c.b, c.dist)) continue;
    sel.offer(c);
  }
}

// Column block regrouped by snapshot root so that a row can skip the run of
// points already in its own cluster without computing those distances.
struct GroupedBlock {
  std::vector<Index> points;   // sorted by (root, index)
  std::vector<Index> roots;    // root of points[t]
  std::vector<double> columns; // feature-major: columns[k * width + t]

  GroupedBlock(const Dataset& data, const EligibilitySnapshot& s, const BlockRange& r) {
    const std::size_t width = r.size();
    const std::size_t d = data.dims();
    points.resize(width);
    for (std::size_t t = 0; t < width; ++t) points[t] = static_cast<Index>(r.begin + t);
    std::sort(points.begin(), points.end(), [&](Index x, Index y) {
      return s.root[x] != s.root[y] ? s.root[x] < s.root[y] : x < y;
    });
    roots.resize(width);
    columns.resize(d * width);
    for (std::size_t t = 0; t < width; ++t) {
      roots[t] = s.root[points[t]];
      auto x = data.row(points[t]);
      for (std::size_t k = 0; k < d; ++k) columns[k * width + t] = x[k];
    }
  }

  std::size_t width() const noexcept { return points.size(); }
};

// Four doubles per vector; GCC/Clang lower this to whatever the target has.
using Vec4 = double __attribute__((vector_size(32)));
using Mask4 = long long __attribute__((vector_size(32)));

inline Vec4 load4(const double* p) noexcept {
  Vec4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline Vec4 abs4(Vec4 v) noexcept {
  Mask4 bits;
  std::memcpy(&bits, &v, sizeof bits);
  bits &= Mask4{} + 0x7fffffffffffffffLL;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

template <MetricKind K>
inline Vec4 step4(Vec4 acc, Vec4 diff) noexcept {
  if constexpr (K == MetricKind::euclidean || K == MetricKind::squared_euclidean) {
    return acc + diff * diff;
  } else if constexpr (K == MetricKind::manhattan) {
    return acc + abs4(diff);
  } else {
    Vec4 m = abs4(diff);
    return m > acc ? m : acc;
  }
}

constexpr std::size_t kVecs = kLanes / 4;

// Distances from `xa` to grouped columns [begin, end). Each lane accumulates
// the coordinates in order with plain IEEE operations, so values match the
// scalar metric bit for bit.
template <MetricKind K>
void scan_range(const EligibilitySnapshot& s, const GroupedBlock& g, std::size_t d, Index a,
                const double* xa, std::size_t begin, std::size_t end, TopPSelector& sel) {
  const std::size_t width = g.width();
  std::size_t t = begin;
  for (; t + kLanes <= end; t += kLanes) {
    Vec4 acc[kVecs] = {};
    for (std::size_t k = 0; k < d; ++k) {
      const Vec4 xk = Vec4{} + xa[k];
      const double* col = g.columns.data() + k * width + t;
      for (std::size_t v = 0; v < kVecs; ++v) acc[v] = step4<K>(acc[v], xk - load4(col + 4 * v));
    }
    const Vec4 bound = Vec4{} + sel.bound();
    Mask4 hit = acc[0] <= bound;
    for (std::size_t v = 1; v < kVecs; ++v) hit |= acc[v] <= bound;
    if (hit[0] | hit[1] | hit[2] | hit[3]) {
      double dist[kLanes];
      std::memcpy(dist, acc, sizeof dist);
      collect(s, sel, a, g.points.data() + t, dist, kLanes);
    }
  }
  for (; t < end; ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      acc = metric_detail::step<K>(acc, xa[k] - g.columns[k * width + t]);
    collect(s, sel, a, g.points.data() + t, &acc, 1);
  }
}

template <MetricKind K>
void scan_kernel(const Dataset& data, const EligibilitySnapshot& s, const BlockRange& rows,
                 const BlockRange& cols, bool diagonal, TopPSelector& sel) {
  const std::size_t d = data.dims();
  const GroupedBlock g(data, s, cols);
  const std::size_t width = g.width();
  const auto& kl2 = s.constraints.kl2;

  if (diagonal) {
    // Each unordered pair once: row at grouped position p pairs with the
    // positions after its own root's run.
    std::size_t run_end = 0;
    for (std::size_t p = 0; p < width; ++p) {
      const Index ra = g.roots[p];
      if (p >= run_end) {
        run_end = p;
        while (run_end < width && g.roots[run_end] == ra) ++run_end;
      }
      if (kl2 && s.size[ra] > *kl2) continue;
      const Index a = g.points[p];
      scan_range<K>(s, g, d, a, data.row(a).data(), run_end, width, sel);
    }
    return;
  }

  for (std::size_t a = rows.begin; a < rows.end; ++a) {
    const Index ra = s.root[a];
    if (kl2 && s.size[ra] > *kl2) continue;
    auto [lo, hi] = std::equal_range(g.roots.begin(), g.roots.end(), ra);
    const std::size_t skip_begin = static_cast<std::size_t>(lo - g.roots.begin());
    const std::size_t skip_end = static_cast<std::size_t>(hi - g.roots.begin());
    const double* xa = data.row(a).data();
    const Index ai = static_cast<Index>(a);
    scan_range<K>(s, g, d, ai, xa, 0, skip_begin, sel);
    scan_range<K>(s, g, d, ai, xa, skip_end, width, sel);
  }
}

}  // namespace

TopPBuffer scan_block_pair(const Dataset& data, const EligibilitySnapshot& snapshot,
                           const BlockPlan& plan, const BlockTask& task, std::size_t P) {
  TopPSelector sel(P);
  const BlockRange& rows = plan.ranges.at(task.i);
  const BlockRange& cols = plan.ranges.at(task.j);
  const bool diagonal = task.i == task.j;
  switch (snapshot.metric) {
    case MetricKind::euclidean:
    case MetricKind::squared_euclidean:
      scan_kernel<MetricKind::squared_euclidean>(data, snapshot, rows, cols, diagonal, sel);
      break;
    case MetricKind::manhattan:
      scan_kernel<MetricKind::manhattan>(data, snapshot, rows, cols, diagonal, sel);
      break;
    case MetricKind::chebyshev:
      scan_kernel<MetricKind::chebyshev>(data, snapshot, rows, cols, diagonal, sel);
      break;
  }
  return std::move(sel).finish();
}

TopPBuffer global_top_p(const Dataset& data, const EligibilitySnapshot& snapshot,
                        const BlockPlan& plan, std::size_t P) {
  TopPBuffer acc(P);
  for (const auto& task : plan.tasks)
    acc = reduce_topp(acc, scan_block_pair(data, snapshot, plan, task, P), P);
  return acc;
}

}  // namespace parclust
