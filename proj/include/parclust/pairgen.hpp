#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "parclust/core.hpp"
#include "parclust/metrics.hpp"

namespace parclust {

/// One unit of scan work: all pairs with one point in block `i` and the other
/// in block `j` (i <= j; i == j covers the pairs inside one block).
struct BlockTask {
  std::size_t i = 0;
  std::size_t j = 0;

  friend bool operator==(const BlockTask&, const BlockTask&) = default;
};

struct BlockRange {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const noexcept { return end - begin; }
};

/// Contiguous block decomposition of 0..n-1 and the task list over it.
struct BlockPlan {
  std::size_t n = 0;
  std::vector<BlockRange> ranges;
  std::vector<BlockTask> tasks;  // row-major over i <= j

  std::size_t blocks() const noexcept { return ranges.size(); }
};

constexpr std::size_t kDefaultBlockPoints = 4096;

/// Block count targeting kDefaultBlockPoints points per block.
std::size_t default_block_count(std::size_t n) noexcept;

/// B is clamped to [1, n]; the first n % B blocks get one extra point.
BlockPlan plan_blocks(std::size_t n, std::size_t B);

/**
 * At most `capacity` candidate pairs held in ascending PairKey order.
 * A buffer never holds more pairs than its capacity.
 */
class TopPBuffer {
 public:
  TopPBuffer() = default;
  explicit TopPBuffer(std::size_t capacity) : capacity_(capacity) {}
  /// Takes ownership of an already sorted list (throws if unsorted or too long).
  TopPBuffer(std::size_t capacity, std::vector<CandidatePair> sorted);

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  bool full() const noexcept { return pairs_.size() >= capacity_; }
  const std::vector<CandidatePair>& pairs() const noexcept { return pairs_; }
  const CandidatePair& back() const { return pairs_.back(); }

  friend bool operator==(const TopPBuffer& x, const TopPBuffer& y) {
    return x.pairs_ == y.pairs_;
  }

 private:
  std::size_t capacity_ = 0;
  std::vector<CandidatePair> pairs_;
};

/// Bounded max-heap that keeps the P smallest keys offered to it.
class TopPSelector {
 public:
  explicit TopPSelector(std::size_t capacity);

  /// Whether a pair with this key could still enter the selection.
  bool admits(const CandidatePair& c) const noexcept {
    return heap_.size() < capacity_ || key_less(c, heap_.front());
  }
  /// Largest distance that could still be admitted.
  double bound() const noexcept { return bound_; }
  void offer(const CandidatePair& c);
  TopPBuffer finish() &&;

 private:
  std::size_t capacity_;
  std::vector<CandidatePair> heap_;
  double bound_ = std::numeric_limits<double>::infinity();
};

/// Sorted merge of two buffers truncated to the P smallest keys.
TopPBuffer reduce_topp(const TopPBuffer& lhs, const TopPBuffer& rhs, std::size_t P);

/**
 * Round-start view of the forest shared read-only by all scan tasks: the root
 * of every point, the size of every root, the constraints and the internal
 * distance threshold.
 */
struct EligibilitySnapshot {
  MetricKind metric = MetricKind::euclidean;
  ConstraintSet constraints;
  std::optional<double> threshold;  // internal units
  std::vector<Index> root;          // per point
  std::vector<std::size_t> size;    // per root index (0 for non-roots)

  /// Snapshot of an untouched forest of n singletons.
  static EligibilitySnapshot singletons(std::size_t n, MetricKind metric,
                                        const ConstraintSet& constraints = {});
  static EligibilitySnapshot capture(ClusterForest& forest, MetricKind metric,
                                     const ConstraintSet& constraints);

  std::size_t cluster_size(Index point) const noexcept { return size[root[point]]; }
};

inline bool pair_eligible(const EligibilitySnapshot& s, Index a, Index b, double dist) noexcept {
  const Index ra = s.root[a];
  const Index rb = s.root[b];
  if (ra == rb) return false;
  if (s.threshold && dist > *s.threshold) return false;
  const std::size_t sa = s.size[ra];
  const std::size_t sb = s.size[rb];
  if (s.constraints.kl2 && (sa > *s.constraints.kl2 || sb > *s.constraints.kl2)) return false;
  if (s.constraints.kl3 && sa + sb > *s.constraints.kl3) return false;
  return true;
}

/// P smallest-keyed eligible pairs of one block pair.
TopPBuffer scan_block_pair(const Dataset& data, const EligibilitySnapshot& snapshot,
                           const BlockPlan& plan, const BlockTask& task, std::size_t P);

/// Serial reference: reduction of scan_block_pair over every task of the plan.
TopPBuffer global_top_p(const Dataset& data, const EligibilitySnapshot& snapshot,
                        const BlockPlan& plan, std::size_t P);

}  // namespace parclust
