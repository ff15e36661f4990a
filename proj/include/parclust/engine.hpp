#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "parclust/core.hpp"
#include "parclust/metrics.hpp"
#include "parclust/pairgen.hpp"
#include "parclust/scheduler.hpp"

namespace parclust {

struct RunConfig {
  ConstraintSet constraints;
  std::size_t pairs_per_batch = 256;
  MetricKind metric = MetricKind::euclidean;
  std::optional<std::size_t> blocks;  // unset = default_block_count(n)
  PipelineConfig pipeline;
  std::size_t thread_cap = 0;  // 0 = uncapped
  /// Memory budget for the per-task pair cache in MiB; 0 scans every block
  /// pair every round.
  std::size_t pair_cache_mb = 256;

  void validate() const;
};

enum class StopReason { kl1_reached, no_eligible_pairs, single_cluster };

std::string_view stop_reason_name(StopReason r) noexcept;

struct SkipCounts {
  std::size_t stale = 0;  // endpoints already share a root
  std::size_t kl2 = 0;
  std::size_t kl3 = 0;

  std::size_t total() const noexcept { return stale + kl2 + kl3; }
};

struct RoundCounters {
  std::size_t round = 0;
  std::size_t selected = 0;
  std::size_t priority = 0;  // pairs in the kl4 priority group
  std::size_t merges = 0;
  SkipCounts skips;
};

struct RunResult {
  MergeLog merges;
  std::vector<Index> assignments;  // point -> root index
  std::size_t rounds = 0;
  StopReason stop = StopReason::single_cluster;
  SkipCounts skips;
  std::vector<RoundCounters> per_round;
  UtilizationStats utilization;
  double wall_s = 0.0;
};

/// With kl4 set, pairs touching a cluster smaller than kl4 (round-start
/// sizes) move ahead of the rest; both groups keep key order.
std::vector<CandidatePair> order_batch(const TopPBuffer& buffer,
                                       const EligibilitySnapshot& snapshot,
                                       std::optional<std::size_t> kl4);

struct BatchOutcome {
  std::vector<MergeEvent> events;
  SkipCounts skips;
  bool stop = false;  // cluster count dropped below kl1
};

/**
 * Walks the ordered pairs, re-checking roots and kl2/kl3 against live sizes,
 * and unites the survivors. Event steps start at `first_step`.
 */
BatchOutcome process_batch(ClusterForest& forest, std::span<const CandidatePair> ordered,
                           const ConstraintSet& constraints, std::size_t round,
                           std::size_t first_step = 1);

/// Round loop until kl1 fires, no eligible pair remains, or one cluster is left.
RunResult run(const Dataset& data, const RunConfig& config);

}  // namespace parclust
