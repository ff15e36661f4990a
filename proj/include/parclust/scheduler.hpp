#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "parclust/pairgen.hpp"

namespace parclust {

/**
 * Shape of the two-level pipeline. The coordinator hands block-pair tasks to
 * `managers` through a pool of `input_buffers` slots; each manager keeps
 * `buffers_per_worker` prepared tasks per worker and returns its reduced
 * result through one of `output_buffers` slots.
 */
struct PipelineConfig {
  std::size_t managers = 4;
  std::size_t workers_per_manager = 0;  // 0 = derive from hardware parallelism
  std::size_t input_buffers = 12;
  std::size_t output_buffers = 12;
  std::size_t buffers_per_worker = 3;

  /// Fills derived defaults and applies `thread_cap` (0 = no cap) to the
  /// total worker count.
  PipelineConfig resolved(std::size_t thread_cap = 0) const;
  /// Throws InvalidInput on zero counts or input_buffers < managers.
  void validate() const;
};

struct WorkerStats {
  double busy_s = 0.0;
  double idle_s = 0.0;
  double lifetime_s = 0.0;
  std::size_t tasks = 0;
};

struct UtilizationStats {
  std::vector<WorkerStats> workers;     // manager-major
  std::vector<double> manager_reduce_s;
  std::size_t workers_per_manager = 0;
  std::size_t tasks = 0;
  std::size_t rounds = 0;
  double wall_s = 0.0;
  std::size_t peak_inflight_results = 0;
  std::size_t cache_served = 0;  // tasks answered from the pair cache
  std::size_t rescans = 0;       // tasks that had to scan their block pair

  /// Adds another round's numbers (layouts must agree or this must be empty).
  void accumulate(const UtilizationStats& other);
  double aggregate_utilization() const noexcept;
};

/// Per-worker and aggregate utilization, one line each.
std::string report_utilization(const UtilizationStats& stats);

/// A scan task threw; carries the failing block pair.
class RoundFailure : public std::runtime_error {
 public:
  RoundFailure(BlockTask task, const std::string& what);
  BlockTask task;
};

struct RoundOutput {
  TopPBuffer buffer;
  UtilizationStats stats;
  std::vector<std::size_t> executed;  // plan task indices, completion order
};

using ScanFn = std::function<TopPBuffer(std::size_t task_index)>;

/// Runs every plan task through the pipeline; the buffer equals global_top_p.
RoundOutput run_round(const Dataset& data, const EligibilitySnapshot& snapshot,
                      const BlockPlan& plan, std::size_t P, const PipelineConfig& config);

/// Same pipeline with a caller-supplied task body.
RoundOutput run_round(const BlockPlan& plan, std::size_t P, const PipelineConfig& config,
                      const ScanFn& scan);

/// Pipeline over a subset of plan task indices (dispatched in the given order).
RoundOutput run_tasks(const BlockPlan& plan, std::span<const std::size_t> tasks, std::size_t P,
                      const PipelineConfig& config, const ScanFn& scan);

/**
 * Per-task memory of the smallest eligible pairs found by the last scan of
 * each block pair. Eligibility only ever shrinks (roots merge, sizes grow,
 * distances are fixed), so a cached list stays a complete record of the
 * task's eligible pairs up to its last key; rounds filter it instead of
 * rescanning, and only tasks whose record stops short of the round's P-th
 * key are scanned again. Round results are identical with or without it.
 */
class PairCache {
 public:
  /// `depth` pairs kept per task; depth must be at least P to be used.
  PairCache(const BlockPlan& plan, std::size_t depth);

  /// Depth that fits `budget_bytes` for this plan, capped at 4 * P; 0 when
  /// even P per task does not fit.
  static std::size_t depth_for(const BlockPlan& plan, std::size_t P, std::size_t budget_bytes);

  std::size_t depth() const noexcept { return depth_; }
  std::size_t stored_pairs() const noexcept;

  /// Drops cached pairs that are no longer eligible and returns the first P
  /// survivors. Safe to call concurrently for distinct tasks.
  TopPBuffer serve(std::size_t task, const EligibilitySnapshot& snapshot, std::size_t P);
  /// Whether the served list could be missing pairs that belong in a round
  /// whose provisional P-th best is `provisional`.
  bool needs_rescan(std::size_t task, const TopPBuffer& provisional, std::size_t P) const;
  /// Full scan of the block pair that refills the task's record.
  TopPBuffer refill(std::size_t task, const Dataset& data, const EligibilitySnapshot& snapshot,
                    const BlockPlan& plan, std::size_t P);

 private:
  struct Entry {
    std::vector<CandidatePair> pairs;  // eligible at fill time, key order
    bool filled = false;
    bool complete = false;   // the task had no eligible pair beyond these
    CandidatePair horizon;   // last key covered by the record
    std::size_t served = 0;  // survivors at the last serve()
  };
  std::size_t depth_;
  std::vector<Entry> entries_;
};

/// Round driven through the cache: serve every task, rescan only the tasks
/// whose records fall short, and combine. Buffer equals global_top_p.
RoundOutput run_cached_round(const Dataset& data, const EligibilitySnapshot& snapshot,
                             const BlockPlan& plan, std::size_t P, const PipelineConfig& config,
                             PairCache& cache);

}  // namespace parclust
