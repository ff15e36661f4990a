#include "parclust/engine.hpp"

#include <algorithm>
#include <chrono>

namespace parclust {

void RunConfig::validate() const {
  constraints.validate();
  if (pairs_per_batch == 0) throw InvalidInput("pairs-per-batch must be at least 1");
  if (blocks && *blocks == 0) throw InvalidInput("blocks must be at least 1");
  pipeline.resolved(thread_cap).validate();
}

std::string_view stop_reason_name(StopReason r) noexcept {
  switch (r) {
    case StopReason::kl1_reached: return "kl1-reached";
    case StopReason::no_eligible_pairs: return "no-eligible-pairs";
    case StopReason::single_cluster: return "single-cluster";
  }
  return "single-cluster";
}

std::vector<CandidatePair> order_batch(const TopPBuffer& buffer,
                                       const EligibilitySnapshot& snapshot,
                                       std::optional<std::size_t> kl4) {
  std::vector<CandidatePair> out(buffer.pairs());
  if (!kl4) return out;
  std::stable_partition(out.begin(), out.end(), [&](const CandidatePair& c) {
    return std::min(snapshot.cluster_size(c.a), snapshot.cluster_size(c.b)) < *kl4;
  });
  return out;
}

BatchOutcome process_batch(ClusterForest& forest, std::span<const CandidatePair> ordered,
                           const ConstraintSet& constraints, std::size_t round,
                           std::size_t first_step) {
  BatchOutcome out;
  std::size_t step = first_step;
  for (const auto& c : ordered) {
    const Index ra = forest.find(c.a);
    const Index rb = forest.find(c.b);
    if (ra == rb) {
      ++out.skips.stale;
      continue;
    }
    const std::size_t sa = forest.root_size(ra);
    const std::size_t sb = forest.root_size(rb);
    if (constraints.kl2 && (sa > *constraints.kl2 || sb > *constraints.kl2)) {
      ++out.skips.kl2;
      continue;
    }
    if (constraints.kl3 && sa + sb > *constraints.kl3) {
      ++out.skips.kl3;
      continue;
    }
    auto u = forest.unite(ra, rb);
    out.events.push_back({step++, round, u.root, u.absorbed, c.dist, u.new_size, c.a, c.b});
    if (constraints.kl1 && forest.count() < *constraints.kl1) {
      out.stop = true;
      break;
    }
  }
  return out;
}

RunResult run(const Dataset& data, const RunConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = data.size();
  const std::size_t P = config.pairs_per_batch;
  const PipelineConfig pipeline = config.pipeline.resolved(config.thread_cap);
  const BlockPlan plan = plan_blocks(n, config.blocks.value_or(default_block_count(n)));
  const auto& cs = config.constraints;

  std::optional<PairCache> cache;
  if (const auto depth = PairCache::depth_for(plan, P, config.pair_cache_mb << 20); depth)
    cache.emplace(plan, depth);

  ClusterForest forest(n);
  RunResult result;
  for (;;) {
    if (cs.kl1 && forest.count() < *cs.kl1) {
      result.stop = StopReason::kl1_reached;
      break;
    }
    if (forest.count() == 1) {
      result.stop = StopReason::single_cluster;
      break;
    }
    const auto snapshot = EligibilitySnapshot::capture(forest, config.metric, cs);
    RoundOutput round = cache ? run_cached_round(data, snapshot, plan, P, pipeline, *cache)
                              : run_round(data, snapshot, plan, P, pipeline);
    result.utilization.accumulate(round.stats);
    if (round.buffer.empty()) {
      result.stop = StopReason::no_eligible_pairs;
      break;
    }
    const std::size_t index = ++result.rounds;
    const auto ordered = order_batch(round.buffer, snapshot, cs.kl4);
    auto batch = process_batch(forest, ordered, cs, index, result.merges.size() + 1);

    RoundCounters counters;
    counters.round = index;
    counters.selected = ordered.size();
    if (cs.kl4)
      counters.priority = static_cast<std::size_t>(
          std::count_if(ordered.begin(), ordered.end(), [&](const CandidatePair& c) {
            return std::min(snapshot.cluster_size(c.a), snapshot.cluster_size(c.b)) < *cs.kl4;
          }));
    counters.merges = batch.events.size();
    counters.skips = batch.skips;
    result.per_round.push_back(counters);
    result.skips.stale += batch.skips.stale;
    result.skips.kl2 += batch.skips.kl2;
    result.skips.kl3 += batch.skips.kl3;
    result.merges.insert(result.merges.end(), batch.events.begin(), batch.events.end());
    if (batch.stop) {
      result.stop = StopReason::kl1_reached;
      break;
    }
  }
  result.assignments = forest.roots();
  result.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace parclust
