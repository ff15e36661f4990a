#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "parclust/core.hpp"
#include "parclust/metrics.hpp"
#include "parclust/pairgen.hpp"

// Brute-force references for tests and the `oracle` subcommand. Nothing here
// calls into the pair generator, the scheduler or the engine.
namespace parclust::oracle {

constexpr std::size_t kMaxPoints = 5000;

struct OracleMerge {
  double dist = 0.0;  // internal units
  Index a = 0;        // the pair that caused the union
  Index b = 0;
  std::size_t size_a = 0;  // cluster sizes just before the union
  std::size_t size_b = 0;
  Index root = 0;  // surviving / absorbed roots
  Index absorbed = 0;
  std::size_t round = 0;  // 0 when unbatched
};

struct OracleResult {
  std::vector<OracleMerge> merges;
  std::vector<Index> assignments;
};

/**
 * Materializes every pair, sorts by (dist, a, b) and unites in that order,
 * skipping same-cluster pairs and pairs that violate dmax or kl2/kl3 against
 * live sizes; stops once the cluster count drops below kl1. kl4 is ignored.
 * Throws InvalidInput above kMaxPoints points.
 */
OracleResult single_linkage(const Dataset& data, const ConstraintSet& constraints,
                            MetricKind metric = MetricKind::euclidean);

/**
 * Batched variant: each round takes the P smallest pairs eligible against the
 * round-start state, moves pairs touching a cluster smaller than kl4 to the
 * front, then processes them as above. Without kl4 it agrees with
 * single_linkage for every P.
 */
OracleResult batched_single_linkage(const Dataset& data, const ConstraintSet& constraints,
                                    MetricKind metric, std::size_t P);

/// Enumerate, filter against the snapshot, sort, truncate.
TopPBuffer top_p(const Dataset& data, const EligibilitySnapshot& snapshot, std::size_t P);

}  // namespace parclust::oracle
