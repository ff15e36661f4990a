#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace parclust {

using Index = std::uint32_t;

/// Raised for malformed input data or configuration (CLI exit code 1).
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Immutable row-major n x d feature matrix plus one identifier per row.
 *
 * Construction validates the shape, rejects non-finite values and duplicate
 * identifiers. Feature scaling is the caller's business; values are used as
 * given.
 */
class Dataset {
 public:
  Dataset(std::size_t n, std::size_t d, std::vector<double> values,
          std::vector<std::string> ids = {});

  std::size_t size() const noexcept { return n_; }
  std::size_t dims() const noexcept { return d_; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {values_.data() + i * d_, d_};
  }
  std::span<const double> values() const noexcept { return values_; }

  const std::string& id(std::size_t i) const noexcept { return ids_[i]; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  /// Internal index of an identifier, if present.
  std::optional<std::size_t> index_of(const std::string& id) const;

 private:
  std::size_t n_;
  std::size_t d_;
  std::vector<double> values_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Two point indices (a < b) and their internal metric value.
struct CandidatePair {
  double dist = 0.0;
  Index a = 0;
  Index b = 0;

  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

/// Total order over pairs: (dist, a, b) lexicographic.
inline bool key_less(const CandidatePair& x, const CandidatePair& y) noexcept {
  if (x.dist != y.dist) return x.dist < y.dist;
  if (x.a != y.a) return x.a < y.a;
  return x.b < y.b;
}

struct PairKeyLess {
  bool operator()(const CandidatePair& x, const CandidatePair& y) const noexcept {
    return key_less(x, y);
  }
};

/**
 * Union-find over point indices. The surviving root of a union is always the
 * smaller of the two root indices, so labels depend only on the sequence of
 * unions. Path halving keeps finds short.
 */
class ClusterForest {
 public:
  explicit ClusterForest(std::size_t n);

  std::size_t size() const noexcept { return parent_.size(); }
  std::size_t count() const noexcept { return count_; }

  Index find(std::size_t i);
  /// Root lookup without path shortening.
  Index find_const(std::size_t i) const;

  /// Size of the cluster whose root is `root`.
  std::size_t root_size(Index root) const noexcept { return size_[root]; }
  std::size_t cluster_size(std::size_t i) { return size_[find(i)]; }

  struct UnionResult {
    Index root;
    Index absorbed;
    std::size_t new_size;
  };

  /// Joins the clusters of i and j; throws InvalidInput if they already share
  /// a root.
  UnionResult unite(std::size_t i, std::size_t j);

  /// Root of every point, fully resolved.
  std::vector<Index> roots();

 private:
  void check(std::size_t i) const;

  std::vector<Index> parent_;
  std::vector<std::size_t> size_;
  std::size_t count_;
};

/// KL1..KL4 and the maximum merge distance; unset members impose nothing.
struct ConstraintSet {
  std::optional<std::size_t> kl1;  // stop once cluster count < kl1
  std::optional<std::size_t> kl2;  // no union if either side has > kl2 points
  std::optional<std::size_t> kl3;  // no union if combined size > kl3
  std::optional<std::size_t> kl4;  // clusters below kl4 points merge first
  std::optional<double> dmax;      // no union of pairs farther than dmax

  /// Throws InvalidInput when kl3 <= kl2 or dmax is negative/non-finite.
  void validate() const;
};

struct MergeEvent {
  std::size_t step = 0;   // 1-based
  std::size_t round = 0;  // 1-based
  Index root_a = 0;       // surviving root
  Index root_b = 0;       // absorbed root
  double dist = 0.0;      // internal metric value
  std::size_t new_size = 0;
  Index pair_a = 0;  // points of the pair that caused the union
  Index pair_b = 0;

  friend bool operator==(const MergeEvent&, const MergeEvent&) = default;
};

using MergeLog = std::vector<MergeEvent>;

/// Replays a merge log over fresh singletons and returns each point's root.
std::vector<Index> replay_assignments(std::size_t n, const MergeLog& log);

}  // namespace parclust
