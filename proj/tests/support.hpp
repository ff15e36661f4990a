#pragma once

// Test-only helpers: random instances and reference computations written
// independently of the library's selection and merge paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "parclust/core.hpp"
#include "parclust/metrics.hpp"

namespace parclust::testing {

inline Dataset random_dataset(std::size_t n, std::size_t d, std::uint64_t seed,
                              double lo = -10.0, double hi = 10.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n * d);
  for (auto& x : v) x = u(rng);
  return Dataset(n, d, std::move(v));
}

/// Integer-valued coordinates on a small grid: plenty of exact distance ties.
inline Dataset grid_dataset(std::size_t n, std::size_t d, std::uint64_t seed, int span = 4) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, span);
  std::vector<double> v(n * d);
  for (auto& x : v) x = u(rng);
  return Dataset(n, d, std::move(v));
}

/// Straight per-coordinate recomputation of each metric in user units.
inline double reference_distance(MetricKind kind, std::span<const double> x,
                                 std::span<const double> y) {
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    switch (kind) {
      case MetricKind::euclidean:
      case MetricKind::squared_euclidean: total += diff * diff; break;
      case MetricKind::manhattan: total += std::abs(diff); break;
      case MetricKind::chebyshev: total = std::max(total, std::abs(diff)); break;
    }
  }
  return kind == MetricKind::euclidean ? std::sqrt(total) : total;
}

struct WeightedEdge {
  double w;
  std::size_t u, v;
};

/// Prim's algorithm on the complete graph; edges sorted by weight.
inline std::vector<WeightedEdge> prim_mst(const Dataset& data, MetricKind kind) {
  const std::size_t n = data.size();
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> from(n, 0);
  std::vector<bool> in(n, false);
  std::vector<WeightedEdge> edges;
  best[0] = 0.0;
  for (std::size_t it = 0; it < n; ++it) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!in[i] && (pick == n || best[i] < best[pick])) pick = i;
    in[pick] = true;
    if (it > 0) edges.push_back({best[pick], std::min(pick, from[pick]), std::max(pick, from[pick])});
    for (std::size_t i = 0; i < n; ++i) {
      if (in[i]) continue;
      double w = reference_distance(kind, data.row(pick), data.row(i));
      if (w < best[i]) {
        best[i] = w;
        from[i] = pick;
      }
    }
  }
  std::sort(edges.begin(), edges.end(), [](auto& a, auto& b) { return a.w < b.w; });
  return edges;
}

/// Naive partition: label[i] = smallest member of i's cluster.
struct LabelArray {
  std::vector<std::size_t> label;
  explicit LabelArray(std::size_t n) : label(n) {
    for (std::size_t i = 0; i < n; ++i) label[i] = i;
  }
  void join(std::size_t i, std::size_t j) {
    std::size_t a = label[i], b = label[j];
    if (a == b) return;
    std::size_t keep = std::min(a, b), drop = std::max(a, b);
    for (auto& l : label)
      if (l == drop) l = keep;
  }
  std::size_t size_of(std::size_t i) const {
    return static_cast<std::size_t>(std::count(label.begin(), label.end(), label[i]));
  }
  std::size_t clusters() const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < label.size(); ++i) c += label[i] == i;
    return c;
  }
};

/// Same partition up to relabeling.
template <typename A, typename B>
bool same_partition(const std::vector<A>& x, const std::vector<B>& y) {
  if (x.size() != y.size()) return false;
  std::map<A, B> fwd;
  std::map<B, A> back;
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto [f, fi] = fwd.emplace(x[i], y[i]);
    if (!fi && f->second != y[i]) return false;
    auto [b, bi] = back.emplace(y[i], x[i]);
    if (!bi && b->second != x[i]) return false;
  }
  return true;
}

/// Relative-or-absolute closeness.
inline bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace parclust::testing
