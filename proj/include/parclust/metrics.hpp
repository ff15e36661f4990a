#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace parclust {

enum class MetricKind { euclidean, squared_euclidean, manhattan, chebyshev };

/// Canonical CLI/config name ("euclidean", "squared-euclidean", ...).
std::string_view metric_name(MetricKind kind) noexcept;
/// Throws InvalidInput on an unknown name.
MetricKind parse_metric(std::string_view name);

namespace metric_detail {

// Single coordinate step, shared by the scalar path and the blocked scan
// kernels so both accumulate bit-identically.
template <MetricKind K>
inline double step(double acc, double diff) noexcept {
  if constexpr (K == MetricKind::euclidean || K == MetricKind::squared_euclidean) {
    return acc + diff * diff;
  } else if constexpr (K == MetricKind::manhattan) {
    return acc + std::fabs(diff);
  } else {
    double m = std::fabs(diff);
    return m > acc ? m : acc;
  }
}

template <MetricKind K>
inline double internal(const double* x, const double* y, std::size_t d) noexcept {
  double acc = 0.0;
  for (std::size_t k = 0; k < d; ++k) acc = step<K>(acc, x[k] - y[k]);
  return acc;
}

}  // namespace metric_detail

/**
 * Value the algorithm orders pairs by. For euclidean this is the squared
 * distance (the square root is monotone, so the order is unchanged); for
 * every other metric it is the metric itself.
 */
double internal_distance(MetricKind kind, std::span<const double> x,
                         std::span<const double> y);

/// Converts an internal value to metric units (sqrt for euclidean).
inline double to_external(MetricKind kind, double internal) noexcept {
  return kind == MetricKind::euclidean ? std::sqrt(internal) : internal;
}

/// Metric value in user units. Throws InvalidInput on dimension mismatch.
double distance(MetricKind kind, std::span<const double> x, std::span<const double> y);

/**
 * Threshold against which internal values are compared so that
 * `internal > threshold` holds exactly when the true distance exceeds dmax.
 * For euclidean this is the largest double not above the real value dmax^2.
 */
double effective_threshold(MetricKind kind, double dmax);

}  // namespace parclust
