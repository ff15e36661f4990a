#include "parclust/metrics.hpp"

#include <limits>

#include "parclust/core.hpp"

namespace parclust {

std::string_view metric_name(MetricKind kind) noexcept {
  switch (kind) {
    case MetricKind::euclidean: return "euclidean";
    case MetricKind::squared_euclidean: return "squared-euclidean";
    case MetricKind::manhattan: return "manhattan";
    case MetricKind::chebyshev: return "chebyshev";
  }
  return "euclidean";
}

MetricKind parse_metric(std::string_view name) {
  for (auto k : {MetricKind::euclidean, MetricKind::squared_euclidean,
                 MetricKind::manhattan, MetricKind::chebyshev}) {
    if (metric_name(k) == name) return k;
  }
  throw InvalidInput("unknown metric '" + std::string(name) + "'");
}

double internal_distance(MetricKind kind, std::span<const double> x,
                         std::span<const double> y) {
  if (x.size() != y.size())
    throw InvalidInput("dimension mismatch: " + std::to_string(x.size()) + " vs " +
                       std::to_string(y.size()));
  using namespace metric_detail;
  switch (kind) {
    case MetricKind::euclidean:
    case MetricKind::squared_euclidean:
      return internal<MetricKind::squared_euclidean>(x.data(), y.data(), x.size());
    case MetricKind::manhattan:
      return internal<MetricKind::manhattan>(x.data(), y.data(), x.size());
    case MetricKind::chebyshev:
      return internal<MetricKind::chebyshev>(x.data(), y.data(), x.size());
  }
  return 0.0;
}

double distance(MetricKind kind, std::span<const double> x, std::span<const double> y) {
  return to_external(kind, internal_distance(kind, x, y));
}

double effective_threshold(MetricKind kind, double dmax) {
  if (!(dmax >= 0.0) || !std::isfinite(dmax))
    throw InvalidInput("dmax must be a finite nonnegative number");
  if (kind != MetricKind::euclidean) return dmax;
  double sq = dmax * dmax;
  // fma recovers the exact rounding error of the product.
  double err = std::fma(dmax, dmax, -sq);
  if (err < 0.0) sq = std::nextafter(sq, 0.0);
  return sq;
}

}  // namespace parclust
