#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "parclust/engine.hpp"

namespace parclust::bench {

struct BenchConfig {
  std::vector<std::size_t> sizes{50000};
  std::vector<std::size_t> workers{1, 2, 4};  // total workers per row
  std::size_t trials = 3;
  std::size_t dims = 8;
  std::size_t clusters = 5;
  double spread = 1.0;
  std::uint64_t seed = 42;
  RunConfig base;  // constraints, P, metric, buffer counts
};

struct BenchRow {
  std::size_t n = 0;
  std::size_t workers = 0;
  std::size_t managers = 0;
  std::size_t workers_per_manager = 0;
  std::vector<double> wall_s;  // one per trial
  double min_s = 0.0;
  double median_s = 0.0;
  double speedup = 0.0;  // median of the 1-worker row / this median
  double utilization_pct = 0.0;
  std::size_t merges = 0;
  std::uint64_t digest = 0;  // hash of assignments.csv + merges.csv
};

struct BenchReport {
  std::vector<BenchRow> rows;
  /// Every row of a given n produced identical outputs.
  bool outputs_identical = true;
};

/// Pipeline shape used for a total worker count: up to four managers.
PipelineConfig pipeline_for(std::size_t workers, const PipelineConfig& base);

double median(std::vector<double> v);
std::uint64_t fnv1a(const std::string& text, std::uint64_t h = 1469598103934665603ULL);

BenchReport run_bench(const BenchConfig& config);
std::string format_report(const BenchReport& report);
std::string report_json(const BenchReport& report);

}  // namespace parclust::bench
