#include "parclust/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "parclust/io.hpp"

namespace parclust::bench {

PipelineConfig pipeline_for(std::size_t workers, const PipelineConfig& base) {
  PipelineConfig p = base;
  workers = std::max<std::size_t>(1, workers);
  p.managers = std::min<std::size_t>(workers, 4);
  p.workers_per_manager = std::max<std::size_t>(1, workers / p.managers);
  p.input_buffers = std::max(p.input_buffers, p.managers);
  return p;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::uint64_t fnv1a(const std::string& text, std::uint64_t h) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

BenchReport run_bench(const BenchConfig& config) {
  BenchReport report;
  for (std::size_t n : config.sizes) {
    auto synth = io::generate_synthetic(n, config.dims, config.clusters, config.spread,
                                        config.seed);
    std::optional<double> baseline;
    std::optional<std::uint64_t> first_digest;
    for (std::size_t w : config.workers) {
      BenchRow row;
      row.n = n;
      row.workers = w;
      RunConfig rc = config.base;
      rc.pipeline = pipeline_for(w, config.base.pipeline);
      rc.thread_cap = 0;
      row.managers = rc.pipeline.managers;
      row.workers_per_manager = rc.pipeline.workers_per_manager;
      double util = 0.0;
      for (std::size_t t = 0; t < std::max<std::size_t>(1, config.trials); ++t) {
        RunResult r = run(synth.data, rc);
        row.wall_s.push_back(r.wall_s);
        util += r.utilization.aggregate_utilization();
        std::uint64_t h = fnv1a(io::assignments_csv(r, synth.data));
        h = fnv1a(io::merges_csv(r, synth.data, rc.metric), h);
        row.digest = h;
        row.merges = r.merges.size();
        if (!first_digest) first_digest = h;
        if (h != *first_digest) report.outputs_identical = false;
      }
      row.min_s = *std::min_element(row.wall_s.begin(), row.wall_s.end());
      row.median_s = median(row.wall_s);
      row.utilization_pct = util / static_cast<double>(row.wall_s.size());
      if (w == 1) baseline = row.median_s;
      report.rows.push_back(row);
    }
    for (auto& row : report.rows) {
      if (row.n != n) continue;
      row.speedup = baseline && row.median_s > 0.0 ? *baseline / row.median_s : 0.0;
    }
  }
  return report;
}

std::string format_report(const BenchReport& report) {
  std::string out =
      "       n  workers  mgr x wpm     min(s)  median(s)  speedup  util(%)   merges  digest\n";
  char line[200];
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line,
                  "%8zu  %7zu  %3zu x %-3zu  %9.3f  %9.3f  %7.2f  %7.1f  %7zu  %016llx\n", r.n,
                  r.workers, r.managers, r.workers_per_manager, r.min_s, r.median_s, r.speedup,
                  r.utilization_pct, r.merges, static_cast<unsigned long long>(r.digest));
    out += line;
  }
  out += report.outputs_identical ? "outputs identical across configurations\n"
                                  : "OUTPUTS DIFFER across configurations\n";
  return out;
}

std::string report_json(const BenchReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(r.digest));
    rows.push_back({{"n", r.n},
                    {"workers", r.workers},
                    {"managers", r.managers},
                    {"workers_per_manager", r.workers_per_manager},
                    {"wall_s", r.wall_s},
                    {"min_s", r.min_s},
                    {"median_s", r.median_s},
                    {"speedup", r.speedup},
                    {"utilization_pct", r.utilization_pct},
                    {"merges", r.merges},
                    {"digest", digest}});
  }
  nlohmann::json j{{"rows", rows}, {"outputs_identical", report.outputs_identical}};
  return j.dump(2) + '\n';
}

}  // namespace parclust::bench
