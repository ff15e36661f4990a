// parclust: constrained single-linkage clustering from the command line.
//
//   parclust cluster  --input data.csv --out-dir out [--kl1 5 ...]
//   parclust oracle   --input data.csv --out-dir out      (brute force, n <= 5000)
//   parclust generate --n 100000 --d 8 --clusters 5 --out-dir data
//   parclust bench    --sizes 20000,50000 --workers 1,2,4 --trials 3
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "parclust/bench.hpp"
#include "parclust/engine.hpp"
#include "parclust/io.hpp"
#include "parclust/oracle.hpp"

namespace {

using namespace parclust;

struct CommonFlags {
  std::string input;
  std::string id_column;
  std::string delimiter = ",";
  std::string header = "auto";
  std::string config_path;
  std::string out_dir = "out";
  std::map<std::string, std::string> values;  // settings keys given on the command line
};

void add_setting_flags(CLI::App* cmd, CommonFlags& f) {
  for (const auto& key : io::settings_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key, [&f, key](const std::string& v) { f.values[key] = v; },
        "setting '" + key + "' (overrides --config)");
  }
  cmd->add_option("--config", f.config_path, "key=value settings file");
}

void add_input_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--input", f.input, "delimited text input")->required();
  cmd->add_option("--id-column", f.id_column, "1-based column number or header name of ids");
  cmd->add_option("--delimiter", f.delimiter, "field delimiter (single character)");
  cmd->add_option("--header", f.header, "auto | present | absent")
      ->check(CLI::IsMember({"auto", "present", "absent"}));
  cmd->add_option("--out-dir", f.out_dir, "output directory");
}

std::size_t thread_cap_from_env() {
  const char* env = std::getenv("PARCLUST_THREADS");
  if (!env || !*env) return 0;
  char* end = nullptr;
  unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) throw InvalidInput("PARCLUST_THREADS must be a positive integer");
  return v;
}

RunConfig build_config(const CommonFlags& f) {
  io::Settings file;
  if (!f.config_path.empty()) file = io::load_settings(f.config_path);
  RunConfig config = io::layered_config(file, f.values);
  config.thread_cap = thread_cap_from_env();
  config.validate();
  return config;
}

Dataset load_input(const CommonFlags& f) {
  if (f.delimiter.size() != 1) throw InvalidInput("--delimiter must be a single character");
  io::LoadOptions opts;
  opts.delimiter = f.delimiter[0];
  opts.header = f.header == "present"  ? io::HeaderMode::present
                : f.header == "absent" ? io::HeaderMode::absent
                                       : io::HeaderMode::detect;
  if (!f.id_column.empty()) opts.id_column = f.id_column;
  return io::load_dataset(f.input, opts);
}

void print_summary(const RunResult& r, std::size_t n, const std::string& dir) {
  std::cout << "points " << n << ", merges " << r.merges.size() << ", clusters "
            << n - r.merges.size() << ", rounds " << r.rounds << ", stop "
            << stop_reason_name(r.stop) << ", wall " << r.wall_s << " s\n"
            << "outputs written to " << dir << "\n";
}

int cmd_cluster(const CommonFlags& f) {
  RunConfig config = build_config(f);
  Dataset data = load_input(f);
  RunResult result = run(data, config);
  io::write_outputs(result, data, config, f.out_dir);
  print_summary(result, data.size(), f.out_dir);
  std::cout << report_utilization(result.utilization);
  return 0;
}

RunResult to_run_result(const oracle::OracleResult& o, const RunConfig& config, std::size_t n) {
  RunResult r;
  std::size_t step = 0;
  for (const auto& m : o.merges) {
    r.merges.push_back({++step, std::max<std::size_t>(1, m.round), m.root, m.absorbed, m.dist,
                        m.size_a + m.size_b, m.a, m.b});
    r.rounds = std::max(r.rounds, r.merges.back().round);
  }
  r.assignments = o.assignments;
  const std::size_t clusters = n - r.merges.size();
  const auto& cs = config.constraints;
  if (cs.kl1 && clusters < *cs.kl1) r.stop = StopReason::kl1_reached;
  else if (clusters == 1) r.stop = StopReason::single_cluster;
  else r.stop = StopReason::no_eligible_pairs;
  return r;
}

int cmd_oracle(const CommonFlags& f) {
  RunConfig config = build_config(f);
  Dataset data = load_input(f);
  oracle::OracleResult o =
      config.constraints.kl4
          ? oracle::batched_single_linkage(data, config.constraints, config.metric,
                                           config.pairs_per_batch)
          : oracle::single_linkage(data, config.constraints, config.metric);
  RunResult result = to_run_result(o, config, data.size());
  io::write_outputs(result, data, config, f.out_dir);
  print_summary(result, data.size(), f.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained single-linkage clustering with batched top-P pair selection"};
  app.require_subcommand(1);

  CommonFlags cluster_flags;
  auto* cluster = app.add_subcommand("cluster", "cluster a delimited data file");
  add_input_flags(cluster, cluster_flags);
  add_setting_flags(cluster, cluster_flags);

  CommonFlags oracle_flags;
  auto* oracle_cmd = app.add_subcommand("oracle", "brute-force reference clustering (n <= 5000)");
  add_input_flags(oracle_cmd, oracle_flags);
  add_setting_flags(oracle_cmd, oracle_flags);

  std::size_t gen_n = 10000, gen_d = 8, gen_clusters = 5;
  double gen_spread = 1.0;
  std::uint64_t gen_seed = 42;
  std::string gen_dir = "data";
  bool gen_ids = false;
  auto* generate = app.add_subcommand("generate", "write a synthetic Gaussian-blob dataset");
  generate->add_option("--n", gen_n, "number of points")->check(CLI::PositiveNumber);
  generate->add_option("--d", gen_d, "number of features")->check(CLI::PositiveNumber);
  generate->add_option("--clusters", gen_clusters, "number of blobs")->check(CLI::PositiveNumber);
  generate->add_option("--spread", gen_spread, "blob standard deviation")
      ->check(CLI::NonNegativeNumber);
  generate->add_option("--seed", gen_seed, "random seed");
  generate->add_option("--out-dir", gen_dir, "writes data.csv and labels.csv here");
  generate->add_flag("--with-ids", gen_ids, "prefix each row with an id column");

  bench::BenchConfig bcfg;
  CommonFlags bench_flags;
  std::string bench_json;
  auto* bench_cmd = app.add_subcommand("bench", "time clustering across worker counts");
  bench_cmd->add_option("--sizes", bcfg.sizes, "dataset sizes")->delimiter(',');
  bench_cmd->add_option("--workers", bcfg.workers, "total worker counts")->delimiter(',');
  bench_cmd->add_option("--trials", bcfg.trials, "trials per row")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--d", bcfg.dims, "number of features")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--clusters", bcfg.clusters, "number of blobs")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--spread", bcfg.spread, "blob standard deviation");
  bench_cmd->add_option("--seed", bcfg.seed, "random seed");
  bench_cmd->add_option("--json", bench_json, "also write the report as JSON here");
  add_setting_flags(bench_cmd, bench_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cluster) return cmd_cluster(cluster_flags);
    if (*oracle_cmd) return cmd_oracle(oracle_flags);
    if (*generate) {
      auto synth = io::generate_synthetic(gen_n, gen_d, gen_clusters, gen_spread, gen_seed);
      std::filesystem::create_directories(gen_dir);
      io::save_dataset(std::filesystem::path(gen_dir) / "data.csv", synth.data, gen_ids);
      io::save_labels(std::filesystem::path(gen_dir) / "labels.csv", synth.data, synth.labels);
      std::cout << "wrote " << gen_n << " x " << gen_d << " points to " << gen_dir << "\n";
      return 0;
    }
    if (*bench_cmd) {
      bcfg.base = build_config(bench_flags);
      auto report = bench::run_bench(bcfg);
      std::cout << bench::format_report(report);
      if (!bench_json.empty()) {
        std::ofstream out(bench_json);
        out << bench::report_json(report);
      }
      return report.outputs_identical ? 0 : 2;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
