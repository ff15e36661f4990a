#include "parclust/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace parclust::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

void split(std::string_view line, char delim, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string line_ref(std::size_t line) { return "line " + std::to_string(line); }

}  // namespace

Dataset parse_dataset(const std::string& text, const LoadOptions& options) {
  std::vector<std::string_view> fields;
  std::vector<std::string> header;
  std::vector<double> values;
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> id_lines;
  std::optional<std::size_t> id_col;
  std::size_t columns = 0;
  std::size_t d = 0;
  std::size_t rows = 0;
  bool first = true;

  auto resolve_id_column = [&](std::size_t ncols) {
    if (!options.id_column) return;
    const std::string& wanted = *options.id_column;
    std::size_t k = 0;
    auto [ptr, ec] = std::from_chars(wanted.data(), wanted.data() + wanted.size(), k);
    if (ec == std::errc() && ptr == wanted.data() + wanted.size()) {
      if (k == 0 || k > ncols)
        throw InvalidInput("id column " + wanted + " out of range (1.." + std::to_string(ncols) +
                           ")");
      id_col = k - 1;
      return;
    }
    auto it = std::find(header.begin(), header.end(), wanted);
    if (it == header.end()) throw InvalidInput("no column named '" + wanted + "'");
    id_col = static_cast<std::size_t>(it - header.begin());
  };

  std::size_t line_no = 0;
  std::size_t pos = 0;
  const std::string_view all(text);
  while (pos < all.size()) {
    std::size_t eol = all.find('\n', pos);
    if (eol == std::string_view::npos) eol = all.size();
    std::string_view line = trim(all.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    split(line, options.delimiter, fields);

    if (first) {
      first = false;
      columns = fields.size();
      bool is_header = options.header == HeaderMode::present;
      if (options.header == HeaderMode::detect) {
        // Ids are free text, so the id column says nothing about a header.
        // A column picked by name only makes sense with one.
        std::size_t skip = fields.size();
        if (options.id_column) {
          const std::string& wanted = *options.id_column;
          auto [ptr, ec] = std::from_chars(wanted.data(), wanted.data() + wanted.size(), skip);
          if (ec != std::errc() || ptr != wanted.data() + wanted.size()) is_header = true;
          else skip -= 1;
        }
        double tmp;
        for (std::size_t c = 0; c < fields.size(); ++c)
          if (c != skip && !parse_double(fields[c], tmp)) is_header = true;
      }
      if (is_header) {
        for (auto f : fields) header.emplace_back(f);
      }
      resolve_id_column(columns);
      d = columns - (id_col ? 1 : 0);
      if (d == 0) throw InvalidInput(line_ref(line_no) + ": no feature columns");
      if (is_header) continue;
    }

    if (fields.size() != columns)
      throw InvalidInput(line_ref(line_no) + ": expected " + std::to_string(columns) +
                         " columns, found " + std::to_string(fields.size()));
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (id_col && c == *id_col) {
        std::string id(fields[c]);
        if (id.empty()) throw InvalidInput(line_ref(line_no) + ": empty id");
        auto [it, inserted] = id_lines.emplace(id, line_no);
        if (!inserted)
          throw InvalidInput(line_ref(line_no) + ": duplicate id '" + id + "' (first seen on " +
                             line_ref(it->second) + ")");
        ids.push_back(std::move(id));
        continue;
      }
      double v;
      if (!parse_double(fields[c], v))
        throw InvalidInput(line_ref(line_no) + ", column " + std::to_string(c + 1) +
                           ": not a number: '" + std::string(fields[c]) + "'");
      if (!std::isfinite(v))
        throw InvalidInput(line_ref(line_no) + ", column " + std::to_string(c + 1) +
                           ": non-finite value '" + std::string(fields[c]) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw InvalidInput("empty file: no data rows");
  return Dataset(rows, d, std::move(values), std::move(ids));
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  return parse_dataset(read_file(path), options);
}

void save_dataset(const std::filesystem::path& path, const Dataset& data, bool with_ids) {
  std::string out;
  out.reserve(data.size() * data.dims() * 20);
  if (with_ids) out += "id,";
  for (std::size_t k = 0; k < data.dims(); ++k) {
    if (k) out += ',';
    out += 'x' + std::to_string(k + 1);
  }
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (with_ids) out += data.id(i) + ',';
    auto row = data.row(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += format_double(row[k]);
    }
    out += '\n';
  }
  write_file(path, out);
}

Synthetic generate_synthetic(std::size_t n, std::size_t d, std::size_t clusters, double spread,
                             std::uint64_t seed) {
  if (n == 0 || d == 0 || clusters == 0)
    throw InvalidInput("n, d and clusters must all be at least 1");
  if (!(spread >= 0.0) || !std::isfinite(spread))
    throw InvalidInput("spread must be a finite nonnegative number");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 100.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> centers(clusters * d);
  for (auto& c : centers) c = uniform(rng);

  std::vector<double> values(n * d);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % clusters;
    labels[i] = label;
    for (std::size_t k = 0; k < d; ++k)
      values[i * d + k] = centers[label * d + k] + spread * normal(rng);
  }
  return {Dataset(n, d, std::move(values)), std::move(labels)};
}

void save_labels(const std::filesystem::path& path, const Dataset& data,
                 const std::vector<std::size_t>& labels) {
  std::string out = "id,label\n";
  for (std::size_t i = 0; i < data.size(); ++i)
    out += data.id(i) + ',' + std::to_string(labels.at(i)) + '\n';
  write_file(path, out);
}

const std::vector<std::string>& settings_keys() {
  static const std::vector<std::string> keys = {
      "metric",         "pairs-per-batch", "blocks",        "managers",
      "workers-per-manager", "input-buffers", "output-buffers", "buffers-per-worker",
      "kl1",            "kl2",             "kl3",           "kl4",
      "dmax",           "pair-cache-mb"};
  return keys;
}

Settings parse_settings(const std::string& text) {
  Settings out;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  const auto& keys = settings_keys();
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw InvalidInput("settings " + line_ref(line_no) + ": expected key=value");
    std::string key(trim(line.substr(0, eq)));
    std::string value(trim(line.substr(eq + 1)));
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw InvalidInput("settings " + line_ref(line_no) + ": unknown key '" + key + "'");
    if (value.empty())
      throw InvalidInput("settings " + line_ref(line_no) + ": empty value for '" + key + "'");
    out[key] = value;
  }
  return out;
}

Settings load_settings(const std::filesystem::path& path) {
  return parse_settings(read_file(path));
}

namespace {

std::size_t parse_count(const std::string& key, const std::string& value) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw InvalidInput(key + ": expected a nonnegative integer, got '" + value + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& value) {
  double v;
  if (!parse_double(value, v) || !std::isfinite(v))
    throw InvalidInput(key + ": expected a finite number, got '" + value + "'");
  return v;
}

}  // namespace

void apply_settings(RunConfig& c, const Settings& settings) {
  for (const auto& [key, value] : settings) {
    if (key == "metric") c.metric = parse_metric(value);
    else if (key == "pairs-per-batch") c.pairs_per_batch = parse_count(key, value);
    else if (key == "blocks") {
      if (value == "auto") c.blocks.reset();
      else c.blocks = parse_count(key, value);
    }
    else if (key == "managers") c.pipeline.managers = parse_count(key, value);
    else if (key == "workers-per-manager") c.pipeline.workers_per_manager = parse_count(key, value);
    else if (key == "input-buffers") c.pipeline.input_buffers = parse_count(key, value);
    else if (key == "output-buffers") c.pipeline.output_buffers = parse_count(key, value);
    else if (key == "buffers-per-worker") c.pipeline.buffers_per_worker = parse_count(key, value);
    else if (key == "kl1") c.constraints.kl1 = parse_count(key, value);
    else if (key == "kl2") c.constraints.kl2 = parse_count(key, value);
    else if (key == "kl3") c.constraints.kl3 = parse_count(key, value);
    else if (key == "kl4") c.constraints.kl4 = parse_count(key, value);
    else if (key == "dmax") c.constraints.dmax = parse_real(key, value);
    else if (key == "pair-cache-mb") c.pair_cache_mb = parse_count(key, value);
    else throw InvalidInput("unknown setting '" + key + "'");
  }
}

RunConfig layered_config(const Settings& file, const Settings& flags) {
  Settings merged = file;
  for (const auto& [k, v] : flags) merged[k] = v;
  RunConfig config;
  apply_settings(config, merged);
  return config;
}

std::string assignments_csv(const RunResult& result, const Dataset& data) {
  std::string out = "id,cluster\n";
  out.reserve(out.size() + data.size() * 16);
  for (std::size_t i = 0; i < data.size(); ++i)
    out += data.id(i) + ',' + data.id(result.assignments.at(i)) + '\n';
  return out;
}

std::string merges_csv(const RunResult& result, const Dataset& data, MetricKind metric) {
  std::string out = "step,round,root_a,root_b,distance,new_size\n";
  out.reserve(out.size() + result.merges.size() * 48);
  for (const auto& e : result.merges) {
    out += std::to_string(e.step) + ',' + std::to_string(e.round) + ',' + data.id(e.root_a) +
           ',' + data.id(e.root_b) + ',' + format_double(to_external(metric, e.dist)) + ',' +
           std::to_string(e.new_size) + '\n';
  }
  return out;
}

namespace {

nlohmann::json optional_json(const auto& v) {
  if (v) return *v;
  return nullptr;
}

}  // namespace

std::string stats_json(const RunResult& result, const RunConfig& config, std::size_t n) {
  using nlohmann::json;
  const PipelineConfig pipe = config.pipeline.resolved(config.thread_cap);
  json j;
  j["config"] = {
      {"metric", std::string(metric_name(config.metric))},
      {"pairs-per-batch", config.pairs_per_batch},
      {"blocks", config.blocks ? json(*config.blocks) : json(default_block_count(n))},
      {"managers", pipe.managers},
      {"workers-per-manager", pipe.workers_per_manager},
      {"input-buffers", pipe.input_buffers},
      {"output-buffers", pipe.output_buffers},
      {"buffers-per-worker", pipe.buffers_per_worker},
      {"kl1", optional_json(config.constraints.kl1)},
      {"kl2", optional_json(config.constraints.kl2)},
      {"kl3", optional_json(config.constraints.kl3)},
      {"kl4", optional_json(config.constraints.kl4)},
      {"dmax", optional_json(config.constraints.dmax)},
      {"pair-cache-mb", config.pair_cache_mb},
  };
  j["points"] = n;
  j["rounds"] = result.rounds;
  j["merges"] = result.merges.size();
  j["clusters"] = n - result.merges.size();
  j["skips"] = {{"stale", result.skips.stale},
                {"kl2", result.skips.kl2},
                {"kl3", result.skips.kl3}};
  j["stop_reason"] = std::string(stop_reason_name(result.stop));
  j["wall_time_s"] = result.wall_s;

  json rounds = json::array();
  for (const auto& r : result.per_round) {
    rounds.push_back({{"round", r.round},
                      {"selected", r.selected},
                      {"priority", r.priority},
                      {"merges", r.merges},
                      {"skipped_stale", r.skips.stale},
                      {"skipped_kl2", r.skips.kl2},
                      {"skipped_kl3", r.skips.kl3}});
  }
  j["per_round"] = std::move(rounds);

  const auto& u = result.utilization;
  json workers = json::array();
  const std::size_t wpm = std::max<std::size_t>(1, u.workers_per_manager);
  for (std::size_t k = 0; k < u.workers.size(); ++k) {
    const auto& w = u.workers[k];
    const double total = w.busy_s + w.idle_s;
    workers.push_back({{"manager", k / wpm},
                       {"worker", k % wpm},
                       {"busy_s", w.busy_s},
                       {"idle_s", w.idle_s},
                       {"tasks", w.tasks},
                       {"utilization_pct", total > 0 ? 100.0 * w.busy_s / total : 0.0}});
  }
  j["utilization"] = {{"workers", std::move(workers)},
                      {"manager_reduce_s", u.manager_reduce_s},
                      {"tasks", u.tasks},
                      {"scheduler_wall_s", u.wall_s},
                      {"peak_inflight_results", u.peak_inflight_results},
                      {"cache_served_tasks", u.cache_served},
                      {"scanned_tasks", u.rescans},
                      {"aggregate_pct", u.aggregate_utilization()}};
  return j.dump(2) + '\n';
}

void write_outputs(const RunResult& result, const Dataset& data, const RunConfig& config,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  write_file(dir / "assignments.csv", assignments_csv(result, data));
  write_file(dir / "merges.csv", merges_csv(result, data, config.metric));
  write_file(dir / "stats.json", stats_json(result, config, data.size()));
}

MergeLog read_merges_csv(const std::string& text, const Dataset& data) {
  MergeLog log;
  std::istringstream in(text);
  std::string raw;
  std::vector<std::string_view> fields;
  std::size_t line_no = 0;
  auto index = [&](std::string_view id) {
    auto i = data.index_of(std::string(id));
    if (!i) throw InvalidInput("merges " + line_ref(line_no) + ": unknown id '" +
                               std::string(id) + "'");
    return static_cast<Index>(*i);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    if (line_no == 1 || trim(raw).empty()) continue;
    split(trim(raw), ',', fields);
    if (fields.size() != 6)
      throw InvalidInput("merges " + line_ref(line_no) + ": expected 6 columns");
    MergeEvent e;
    e.step = parse_count("step", std::string(fields[0]));
    e.round = parse_count("round", std::string(fields[1]));
    e.root_a = index(fields[2]);
    e.root_b = index(fields[3]);
    e.dist = parse_real("distance", std::string(fields[4]));
    e.new_size = parse_count("new_size", std::string(fields[5]));
    log.push_back(e);
  }
  return log;
}

}  // namespace parclust::io
