#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parclust/core.hpp"
#include "parclust/engine.hpp"

namespace parclust::io {

enum class HeaderMode { detect, present, absent };

struct LoadOptions {
  char delimiter = ',';
  HeaderMode header = HeaderMode::detect;
  /// 1-based column number or a header name; unset = ids are row numbers.
  std::optional<std::string> id_column;
};

/// Parses a delimited text table into a validated Dataset. Diagnostics name
/// the 1-based line of the offending row.
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});
Dataset parse_dataset(const std::string& text, const LoadOptions& options = {});

/// Writes `x1..xd` (plus a leading `id` column when `with_ids`), values in
/// shortest round-trip form.
void save_dataset(const std::filesystem::path& path, const Dataset& data, bool with_ids = false);

struct Synthetic {
  Dataset data;
  std::vector<std::size_t> labels;
};

/// Gaussian blobs (standard deviation `spread`) around centers drawn
/// uniformly from [0, 100]^d; point i belongs to blob i % clusters.
Synthetic generate_synthetic(std::size_t n, std::size_t d, std::size_t clusters, double spread,
                             std::uint64_t seed);

void save_labels(const std::filesystem::path& path, const Dataset& data,
                 const std::vector<std::size_t>& labels);

/// key -> raw value; keys use the CLI flag spelling without dashes.
using Settings = std::map<std::string, std::string>;

/// Every key accepted in a settings file.
const std::vector<std::string>& settings_keys();

/// `key=value` lines, `#` comments, blank lines ignored; unknown keys and
/// malformed lines are rejected with their line number.
Settings parse_settings(const std::string& text);
Settings load_settings(const std::filesystem::path& path);

/// Applies settings onto a config (missing keys leave it unchanged).
void apply_settings(RunConfig& config, const Settings& settings);

/// Defaults, then `file`, then `flags`: later layers win key by key.
RunConfig layered_config(const Settings& file, const Settings& flags);

/// Writes assignments.csv, merges.csv and stats.json into `dir`.
void write_outputs(const RunResult& result, const Dataset& data, const RunConfig& config,
                   const std::filesystem::path& dir);

std::string assignments_csv(const RunResult& result, const Dataset& data);
std::string merges_csv(const RunResult& result, const Dataset& data, MetricKind metric);
std::string stats_json(const RunResult& result, const RunConfig& config, std::size_t n);

/// Parses merges.csv back into events (root ids mapped through `data`).
MergeLog read_merges_csv(const std::string& text, const Dataset& data);

}  // namespace parclust::io
