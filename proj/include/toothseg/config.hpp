#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "toothseg/train.hpp"

namespace toothseg {

/// Everything `train` needs: data locations, the output directory and the
/// full training configuration including seeds.
struct RunConfig {
  std::filesystem::path labeled_dir;
  std::optional<std::filesystem::path> unlabeled_dir;  // absent: no unlabeled pool
  std::optional<std::filesystem::path> test_dir;       // present: evaluate after training
  std::optional<std::filesystem::path> cluster_cache;  // default: <out_dir>/cluster_cache
  std::filesystem::path out_dir;
  TrainConfig train;

  std::filesystem::path cache_dir() const { return cluster_cache ? *cluster_cache : out_dir / "cluster_cache"; }
};

/// Parses the key-value run configuration: `key = value` lines grouped under
/// `[section]` headers, `#` comments, values written as numbers, booleans,
/// "quoted strings" or `[a, b]` lists. Relative paths resolve against
/// `base_dir`. Unknown keys and malformed values throw ConfigError naming
/// the line.
RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& file);

/// Every field written out explicitly; parse_run_config reads it back to an
/// identical configuration.
std::string format_run_config(const RunConfig& cfg);

}  // namespace toothseg
