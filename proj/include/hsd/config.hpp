#ifndef HSD_CONFIG_HPP
#define HSD_CONFIG_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hsd/classifier.hpp"
#include "hsd/data_io.hpp"
#include "hsd/evaluation.hpp"

namespace hsd {

/// Everything a command needs besides file paths.
struct RunConfig {
  TrainConfig train;
  std::string scheme = "viii";
  std::size_t folds = 10;
  std::size_t runs = 15;
  bool stratified_folds = false;
  bool leaky_tendencies = false;
  std::size_t jobs = 1;
  DualLabelPolicy dual_labels = DualLabelPolicy::PreferHateful;
  bool save_models = true;
};

/// Full protocol: 10 folds, 15 runs.
RunConfig full_preset();
/// Desk scale: 5 folds, 3 runs.
RunConfig desk_preset();
/// "full" or "desk"; throws ConfigError otherwise.
RunConfig preset(std::string_view name);

/// Sets one key. Throws ConfigError for unknown keys and malformed values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Reads "key = value" lines on top of `base`. Blank lines and lines starting
/// with '#' are skipped.
RunConfig parse_config(std::istream& in, RunConfig base = full_preset());
RunConfig load_config(const std::filesystem::path& path, RunConfig base = full_preset());

/// Every key with its value, in a fixed order. Values round-trip through
/// apply_setting.
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);
std::string serialize_config(const RunConfig& config);

/// Plan for `corpus`-independent experiment settings. Throws ConfigError on
/// an unknown scheme.
ExperimentPlan make_plan(const RunConfig& config);

/// Scheme id (i..xi) or a single combination name (O, NS, NR, RS, NRS).
EnsembleScheme resolve_scheme(std::string_view id);

}  // namespace hsd

#endif  // HSD_CONFIG_HPP
