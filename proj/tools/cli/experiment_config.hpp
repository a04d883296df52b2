#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lcmh/dataset.hpp"
#include "lcmh/hash_learn.hpp"

namespace lcmh::cli {

/// Everything one experiment needs: data source, split, training and ablation flags.
struct ExperimentConfig {
  /// Empty: synthesize from the fields below. Otherwise an LCMD dataset file.
  std::string dataset;
  /// "flickr", "nus_wide" or an explicit list such as "4x2000,10x200,10x50".
  std::string groups = "flickr";
  /// Per-class sample counts of the group preset are divided by this.
  std::size_t scale_divisor = 10;
  std::size_t d_x = 64;
  std::size_t d_y = 48;
  std::size_t latent_dim = 16;
  std::size_t holdout_per_class = 100;
  double center_scale = 1.0;
  double latent_noise = 0.5;
  double feature_noise = 0.5;
  double multi_label_fraction = 0.0;
  bool trim_labels = false;
  std::size_t trim_min = 2;
  std::size_t trim_max = 3;

  std::size_t queries_per_class = 50;
  bool retrieval_includes_queries = false;

  std::uint64_t seed = 1;
  TrainConfig train;
  bool no_memory = false;
  bool learned_eta = false;

  /// Synthetic spec after presets and scaling. Throws ConfigError.
  LongTailSpec synth_spec() const;
  /// Training config with seed and ablation flags applied.
  TrainConfig train_config() const;
  void validate() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct ConfigKey {
  std::string_view name;
  std::string_view doc;
};

/// Every accepted key, in file order.
std::vector<ConfigKey> config_keys();

/// Sets one key from its text form. Throws ConfigError on unknown keys or bad values.
void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const ExperimentConfig& config, std::string_view key);

/// Flat "key = value" lines; '#' starts a comment. Unknown or repeated keys are errors.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
/// Every key with its effective value; parse_config(format_config(c)) == c.
std::string format_config(const ExperimentConfig& config);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

}  // namespace lcmh::cli
