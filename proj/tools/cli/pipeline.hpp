#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "experiment_config.hpp"
#include "lcmh/dataset.hpp"
#include "lcmh/hash_learn.hpp"
#include "lcmh/retrieval.hpp"

namespace lcmh::cli {

/// Loads `config.dataset` or synthesizes one, then trims labels if asked.
MultiModalDataset prepare_dataset(const ExperimentConfig& config);

/// Synthetic data keeps its per-class training budgets; loaded data reserves
/// holdout_per_class samples of every class for queries and retrieval.
SplitSpec split_spec(const ExperimentConfig& config, const MultiModalDataset& data);

/// "index,role" rows with role in {train, query, retrieval}.
std::string split_csv(const DataSplit& split);
DataSplit parse_split_csv(std::string_view text);
void save_split(const DataSplit& split, const std::filesystem::path& path);
DataSplit load_split(const std::filesystem::path& path);

struct SideCodes {
  BinaryCodeMatrix image;
  BinaryCodeMatrix text;
};

/// Codes of `rows` of the dataset through both sides of the model.
SideCodes encode_rows(const HashModel& model, const MultiModalDataset& data, std::span<const std::size_t> rows);

struct Evaluation {
  SideCodes query;
  SideCodes retrieval;
  std::vector<RetrievalResult> results;  // I2T then T2I
};

Evaluation evaluate_model(const HashModel& model, const MultiModalDataset& data, const DataSplit& split);

struct ExperimentRun {
  ExperimentConfig config;
  DataSplit split;
  TrainResult trained;
  Evaluation evaluation;

  /// Mean of the I2T and T2I tail-group MAP.
  double tail_map() const;
  double all_map() const;
};

ExperimentRun run_experiment(const ExperimentConfig& config, const EpochCallback& on_epoch = {});

/// config.cfg, model.lcmh, loss.csv, split.csv, results.csv and the four query/retrieval code files.
void write_run(const ExperimentRun& run, const std::filesystem::path& out_dir);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace lcmh::cli
