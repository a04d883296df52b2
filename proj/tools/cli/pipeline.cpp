#include "pipeline.hpp"

#include <charconv>
#include <sstream>

#include "lcmh/binary_io.hpp"
#include "lcmh/errors.hpp"
#include "lcmh/model_io.hpp"

namespace lcmh::cli {

MultiModalDataset prepare_dataset(const ExperimentConfig& config) {
  MultiModalDataset data =
      config.dataset.empty() ? synthesize_long_tailed(config.synth_spec(), config.seed) : load_dataset(config.dataset);
  if (config.trim_labels) data.labels = trim_labels(data.labels, config.trim_min, config.trim_max, config.seed);
  data.validate();
  return data;
}

SplitSpec split_spec(const ExperimentConfig& config, const MultiModalDataset& data) {
  SplitSpec spec;
  spec.queries_per_class = config.queries_per_class;
  spec.retrieval_includes_queries = config.retrieval_includes_queries;
  if (config.dataset.empty()) {
    spec.train_per_class = config.synth_spec().train_counts();
  } else {
    for (std::size_t count : data.labels.class_counts())
      spec.train_per_class.push_back(count > config.holdout_per_class ? count - config.holdout_per_class : 0);
  }
  return spec;
}

std::string split_csv(const DataSplit& split) {
  std::ostringstream out;
  out << "index,role\n";
  for (auto i : split.train) out << i << ",train\n";
  for (auto i : split.query) out << i << ",query\n";
  for (auto i : split.retrieval) out << i << ",retrieval\n";
  return out.str();
}

DataSplit parse_split_csv(std::string_view text) {
  DataSplit split;
  std::size_t start = 0, line_no = 0;
  while (start < text.size()) {
    const std::size_t line_start = start;
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || (line_no == 1 && line == "index,role")) continue;
    const auto comma = line.find(',');
    std::size_t index = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + (comma == std::string_view::npos ? 0 : comma), index);
    if (comma == std::string_view::npos || ec != std::errc() || ptr != line.data() + comma)
      throw FormatError("split file line " + std::to_string(line_no) + ": expected 'index,role'", line_start);
    const auto role = line.substr(comma + 1);
    if (role == "train") {
      split.train.push_back(index);
    } else if (role == "query") {
      split.query.push_back(index);
    } else if (role == "retrieval") {
      split.retrieval.push_back(index);
    } else {
      throw FormatError("split file line " + std::to_string(line_no) + ": unknown role '" + std::string(role) + "'",
                        line_start);
    }
  }
  return split;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void save_split(const DataSplit& split, const std::filesystem::path& path) { write_text(path, split_csv(split)); }

DataSplit load_split(const std::filesystem::path& path) { return parse_split_csv(read_text(path)); }

SideCodes encode_rows(const HashModel& model, const MultiModalDataset& data, std::span<const std::size_t> rows) {
  const auto part = subset(data, rows);
  return {binarize(encode_features(model, part.x, Modality::image)),
          binarize(encode_features(model, part.y, Modality::text))};
}

Evaluation evaluate_model(const HashModel& model, const MultiModalDataset& data, const DataSplit& split) {
  Evaluation ev;
  ev.query = encode_rows(model, data, split.query);
  ev.retrieval = encode_rows(model, data, split.retrieval);
  const auto query_labels = gather_rows(data.labels, split.query);
  const auto db_labels = gather_rows(data.labels, split.retrieval);
  ev.results.push_back(evaluate(ev.query.image, query_labels, ev.retrieval.text, db_labels, model.partition,
                                Direction::image_to_text));
  ev.results.push_back(evaluate(ev.query.text, query_labels, ev.retrieval.image, db_labels, model.partition,
                                Direction::text_to_image));
  return ev;
}

double ExperimentRun::tail_map() const {
  return 0.5 * (evaluation.results.at(0).tail.map + evaluation.results.at(1).tail.map);
}

double ExperimentRun::all_map() const {
  return 0.5 * (evaluation.results.at(0).all.map + evaluation.results.at(1).all.map);
}

ExperimentRun run_experiment(const ExperimentConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  ExperimentRun run;
  run.config = config;
  const auto data = prepare_dataset(config);
  run.split = split_query_retrieval(data, split_spec(config, data), config.seed);
  run.trained = train(data, run.split.train, config.train_config(), on_epoch);
  run.evaluation = evaluate_model(run.trained.model, data, run.split);
  return run;
}

void write_run(const ExperimentRun& run, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  save_config(run.config, out_dir / "config.cfg");
  save_model(run.trained.model, out_dir / "model.lcmh");
  write_text(out_dir / "loss.csv", loss_history_csv(run.trained.history));
  save_split(run.split, out_dir / "split.csv");
  write_text(out_dir / "results.csv", result_csv(run.evaluation.results));
  save_codes(run.evaluation.query.image, out_dir / "query_image.lcmb");
  save_codes(run.evaluation.query.text, out_dir / "query_text.lcmb");
  save_codes(run.evaluation.retrieval.image, out_dir / "retrieval_image.lcmb");
  save_codes(run.evaluation.retrieval.text, out_dir / "retrieval_text.lcmb");
}

}  // namespace lcmh::cli
