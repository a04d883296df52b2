#include "commands.hpp"

#include <CLI11.hpp>

#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "experiment_config.hpp"
#include "gradcheck.hpp"
#include "lcmh/errors.hpp"
#include "lcmh/model_io.hpp"
#include "pipeline.hpp"

namespace lcmh::cli {
namespace {

constexpr int kUsage = 1;
constexpr int kIo = 2;
constexpr int kNumerical = 3;

/// --config plus one --<key> flag per config key.
struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) {
      const std::string name(key.name);
      app.add_option("--" + name, overrides[name], std::string(key.doc));
    }
  }

  ExperimentConfig resolve(const CLI::App& app) const {
    ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    for (const auto& [name, value] : overrides)
      if (app.count("--" + name) > 0) set_config_value(config, name, value);
    config.validate();
    return config;
  }
};

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("sweep value '" + item + "' is not a number");
    values.push_back(v);
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  return values;
}

std::vector<std::size_t> subset_rows(const std::string& subset, const std::string& split_path, std::size_t n) {
  if (subset == "all") {
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return rows;
  }
  if (split_path.empty()) throw ConfigError("--subset " + subset + " needs --split");
  auto split = load_split(split_path);
  if (subset == "train") return split.train;
  if (subset == "query") return split.query;
  return split.retrieval;
}

void print_class_summary(const MultiModalDataset& data, const HeadTailPartition& partition, std::ostream& out) {
  out << "samples " << data.size() << ", classes " << data.num_classes() << ", head " << partition.head_count()
      << ", tail " << partition.tail_count() << "\n";
  const auto counts = data.labels.class_counts();
  out << "class counts:";
  for (auto c : counts) out << ' ' << c;
  out << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-tail cross-modal hashing with prototype memory"};
  app.require_subcommand(1);

  ConfigOptions synth_opts, train_opts, sweep_opts;
  std::string synth_out = ".", train_out = "run", sweep_out = "sweep";

  auto* synth = app.add_subcommand("synth", "write a synthetic long-tailed dataset");
  synth_opts.attach(*synth);
  synth->add_option("--out", synth_out, "output directory");

  auto* train_cmd = app.add_subcommand("train", "train, evaluate and write model, losses, split and codes");
  train_opts.attach(*train_cmd);
  train_cmd->add_option("--out", train_out, "output directory");
  bool quiet = false;
  train_cmd->add_flag("--quiet", quiet, "no per-epoch progress");

  std::string enc_model, enc_dataset, enc_modality = "image", enc_subset = "all", enc_split, enc_out = "codes.lcmb";
  auto* encode_cmd = app.add_subcommand("encode", "encode dataset rows into a code file");
  encode_cmd->add_option("--model", enc_model, "model file")->required();
  encode_cmd->add_option("--dataset", enc_dataset, "dataset file")->required();
  encode_cmd->add_option("--modality", enc_modality, "image or text")->check(CLI::IsMember({"image", "text"}));
  encode_cmd->add_option("--subset", enc_subset, "all, train, query or retrieval")
      ->check(CLI::IsMember({"all", "train", "query", "retrieval"}));
  encode_cmd->add_option("--split", enc_split, "split CSV written by train");
  encode_cmd->add_option("--out", enc_out, "output code file");

  std::string ev_query, ev_db, ev_dataset, ev_split, ev_model, ev_direction = "I2T", ev_out;
  auto* eval_cmd = app.add_subcommand("eval", "MAP of query codes against database codes");
  eval_cmd->add_option("--query-codes", ev_query, "query code file")->required();
  eval_cmd->add_option("--db-codes", ev_db, "database code file")->required();
  eval_cmd->add_option("--dataset", ev_dataset, "dataset file holding the labels")->required();
  eval_cmd->add_option("--split", ev_split, "split CSV; query and retrieval rows give the labels")->required();
  eval_cmd->add_option("--model", ev_model, "model file; supplies the head/tail partition")->required();
  eval_cmd->add_option("--direction", ev_direction, "I2T or T2I")->check(CLI::IsMember({"I2T", "T2I"}));
  eval_cmd->add_option("--out", ev_out, "result CSV (default: stdout only)");

  GradcheckOptions gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference checks of every analytic gradient");
  gc_cmd->add_option("--seed", gc.seed, "instance seed");
  gc_cmd->add_option("--instances", gc.instances, "random instances per suite");
  gc_cmd->add_option("--eps", gc.eps, "central difference step");
  gc_cmd->add_option("--alpha", gc.alpha, "quantization weight");
  gc_cmd->add_option("--beta", gc.beta, "balance weight");
  gc_cmd->add_flag("--corrupt", gc.corrupt, "test hook: perturb analytic gradients by 1%");

  std::string sweep_param = "alpha", sweep_values = "0.1,1,10";
  auto* sweep_cmd = app.add_subcommand("sweep", "MAP as alpha or beta varies, the other held at 1");
  sweep_opts.attach(*sweep_cmd);
  sweep_cmd->add_option("--param", sweep_param, "alpha or beta")->check(CLI::IsMember({"alpha", "beta"}));
  sweep_cmd->add_option("--values", sweep_values, "comma separated values");
  sweep_cmd->add_option("--out", sweep_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*synth) {
      const auto config = synth_opts.resolve(*synth);
      if (!config.dataset.empty()) throw ConfigError("synth writes a synthetic dataset; leave 'dataset' unset");
      const auto data = prepare_dataset(config);
      ensure_dir(synth_out);
      save_dataset(data, std::filesystem::path(synth_out) / "dataset.lcmd");
      save_config(config, std::filesystem::path(synth_out) / "config.cfg");
      const auto spec = config.synth_spec();
      out << "groups " << format_groups(spec.groups) << " + " << spec.holdout_per_class << " held out per class\n";
      print_class_summary(data, split_head_tail(data.labels.class_counts(), config.train.head_threshold), out);
    } else if (*train_cmd) {
      const auto config = train_opts.resolve(*train_cmd);
      ensure_dir(train_out);
      save_config(config, std::filesystem::path(train_out) / "config.cfg");
      auto progress = [&](const EpochRecord& r) {
        if (!quiet) err << "epoch " << r.epoch << " total " << std::setprecision(10) << r.loss.total << "\n";
        return true;
      };
      const auto run_result = run_experiment(config, progress);
      write_run(run_result, train_out);
      out << result_csv(run_result.evaluation.results);
    } else if (*encode_cmd) {
      const auto model = load_model(enc_model);
      const auto data = load_dataset(enc_dataset);
      const auto rows = subset_rows(enc_subset, enc_split, data.size());
      const auto part = subset(data, rows);
      const auto codes = enc_modality == "image" ? binarize(encode_features(model, part.x, Modality::image))
                                                 : binarize(encode_features(model, part.y, Modality::text));
      save_codes(codes, enc_out);
      out << "wrote " << codes.rows() << " codes of " << codes.bits() << " bits to " << enc_out << "\n";
    } else if (*eval_cmd) {
      const auto model = load_model(ev_model);
      const auto data = load_dataset(ev_dataset);
      const auto split = load_split(ev_split);
      const auto queries = load_codes(ev_query);
      const auto db = load_codes(ev_db);
      const auto qlabels = gather_rows(data.labels, split.query);
      const auto dblabels = gather_rows(data.labels, split.retrieval);
      if (queries.rows() != qlabels.rows() || db.rows() != dblabels.rows())
        throw ConfigError("code files do not match the split's query/retrieval sizes");
      std::vector<RetrievalResult> results{
          evaluate(queries, qlabels, db, dblabels, model.partition, direction_from_string(ev_direction))};
      const auto csv = result_csv(results);
      if (!ev_out.empty()) write_text(ev_out, csv);
      out << csv;
    } else if (*gc_cmd) {
      bool ok = true;
      out << "suite,instances,max_relative_error,status\n";
      for (const auto& s : run_gradcheck(gc)) {
        const bool pass = s.max_relative_error <= 1e-3;
        ok = ok && pass;
        out << s.name << ',' << s.instances << ',' << std::setprecision(6) << s.max_relative_error << ','
            << (pass ? "pass" : "FAIL") << "\n";
      }
      return ok ? 0 : kNumerical;
    } else if (*sweep_cmd) {
      auto config = sweep_opts.resolve(*sweep_cmd);
      ensure_dir(sweep_out);
      save_config(config, std::filesystem::path(sweep_out) / "config.cfg");
      std::ostringstream csv;
      csv << "value,map_i2t,map_t2i\n";
      for (double v : parse_values(sweep_values)) {
        auto c = config;
        c.train.alpha = sweep_param == "alpha" ? v : 1.0;
        c.train.beta = sweep_param == "beta" ? v : 1.0;
        const auto r = run_experiment(c);
        csv << std::setprecision(17) << v << ',' << r.evaluation.results[0].all.map << ','
            << r.evaluation.results[1].all.map << "\n";
      }
      write_text(std::filesystem::path(sweep_out) / ("sweep_" + sweep_param + ".csv"), csv.str());
      out << csv.str();
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const EvaluationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return 0;
}

}  // namespace lcmh::cli
