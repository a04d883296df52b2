#include "experiment_config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "lcmh/binary_io.hpp"
#include "lcmh/errors.hpp"

namespace lcmh::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " +
                    std::string(expected));
}

std::size_t to_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a non-negative integer");
  return out;
}

double to_real(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::size_t> to_widths(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    auto end = v.find(',', start);
    if (end == std::string_view::npos) end = v.size();
    out.push_back(to_count(key, trim(v.substr(start, end - start))));
    start = end + 1;
  }
  return out;
}

std::string real_text(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string widths_text(const std::vector<std::size_t>& w) {
  if (w.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

struct Field {
  ConfigKey key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define COUNT_FIELD(name, member, doc)                                                        \
  Field{{name, doc},                                                                          \
        [](ExperimentConfig& c, std::string_view v) { c.member = to_count(name, v); },        \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define REAL_FIELD(name, member, doc)                                                         \
  Field{{name, doc},                                                                          \
        [](ExperimentConfig& c, std::string_view v) { c.member = to_real(name, v); },         \
        [](const ExperimentConfig& c) { return real_text(c.member); }}
#define BOOL_FIELD(name, member, doc)                                                         \
  Field{{name, doc},                                                                          \
        [](ExperimentConfig& c, std::string_view v) { c.member = to_bool(name, v); },         \
        [](const ExperimentConfig& c) { return std::string(c.member ? "true" : "false"); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{{"dataset", "LCMD dataset file; empty synthesizes one"},
            [](ExperimentConfig& c, std::string_view v) { c.dataset = std::string(v); },
            [](const ExperimentConfig& c) { return c.dataset; }},
      Field{{"groups", "class groups: flickr, nus_wide or a list like 4x2000,10x200,10x50"},
            [](ExperimentConfig& c, std::string_view v) {
              if (v != "flickr" && v != "nus_wide") parse_groups(v);
              c.groups = std::string(v);
            },
            [](const ExperimentConfig& c) { return c.groups; }},
      COUNT_FIELD("scale_divisor", scale_divisor, "divides every per-class sample count of the groups"),
      COUNT_FIELD("d_x", d_x, "image feature dimension"),
      COUNT_FIELD("d_y", d_y, "text feature dimension"),
      COUNT_FIELD("latent_dim", latent_dim, "dimension of the shared class latent space"),
      COUNT_FIELD("holdout_per_class", holdout_per_class, "extra samples per class for queries and retrieval"),
      REAL_FIELD("center_scale", center_scale, "standard deviation of class centers"),
      REAL_FIELD("latent_noise", latent_noise, "per-sample noise in latent space"),
      REAL_FIELD("feature_noise", feature_noise, "per-feature noise after projection"),
      REAL_FIELD("multi_label_fraction", multi_label_fraction, "fraction of samples carrying a second label"),
      BOOL_FIELD("trim_labels", trim_labels, "keep only the rarest labels of heavily labelled rows"),
      COUNT_FIELD("trim_min", trim_min, "lower bound on labels kept when trimming"),
      COUNT_FIELD("trim_max", trim_max, "upper bound on labels kept when trimming"),
      COUNT_FIELD("queries_per_class", queries_per_class, "queries drawn per class outside the training set"),
      BOOL_FIELD("retrieval_includes_queries", retrieval_includes_queries, "keep queries in the retrieval set"),
      COUNT_FIELD("seed", seed, "seed for synthesis, splitting and training"),
      REAL_FIELD("alpha", train.alpha, "quantization loss weight"),
      REAL_FIELD("beta", train.beta, "balance loss weight"),
      REAL_FIELD("learning_rate", train.learning_rate, "SGD step size"),
      REAL_FIELD("momentum", train.momentum, "heavy-ball momentum in [0, 1)"),
      REAL_FIELD("memory_lr_scale", train.memory_lr_scale, "step size multiplier for the weight and eta networks"),
      COUNT_FIELD("epochs", train.epochs, "training epochs"),
      COUNT_FIELD("batch_columns", train.batch_columns, "samples per SGD minibatch"),
      COUNT_FIELD("code_length", train.code_length, "hash code bits"),
      Field{{"hidden_x", "hidden widths of the image network, comma separated or none"},
            [](ExperimentConfig& c, std::string_view v) { c.train.hidden_x = to_widths("hidden_x", v); },
            [](const ExperimentConfig& c) { return widths_text(c.train.hidden_x); }},
      Field{{"hidden_y", "hidden widths of the text network, comma separated or none"},
            [](ExperimentConfig& c, std::string_view v) { c.train.hidden_y = to_widths("hidden_y", v); },
            [](const ExperimentConfig& c) { return widths_text(c.train.hidden_y); }},
      Field{{"hidden_activation", "identity, relu, sigmoid or tanh"},
            [](ExperimentConfig& c, std::string_view v) { c.train.hidden_activation = activation_from_string(v); },
            [](const ExperimentConfig& c) { return std::string(to_string(c.train.hidden_activation)); }},
      Field{{"eta_mode", "intent_ratio, as_printed or learned"},
            [](ExperimentConfig& c, std::string_view v) { c.train.eta.mode = eta_mode_from_string(v); },
            [](const ExperimentConfig& c) { return std::string(to_string(c.train.eta.mode)); }},
      REAL_FIELD("eta_max", train.eta.eta_max, "upper clamp of ratio-mode eta"),
      REAL_FIELD("eta_epsilon", train.eta.epsilon, "denominator floor of ratio-mode eta"),
      Field{{"weight_norm", "softmax or raw prototype weights"},
            [](ExperimentConfig& c, std::string_view v) { c.train.weight_norm = weight_norm_from_string(v); },
            [](const ExperimentConfig& c) { return std::string(to_string(c.train.weight_norm)); }},
      COUNT_FIELD("head_threshold", train.head_threshold, "classes with at least this many training samples are head"),
      BOOL_FIELD("no_memory", no_memory, "ablation: meta feature is the direct feature"),
      BOOL_FIELD("learned_eta", learned_eta, "ablation: eta from a sigmoid network instead of distance ratios"),
  };
  return table;
}

#undef COUNT_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD

const Field& field(std::string_view key) {
  for (const auto& f : fields())
    if (f.key.name == key) return f;
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

LongTailSpec ExperimentConfig::synth_spec() const {
  LongTailSpec spec;
  if (groups == "flickr") {
    spec.groups = LongTailSpec::flickr_shaped().groups;
  } else if (groups == "nus_wide") {
    spec.groups = LongTailSpec::nus_wide_shaped().groups;
  } else {
    spec.groups = parse_groups(groups);
  }
  if (scale_divisor == 0) throw ConfigError("scale_divisor must be >= 1");
  for (auto& g : spec.groups) {
    g.samples_per_class /= scale_divisor;
    if (g.samples_per_class == 0) throw ConfigError("scale_divisor leaves a class without samples");
  }
  spec.d_x = d_x;
  spec.d_y = d_y;
  spec.latent_dim = latent_dim;
  spec.holdout_per_class = holdout_per_class;
  spec.center_scale = center_scale;
  spec.latent_noise = latent_noise;
  spec.feature_noise = feature_noise;
  spec.multi_label_fraction = multi_label_fraction;
  spec.validate();
  return spec;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  t.use_memory = !no_memory;
  if (learned_eta) t.eta.mode = EtaMode::learned;
  return t;
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) synth_spec();
  if (trim_min == 0 || trim_min > trim_max) throw ConfigError("need 1 <= trim_min <= trim_max");
  train_config().validate();
}

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void set_config_value(ExperimentConfig& config, std::string_view key, std::string_view value) {
  field(key).set(config, trim(value));
}

std::string get_config_value(const ExperimentConfig& config, std::string_view key) {
  return field(key).get(config);
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (!seen.insert(std::string(key)).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": key '" + std::string(key) + "' repeated");
    try {
      set_config_value(base, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), std::move(base));
}

std::string format_config(const ExperimentConfig& config) {
  std::ostringstream out;
  for (const auto& f : fields()) out << "# " << f.key.doc << '\n' << f.key.name << " = " << f.get(config) << '\n';
  return out.str();
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  const auto text = format_config(config);
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace lcmh::cli
