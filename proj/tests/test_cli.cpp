#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "cli/commands.hpp"
#include "cli/experiment_config.hpp"
#include "cli/gradcheck.hpp"
#include "cli/pipeline.hpp"
#include "doctest.h"
#include "lcmh/errors.hpp"
#include "lcmh/model_io.hpp"

using namespace lcmh;
using namespace lcmh::cli;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("lcmh_cli_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "lcmh");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// a few dozen samples, a handful of epochs
const char* kTinyConfig =
    "groups = 1x30,2x10\n"
    "scale_divisor = 1\n"
    "holdout_per_class = 6\n"
    "queries_per_class = 2\n"
    "d_x = 8\n"
    "d_y = 6\n"
    "latent_dim = 4\n"
    "code_length = 8\n"
    "hidden_x = 8\n"
    "hidden_y = 8\n"
    "epochs = 3\n"
    "batch_columns = 16\n"
    "learning_rate = 1e-4\n"
    "hidden_activation = relu\n"
    "head_threshold = 20\n";

ExperimentConfig tiny() { return parse_config(kTinyConfig); }

std::filesystem::path write_tiny_config(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto path = dir / "tiny.cfg";
  write_text(path, kTinyConfig);
  return path;
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char ch : s) n += ch == '\n';
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("config text round trips every key") {
    ExperimentConfig c;
    c.train.alpha = 0.1;
    c.train.learning_rate = 3.0000000000000004e-7;
    c.train.hidden_x = {16, 8};
    c.train.hidden_y = {};
    c.train.eta.mode = EtaMode::as_printed;
    c.no_memory = true;
    c.groups = "2x5,3x4";
    c.latent_noise = 0.1 + 0.2;
    const auto text = format_config(c);
    CHECK(parse_config(text) == c);
    CHECK(count_lines(text) == 2 * config_keys().size());
    for (const auto& key : config_keys()) CHECK(text.find(std::string(key.name) + " = ") != std::string::npos);
  }

  TEST_CASE("config errors name the line") {
    CHECK_THROWS_AS(parse_config("no_such_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("alpha = 1\nalpha = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("alpha = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("missing equals\n"), ConfigError);
    try {
      parse_config("# comment\nseed = 1\nbogus = 2\n");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    auto c = parse_config("  # only comments\n\nseed = 9  # trailing\n");
    CHECK(c.seed == 9);
  }

  TEST_CASE("set and get single keys") {
    ExperimentConfig c;
    set_config_value(c, "eta_mode", "learned");
    CHECK(c.train.eta.mode == EtaMode::learned);
    CHECK(get_config_value(c, "eta_mode") == "learned");
    set_config_value(c, "hidden_x", "32,16");
    CHECK(c.train.hidden_x == std::vector<std::size_t>{32, 16});
    CHECK_THROWS_AS(set_config_value(c, "nope", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(c, "epochs", "-1"), ConfigError);
  }

  TEST_CASE("synth writes the scaled flickr-shaped dataset") {
    ExperimentConfig c;
    c.scale_divisor = 1;
    c.holdout_per_class = 0;
    const auto data = prepare_dataset(c);
    CHECK(data.size() == 10500);
    CHECK(data.num_classes() == 24);

    auto dir = fresh_dir("synth");
    auto r = invoke({"synth", "--scale_divisor", "10", "--seed", "4", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("head") != std::string::npos);
    const auto loaded = load_dataset(dir / "dataset.lcmd");
    CHECK(loaded.size() == 1050 + 24 * 100);
    CHECK(load_config(dir / "config.cfg").seed == 4);

    auto again = fresh_dir("synth2");
    REQUIRE(invoke({"synth", "--scale_divisor", "10", "--seed", "4", "--out", again.string()}).code == 0);
    CHECK(read_text(dir / "dataset.lcmd") == read_text(again / "dataset.lcmd"));

    auto one = fresh_dir("synth_one");
    REQUIRE(invoke({"synth", "--groups", "1x7", "--scale_divisor", "1", "--holdout_per_class", "0", "--out",
                    one.string()})
                .code == 0);
    CHECK(load_dataset(one / "dataset.lcmd").size() == 7);
  }

  TEST_CASE("synth rejects groups that scale a class to nothing") {
    auto r = invoke({"synth", "--groups", "1x5", "--scale_divisor", "10", "--out", fresh_dir("bad").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("error") != std::string::npos);
  }

  TEST_CASE("train writes every artifact and the effective config reloads") {
    auto dir = fresh_dir("train");
    auto cfg_path = write_tiny_config(fresh_dir("train_cfg"));
    auto r = invoke({"train", "--config", cfg_path.string(), "--seed", "5", "--quiet", "--out", dir.string()});
    REQUIRE(r.code == 0);
    CHECK(r.err.empty());
    for (const char* f : {"config.cfg", "model.lcmh", "loss.csv", "split.csv", "results.csv", "query_image.lcmb",
                          "query_text.lcmb", "retrieval_image.lcmb", "retrieval_text.lcmb"})
      CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
    CHECK(count_lines(read_text(dir / "loss.csv")) == 1 + 3);
    CHECK(count_lines(r.out) == 7);

    auto effective = load_config(dir / "config.cfg");
    CHECK(effective.seed == 5);
    auto expected = tiny();
    expected.seed = 5;
    CHECK(effective == expected);

    // rerunning from the persisted config reproduces the run
    auto rerun = fresh_dir("train_rerun");
    REQUIRE(invoke({"train", "--config", (dir / "config.cfg").string(), "--quiet", "--out", rerun.string()}).code ==
            0);
    for (const char* f : {"loss.csv", "model.lcmh", "query_image.lcmb", "retrieval_text.lcmb", "results.csv"})
      CHECK_MESSAGE(read_text(dir / f) == read_text(rerun / f), f);
  }

  TEST_CASE("train with zero epochs persists the initial model") {
    auto dir = fresh_dir("train0");
    auto cfg_path = write_tiny_config(fresh_dir("train0_cfg"));
    REQUIRE(invoke({"train", "--config", cfg_path.string(), "--epochs", "0", "--quiet", "--out", dir.string()})
                .code == 0);
    CHECK(count_lines(read_text(dir / "loss.csv")) == 1);
    const auto model = load_model(dir / "model.lcmh");
    auto c = tiny();
    c.train.epochs = 0;
    CHECK(model == run_experiment(c).trained.model);
  }

  TEST_CASE("train progress goes to stderr") {
    auto cfg_path = write_tiny_config(fresh_dir("progress_cfg"));
    auto r = invoke({"train", "--config", cfg_path.string(), "--out", fresh_dir("progress").string()});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("epoch 3 total") != std::string::npos);
  }

  TEST_CASE("train error exit codes") {
    auto missing = invoke({"train", "--dataset", "/nonexistent/data.lcmd", "--out", fresh_dir("missing").string()});
    CHECK(missing.code == 2);
    auto cfg_path = write_tiny_config(fresh_dir("diverge_cfg"));
    auto diverge = invoke({"train", "--config", cfg_path.string(), "--learning_rate", "1e300", "--quiet", "--out",
                           fresh_dir("diverge").string()});
    CHECK(diverge.code == 3);
    CHECK(diverge.err.find("epoch") != std::string::npos);
    CHECK(invoke({"train", "--learning_rate", "-1", "--out", fresh_dir("neg").string()}).code == 1);
    CHECK(invoke({"train", "--not-a-flag"}).code == 1);
    CHECK(invoke({"frobnicate"}).code == 1);
    CHECK(invoke({"train", "--config", "/nonexistent/x.cfg"}).code == 1);
  }

  TEST_CASE("encode matches in-process binarization") {
    auto data_dir = fresh_dir("enc_data");
    auto cfg_path = write_tiny_config(fresh_dir("enc_cfg"));
    REQUIRE(invoke({"synth", "--config", cfg_path.string(), "--out", data_dir.string()}).code == 0);
    auto train_dir = fresh_dir("enc_train");
    REQUIRE(invoke({"train", "--config", cfg_path.string(), "--dataset", (data_dir / "dataset.lcmd").string(),
                    "--quiet", "--out", train_dir.string()})
                .code == 0);

    const auto model = load_model(train_dir / "model.lcmh");
    const auto data = load_dataset(data_dir / "dataset.lcmd");
    const auto split = load_split(train_dir / "split.csv");

    auto out_file = train_dir / "enc_query_text.lcmb";
    auto r = invoke({"encode", "--model", (train_dir / "model.lcmh").string(), "--dataset",
                     (data_dir / "dataset.lcmd").string(), "--modality", "text", "--subset", "query", "--split",
                     (train_dir / "split.csv").string(), "--out", out_file.string()});
    REQUIRE(r.code == 0);
    const auto codes = load_codes(out_file);
    const auto q = subset(data, split.query);
    const auto expected = binarize(embed_batch(model.text, q.y, model.text_bank).meta);
    CHECK(codes.rows() == split.query.size());
    CHECK(codes.bits() == model.code_length());
    CHECK(codes == expected);
    CHECK(codes == load_codes(train_dir / "query_text.lcmb"));

    auto all_file = train_dir / "all_image.lcmb";
    REQUIRE(invoke({"encode", "--model", (train_dir / "model.lcmh").string(), "--dataset",
                    (data_dir / "dataset.lcmd").string(), "--modality", "image", "--out", all_file.string()})
                .code == 0);
    auto all_again = train_dir / "all_image2.lcmb";
    REQUIRE(invoke({"encode", "--model", (train_dir / "model.lcmh").string(), "--dataset",
                    (data_dir / "dataset.lcmd").string(), "--modality", "image", "--out", all_again.string()})
                .code == 0);
    CHECK(load_codes(all_file).rows() == data.size());
    CHECK(read_text(all_file) == read_text(all_again));

    CHECK(invoke({"encode", "--model", "/nonexistent.lcmh", "--dataset", (data_dir / "dataset.lcmd").string(),
                  "--out", all_file.string()})
              .code == 2);
    CHECK(invoke({"encode", "--model", (data_dir / "dataset.lcmd").string(), "--dataset",
                  (data_dir / "dataset.lcmd").string(), "--out", all_file.string()})
              .code == 2);

    // eval over the files reproduces the numbers train reported
    auto ev = invoke({"eval", "--query-codes", (train_dir / "query_text.lcmb").string(), "--db-codes",
                      (train_dir / "retrieval_image.lcmb").string(), "--dataset",
                      (data_dir / "dataset.lcmd").string(), "--split", (train_dir / "split.csv").string(), "--model",
                      (train_dir / "model.lcmh").string(), "--direction", "T2I"});
    REQUIRE(ev.code == 0);
    const auto results = read_text(train_dir / "results.csv");
    std::istringstream lines(ev.out);
    std::string line;
    std::getline(lines, line);
    CHECK(results.rfind(line, 0) == 0);
    while (std::getline(lines, line)) CHECK_MESSAGE(results.find(line) != std::string::npos, line);

    auto mismatch = invoke({"eval", "--query-codes", (train_dir / "query_text.lcmb").string(), "--db-codes",
                            (train_dir / "query_text.lcmb").string(), "--dataset",
                            (data_dir / "dataset.lcmd").string(), "--split", (train_dir / "split.csv").string(),
                            "--model", (train_dir / "model.lcmh").string(), "--direction", "T2I"});
    CHECK(mismatch.code == 1);
  }

  TEST_CASE("split csv round trip and errors") {
    DataSplit s;
    s.train = {0, 3};
    s.query = {1};
    s.retrieval = {2, 4};
    CHECK(parse_split_csv(split_csv(s)).train == s.train);
    CHECK(parse_split_csv(split_csv(s)).retrieval == s.retrieval);
    CHECK_THROWS_AS(parse_split_csv("index,role\n0,bogus\n"), FormatError);
    CHECK_THROWS_AS(parse_split_csv("index,role\nx,train\n"), FormatError);
  }

  TEST_CASE("gradcheck passes and the corrupted hook fails") {
    auto ok = invoke({"gradcheck", "--instances", "10"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("FAIL") == std::string::npos);
    CHECK(count_lines(ok.out) == 4);
    auto bad = invoke({"gradcheck", "--instances", "5", "--corrupt"});
    CHECK(bad.code == 3);
    CHECK(bad.out.find("FAIL") != std::string::npos);

    for (double eps : {1e-5, 1e-6, 1e-7}) {
      GradcheckOptions o;
      o.instances = 10;
      o.eps = eps;
      for (const auto& s : run_gradcheck(o)) CHECK_MESSAGE(s.max_relative_error < 1e-4, s.name << " eps " << eps);
    }
  }

  TEST_CASE("sweep emits one row per value and is reproducible") {
    auto cfg_path = write_tiny_config(fresh_dir("sweep_cfg"));
    auto dir = fresh_dir("sweep");
    auto r = invoke({"sweep", "--config", cfg_path.string(), "--param", "alpha", "--values", "0.1,1,10", "--out",
                     dir.string()});
    REQUIRE(r.code == 0);
    const auto csv = read_text(dir / "sweep_alpha.csv");
    CHECK(count_lines(csv) == 4);
    CHECK(csv.rfind("value,map_i2t,map_t2i\n", 0) == 0);
    CHECK(csv == r.out);

    auto again = fresh_dir("sweep_again");
    REQUIRE(invoke({"sweep", "--config", cfg_path.string(), "--param", "alpha", "--values", "0.1,1,10", "--out",
                    again.string()})
                .code == 0);
    CHECK(read_text(again / "sweep_alpha.csv") == csv);

    auto single = fresh_dir("sweep_single");
    REQUIRE(invoke({"sweep", "--config", cfg_path.string(), "--param", "beta", "--values", "1", "--out",
                    single.string()})
                .code == 0);
    CHECK(count_lines(read_text(single / "sweep_beta.csv")) == 2);
    CHECK(invoke({"sweep", "--param", "gamma", "--values", "1"}).code == 1);
  }
}
