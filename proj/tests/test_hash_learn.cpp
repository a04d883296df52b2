#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "doctest.h"
#include "lcmh/errors.hpp"
#include "lcmh/hash_learn.hpp"
#include "lcmh/model_io.hpp"
#include "test_support.hpp"

using namespace lcmh;
using lcmh::testing::random_matrix;
using lcmh::testing::random_signs;
using lcmh::testing::relative_error;

namespace {

AffinityMatrix random_affinity(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.4);
  AffinityMatrix a(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) a.set(i, j, coin(rng));
  return a;
}

MultiModalDataset tiny_separable(std::uint64_t seed) {
  LongTailSpec spec;
  spec.groups = {{1, 30}, {1, 10}};
  spec.d_x = 8;
  spec.d_y = 6;
  spec.latent_dim = 4;
  spec.center_scale = 2.0;
  spec.latent_noise = 0.2;
  spec.feature_noise = 0.2;
  return synthesize_long_tailed(spec, seed);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.code_length = 8;
  cfg.hidden_x = {8};
  cfg.hidden_y = {8};
  cfg.epochs = 50;
  cfg.batch_columns = 10;
  cfg.learning_rate = 1e-4;
  cfg.hidden_activation = Activation::relu;
  cfg.head_threshold = 20;
  return cfg;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

double naive_objective(const DenseMatrix& vx, const DenseMatrix& vy, const AffinityMatrix& a,
                       const DenseMatrix& b, double alpha, double beta) {
  double nll = 0.0;
  for (std::size_t i = 0; i < vx.cols(); ++i)
    for (std::size_t j = 0; j < vy.cols(); ++j) {
      double phi = 0.0;
      for (std::size_t k = 0; k < vx.rows(); ++k) phi += 0.5 * vx(k, i) * vy(k, j);
      nll -= a(i, j) * phi - std::log(1.0 + std::exp(phi));
    }
  double quant = 0.0, bal = 0.0;
  for (std::size_t k = 0; k < vx.rows(); ++k) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < vx.cols(); ++i) {
      quant += (b(k, i) - vx(k, i)) * (b(k, i) - vx(k, i)) + (b(k, i) - vy(k, i)) * (b(k, i) - vy(k, i));
      sx += vx(k, i);
      sy += vy(k, i);
    }
    bal += sx * sx + sy * sy;
  }
  return nll + alpha * quant + beta * bal;
}

}  // namespace

TEST_SUITE("hash-learn") {

TEST_CASE("pairwise phi") {
  DenseMatrix ones(8, 1, 1.0);
  CHECK(pairwise_phi(ones, ones)(0, 0) == 4.0);
  DenseMatrix a(2, 1, std::vector<double>{1, 0});
  DenseMatrix b(2, 1, std::vector<double>{0, 3});
  CHECK(pairwise_phi(a, b)(0, 0) == 0.0);

  std::mt19937_64 rng(1);
  auto vx = random_matrix(3, 4, rng);
  auto vy = random_matrix(3, 5, rng);
  auto phi = pairwise_phi(vx, vy);
  REQUIRE(phi.rows() == 4);
  REQUIRE(phi.cols() == 5);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += vx(k, i) * vy(k, j);
      CHECK(phi(i, j) == doctest::Approx(0.5 * s).epsilon(1e-14));
    }
  CHECK_THROWS_AS(pairwise_phi(vx, random_matrix(2, 5, rng)), ShapeError);
}

TEST_CASE("negative log likelihood") {
  std::mt19937_64 rng(2);
  SUBCASE("zero phi gives n^2 log 2 for any affinity") {
    auto a = random_affinity(4, 4, rng);
    CHECK(nll_loss(DenseMatrix(4, 4), a) == doctest::Approx(16.0 * std::log(2.0)));
  }
  SUBCASE("saturated similar pair costs nothing") {
    AffinityMatrix a(1, 1);
    a.set(0, 0, true);
    CHECK(std::abs(nll_loss(DenseMatrix(1, 1, 40.0), a)) < 1e-15);
  }
  SUBCASE("matches direct log(1 + e^x) at moderate phi") {
    auto phi = random_matrix(5, 5, rng, 3.0);
    auto a = random_affinity(5, 5, rng);
    double expect = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) expect -= a(i, j) * phi(i, j) - std::log(1.0 + std::exp(phi(i, j)));
    CHECK(nll_loss(phi, a) == doctest::Approx(expect).epsilon(1e-13));
  }
  SUBCASE("finite at extreme phi") {
    DenseMatrix phi(2, 2, std::vector<double>{1e4, -1e4, -1e4, 1e4});
    AffinityMatrix a(2, 2);
    a.set(0, 0, true);
    a.set(0, 1, true);
    const double v = nll_loss(phi, a);
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(2e4));  // 1e4 from the similar pair at -1e4, 1e4 from the dissimilar pair at +1e4
  }
  CHECK_THROWS_AS(nll_loss(DenseMatrix(2, 3), AffinityMatrix(3, 2)), ShapeError);
}

TEST_CASE("quantization and balance losses") {
  std::mt19937_64 rng(3);
  auto b = random_signs(3, 4, rng);
  CHECK(quantization_loss(b, b, b) == 0.0);
  CHECK(quantization_loss(DenseMatrix(2, 3, 1.0), DenseMatrix(2, 3), DenseMatrix(2, 3)) == 12.0);

  DenseMatrix centered(2, 2, std::vector<double>{1, -1, 2, -2});
  CHECK(balance_loss(centered, centered) == 0.0);
  auto v = random_matrix(4, 1, rng);
  CHECK(balance_loss(v, v) == doctest::Approx(2.0 * squared_frobenius(v)));

  auto vx = random_matrix(3, 4, rng);
  auto vy = random_matrix(3, 4, rng);
  double q = 0.0, bal = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      q += std::pow(b(k, i) - vx(k, i), 2) + std::pow(b(k, i) - vy(k, i), 2);
      sx += vx(k, i);
      sy += vy(k, i);
    }
    bal += sx * sx + sy * sy;
  }
  CHECK(quantization_loss(b, vx, vy) == doctest::Approx(q).epsilon(1e-14));
  CHECK(balance_loss(vx, vy) == doctest::Approx(bal).epsilon(1e-14));
}

TEST_CASE("objective groups the weighted terms") {
  std::mt19937_64 rng(4);
  auto vx = random_matrix(4, 5, rng);
  auto vy = random_matrix(4, 5, rng);
  auto a = random_affinity(5, 5, rng);
  auto b = random_signs(4, 5, rng);
  auto loss = objective(vx, vy, a, b, 0.7, 2.5);
  CHECK(loss.total == doctest::Approx(loss.nll + 0.7 * loss.quantization + 2.5 * loss.balance).epsilon(1e-15));
  CHECK(loss.total == doctest::Approx(naive_objective(vx, vy, a, b, 0.7, 2.5)).epsilon(1e-12));
}

TEST_CASE("feature gradients: closed-form cases") {
  SUBCASE("saturated similar pairs with no regularizers") {
    DenseMatrix v(4, 3, 10.0);
    AffinityMatrix a(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) a.set(i, j, true);
    auto g = grad_vx(v, v, a, DenseMatrix(4, 3, 1.0), 0.0, 0.0);
    for (double x : g.values()) CHECK(std::abs(x) < 1e-60);
  }
  SUBCASE("no pairs, features on their codes, no balance term") {
    std::mt19937_64 rng(5);
    auto b = random_signs(3, 4, rng);
    std::vector<std::size_t> none;
    auto g = grad_vx_columns(b, DenseMatrix(3, 0), AffinityMatrix(4, 0), b, 1.0, 0.0, std::vector<std::size_t>{0, 1, 2, 3});
    for (double x : g.values()) CHECK(x == 0.0);
  }
}

TEST_CASE("feature gradients match finite differences of the objective") {
  const double h = 1e-6;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t c = 2 + seed % 7, n = 2 + (seed / 7) % 7;
    auto vx = random_matrix(c, n, rng);
    auto vy = random_matrix(c, n, rng);
    auto a = random_affinity(n, n, rng);
    auto b = random_signs(c, n, rng);
    const double alpha = 0.5 + seed % 3, beta = 0.25 * (seed % 4);

    for (bool image : {true, false}) {
      auto analytic = image ? grad_vx(vx, vy, a, b, alpha, beta) : grad_vy(vx, vy, a, b, alpha, beta);
      DenseMatrix numeric(c, n);
      for (std::size_t k = 0; k < c; ++k)
        for (std::size_t i = 0; i < n; ++i) {
          auto plus = image ? vx : vy, minus = plus;
          plus(k, i) += h;
          minus(k, i) -= h;
          const double fp = image ? objective(plus, vy, a, b, alpha, beta).total : objective(vx, plus, a, b, alpha, beta).total;
          const double fm = image ? objective(minus, vy, a, b, alpha, beta).total : objective(vx, minus, a, b, alpha, beta).total;
          numeric(k, i) = (fp - fm) / (2 * h);
        }
      CHECK(relative_error(analytic.values(), numeric.values()) < 1e-4);
    }
  }
}

TEST_CASE("column-restricted gradients agree with the full gradient") {
  std::mt19937_64 rng(6);
  auto vx = random_matrix(5, 7, rng);
  auto vy = random_matrix(5, 7, rng);
  auto a = random_affinity(7, 7, rng);
  auto b = random_signs(5, 7, rng);
  std::vector<std::size_t> cols{6, 1, 3};
  auto full_x = grad_vx(vx, vy, a, b, 1.0, 1.0);
  auto full_y = grad_vy(vx, vy, a, b, 1.0, 1.0);
  auto part_x = grad_vx_columns(vx, vy, a, b, 1.0, 1.0, cols);
  auto part_y = grad_vy_columns(vx, vy, a, b, 1.0, 1.0, cols);
  CHECK(part_x == gather_columns(full_x, cols));
  CHECK(part_y == gather_columns(full_y, cols));
}

TEST_CASE("code update") {
  std::mt19937_64 rng(7);
  auto v = random_matrix(3, 4, rng);
  DenseMatrix neg = v;
  for (double& x : neg.values()) x = -x;
  CHECK(update_codes(v, neg) == DenseMatrix(3, 4, 1.0));
  CHECK(update_codes(DenseMatrix(2, 2, 0.5), DenseMatrix(2, 2, 0.1)) == DenseMatrix(2, 2, 1.0));

  SUBCASE("maximizes the trace over every sign matrix") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto vx = random_matrix(3, 4, rng);
      auto vy = random_matrix(3, 4, rng);
      auto b = update_codes(vx, vy);
      auto trace = [&](const DenseMatrix& m) {
        double t = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) t += m.values()[i] * (vx.values()[i] + vy.values()[i]);
        return t;
      };
      double best = -std::numeric_limits<double>::infinity();
      for (std::uint32_t mask = 0; mask < (1u << 12); ++mask) {
        DenseMatrix cand(3, 4);
        for (std::size_t i = 0; i < 12; ++i) cand.values()[i] = (mask >> i) & 1u ? 1.0 : -1.0;
        best = std::max(best, trace(cand));
      }
      CHECK(trace(b) == best);
    }
  }
  CHECK_THROWS_AS(update_codes(DenseMatrix(2, 2), DenseMatrix(2, 3)), ShapeError);
}

TEST_CASE("code update never increases the objective") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed + 50);
    auto vx = random_matrix(6, 9, rng);
    auto vy = random_matrix(6, 9, rng);
    auto a = random_affinity(9, 9, rng);
    auto b = random_signs(6, 9, rng);
    const double before = objective(vx, vy, a, b, 1.0, 1.0).total;
    const double after = objective(vx, vy, a, update_codes(vx, vy), 1.0, 1.0).total;
    CHECK(after <= before);
  }
}

TEST_CASE("training") {
  auto data = tiny_separable(11);
  auto rows = all_rows(data.size());
  auto cfg = tiny_config();

  SUBCASE("zero epochs return the initialized model") {
    cfg.epochs = 0;
    auto r = train(data, rows, cfg);
    CHECK(r.history.empty());
    CHECK(r.model.codes.cols() == data.size());
    CHECK(r.model.codes.rows() == cfg.code_length);
    for (double b : r.model.codes.values()) CHECK(std::abs(b) == 1.0);
  }

  SUBCASE("loss decreases, similar pairs are pulled together, B updates are monotone") {
    auto r = train(data, rows, cfg);
    REQUIRE(r.history.size() == 50);
    CHECK(r.history.back().loss.total < r.initial.total);
    for (const auto& e : r.history) CHECK(e.loss.total <= e.total_before_code_update);

    auto vx = encode_features(r.model, data.x, Modality::image);
    auto vy = encode_features(r.model, data.y, Modality::text);
    auto phi = pairwise_phi(vx, vy);
    auto a = build_affinity(data.labels, data.labels);
    double sim = 0.0, dis = 0.0;
    std::size_t ns = 0, nd = 0;
    for (std::size_t i = 0; i < phi.rows(); ++i)
      for (std::size_t j = 0; j < phi.cols(); ++j) {
        if (a(i, j)) {
          sim += phi(i, j);
          ++ns;
        } else {
          dis += phi(i, j);
          ++nd;
        }
      }
    CHECK(sim / ns > dis / nd);
  }

  SUBCASE("fixed seed reproduces the loss history") {
    cfg.epochs = 5;
    auto r1 = train(data, rows, cfg);
    auto r2 = train(data, rows, cfg);
    CHECK(loss_history_csv(r1.history) == loss_history_csv(r2.history));
    CHECK(r1.model == r2.model);
    cfg.seed = 2;
    CHECK_FALSE(train(data, rows, cfg).model == r1.model);
  }

  SUBCASE("callback can stop early") {
    std::size_t calls = 0;
    auto r = train(data, rows, cfg, [&](const EpochRecord& e) { ++calls; return e.epoch < 3; });
    CHECK(calls == 3);
    CHECK(r.history.size() == 3);
  }

  SUBCASE("divergence aborts with diagnostics") {
    cfg.learning_rate = 1e300;
    cfg.epochs = 3;
    try {
      train(data, rows, cfg);
      FAIL("expected a TrainingError");
    } catch (const TrainingError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }

  SUBCASE("invalid configurations") {
    CHECK_THROWS_AS(train(data, std::vector<std::size_t>{}, cfg), ConfigError);
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train(data, rows, cfg), ConfigError);
    cfg = tiny_config();
    cfg.batch_columns = 0;
    CHECK_THROWS_AS(train(data, rows, cfg), ConfigError);
    cfg = tiny_config();
    cfg.alpha = -1.0;
    CHECK_THROWS_AS(train(data, rows, cfg), ConfigError);
  }
}

TEST_CASE("loss history CSV layout") {
  EpochRecord r;
  r.epoch = 1;
  r.loss = {1.5, 2.0, 0.25, 4.0};
  std::vector<EpochRecord> h{r};
  CHECK(loss_history_csv(h) == "epoch,nll,quantization,balance,total\n1,1.5,2,0.25,4\n");
}

TEST_CASE("model files") {
  auto data = tiny_separable(3);
  auto cfg = tiny_config();
  cfg.epochs = 2;
  for (EtaMode mode : {EtaMode::intent_ratio, EtaMode::learned}) {
    cfg.eta.mode = mode;
    auto model = train(data, all_rows(data.size()), cfg).model;
    auto bytes = encode_model(model);
    CHECK(decode_model(bytes) == model);

    auto path = std::filesystem::temp_directory_path() / "lcmh_test_model.lcmh";
    save_model(model, path);
    auto loaded = load_model(path);
    CHECK(loaded == model);
    CHECK(encode_features(loaded, data.x, Modality::image) == encode_features(model, data.x, Modality::image));
    std::filesystem::remove(path);

    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS(decode_model(bytes), FormatError);
  }
  std::vector<std::uint8_t> junk{'N', 'O', 'P', 'E', 1, 0, 0, 0};
  try {
    decode_model(junk);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
  CHECK_THROWS_AS(load_model("/nonexistent/dir/model.lcmh"), IoError);
}

}  // TEST_SUITE
