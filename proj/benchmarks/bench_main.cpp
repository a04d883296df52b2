#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "lcmh/hash_learn.hpp"
#include "lcmh/meta_embed.hpp"
#include "lcmh/network.hpp"
#include "lcmh/retrieval.hpp"

using namespace lcmh;

namespace {

DenseMatrix gaussian(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  DenseMatrix m(r, c);
  for (double& v : m.values()) v = g(rng);
  return m;
}

AffinityMatrix striped_affinity(std::size_t n, std::size_t classes) {
  AffinityMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a.set(i, j, i % classes == j % classes);
  return a;
}

void BM_HammingRank(benchmark::State& state) {
  const auto db_rows = static_cast<std::size_t>(state.range(0));
  const auto bits = static_cast<std::size_t>(state.range(1));
  const auto db = binarize(gaussian(bits, db_rows, 1));
  const auto q = binarize(gaussian(bits, 1, 2));
  for (auto _ : state) benchmark::DoNotOptimize(rank_by_hamming(q.row(0), db));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(db_rows));
}
BENCHMARK(BM_HammingRank)->Args({2400, 32})->Args({2400, 64})->Args({20000, 32})->Args({20000, 128});

void BM_FeatureGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t c = 32;
  const auto vx = gaussian(c, n, 3), vy = gaussian(c, n, 4);
  const auto codes = update_codes(vx, vy);
  const auto a = striped_affinity(n, 24);
  std::vector<std::size_t> cols(64);
  std::iota(cols.begin(), cols.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(grad_vx_columns(vx, vy, a, codes, 1.0, 1.0, cols));
}
BENCHMARK(BM_FeatureGradient)->Arg(1050)->Arg(4000);

void BM_Objective(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto vx = gaussian(32, n, 5), vy = gaussian(32, n, 6);
  const auto codes = update_codes(vx, vy);
  const auto a = striped_affinity(n, 24);
  for (auto _ : state) benchmark::DoNotOptimize(objective(vx, vy, a, codes, 1.0, 1.0));
}
BENCHMARK(BM_Objective)->Arg(1050);

void BM_NetworkForwardBackward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  auto net = FeedForwardNet::glorot({{64, 128, Activation::tanh}, {128, 32, Activation::identity}}, 7);
  const auto x = gaussian(batch, 64, 8);
  const auto grad = gaussian(batch, 32, 9);
  for (auto _ : state) {
    auto fwd = forward(net, x);
    benchmark::DoNotOptimize(backward(net, fwd.cache, grad));
  }
}
BENCHMARK(BM_NetworkForwardBackward)->Arg(64)->Arg(256);

void BM_MetaEmbedBatch(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  EmbedderConfig cfg;
  cfg.input_dim = 64;
  cfg.code_length = 32;
  cfg.num_classes = 24;
  cfg.hidden = {128};
  cfg.hidden_activation = Activation::tanh;
  const auto embedder = MetaEmbedder::create(cfg, 10);
  const auto train_x = gaussian(480, 64, 11);
  LabelMatrix labels(480, 24);
  for (std::size_t i = 0; i < 480; ++i) labels.set(i, i % 24);
  std::vector<std::size_t> counts(24, 5);
  for (std::size_t k = 0; k < 4; ++k) counts[k] = 100;  // four head classes
  const auto bank = compute_prototypes(direct_features(embedder, train_x), labels, split_head_tail(counts, 50));
  const auto x = gaussian(batch, 64, 12);
  const auto grad = gaussian(32, batch, 13);
  for (auto _ : state) {
    auto emb = embed_batch(embedder, x, bank);
    benchmark::DoNotOptimize(embed_backward(embedder, emb.cache, grad, bank));
  }
}
BENCHMARK(BM_MetaEmbedBatch)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
