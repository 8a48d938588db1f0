#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "mocha/canon.hpp"
#include "mocha/corpus.hpp"
#include "mocha/eval.hpp"
#include "mocha/model.hpp"
#include "mocha/noiselab.hpp"
#include "mocha/rng.hpp"

using namespace mocha;

namespace {

const corpus::Dataset& big_corpus() {
  static corpus::Dataset ds = [] {
    corpus::SynthSpec sp;
    sp.n_motions = 1000;
    sp.k_captions = 3;
    sp.motion_dim = 64;
    sp.style_rate = 0.6;
    sp.halluc_rate = 0.3;
    sp.seed = 42;
    return corpus::generate_synthetic(sp);
  }();
  return ds;
}

const model::Checkpoint& init_ckpt() {
  static model::Checkpoint ck = [] {
    model::TrainConfig cfg;
    cfg.embed_dim = 64;
    cfg.featurizer.dim = 2048;
    cfg.seed = 1;
    return model::init_checkpoint(cfg, big_corpus().feature_dim);
  }();
  return ck;
}

}  // namespace

static void BM_Featurize(benchmark::State& state) {
  model::HashedFeaturizer f;
  f.dim = 2048;
  const std::string text = "a person walks forward quickly then turns left and waves";
  for (auto _ : state) {
    auto sv = f.featurize(text);
    benchmark::DoNotOptimize(sv);
  }
}
BENCHMARK(BM_Featurize);

static void BM_EmbedTexts(benchmark::State& state) {
  const auto& ds = big_corpus();
  const auto& ck = init_ckpt();
  std::vector<std::string> texts;
  for (size_t i = 0; i < static_cast<size_t>(state.range(0)); ++i)
    texts.push_back(ds.captions[i % ds.captions.size()].text);
  for (auto _ : state) {
    auto e = model::embed_texts(ck.params, ck.config.featurizer, texts);
    benchmark::DoNotOptimize(e);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmbedTexts)->Arg(128)->Arg(1024);

static void BM_InfoNCE(benchmark::State& state) {
  size_t n = static_cast<size_t>(state.range(0));
  Rng rng(3);
  linalg::Mat et(n, 64), em(n, 64);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < 64; ++j) {
      et(i, j) = rng.normal();
      em(i, j) = rng.normal();
    }
  for (auto _ : state) {
    double loss = model::infonce_symmetric(et, em, 0.07);
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_InfoNCE)->Arg(32)->Arg(128)->Arg(256);

static void BM_RankQueries(benchmark::State& state) {
  size_t n = static_cast<size_t>(state.range(0));
  Rng rng(5);
  linalg::Mat q(n, 64), g(n, 64);
  std::vector<std::vector<size_t>> correct(n);
  for (size_t i = 0; i < n; ++i) {
    correct[i] = {i};
    for (size_t j = 0; j < 64; ++j) {
      q(i, j) = rng.normal();
      g(i, j) = rng.normal();
    }
  }
  for (auto _ : state) {
    auto ranks = eval::rank_queries(q, g, correct);
    benchmark::DoNotOptimize(ranks);
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_RankQueries)->RangeMultiplier(4)->Range(64, 1024)->Complexity();

static void BM_Synthesize(benchmark::State& state) {
  corpus::SynthSpec sp;
  sp.n_motions = static_cast<size_t>(state.range(0));
  sp.k_captions = 3;
  sp.motion_dim = 32;
  sp.style_rate = 0.6;
  sp.halluc_rate = 0.3;
  sp.seed = 11;
  for (auto _ : state) {
    auto ds = corpus::generate_synthetic(sp);
    benchmark::DoNotOptimize(ds);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Synthesize)->Arg(100)->Arg(1000);

static void BM_CanonStopword(benchmark::State& state) {
  auto wl = canon::WordLists::load_dir(MOCHA_ASSET_DIR "/wordlists");
  auto cats = canon::WordLists::default_removal_categories();
  const std::string text = "well, a person slowly walks forward and then he waves his arms";
  for (auto _ : state) {
    auto out = canon::canon_stopword(wl, cats, text);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_CanonStopword);

static void BM_TrainEpoch(benchmark::State& state) {
  corpus::SynthSpec sp;
  sp.n_motions = 100;
  sp.k_captions = 3;
  sp.motion_dim = 32;
  sp.style_rate = 0.6;
  sp.halluc_rate = 0.3;
  sp.seed = 13;
  auto ds = corpus::generate_synthetic(sp);
  canon::Canonicalizer ident;
  model::TrainConfig cfg;
  cfg.mode = model::TrainMode::kBaseline;
  cfg.epochs = 1;
  cfg.batch_size = 32;
  cfg.embed_dim = 32;
  cfg.featurizer.dim = 512;
  cfg.seed = 2;
  for (auto _ : state) {
    auto ck = model::train(cfg, ds, ident);
    benchmark::DoNotOptimize(ck);
  }
}
BENCHMARK(BM_TrainEpoch);

static void BM_GradientVariance(benchmark::State& state) {
  const auto& ds = big_corpus();
  const auto& ck = init_ckpt();
  canon::Canonicalizer oracle;
  oracle.kind = canon::Kind::kOracle;
  for (auto _ : state) {
    auto rep = noiselab::gradient_variance(ck, ds, oracle);
    benchmark::DoNotOptimize(rep);
  }
}
BENCHMARK(BM_GradientVariance);

BENCHMARK_MAIN();
