#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mocha/canon.hpp"
#include "mocha/corpus.hpp"
#include "mocha/linalg.hpp"

namespace mocha::model {

struct SparseVec {
  std::vector<std::pair<uint32_t, double>> entries;  // sorted, unique indices
  size_t dim = 0;
};

// Hashed bag-of-words over lowercased, punctuation-stripped tokens,
// L2-normalized.
struct HashedFeaturizer {
  size_t dim = 2048;
  uint64_t hash_seed = 0x6d6f63686131ULL;

  SparseVec featurize(const std::string& text) const;
  bool operator==(const HashedFeaturizer&) const = default;
};

enum class TrainMode { kBaseline, kCanonicalOnly, kBlend, kBlendRev, kParaphraseSub };

const char* to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct EncoderParams {
  linalg::Mat w_text;    // F x d
  linalg::Mat w_motion;  // F_m x d
  size_t dim() const { return w_text.cols(); }
  bool operator==(const EncoderParams&) const = default;
};

struct EncodeResult {
  linalg::Mat e;               // unit rows
  std::vector<double> z_norm;  // pre-normalization norms
};

std::vector<double> encode_text(const EncoderParams& p, const SparseVec& x);
std::vector<double> encode_motion(const EncoderParams& p, const std::vector<double>& features);
EncodeResult encode_text_batch(const EncoderParams& p, const std::vector<SparseVec>& xs);
EncodeResult encode_motion_batch(const EncoderParams& p, const linalg::Mat& inputs);

// Symmetric InfoNCE with diagonal positives: the mean of the row-wise and
// column-wise cross entropies of S/tau, averaged.
double infonce_symmetric(const linalg::Mat& e_text, const linalg::Mat& e_motion, double tau);

// Exact gradients of infonce_symmetric w.r.t. both embedding matrices.
std::pair<linalg::Mat, linalg::Mat> grad_embeddings(const linalg::Mat& e_text,
                                                    const linalg::Mat& e_motion, double tau);

// One-directional per-query gradient: softmax-weighted key centroid minus
// the positive key, divided by tau.
std::vector<double> infonce_query_grad(const std::vector<double>& q,
                                       const linalg::Mat& keys, size_t positive_idx,
                                       double tau);

struct ParamGrads {
  linalg::Mat w_text;
  linalg::Mat w_motion;
};

// Chain rule from embedding gradients through L2 normalization and the
// linear maps back to the weight matrices.
ParamGrads backprop_params(const EncoderParams& p, const std::vector<SparseVec>& text_inputs,
                           const linalg::Mat& motion_inputs, const EncodeResult& text_enc,
                           const EncodeResult& motion_enc, const linalg::Mat& g_text,
                           const linalg::Mat& g_motion);

double cosine_lr(size_t step, size_t total_steps, double base_lr);

struct TrainConfig {
  TrainMode mode = TrainMode::kBaseline;
  double lambda = 0.5;
  double tau = 0.07;
  int epochs = 50;
  size_t batch_size = 128;
  double base_lr = 1e-3;
  double motion_lr_mult = 1.0;
  uint64_t seed = 0;
  double paraphrase_rate = 0.0;
  size_t embed_dim = 64;
  HashedFeaturizer featurizer;
  std::string canonicalizer = "identity";  // informational echo

  bool operator==(const TrainConfig&) const = default;
};

struct StepLoss {
  int epoch = 0;
  size_t step = 0;
  double lr = 0.0;
  std::vector<double> losses;  // one per pass, in pass order
  bool operator==(const StepLoss&) const = default;
};

struct Checkpoint {
  int format_version = 1;
  TrainConfig config;
  int epoch = 0;  // completed epochs
  std::string rng_state;
  std::vector<std::string> pass_names;
  std::vector<StepLoss> history;
  EncoderParams params;
};

// Pass labels and loss weights for a mode, in update order.
std::vector<std::pair<std::string, double>> mode_passes(const TrainConfig& cfg);

Checkpoint init_checkpoint(const TrainConfig& cfg, size_t feature_dim);

using EpochCallback = std::function<void(const Checkpoint&)>;

// Plain SGD over shuffled train motions, one uniformly chosen caption per
// motion per batch, sequential weighted passes per the mode. Deterministic
// given the seed.
Checkpoint train(const TrainConfig& cfg, const corpus::Dataset& ds,
                 const canon::Canonicalizer& canonicalizer,
                 const corpus::ParaphraseRegistry* paraphrases = nullptr,
                 const Checkpoint* resume = nullptr, const EpochCallback& on_epoch = {});

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// Central finite differences (h = 1e-6) against the analytic parameter
// gradients on one batch assembled per the mode. Returns the max mixed
// absolute/relative error over the probed parameters.
double finite_diff_check(const TrainConfig& cfg, const corpus::Dataset& ds,
                         const canon::Canonicalizer& canonicalizer, size_t n_probes,
                         const corpus::ParaphraseRegistry* paraphrases = nullptr);

// Embedding helpers shared by the measurement suites.
linalg::Mat embed_texts(const EncoderParams& p, const HashedFeaturizer& f,
                        const std::vector<std::string>& texts);
linalg::Mat embed_motions(const EncoderParams& p, const corpus::Dataset& ds);

}  // namespace mocha::model
