#include "mocha/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "json.hpp"
#include "mocha/errors.hpp"
#include "mocha/rng.hpp"
#include "mocha/text.hpp"

using nlohmann::json;

namespace mocha::model {

namespace {

constexpr double kZeroNorm = 1e-30;
constexpr double kFdStep = 1e-6;
// Probes with gradients below this scale are compared absolutely; finite
// differences of an O(1) loss cannot resolve relative error there.
constexpr double kFdFloor = 1e-3;

void check_config(const TrainConfig& cfg) {
  if (cfg.tau <= 0.0) throw ConfigError("tau must be positive");
  if (cfg.lambda < 0.0 || cfg.lambda > 1.0) throw ConfigError("lambda must lie in [0,1]");
  if (cfg.paraphrase_rate < 0.0 || cfg.paraphrase_rate > 1.0)
    throw ConfigError("paraphrase_rate must lie in [0,1]");
  if (cfg.batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.base_lr <= 0.0) throw ConfigError("base_lr must be positive");
  if (cfg.motion_lr_mult < 0.0) throw ConfigError("motion_lr_mult must be non-negative");
  if (cfg.embed_dim == 0) throw ConfigError("embed_dim must be positive");
  if (cfg.featurizer.dim == 0) throw ConfigError("featurizer dim must be positive");
}

struct TextBank {
  std::vector<SparseVec> original;                      // per caption index
  std::vector<SparseVec> canonical;                     // filled when needed
  std::vector<std::vector<SparseVec>> paraphrases;      // filled when needed
};

bool mode_needs_canonical(TrainMode m) {
  return m == TrainMode::kCanonicalOnly || m == TrainMode::kBlend || m == TrainMode::kBlendRev;
}

TextBank build_text_bank(const TrainConfig& cfg, const corpus::Dataset& ds,
                         const canon::Canonicalizer& canonicalizer,
                         const corpus::ParaphraseRegistry* paraphrases) {
  TextBank bank;
  bank.original.resize(ds.captions.size());
  for (size_t i = 0; i < ds.captions.size(); ++i)
    bank.original[i] = cfg.featurizer.featurize(ds.captions[i].text);

  if (mode_needs_canonical(cfg.mode)) {
    bank.canonical.resize(ds.captions.size());
    for (size_t i = 0; i < ds.captions.size(); ++i) {
      std::string ct;
      try {
        ct = canon::canonicalize_caption(canonicalizer, ds.captions[i]);
      } catch (const CacheMissError& e) {
        throw CacheMissError("caption " + ds.captions[i].id + ": " + e.text());
      }
      bank.canonical[i] = cfg.featurizer.featurize(ct);
    }
  }

  if (cfg.mode == TrainMode::kParaphraseSub) {
    bank.paraphrases.resize(ds.captions.size());
    if (paraphrases) {
      for (size_t i = 0; i < ds.captions.size(); ++i) {
        auto it = paraphrases->items.find(ds.captions[i].id);
        if (it == paraphrases->items.end()) continue;
        for (const std::string& t : it->second)
          bank.paraphrases[i].push_back(cfg.featurizer.featurize(t));
      }
    }
  }
  return bank;
}

void axpy_update(linalg::Mat& w, const linalg::Mat& g, double scale) {
  double* wd = w.data().data();
  const double* gd = g.data().data();
  size_t n = w.data().size();
  for (size_t i = 0; i < n; ++i) wd[i] -= scale * gd[i];
}

json mat_to_json(const linalg::Mat& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = m.data();
  return j;
}

linalg::Mat mat_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw DataError("checkpoint: bad matrix object");
  linalg::Mat m(j["rows"].get<size_t>(), j["cols"].get<size_t>());
  auto data = j["data"].get<std::vector<double>>();
  if (data.size() != m.rows() * m.cols())
    throw DataError("checkpoint: matrix data length mismatch");
  m.data() = std::move(data);
  return m;
}

}  // namespace

SparseVec HashedFeaturizer::featurize(const std::string& text_in) const {
  auto tokens = text::tokenize(text_in);
  if (tokens.empty())
    throw DataError("featurize: no tokens in \"" + text_in + "\"");
  std::map<uint32_t, double> counts;
  for (const auto& tok : tokens) {
    uint64_t h = fnv1a64(tok, kFnvOffset ^ mix64(hash_seed, 0));
    counts[static_cast<uint32_t>(h % dim)] += 1.0;
  }
  double n2 = 0.0;
  for (const auto& [i, c] : counts) n2 += c * c;
  double inv = 1.0 / std::sqrt(n2);
  SparseVec v;
  v.dim = dim;
  v.entries.reserve(counts.size());
  for (const auto& [i, c] : counts) v.entries.emplace_back(i, c * inv);
  return v;
}

const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kCanonicalOnly: return "canonical_only";
    case TrainMode::kBlend: return "blend";
    case TrainMode::kBlendRev: return "blend_rev";
    case TrainMode::kParaphraseSub: return "paraphrase_sub";
  }
  return "baseline";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "baseline") return TrainMode::kBaseline;
  if (s == "canonical_only") return TrainMode::kCanonicalOnly;
  if (s == "blend") return TrainMode::kBlend;
  if (s == "blend_rev") return TrainMode::kBlendRev;
  if (s == "paraphrase_sub") return TrainMode::kParaphraseSub;
  throw ConfigError("unknown train mode \"" + s + "\"");
}

std::vector<double> encode_text(const EncoderParams& p, const SparseVec& x) {
  EncodeResult r = encode_text_batch(p, {x});
  return std::vector<double>(r.e.row(0), r.e.row(0) + r.e.cols());
}

std::vector<double> encode_motion(const EncoderParams& p, const std::vector<double>& features) {
  linalg::Mat m(1, features.size());
  std::copy(features.begin(), features.end(), m.row(0));
  EncodeResult r = encode_motion_batch(p, m);
  return std::vector<double>(r.e.row(0), r.e.row(0) + r.e.cols());
}

EncodeResult encode_text_batch(const EncoderParams& p, const std::vector<SparseVec>& xs) {
  size_t d = p.w_text.cols();
  EncodeResult out;
  out.e = linalg::Mat(xs.size(), d);
  out.z_norm.resize(xs.size());
  for (size_t b = 0; b < xs.size(); ++b) {
    if (xs[b].dim != p.w_text.rows())
      throw DataError("encode_text: input dim " + std::to_string(xs[b].dim) +
                      " != featurizer rows " + std::to_string(p.w_text.rows()));
    double* z = out.e.row(b);
    for (const auto& [i, v] : xs[b].entries) {
      const double* wr = p.w_text.row(i);
      for (size_t j = 0; j < d; ++j) z[j] += v * wr[j];
    }
    double n = linalg::norm(z, d);
    if (n < kZeroNorm)
      throw DegenerateEncodingError("encode_text: zero pre-normalization vector");
    out.z_norm[b] = n;
    for (size_t j = 0; j < d; ++j) z[j] /= n;
  }
  return out;
}

EncodeResult encode_motion_batch(const EncoderParams& p, const linalg::Mat& inputs) {
  if (inputs.cols() != p.w_motion.rows())
    throw DataError("encode_motion: input dim " + std::to_string(inputs.cols()) +
                    " != encoder rows " + std::to_string(p.w_motion.rows()));
  size_t d = p.w_motion.cols();
  EncodeResult out;
  out.e = linalg::Mat(inputs.rows(), d);
  out.z_norm.resize(inputs.rows());
  for (size_t b = 0; b < inputs.rows(); ++b) {
    double* z = out.e.row(b);
    const double* x = inputs.row(b);
    for (size_t i = 0; i < inputs.cols(); ++i) {
      double xi = x[i];
      if (xi == 0.0) continue;
      const double* wr = p.w_motion.row(i);
      for (size_t j = 0; j < d; ++j) z[j] += xi * wr[j];
    }
    double n = linalg::norm(z, d);
    if (n < kZeroNorm)
      throw DegenerateEncodingError("encode_motion: zero pre-normalization vector");
    out.z_norm[b] = n;
    for (size_t j = 0; j < d; ++j) z[j] /= n;
  }
  return out;
}

double infonce_symmetric(const linalg::Mat& e_text, const linalg::Mat& e_motion, double tau) {
  if (e_text.rows() != e_motion.rows() || e_text.rows() < 2)
    throw DataError("infonce: need matching batches with at least 2 items");
  if (tau <= 0.0) throw ConfigError("infonce: tau must be positive");
  size_t n = e_text.rows();
  linalg::Mat s = linalg::gram(e_text, e_motion);

  double loss_rows = 0.0, loss_cols = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double mx = -HUGE_VAL;
    for (size_t j = 0; j < n; ++j) mx = std::max(mx, s(i, j) / tau);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) sum += std::exp(s(i, j) / tau - mx);
    loss_rows += mx + std::log(sum) - s(i, i) / tau;
  }
  for (size_t j = 0; j < n; ++j) {
    double mx = -HUGE_VAL;
    for (size_t i = 0; i < n; ++i) mx = std::max(mx, s(i, j) / tau);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += std::exp(s(i, j) / tau - mx);
    loss_cols += mx + std::log(sum) - s(j, j) / tau;
  }
  return 0.5 * (loss_rows + loss_cols) / static_cast<double>(n);
}

std::pair<linalg::Mat, linalg::Mat> grad_embeddings(const linalg::Mat& e_text,
                                                    const linalg::Mat& e_motion, double tau) {
  if (e_text.rows() != e_motion.rows() || e_text.rows() < 2)
    throw DataError("grad_embeddings: need matching batches with at least 2 items");
  size_t n = e_text.rows();
  linalg::Mat s = linalg::gram(e_text, e_motion);

  // dL/dS = (row_softmax + col_softmax - 2I) / (2 n tau)
  linalg::Mat d(n, n);
  for (size_t i = 0; i < n; ++i) {
    double mx = -HUGE_VAL;
    for (size_t j = 0; j < n; ++j) mx = std::max(mx, s(i, j) / tau);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) sum += std::exp(s(i, j) / tau - mx);
    for (size_t j = 0; j < n; ++j) d(i, j) = std::exp(s(i, j) / tau - mx) / sum;
  }
  for (size_t j = 0; j < n; ++j) {
    double mx = -HUGE_VAL;
    for (size_t i = 0; i < n; ++i) mx = std::max(mx, s(i, j) / tau);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) sum += std::exp(s(i, j) / tau - mx);
    for (size_t i = 0; i < n; ++i) d(i, j) += std::exp(s(i, j) / tau - mx) / sum;
  }
  double scale = 1.0 / (2.0 * static_cast<double>(n) * tau);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) d(i, j) = (d(i, j) - (i == j ? 2.0 : 0.0)) * scale;

  return {linalg::matmul(d, e_motion), linalg::matmul_tn(d, e_text)};
}

std::vector<double> infonce_query_grad(const std::vector<double>& q, const linalg::Mat& keys,
                                       size_t positive_idx, double tau) {
  if (positive_idx >= keys.rows()) throw DataError("infonce_query_grad: positive out of range");
  if (q.size() != keys.cols()) throw DataError("infonce_query_grad: dim mismatch");
  size_t n = keys.rows();
  std::vector<double> logits(n);
  double mx = -HUGE_VAL;
  for (size_t j = 0; j < n; ++j) {
    logits[j] = linalg::dot(q.data(), keys.row(j), q.size()) / tau;
    mx = std::max(mx, logits[j]);
  }
  double sum = 0.0;
  for (size_t j = 0; j < n; ++j) sum += std::exp(logits[j] - mx);
  std::vector<double> g(q.size(), 0.0);
  for (size_t j = 0; j < n; ++j) {
    double p = std::exp(logits[j] - mx) / sum;
    const double* k = keys.row(j);
    for (size_t t = 0; t < q.size(); ++t) g[t] += p * k[t];
  }
  const double* kp = keys.row(positive_idx);
  for (size_t t = 0; t < q.size(); ++t) g[t] = (g[t] - kp[t]) / tau;
  return g;
}

ParamGrads backprop_params(const EncoderParams& p, const std::vector<SparseVec>& text_inputs,
                           const linalg::Mat& motion_inputs, const EncodeResult& text_enc,
                           const EncodeResult& motion_enc, const linalg::Mat& g_text,
                           const linalg::Mat& g_motion) {
  size_t n = text_inputs.size();
  size_t d = p.w_text.cols();
  if (motion_inputs.rows() != n || g_text.rows() != n || g_motion.rows() != n)
    throw DataError("backprop_params: batch size mismatch");

  // Through e = z / |z|: dz = (g - e (e . g)) / |z|.
  auto unproject = [d](const EncodeResult& enc, const linalg::Mat& g) {
    linalg::Mat dz(g.rows(), g.cols());
    for (size_t b = 0; b < g.rows(); ++b) {
      const double* e = enc.e.row(b);
      const double* gr = g.row(b);
      double eg = linalg::dot(e, gr, g.cols());
      for (size_t j = 0; j < d; ++j) dz(b, j) = (gr[j] - e[j] * eg) / enc.z_norm[b];
    }
    return dz;
  };
  linalg::Mat dz_text = unproject(text_enc, g_text);
  linalg::Mat dz_motion = unproject(motion_enc, g_motion);

  ParamGrads out;
  out.w_text = linalg::Mat(p.w_text.rows(), d);
  for (size_t b = 0; b < n; ++b) {
    const double* dzr = dz_text.row(b);
    for (const auto& [i, v] : text_inputs[b].entries) {
      double* wr = out.w_text.row(i);
      for (size_t j = 0; j < d; ++j) wr[j] += v * dzr[j];
    }
  }
  out.w_motion = linalg::matmul_tn(motion_inputs, dz_motion);
  return out;
}

double cosine_lr(size_t step, size_t total_steps, double base_lr) {
  if (total_steps == 0) return base_lr;
  double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
}

std::vector<std::pair<std::string, double>> mode_passes(const TrainConfig& cfg) {
  switch (cfg.mode) {
    case TrainMode::kBaseline:
      return {{"original", 1.0}};
    case TrainMode::kCanonicalOnly:
      return {{"canonical", 1.0}};
    case TrainMode::kBlend:
      return {{"original", 1.0 - cfg.lambda}, {"canonical", cfg.lambda}};
    case TrainMode::kBlendRev:
      return {{"canonical", cfg.lambda}, {"original", 1.0 - cfg.lambda}};
    case TrainMode::kParaphraseSub:
      return {{"paraphrase", 1.0}};
  }
  return {{"original", 1.0}};
}

Checkpoint init_checkpoint(const TrainConfig& cfg, size_t feature_dim) {
  check_config(cfg);
  if (feature_dim == 0) throw ConfigError("init_checkpoint: feature_dim must be positive");
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.epoch = 0;
  ckpt.params.w_text = linalg::Mat(cfg.featurizer.dim, cfg.embed_dim);
  ckpt.params.w_motion = linalg::Mat(feature_dim, cfg.embed_dim);
  double sd_text = 1.0 / std::sqrt(static_cast<double>(cfg.featurizer.dim));
  double sd_motion = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  Rng rt(seed_for(cfg.seed, "init-text"));
  for (double& w : ckpt.params.w_text.data()) w = rt.normal(0.0, sd_text);
  Rng rm(seed_for(cfg.seed, "init-motion"));
  for (double& w : ckpt.params.w_motion.data()) w = rm.normal(0.0, sd_motion);
  ckpt.rng_state = Rng(seed_for(cfg.seed, "train")).serialize();
  for (const auto& [name, weight] : mode_passes(cfg)) {
    (void)weight;
    ckpt.pass_names.push_back(name);
  }
  return ckpt;
}

Checkpoint train(const TrainConfig& cfg, const corpus::Dataset& ds,
                 const canon::Canonicalizer& canonicalizer,
                 const corpus::ParaphraseRegistry* paraphrases, const Checkpoint* resume,
                 const EpochCallback& on_epoch) {
  check_config(cfg);
  if (cfg.mode == TrainMode::kParaphraseSub && !paraphrases)
    throw ConfigError("train: paraphrase_sub mode needs a paraphrase registry");
  corpus::validate(ds);

  std::vector<size_t> train_motions;
  for (size_t i = 0; i < ds.motions.size(); ++i)
    if (ds.motions[i].split == corpus::Split::kTrain) train_motions.push_back(i);
  if (train_motions.size() < 2) throw DataError("train: need at least 2 train-split motions");

  auto by_motion = corpus::captions_of(ds);
  TextBank bank = build_text_bank(cfg, ds, canonicalizer, paraphrases);

  linalg::Mat motion_inputs(ds.motions.size(), ds.feature_dim);
  for (size_t i = 0; i < ds.motions.size(); ++i)
    std::copy(ds.motions[i].features.begin(), ds.motions[i].features.end(),
              motion_inputs.row(i));

  Checkpoint ckpt;
  if (resume) {
    if (!(resume->config == cfg))
      throw ConfigError("train: resume checkpoint config differs from requested config");
    if (resume->epoch > cfg.epochs)
      throw ConfigError("train: resume checkpoint is past the requested epochs");
    ckpt = *resume;
  } else {
    ckpt = init_checkpoint(cfg, ds.feature_dim);
  }

  Rng rng;
  rng.deserialize(ckpt.rng_state);
  auto passes = mode_passes(cfg);

  size_t n_train = train_motions.size();
  size_t batches_per_epoch = 0;
  for (size_t start = 0; start < n_train; start += cfg.batch_size)
    if (std::min(n_train, start + cfg.batch_size) - start >= 2) ++batches_per_epoch;
  size_t total_steps = static_cast<size_t>(cfg.epochs) * batches_per_epoch;
  size_t step = static_cast<size_t>(ckpt.epoch) * batches_per_epoch;

  for (int epoch = ckpt.epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<size_t> order = train_motions;
    rng.shuffle(order);
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      size_t bsz = end - start;
      if (bsz < 2) continue;
      double lr = cosine_lr(step, total_steps, cfg.base_lr);

      std::vector<size_t> chosen(bsz);
      for (size_t b = 0; b < bsz; ++b) {
        const auto& caps = by_motion[order[start + b]];
        chosen[b] = caps[rng.index(caps.size())];
      }
      std::vector<const SparseVec*> para_pick;
      if (cfg.mode == TrainMode::kParaphraseSub) {
        para_pick.resize(bsz);
        for (size_t b = 0; b < bsz; ++b) {
          para_pick[b] = &bank.original[chosen[b]];
          if (rng.bernoulli(cfg.paraphrase_rate)) {
            const auto& alts = bank.paraphrases[chosen[b]];
            if (!alts.empty()) para_pick[b] = &alts[rng.index(alts.size())];
          }
        }
      }

      linalg::Mat batch_motions(bsz, ds.feature_dim);
      for (size_t b = 0; b < bsz; ++b)
        std::copy(motion_inputs.row(order[start + b]),
                  motion_inputs.row(order[start + b]) + ds.feature_dim,
                  batch_motions.row(b));

      StepLoss rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.lr = lr;
      for (const auto& [label, weight] : passes) {
        std::vector<SparseVec> xs(bsz);
        for (size_t b = 0; b < bsz; ++b) {
          if (label == "original")
            xs[b] = bank.original[chosen[b]];
          else if (label == "canonical")
            xs[b] = bank.canonical[chosen[b]];
          else
            xs[b] = *para_pick[b];
        }
        EncodeResult te = encode_text_batch(ckpt.params, xs);
        EncodeResult me = encode_motion_batch(ckpt.params, batch_motions);
        double loss = infonce_symmetric(te.e, me.e, cfg.tau);
        if (weight != 0.0) {
          auto [g_text, g_motion] = grad_embeddings(te.e, me.e, cfg.tau);
          ParamGrads pg =
              backprop_params(ckpt.params, xs, batch_motions, te, me, g_text, g_motion);
          axpy_update(ckpt.params.w_text, pg.w_text, lr * weight);
          axpy_update(ckpt.params.w_motion, pg.w_motion, lr * cfg.motion_lr_mult * weight);
        }
        rec.losses.push_back(loss);
      }
      ckpt.history.push_back(std::move(rec));
      ++step;
    }
    ckpt.epoch = epoch + 1;
    ckpt.rng_state = rng.serialize();
    if (on_epoch) on_epoch(ckpt);
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j;
  j["format_version"] = ckpt.format_version;
  json cfg;
  cfg["mode"] = to_string(ckpt.config.mode);
  cfg["lambda"] = ckpt.config.lambda;
  cfg["tau"] = ckpt.config.tau;
  cfg["epochs"] = ckpt.config.epochs;
  cfg["batch_size"] = ckpt.config.batch_size;
  cfg["base_lr"] = ckpt.config.base_lr;
  cfg["motion_lr_mult"] = ckpt.config.motion_lr_mult;
  cfg["seed"] = ckpt.config.seed;
  cfg["paraphrase_rate"] = ckpt.config.paraphrase_rate;
  cfg["embed_dim"] = ckpt.config.embed_dim;
  cfg["featurizer"] = json{{"dim", ckpt.config.featurizer.dim},
                           {"hash_seed", ckpt.config.featurizer.hash_seed}};
  cfg["canonicalizer"] = ckpt.config.canonicalizer;
  j["config"] = std::move(cfg);
  j["epoch"] = ckpt.epoch;
  j["rng_state"] = ckpt.rng_state;
  j["pass_names"] = ckpt.pass_names;
  json hist = json::array();
  for (const StepLoss& r : ckpt.history) {
    hist.push_back(json{
        {"epoch", r.epoch}, {"step", r.step}, {"lr", r.lr}, {"losses", r.losses}});
  }
  j["history"] = std::move(hist);
  j["params"] =
      json{{"w_text", mat_to_json(ckpt.params.w_text)},
           {"w_motion", mat_to_json(ckpt.params.w_motion)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open \"" + path + "\" for writing");
  out << j.dump();
  if (!out) throw DataError("write failed for \"" + path + "\"");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open \"" + path + "\"");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("checkpoint \"" + path + "\": " + e.what());
  }
  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    throw DataError("checkpoint missing format_version");
  if (j["format_version"].get<int>() != 1)
    throw DataError("unsupported checkpoint format_version " +
                    std::to_string(j["format_version"].get<int>()));
  Checkpoint ckpt;
  const json& cfg = j.at("config");
  ckpt.config.mode = train_mode_from_string(cfg.at("mode").get<std::string>());
  ckpt.config.lambda = cfg.at("lambda").get<double>();
  ckpt.config.tau = cfg.at("tau").get<double>();
  ckpt.config.epochs = cfg.at("epochs").get<int>();
  ckpt.config.batch_size = cfg.at("batch_size").get<size_t>();
  ckpt.config.base_lr = cfg.at("base_lr").get<double>();
  ckpt.config.motion_lr_mult = cfg.at("motion_lr_mult").get<double>();
  ckpt.config.seed = cfg.at("seed").get<uint64_t>();
  ckpt.config.paraphrase_rate = cfg.at("paraphrase_rate").get<double>();
  ckpt.config.embed_dim = cfg.at("embed_dim").get<size_t>();
  ckpt.config.featurizer.dim = cfg.at("featurizer").at("dim").get<size_t>();
  ckpt.config.featurizer.hash_seed = cfg.at("featurizer").at("hash_seed").get<uint64_t>();
  ckpt.config.canonicalizer = cfg.at("canonicalizer").get<std::string>();
  ckpt.epoch = j.at("epoch").get<int>();
  ckpt.rng_state = j.at("rng_state").get<std::string>();
  ckpt.pass_names = j.at("pass_names").get<std::vector<std::string>>();
  for (const json& r : j.at("history")) {
    StepLoss rec;
    rec.epoch = r.at("epoch").get<int>();
    rec.step = r.at("step").get<size_t>();
    rec.lr = r.at("lr").get<double>();
    rec.losses = r.at("losses").get<std::vector<double>>();
    ckpt.history.push_back(std::move(rec));
  }
  ckpt.params.w_text = mat_from_json(j.at("params").at("w_text"));
  ckpt.params.w_motion = mat_from_json(j.at("params").at("w_motion"));
  return ckpt;
}

double finite_diff_check(const TrainConfig& cfg, const corpus::Dataset& ds,
                         const canon::Canonicalizer& canonicalizer, size_t n_probes,
                         const corpus::ParaphraseRegistry* paraphrases) {
  check_config(cfg);
  if (n_probes == 0) throw ConfigError("finite_diff_check: n_probes must be positive");

  std::vector<size_t> train_motions;
  for (size_t i = 0; i < ds.motions.size(); ++i)
    if (ds.motions[i].split == corpus::Split::kTrain) train_motions.push_back(i);
  if (train_motions.size() < 2)
    throw DataError("finite_diff_check: need at least 2 train-split motions");

  auto by_motion = corpus::captions_of(ds);
  TextBank bank = build_text_bank(cfg, ds, canonicalizer, paraphrases);

  Rng rng(seed_for(cfg.seed, "fdcheck"));
  std::vector<size_t> order = train_motions;
  rng.shuffle(order);
  size_t bsz = std::min(cfg.batch_size, order.size());
  order.resize(bsz);

  std::vector<size_t> chosen(bsz);
  for (size_t b = 0; b < bsz; ++b) {
    const auto& caps = by_motion[order[b]];
    chosen[b] = caps[rng.index(caps.size())];
  }
  std::vector<const SparseVec*> para_pick(bsz);
  if (cfg.mode == TrainMode::kParaphraseSub) {
    for (size_t b = 0; b < bsz; ++b) {
      para_pick[b] = &bank.original[chosen[b]];
      if (rng.bernoulli(cfg.paraphrase_rate)) {
        const auto& alts = bank.paraphrases[chosen[b]];
        if (!alts.empty()) para_pick[b] = &alts[rng.index(alts.size())];
      }
    }
  }

  linalg::Mat batch_motions(bsz, ds.feature_dim);
  for (size_t b = 0; b < bsz; ++b)
    std::copy(ds.motions[order[b]].features.begin(), ds.motions[order[b]].features.end(),
              batch_motions.row(b));

  auto passes = mode_passes(cfg);
  std::vector<std::vector<SparseVec>> pass_inputs;
  for (const auto& [label, weight] : passes) {
    (void)weight;
    std::vector<SparseVec> xs(bsz);
    for (size_t b = 0; b < bsz; ++b) {
      if (label == "original")
        xs[b] = bank.original[chosen[b]];
      else if (label == "canonical")
        xs[b] = bank.canonical[chosen[b]];
      else
        xs[b] = *para_pick[b];
    }
    pass_inputs.push_back(std::move(xs));
  }

  auto eval_loss = [&](const EncoderParams& p) {
    double total = 0.0;
    for (size_t k = 0; k < passes.size(); ++k) {
      EncodeResult te = encode_text_batch(p, pass_inputs[k]);
      EncodeResult me = encode_motion_batch(p, batch_motions);
      total += passes[k].second * infonce_symmetric(te.e, me.e, cfg.tau);
    }
    return total;
  };

  EncoderParams params = init_checkpoint(cfg, ds.feature_dim).params;
  ParamGrads analytic;
  analytic.w_text = linalg::Mat(params.w_text.rows(), params.w_text.cols());
  analytic.w_motion = linalg::Mat(params.w_motion.rows(), params.w_motion.cols());
  for (size_t k = 0; k < passes.size(); ++k) {
    EncodeResult te = encode_text_batch(params, pass_inputs[k]);
    EncodeResult me = encode_motion_batch(params, batch_motions);
    auto [g_text, g_motion] = grad_embeddings(te.e, me.e, cfg.tau);
    ParamGrads pg =
        backprop_params(params, pass_inputs[k], batch_motions, te, me, g_text, g_motion);
    double w = passes[k].second;
    for (size_t i = 0; i < analytic.w_text.data().size(); ++i)
      analytic.w_text.data()[i] += w * pg.w_text.data()[i];
    for (size_t i = 0; i < analytic.w_motion.data().size(); ++i)
      analytic.w_motion.data()[i] += w * pg.w_motion.data()[i];
  }

  double max_err = 0.0;
  for (size_t k = 0; k < n_probes; ++k) {
    bool text_side = rng.bernoulli(0.5);
    linalg::Mat& grads = text_side ? analytic.w_text : analytic.w_motion;
    size_t r = rng.index(grads.rows());
    size_t c = rng.index(grads.cols());
    double a = grads(r, c);

    EncoderParams probe = params;
    linalg::Mat& w = text_side ? probe.w_text : probe.w_motion;
    double saved = w(r, c);
    w(r, c) = saved + kFdStep;
    double fp = eval_loss(probe);
    w(r, c) = saved - kFdStep;
    double fm = eval_loss(probe);
    double numeric = (fp - fm) / (2.0 * kFdStep);

    double denom = std::max({std::fabs(a), std::fabs(numeric), kFdFloor});
    max_err = std::max(max_err, std::fabs(a - numeric) / denom);
  }
  return max_err;
}

linalg::Mat embed_texts(const EncoderParams& p, const HashedFeaturizer& f,
                        const std::vector<std::string>& texts) {
  std::vector<SparseVec> xs;
  xs.reserve(texts.size());
  for (const auto& t : texts) xs.push_back(f.featurize(t));
  return encode_text_batch(p, xs).e;
}

linalg::Mat embed_motions(const EncoderParams& p, const corpus::Dataset& ds) {
  linalg::Mat inputs(ds.motions.size(), ds.feature_dim);
  for (size_t i = 0; i < ds.motions.size(); ++i)
    std::copy(ds.motions[i].features.begin(), ds.motions[i].features.end(), inputs.row(i));
  return encode_motion_batch(p, inputs).e;
}

}  // namespace mocha::model
