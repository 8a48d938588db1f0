#pragma once

#include <string>
#include <vector>

#include "mocha/canon.hpp"
#include "mocha/corpus.hpp"
#include "mocha/eval.hpp"
#include "mocha/linalg.hpp"
#include "mocha/model.hpp"
#include "mocha/stats.hpp"

namespace mocha::noiselab {

// Mean pairwise cosine dissimilarity of K unit rows, through the squared
// chord so identical rows give exactly 0.
double within_motion_variance(const linalg::Mat& embeddings);

struct VarIdentity {
  double lhs = 0.0;  // mean squared distance to the centroid
  double rhs = 0.0;  // (K-1)/K times the pairwise dissimilarity
  double diff = 0.0;
};

VarIdentity var_text_identity(const linalg::Mat& embeddings);

struct VarianceReport {
  std::vector<std::string> motion_ids;  // multi-caption motions only
  std::vector<double> v_original;
  std::vector<double> v_canonical;
  double mean_original = 0.0;
  double mean_canonical = 0.0;
  double pct_delta = 0.0;
  stats::PairedT ttest;
  size_t n_motions = 0;
  size_t n_skipped_single = 0;
};

VarianceReport variance_report(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                               const canon::Canonicalizer& canonicalizer);

struct GradCondition {
  double sigma2 = 0.0;
  double cone_deg = 0.0;
  double pairwise_cos = 0.0;  // mean pairwise gradient cosine
  double cos_to_mean = 0.0;   // secondary consistency statistic
  std::vector<double> sigma2_per_motion;
};

struct GradVarReport {
  GradCondition original;
  GradCondition canonical;
  double pct_delta = 0.0;
  double frac_reduced = 0.0;  // motions where canonical sigma2 dropped
  size_t n_motions = 0;
  size_t n_skipped_single = 0;
};

// One-directional text-query InfoNCE gradients against the frozen motion
// gallery, per caption of each multi-caption motion, for the original and
// the canonicalized texts.
GradVarReport gradient_variance(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                                const canon::Canonicalizer& canonicalizer);

struct PoolSigma {
  std::vector<size_t> motion_idx;  // motions with pool size >= 2
  std::vector<double> sigma2;
  double mean = 0.0;
  size_t n_skipped = 0;
};

// Same gradient spread over arbitrary per-motion text pools (aligned with
// ds.motions); pools smaller than 2 are skipped.
PoolSigma text_selection_sigma2(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                                const std::vector<std::vector<std::string>>& pools);

struct ConcentrationReport {
  double mean_entropy = 0.0;
  double mean_p_positive = 0.0;
  size_t n_queries = 0;
  size_t n_gallery = 0;
  double ln_gallery = 0.0;  // entropy of the uniform distribution
};

ConcentrationReport concentration(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                                  eval::TextMode mode = eval::TextMode::kOriginal,
                                  const canon::Canonicalizer& canonicalizer = {});

struct GeometryReport {
  double intra = 0.0;     // mean pairwise text cosine within motions
  double align = 0.0;     // mean text-motion cosine over paired items
  double inter_nn = 0.0;  // mean max cosine to a different motion's text
  double sep = 0.0;       // intra / inter_nn
  size_t n_multi = 0;
  size_t n_texts = 0;
};

GeometryReport geometry(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                        eval::TextMode mode, const canon::Canonicalizer& canonicalizer);

struct AlignmentReport {
  std::vector<double> per_pair_original;
  std::vector<double> per_pair_canonical;
  double mean_original = 0.0;
  double mean_canonical = 0.0;
  double pct_delta = 0.0;
  size_t n_pairs = 0;
};

// Mean cosine over all caption cross pairs of each matched motion pair,
// before and after canonicalization.
AlignmentReport cross_alignment(const model::Checkpoint& ckpt,
                                const std::vector<std::pair<size_t, size_t>>& pairs,
                                const corpus::Dataset& ds_a, const corpus::Dataset& ds_b,
                                const canon::Canonicalizer& canonicalizer);

std::string to_json(const VarianceReport& r);
std::string to_json(const GradVarReport& r);
std::string to_json(const ConcentrationReport& r);
std::string to_json(const GeometryReport& r);
std::string to_json(const AlignmentReport& r);

std::string to_csv(const VarianceReport& r);
std::string to_csv(const GradVarReport& r);
std::string to_csv(const ConcentrationReport& r);
std::string to_csv(const GeometryReport& r);
std::string to_csv(const AlignmentReport& r);

}  // namespace mocha::noiselab
