#include "mocha/noiselab.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "mocha/errors.hpp"

namespace mocha::noiselab {

namespace {

constexpr double kTinyNorm = 1e-300;

double pct_change(double before, double after) {
  if (before == 0.0) return 0.0;
  return 100.0 * ((after - before) / before);
}

std::string mode_text(eval::TextMode mode, const canon::Canonicalizer& c,
                      const corpus::Caption& cap) {
  return mode == eval::TextMode::kOriginal ? cap.text : canon::canonicalize_caption(c, cap);
}

std::vector<double> unit_or_zero(const double* v, size_t n) {
  std::vector<double> out(v, v + n);
  double nn = linalg::norm(v, n);
  if (nn < kTinyNorm) return out;
  for (double& x : out) x /= nn;
  return out;
}

struct MotionGradStats {
  double sigma2 = 0.0;
  double cone_deg = 0.0;
  double pairwise_cos = 0.0;
  double cos_to_mean = 0.0;
};

// Spread statistics of K gradient vectors: trace variance via the pairwise
// form, the shift-by-first mean, and cosine consistency both pairwise and
// against the mean.
MotionGradStats grad_stats(const std::vector<std::vector<double>>& grads) {
  const size_t k = grads.size();
  const size_t d = grads[0].size();

  double pair_sq = 0.0;
  for (size_t i = 0; i < k; ++i)
    for (size_t j = i + 1; j < k; ++j) pair_sq += linalg::sqdist(grads[i].data(), grads[j].data(), d);

  std::vector<double> gbar(d, 0.0);
  {
    std::vector<double> cbar(d, 0.0);
    for (size_t i = 1; i < k; ++i)
      for (size_t c = 0; c < d; ++c) cbar[c] += grads[i][c] - grads[0][c];
    for (size_t c = 0; c < d; ++c) gbar[c] = grads[0][c] + cbar[c] / static_cast<double>(k);
  }

  std::vector<std::vector<double>> units;
  units.reserve(k);
  for (const auto& g : grads) units.push_back(unit_or_zero(g.data(), d));
  std::vector<double> ubar = unit_or_zero(gbar.data(), d);

  MotionGradStats st;
  st.sigma2 = pair_sq / (static_cast<double>(k) * static_cast<double>(k));

  double angle = 0.0, to_mean_cos = 0.0;
  for (size_t i = 0; i < k; ++i) {
    angle += linalg::unit_angle_deg(units[i].data(), ubar.data(), d);
    to_mean_cos += linalg::unit_cos(units[i].data(), ubar.data(), d);
  }
  st.cone_deg = angle / static_cast<double>(k);
  st.cos_to_mean = to_mean_cos / static_cast<double>(k);

  double pc = 0.0;
  size_t npairs = k * (k - 1) / 2;
  for (size_t i = 0; i < k; ++i)
    for (size_t j = i + 1; j < k; ++j) pc += linalg::unit_cos(units[i].data(), units[j].data(), d);
  st.pairwise_cos = npairs ? pc / static_cast<double>(npairs) : 1.0;
  return st;
}

std::vector<std::vector<double>> query_grads(const model::Checkpoint& ckpt,
                                             const std::vector<std::string>& texts,
                                             const linalg::Mat& gallery, size_t positive) {
  linalg::Mat q = model::embed_texts(ckpt.params, ckpt.config.featurizer, texts);
  std::vector<std::vector<double>> grads;
  grads.reserve(texts.size());
  for (size_t i = 0; i < q.rows(); ++i) {
    std::vector<double> qi(q.row(i), q.row(i) + q.cols());
    grads.push_back(model::infonce_query_grad(qi, gallery, positive, ckpt.config.tau));
  }
  return grads;
}

}  // namespace

double within_motion_variance(const linalg::Mat& embeddings) {
  const size_t k = embeddings.rows();
  if (k < 2) throw DataError("within_motion_variance needs at least 2 embeddings");
  double sum = 0.0;
  for (size_t i = 0; i < k; ++i)
    for (size_t j = i + 1; j < k; ++j)
      sum += 0.5 * linalg::sqdist(embeddings.row(i), embeddings.row(j), embeddings.cols());
  return sum / (static_cast<double>(k) * static_cast<double>(k - 1) / 2.0);
}

VarIdentity var_text_identity(const linalg::Mat& embeddings) {
  const size_t k = embeddings.rows();
  const size_t d = embeddings.cols();
  if (k < 2) throw DataError("var_text_identity needs at least 2 embeddings");

  std::vector<std::vector<double>> centered(k, std::vector<double>(d, 0.0));
  for (size_t i = 1; i < k; ++i)
    for (size_t c = 0; c < d; ++c) centered[i][c] = embeddings(i, c) - embeddings(0, c);
  std::vector<double> cbar(d, 0.0);
  for (size_t i = 0; i < k; ++i)
    for (size_t c = 0; c < d; ++c) cbar[c] += centered[i][c];
  for (size_t c = 0; c < d; ++c) cbar[c] /= static_cast<double>(k);

  VarIdentity out;
  double sq = 0.0;
  for (size_t i = 0; i < k; ++i) sq += linalg::sqdist(centered[i].data(), cbar.data(), d);
  out.lhs = sq / static_cast<double>(k);
  out.rhs = (static_cast<double>(k - 1) / static_cast<double>(k)) *
            within_motion_variance(embeddings);
  out.diff = std::fabs(out.lhs - out.rhs);
  return out;
}

VarianceReport variance_report(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                               const canon::Canonicalizer& canonicalizer) {
  auto caps_of = corpus::captions_of(ds);
  std::vector<std::string> orig, canon_texts;
  orig.reserve(ds.captions.size());
  canon_texts.reserve(ds.captions.size());
  for (const auto& c : ds.captions) {
    orig.push_back(c.text);
    canon_texts.push_back(canon::canonicalize_caption(canonicalizer, c));
  }
  linalg::Mat e_orig = model::embed_texts(ckpt.params, ckpt.config.featurizer, orig);
  linalg::Mat e_canon = model::embed_texts(ckpt.params, ckpt.config.featurizer, canon_texts);

  VarianceReport rep;
  auto motion_v = [&](const linalg::Mat& src, const std::vector<size_t>& idx) {
    linalg::Mat sub(idx.size(), src.cols());
    for (size_t i = 0; i < idx.size(); ++i)
      std::copy(src.row(idx[i]), src.row(idx[i]) + src.cols(), sub.row(i));
    return within_motion_variance(sub);
  };
  for (size_t m = 0; m < ds.motions.size(); ++m) {
    if (caps_of[m].size() < 2) {
      ++rep.n_skipped_single;
      continue;
    }
    rep.motion_ids.push_back(ds.motions[m].id);
    rep.v_original.push_back(motion_v(e_orig, caps_of[m]));
    rep.v_canonical.push_back(motion_v(e_canon, caps_of[m]));
  }
  rep.n_motions = rep.motion_ids.size();
  if (rep.n_motions == 0) throw DataError("variance_report: no multi-caption motions");
  rep.mean_original = stats::mean(rep.v_original);
  rep.mean_canonical = stats::mean(rep.v_canonical);
  rep.pct_delta = pct_change(rep.mean_original, rep.mean_canonical);
  rep.ttest = stats::paired_t_test(rep.v_canonical, rep.v_original);
  return rep;
}

GradVarReport gradient_variance(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                                const canon::Canonicalizer& canonicalizer) {
  auto caps_of = corpus::captions_of(ds);
  linalg::Mat gallery = model::embed_motions(ckpt.params, ds);

  GradVarReport rep;
  std::vector<double> cone_o, cone_c, pc_o, pc_c, cm_o, cm_c;
  for (size_t m = 0; m < ds.motions.size(); ++m) {
    if (caps_of[m].size() < 2) {
      ++rep.n_skipped_single;
      continue;
    }
    std::vector<std::string> t_orig, t_canon;
    for (size_t ci : caps_of[m]) {
      t_orig.push_back(ds.captions[ci].text);
      t_canon.push_back(canon::canonicalize_caption(canonicalizer, ds.captions[ci]));
    }
    auto st_o = grad_stats(query_grads(ckpt, t_orig, gallery, m));
    auto st_c = grad_stats(query_grads(ckpt, t_canon, gallery, m));
    rep.original.sigma2_per_motion.push_back(st_o.sigma2);
    rep.canonical.sigma2_per_motion.push_back(st_c.sigma2);
    cone_o.push_back(st_o.cone_deg);
    cone_c.push_back(st_c.cone_deg);
    pc_o.push_back(st_o.pairwise_cos);
    pc_c.push_back(st_c.pairwise_cos);
    cm_o.push_back(st_o.cos_to_mean);
    cm_c.push_back(st_c.cos_to_mean);
  }
  rep.n_motions = rep.original.sigma2_per_motion.size();
  if (rep.n_motions == 0) throw DataError("gradient_variance: no multi-caption motions");

  rep.original.sigma2 = stats::mean(rep.original.sigma2_per_motion);
  rep.canonical.sigma2 = stats::mean(rep.canonical.sigma2_per_motion);
  rep.original.cone_deg = stats::mean(cone_o);
  rep.canonical.cone_deg = stats::mean(cone_c);
  rep.original.pairwise_cos = stats::mean(pc_o);
  rep.canonical.pairwise_cos = stats::mean(pc_c);
  rep.original.cos_to_mean = stats::mean(cm_o);
  rep.canonical.cos_to_mean = stats::mean(cm_c);
  rep.pct_delta = pct_change(rep.original.sigma2, rep.canonical.sigma2);
  size_t reduced = 0;
  for (size_t i = 0; i < rep.n_motions; ++i)
    if (rep.canonical.sigma2_per_motion[i] < rep.original.sigma2_per_motion[i]) ++reduced;
  rep.frac_reduced = static_cast<double>(reduced) / static_cast<double>(rep.n_motions);
  return rep;
}

PoolSigma text_selection_sigma2(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                                const std::vector<std::vector<std::string>>& pools) {
  if (pools.size() != ds.motions.size())
    throw DataError("text_selection_sigma2: pools not aligned with motions");
  linalg::Mat gallery = model::embed_motions(ckpt.params, ds);
  PoolSigma out;
  for (size_t m = 0; m < pools.size(); ++m) {
    if (pools[m].size() < 2) {
      ++out.n_skipped;
      continue;
    }
    auto st = grad_stats(query_grads(ckpt, pools[m], gallery, m));
    out.motion_idx.push_back(m);
    out.sigma2.push_back(st.sigma2);
  }
  if (!out.sigma2.empty()) out.mean = stats::mean(out.sigma2);
  return out;
}

ConcentrationReport concentration(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                                  eval::TextMode mode, const canon::Canonicalizer& canonicalizer) {
  auto midx = corpus::motion_index(ds);
  std::vector<std::string> texts;
  texts.reserve(ds.captions.size());
  for (const auto& c : ds.captions) texts.push_back(mode_text(mode, canonicalizer, c));
  linalg::Mat q = model::embed_texts(ckpt.params, ckpt.config.featurizer, texts);
  linalg::Mat gallery = model::embed_motions(ckpt.params, ds);
  const double tau = ckpt.config.tau;
  const size_t n = gallery.rows();
  if (n == 0) throw DataError("concentration: empty gallery");

  ConcentrationReport rep;
  rep.n_queries = q.rows();
  rep.n_gallery = n;
  rep.ln_gallery = std::log(static_cast<double>(n));
  std::vector<double> logits(n), p(n);
  double sum_h = 0.0, sum_pp = 0.0;
  for (size_t i = 0; i < q.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < n; ++j) {
      logits[j] = linalg::dot(q.row(i), gallery.row(j), q.cols()) / tau;
      mx = std::max(mx, logits[j]);
    }
    double z = 0.0;
    for (size_t j = 0; j < n; ++j) {
      p[j] = std::exp(logits[j] - mx);
      z += p[j];
    }
    double h = 0.0;
    for (size_t j = 0; j < n; ++j) {
      p[j] /= z;
      if (p[j] > 0.0) h -= p[j] * std::log(p[j]);
    }
    sum_h += h;
    sum_pp += p[midx.at(ds.captions[i].motion_id)];
  }
  if (rep.n_queries > 0) {
    rep.mean_entropy = sum_h / static_cast<double>(rep.n_queries);
    rep.mean_p_positive = sum_pp / static_cast<double>(rep.n_queries);
  }
  return rep;
}

GeometryReport geometry(const model::Checkpoint& ckpt, const corpus::Dataset& ds,
                        eval::TextMode mode, const canon::Canonicalizer& canonicalizer) {
  auto caps_of = corpus::captions_of(ds);
  auto midx = corpus::motion_index(ds);
  std::vector<std::string> texts;
  texts.reserve(ds.captions.size());
  for (const auto& c : ds.captions) texts.push_back(mode_text(mode, canonicalizer, c));
  linalg::Mat e_text = model::embed_texts(ckpt.params, ckpt.config.featurizer, texts);
  linalg::Mat e_motion = model::embed_motions(ckpt.params, ds);
  const size_t d = e_text.cols();

  GeometryReport rep;
  rep.n_texts = ds.captions.size();

  std::vector<double> intra_per;
  for (size_t m = 0; m < ds.motions.size(); ++m) {
    const auto& idx = caps_of[m];
    if (idx.size() < 2) continue;
    double s = 0.0;
    size_t np = 0;
    for (size_t a = 0; a < idx.size(); ++a)
      for (size_t b = a + 1; b < idx.size(); ++b) {
        s += linalg::unit_cos(e_text.row(idx[a]), e_text.row(idx[b]), d);
        ++np;
      }
    intra_per.push_back(s / static_cast<double>(np));
  }
  rep.n_multi = intra_per.size();
  rep.intra = intra_per.empty() ? 0.0 : stats::mean(intra_per);

  double al = 0.0;
  for (size_t i = 0; i < ds.captions.size(); ++i)
    al += linalg::unit_cos(e_text.row(i), e_motion.row(midx.at(ds.captions[i].motion_id)), d);
  rep.align = ds.captions.empty() ? 0.0 : al / static_cast<double>(ds.captions.size());

  double nn_sum = 0.0;
  size_t nn_count = 0;
  for (size_t i = 0; i < ds.captions.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    bool found = false;
    for (size_t j = 0; j < ds.captions.size(); ++j) {
      if (ds.captions[j].motion_id == ds.captions[i].motion_id) continue;
      best = std::max(best, linalg::unit_cos(e_text.row(i), e_text.row(j), d));
      found = true;
    }
    if (found) {
      nn_sum += best;
      ++nn_count;
    }
  }
  rep.inter_nn = nn_count ? nn_sum / static_cast<double>(nn_count) : 0.0;
  rep.sep = rep.inter_nn != 0.0 ? rep.intra / rep.inter_nn : 0.0;
  return rep;
}

AlignmentReport cross_alignment(const model::Checkpoint& ckpt,
                                const std::vector<std::pair<size_t, size_t>>& pairs,
                                const corpus::Dataset& ds_a, const corpus::Dataset& ds_b,
                                const canon::Canonicalizer& canonicalizer) {
  auto caps_a = corpus::captions_of(ds_a);
  auto caps_b = corpus::captions_of(ds_b);

  auto embed_all = [&](const corpus::Dataset& ds, bool canonical) {
    std::vector<std::string> texts;
    texts.reserve(ds.captions.size());
    for (const auto& c : ds.captions)
      texts.push_back(canonical ? canon::canonicalize_caption(canonicalizer, c) : c.text);
    return model::embed_texts(ckpt.params, ckpt.config.featurizer, texts);
  };
  linalg::Mat ea_o = embed_all(ds_a, false), eb_o = embed_all(ds_b, false);
  linalg::Mat ea_c = embed_all(ds_a, true), eb_c = embed_all(ds_b, true);
  const size_t d = ea_o.cols();

  AlignmentReport rep;
  for (const auto& [ia, ib] : pairs) {
    if (ia >= ds_a.motions.size() || ib >= ds_b.motions.size())
      throw DataError("cross_alignment: pair index out of range");
    auto pair_mean = [&](const linalg::Mat& ea, const linalg::Mat& eb) {
      double s = 0.0;
      size_t n = 0;
      for (size_t ca : caps_a[ia])
        for (size_t cb : caps_b[ib]) {
          s += linalg::unit_cos(ea.row(ca), eb.row(cb), d);
          ++n;
        }
      return s / static_cast<double>(n);
    };
    rep.per_pair_original.push_back(pair_mean(ea_o, eb_o));
    rep.per_pair_canonical.push_back(pair_mean(ea_c, eb_c));
  }
  rep.n_pairs = pairs.size();
  if (rep.n_pairs == 0) throw DataError("cross_alignment: no matched pairs");
  rep.mean_original = stats::mean(rep.per_pair_original);
  rep.mean_canonical = stats::mean(rep.per_pair_canonical);
  rep.pct_delta = pct_change(rep.mean_original, rep.mean_canonical);
  return rep;
}

namespace {

std::string dump(const nlohmann::json& j) { return j.dump(2); }

std::string csv_row(const std::vector<std::pair<std::string, double>>& cells) {
  std::ostringstream h, v;
  v << std::setprecision(17);
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) {
      h << ',';
      v << ',';
    }
    h << cells[i].first;
    v << cells[i].second;
  }
  return h.str() + "\n" + v.str() + "\n";
}

}  // namespace

std::string to_json(const VarianceReport& r) {
  nlohmann::json j;
  j["n_motions"] = r.n_motions;
  j["n_skipped_single"] = r.n_skipped_single;
  j["mean_v_original"] = r.mean_original;
  j["mean_v_canonical"] = r.mean_canonical;
  j["pct_delta"] = r.pct_delta;
  j["t"] = r.ttest.t;
  j["p"] = r.ttest.p;
  j["t_degenerate"] = r.ttest.degenerate;
  j["motion_ids"] = r.motion_ids;
  j["v_original"] = r.v_original;
  j["v_canonical"] = r.v_canonical;
  return dump(j);
}

std::string to_json(const GradVarReport& r) {
  nlohmann::json j;
  auto cond = [](const GradCondition& c) {
    nlohmann::json k;
    k["sigma2"] = c.sigma2;
    k["cone_deg"] = c.cone_deg;
    k["pairwise_cos"] = c.pairwise_cos;
    k["cos_to_mean"] = c.cos_to_mean;
    k["sigma2_per_motion"] = c.sigma2_per_motion;
    return k;
  };
  j["original"] = cond(r.original);
  j["canonical"] = cond(r.canonical);
  j["pct_delta"] = r.pct_delta;
  j["frac_reduced"] = r.frac_reduced;
  j["n_motions"] = r.n_motions;
  j["n_skipped_single"] = r.n_skipped_single;
  return dump(j);
}

std::string to_json(const ConcentrationReport& r) {
  nlohmann::json j;
  j["mean_entropy"] = r.mean_entropy;
  j["mean_p_positive"] = r.mean_p_positive;
  j["n_queries"] = r.n_queries;
  j["n_gallery"] = r.n_gallery;
  j["ln_gallery"] = r.ln_gallery;
  return dump(j);
}

std::string to_json(const GeometryReport& r) {
  nlohmann::json j;
  j["intra"] = r.intra;
  j["align"] = r.align;
  j["inter_nn"] = r.inter_nn;
  j["sep"] = r.sep;
  j["n_multi"] = r.n_multi;
  j["n_texts"] = r.n_texts;
  return dump(j);
}

std::string to_json(const AlignmentReport& r) {
  nlohmann::json j;
  j["mean_original"] = r.mean_original;
  j["mean_canonical"] = r.mean_canonical;
  j["pct_delta"] = r.pct_delta;
  j["n_pairs"] = r.n_pairs;
  j["per_pair_original"] = r.per_pair_original;
  j["per_pair_canonical"] = r.per_pair_canonical;
  return dump(j);
}

std::string to_csv(const VarianceReport& r) {
  return csv_row({{"n_motions", static_cast<double>(r.n_motions)},
                  {"mean_v_original", r.mean_original},
                  {"mean_v_canonical", r.mean_canonical},
                  {"pct_delta", r.pct_delta},
                  {"t", r.ttest.t},
                  {"p", r.ttest.p}});
}

std::string to_csv(const GradVarReport& r) {
  return csv_row({{"sigma2_original", r.original.sigma2},
                  {"sigma2_canonical", r.canonical.sigma2},
                  {"pct_delta", r.pct_delta},
                  {"frac_reduced", r.frac_reduced},
                  {"cone_deg_original", r.original.cone_deg},
                  {"cone_deg_canonical", r.canonical.cone_deg},
                  {"pairwise_cos_original", r.original.pairwise_cos},
                  {"pairwise_cos_canonical", r.canonical.pairwise_cos},
                  {"n_motions", static_cast<double>(r.n_motions)}});
}

std::string to_csv(const ConcentrationReport& r) {
  return csv_row({{"mean_entropy", r.mean_entropy},
                  {"mean_p_positive", r.mean_p_positive},
                  {"n_queries", static_cast<double>(r.n_queries)},
                  {"n_gallery", static_cast<double>(r.n_gallery)}});
}

std::string to_csv(const GeometryReport& r) {
  return csv_row({{"intra", r.intra},
                  {"align", r.align},
                  {"inter_nn", r.inter_nn},
                  {"sep", r.sep},
                  {"n_multi", static_cast<double>(r.n_multi)}});
}

std::string to_csv(const AlignmentReport& r) {
  return csv_row({{"mean_original", r.mean_original},
                  {"mean_canonical", r.mean_canonical},
                  {"pct_delta", r.pct_delta},
                  {"n_pairs", static_cast<double>(r.n_pairs)}});
}

}  // namespace mocha::noiselab
