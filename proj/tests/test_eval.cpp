#include "mocha/eval.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "mocha/corpus.hpp"
#include "mocha/errors.hpp"
#include "mocha/model.hpp"
#include "mocha/rng.hpp"

namespace fs = std::filesystem;
using namespace mocha;
using namespace mocha::eval;
using linalg::Mat;

namespace {

fs::path temp_file(const std::string& stem) {
  static int counter = 0;
  return fs::temp_directory_path() /
         (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
}

Mat rows_from(const std::vector<std::vector<double>>& rs) {
  Mat m(rs.size(), rs[0].size());
  for (size_t i = 0; i < rs.size(); ++i)
    for (size_t j = 0; j < rs[i].size(); ++j) m(i, j) = rs[i][j];
  return m;
}

// Dataset where each motion's feature vector is a distinct basis vector and
// captions are distinct single tokens; used with one-hot text params to
// build fully separable embeddings.
corpus::Dataset toy_dataset(const std::vector<std::vector<std::string>>& captions_per_motion,
                            size_t dim) {
  corpus::Dataset ds;
  ds.feature_dim = dim;
  for (size_t i = 0; i < captions_per_motion.size(); ++i) {
    corpus::Motion m;
    m.id = "m" + std::to_string(i);
    m.features.assign(dim, 0.0);
    m.features[i % dim] = 1.0;
    ds.motions.push_back(m);
    for (size_t k = 0; k < captions_per_motion[i].size(); ++k) {
      corpus::Caption c;
      c.id = m.id + ".c" + std::to_string(k);
      c.motion_id = m.id;
      c.text = captions_per_motion[i][k];
      ds.captions.push_back(c);
    }
  }
  return ds;
}

// Checkpoint whose text encoder maps the caption's hash buckets onto the
// matching motion basis vector plus a small per-caption tilt, so each
// caption sits closest to its own motion without exact ties between the
// captions of one motion.
model::Checkpoint aligned_checkpoint(const corpus::Dataset& ds, size_t dim) {
  model::TrainConfig cfg;
  cfg.embed_dim = dim;
  cfg.featurizer.dim = 256;
  cfg.epochs = 0;
  model::Checkpoint ck = model::init_checkpoint(cfg, ds.feature_dim);
  ck.params.w_text = Mat(cfg.featurizer.dim, dim);
  ck.params.w_motion = Mat(ds.feature_dim, dim);
  for (size_t i = 0; i < ds.feature_dim && i < dim; ++i) ck.params.w_motion(i, i) = 1.0;
  auto midx = corpus::motion_index(ds);
  std::map<std::string, size_t> ordinal;
  for (const auto& c : ds.captions) {
    auto sv = cfg.featurizer.featurize(c.text);
    size_t target = midx.at(c.motion_id) % dim;
    size_t k = ordinal[c.motion_id]++;
    double tilt = 0.01 * static_cast<double>(k + 1);
    for (const auto& [bucket, v] : sv.entries) {
      ck.params.w_text(bucket, target) += v;
      ck.params.w_text(bucket, (target + 1) % dim) += tilt * v;
    }
  }
  return ck;
}

canon::Canonicalizer identity_canon() { return canon::Canonicalizer{}; }

}  // namespace

TEST_CASE("raw cutoff maps the normalized threshold onto raw cosine") {
  CHECK(std::abs(raw_cutoff(0.95) - 0.90) <= 1e-15);
  CHECK(raw_cutoff(0.5) == 0.0);
  CHECK(raw_cutoff(1.0) == 1.0);
  CHECK(raw_cutoff(0.0) == -1.0);
}

TEST_CASE("rank_queries scores a clear winner as rank one") {
  Mat q = rows_from({{1.0, 0.0}});
  Mat g = rows_from({{0.9, std::sqrt(1 - 0.81)},
                     {0.5, std::sqrt(1 - 0.25)},
                     {0.1, std::sqrt(1 - 0.01)}});
  auto ranks = rank_queries(q, g, {{0}});
  REQUIRE(ranks.size() == 1);
  CHECK(ranks[0] == 1.0);
}

TEST_CASE("a five-way tie gives the mid rank") {
  Mat q = rows_from({{1.0, 0.0}});
  Mat g(5, 2);
  for (size_t i = 0; i < 5; ++i) g(i, 1) = 1.0;  // all orthogonal to q
  auto ranks = rank_queries(q, g, {{2}});
  CHECK(ranks[0] == 3.0);
}

TEST_CASE("any-of correct sets take the best-ranked member") {
  Mat q = rows_from({{1.0, 0.0}});
  Mat g = rows_from({{0.0, 1.0}, {0.5, std::sqrt(0.75)}, {1.0, 0.0}});
  auto ranks = rank_queries(q, g, {{1, 2}});
  CHECK(ranks[0] == 1.0);  // item 2 sits at rank 1
}

TEST_CASE("rank_queries rejects malformed inputs") {
  Mat q = rows_from({{1.0, 0.0}});
  Mat g = rows_from({{1.0, 0.0}});
  CHECK_THROWS_AS(rank_queries(q, g, {{}}), DataError);           // empty correct set
  CHECK_THROWS_AS(rank_queries(q, g, {{5}}), DataError);          // out of range
  CHECK_THROWS_AS(rank_queries(q, g, {{0}, {0}}), DataError);     // count mismatch
  Mat g3 = rows_from({{1.0, 0.0, 0.0}});
  CHECK_THROWS_AS(rank_queries(q, g3, {{0}}), DataError);         // width mismatch
}

TEST_CASE("rank_queries is invariant under gallery permutation") {
  Rng rng(91);
  Mat q(4, 6), g(9, 6);
  for (double& x : q.data()) x = rng.normal();
  for (double& x : g.data()) x = rng.normal();
  std::vector<std::vector<size_t>> correct = {{0, 3}, {2}, {5, 7}, {8}};
  auto base = rank_queries(q, g, correct);

  std::vector<size_t> perm(9);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  Mat gp(9, 6);
  std::vector<size_t> inv(9);
  for (size_t i = 0; i < 9; ++i) inv[perm[i]] = i;
  for (size_t i = 0; i < 9; ++i)
    for (size_t j = 0; j < 6; ++j) gp(inv[i], j) = g(i, j);
  std::vector<std::vector<size_t>> cp = correct;
  for (auto& set : cp)
    for (size_t& x : set) x = inv[x];
  auto shuffled = rank_queries(q, gp, cp);
  for (size_t i = 0; i < base.size(); ++i)
    CHECK(base[i] == doctest::Approx(shuffled[i]).epsilon(1e-12));
}

TEST_CASE("recall and median rank match hand arithmetic") {
  std::vector<double> ranks = {1, 3, 7};
  CHECK(recall_at_k(ranks, 1) == doctest::Approx(100.0 / 3));
  CHECK(recall_at_k(ranks, 5) == doctest::Approx(200.0 / 3));
  CHECK(recall_at_k(ranks, 10) == 100.0);
  CHECK(median_rank(ranks) == 3.0);

  CHECK(median_rank({2, 4}) == 3.0);
  CHECK(median_rank({4, 2}) == 3.0);

  std::vector<double> ones = {1, 1, 1, 1};
  CHECK(recall_at_k(ones, 1) == 100.0);
  CHECK(median_rank(ones) == 1.0);

  // half-integer tie ranks count against the cutoff
  CHECK(recall_at_k({1.5}, 1) == 0.0);
  CHECK(recall_at_k({1.5}, 1.5) == 100.0);
}

TEST_CASE("full protocol keeps one caption per motion, first id wins") {
  corpus::Dataset ds = toy_dataset({{"walk", "march"}, {"jump", "bounce"}}, 4);
  // shuffle caption order so the lexicographic rule has to work
  std::swap(ds.captions[0], ds.captions[1]);
  Protocol p;
  p.kind = ProtocolKind::kFull;

  CorrectSets cs = build_correct_sets(ds, p, Direction::kT2M);
  REQUIRE(cs.query_items.size() == 2);   // one caption per motion
  REQUIRE(cs.gallery_items.size() == 2);
  // m0.c0 is lexicographically before m0.c1: text "walk"
  CHECK(ds.captions[cs.query_items[0]].id == "m0.c0");
  CHECK(ds.captions[cs.query_items[1]].id == "m1.c0");
  for (size_t i = 0; i < cs.correct.size(); ++i) {
    REQUIRE(cs.correct[i].size() == 1);
    CHECK(cs.correct[i][0] == i);
  }

  CorrectSets sm = build_correct_sets(ds, p, Direction::kM2T);
  REQUIRE(sm.query_items.size() == 2);
  REQUIRE(sm.gallery_items.size() == 2);
  for (size_t i = 0; i < sm.correct.size(); ++i) REQUIRE(sm.correct[i].size() == 1);
}

TEST_CASE("dspair accepts the own motion and any own caption") {
  corpus::Dataset ds = toy_dataset({{"walk", "march"}, {"jump"}}, 4);
  Protocol p;
  p.kind = ProtocolKind::kDsPair;

  CorrectSets t2m = build_correct_sets(ds, p, Direction::kT2M);
  REQUIRE(t2m.query_items.size() == 3);  // every caption queries
  CHECK(t2m.gallery_items.size() == 2);
  CHECK(t2m.correct[0] == std::vector<size_t>{0});
  CHECK(t2m.correct[1] == std::vector<size_t>{0});
  CHECK(t2m.correct[2] == std::vector<size_t>{1});

  CorrectSets m2t = build_correct_sets(ds, p, Direction::kM2T);
  REQUIRE(m2t.query_items.size() == 2);
  CHECK(m2t.gallery_items.size() == 3);
  CHECK(m2t.correct[0] == std::vector<size_t>{0, 1});
  CHECK(m2t.correct[1] == std::vector<size_t>{2});
}

TEST_CASE("tfidf cosine has unit diagonal and symmetric entries") {
  auto sim = tfidf_cosine({"walk forward", "walk backward", "jump", "walk forward"});
  REQUIRE(sim.size() == 4);
  for (size_t i = 0; i < 4; ++i) CHECK(sim.at(i, i) == 1.0);
  for (size_t i = 0; i < 4; ++i)
    for (size_t j = 0; j < 4; ++j) CHECK(sim.at(i, j) == doctest::Approx(sim.at(j, i)));
  // identical texts are fully similar, disjoint ones fully dissimilar
  CHECK(sim.at(0, 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sim.at(0, 2) == 0.0);
  CHECK(sim.at(0, 1) > 0.0);
  CHECK(sim.at(0, 1) < 1.0);
}

TEST_CASE("sim matrix file round trips and validates on load") {
  SimMatrix m(3);
  for (size_t i = 0; i < 3; ++i) m.set(i, i, 1.0);
  m.set(0, 1, 0.25);
  m.set(1, 0, 0.25);
  m.set(0, 2, -0.5);
  m.set(2, 0, -0.5);
  fs::path f = temp_file("sim_roundtrip");
  save_sim_matrix(m, f.string());
  SimMatrix back = load_sim_matrix(f.string());
  REQUIRE(back.size() == 3);
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 3; ++j)
      CHECK(back.at(i, j) == doctest::Approx(m.at(i, j)).epsilon(1e-6));
  fs::remove(f);

  SUBCASE("asymmetry is rejected") {
    SimMatrix bad(2);
    bad.set(0, 0, 1.0);
    bad.set(1, 1, 1.0);
    bad.set(0, 1, 0.4);
    bad.set(1, 0, 0.1);
    fs::path fb = temp_file("sim_asym");
    save_sim_matrix(bad, fb.string());
    CHECK_THROWS_AS(load_sim_matrix(fb.string()), DataError);
    fs::remove(fb);
  }
  SUBCASE("off-unit diagonal is rejected") {
    SimMatrix bad(2);
    bad.set(0, 0, 1.0);
    bad.set(1, 1, 0.7);
    fs::path fb = temp_file("sim_diag");
    save_sim_matrix(bad, fb.string());
    CHECK_THROWS_AS(load_sim_matrix(fb.string()), DataError);
    fs::remove(fb);
  }
  SUBCASE("wrong magic is rejected") {
    fs::path fb = temp_file("sim_magic");
    std::ofstream(fb, std::ios::binary) << "NOPE garbage";
    CHECK_THROWS_AS(load_sim_matrix(fb.string()), DataError);
    fs::remove(fb);
  }
  SUBCASE("truncated payload is rejected") {
    fs::path fb = temp_file("sim_trunc");
    save_sim_matrix(m, fb.string());
    auto sz = fs::file_size(fb);
    fs::resize_file(fb, sz - 4);
    CHECK_THROWS_AS(load_sim_matrix(fb.string()), DataError);
    fs::remove(fb);
  }
}

TEST_CASE("precomputed provider must match the text count") {
  SimMatrix m(2);
  m.set(0, 0, 1.0);
  m.set(1, 1, 1.0);
  fs::path f = temp_file("sim_size");
  save_sim_matrix(m, f.string());
  SimProvider sp;
  sp.kind = SimProvider::Kind::kPrecomputed;
  sp.path = f.string();
  CHECK_THROWS_AS(sp.build({"a", "b", "c"}), DataError);
  CHECK(sp.build({"a", "b"}).size() == 2);
  fs::remove(f);
}

TEST_CASE("threshold grouping uses direct edges without transitive chaining") {
  // three motions, one caption each; a~b and b~c exceed the cutoff, a~c not
  corpus::Dataset ds = toy_dataset({{"ca"}, {"cb"}, {"cc"}}, 4);
  SimMatrix m(3);
  for (size_t i = 0; i < 3; ++i) m.set(i, i, 1.0);
  auto link = [&](size_t i, size_t j, double v) {
    m.set(i, j, v);
    m.set(j, i, v);
  };
  link(0, 1, 0.92);
  link(1, 2, 0.92);
  link(0, 2, 0.50);
  fs::path f = temp_file("sim_chain");
  save_sim_matrix(m, f.string());

  Protocol p;
  p.kind = ProtocolKind::kThreshold;
  p.threshold_norm = 0.95;  // raw cutoff 0.90
  p.sim.kind = SimProvider::Kind::kPrecomputed;
  p.sim.path = f.string();

  CorrectSets t2m = build_correct_sets(ds, p, Direction::kT2M);
  CHECK(t2m.correct[0] == std::vector<size_t>{0, 1});     // a accepts b, not c
  CHECK(t2m.correct[1] == std::vector<size_t>{0, 1, 2});  // b accepts both
  CHECK(t2m.correct[2] == std::vector<size_t>{1, 2});

  CorrectSets m2t = build_correct_sets(ds, p, Direction::kM2T);
  CHECK(m2t.correct[0] == std::vector<size_t>{0, 1});
  CHECK(m2t.correct[1] == std::vector<size_t>{0, 1, 2});
  CHECK(m2t.correct[2] == std::vector<size_t>{1, 2});
  fs::remove(f);
}

TEST_CASE("duplicate caption text across motions makes them mutually correct") {
  corpus::Dataset ds = toy_dataset({{"walk forward"}, {"walk forward"}, {"jump"}}, 4);
  Protocol p;
  p.kind = ProtocolKind::kThreshold;
  p.threshold_norm = 0.95;
  CorrectSets t2m = build_correct_sets(ds, p, Direction::kT2M);
  CHECK(t2m.correct[0] == std::vector<size_t>{0, 1});
  CHECK(t2m.correct[1] == std::vector<size_t>{0, 1});
  CHECK(t2m.correct[2] == std::vector<size_t>{2});
}

TEST_CASE("threshold zero accepts everything, giving perfect recall") {
  corpus::Dataset ds = toy_dataset({{"aa"}, {"bb"}, {"cc"}, {"dd"}}, 4);
  model::Checkpoint ck = aligned_checkpoint(ds, 4);
  Protocol p;
  p.kind = ProtocolKind::kThreshold;
  p.threshold_norm = 0.0;
  auto [t2m, m2t] = evaluate(ck, ds, p, TextMode::kOriginal, identity_canon());
  CHECK(t2m.r1 == 100.0);
  CHECK(m2t.r1 == 100.0);
}

TEST_CASE("separable toy dataset reaches perfect recall in both directions") {
  corpus::Dataset ds =
      toy_dataset({{"alpha", "alef"}, {"beta", "bet"}, {"gamma", "gimel"}}, 8);
  model::Checkpoint ck = aligned_checkpoint(ds, 8);
  for (ProtocolKind kind : {ProtocolKind::kFull, ProtocolKind::kDsPair}) {
    Protocol p;
    p.kind = kind;
    auto [t2m, m2t] = evaluate(ck, ds, p, TextMode::kOriginal, identity_canon());
    CHECK(t2m.r1 == 100.0);
    CHECK(m2t.r1 == 100.0);
    CHECK(t2m.medr == 1.0);
    CHECK(m2t.medr == 1.0);
  }
}

TEST_CASE("identical embeddings tie everything at the middle rank") {
  corpus::Dataset ds = toy_dataset({{"same"}, {"same"}, {"same"}, {"same"}, {"same"}}, 4);
  for (auto& m : ds.motions) {
    m.features.assign(4, 0.0);
    m.features[0] = 1.0;
  }
  model::TrainConfig cfg;
  cfg.embed_dim = 4;
  cfg.featurizer.dim = 32;
  model::Checkpoint ck = model::init_checkpoint(cfg, 4);
  Rng rng(17);
  for (double& w : ck.params.w_text.data()) w = rng.normal();
  for (double& w : ck.params.w_motion.data()) w = rng.normal();

  Protocol p;
  p.kind = ProtocolKind::kFull;
  auto [t2m, m2t] = evaluate(ck, ds, p, TextMode::kOriginal, identity_canon());
  CHECK(t2m.medr == 3.0);  // (G + 1) / 2 with G = 5
  CHECK(m2t.medr == 3.0);
}

// Full vs DsPair are only comparable over shared queries and a shared
// gallery; there Full's correct sets are subsets of DsPair's, so every
// query's best-correct rank under Full is at least the DsPair one.
TEST_CASE("full recall never exceeds dspair recall on shared queries") {
  corpus::SynthSpec sp;
  sp.n_motions = 40;
  sp.k_captions = 3;
  sp.motion_dim = 16;
  sp.style_rate = 0.6;
  sp.halluc_rate = 0.3;
  sp.seed = 77;
  corpus::Dataset ds = corpus::generate_synthetic(sp);
  model::TrainConfig cfg;
  cfg.mode = model::TrainMode::kBaseline;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.embed_dim = 16;
  cfg.featurizer.dim = 256;
  cfg.base_lr = 0.05;
  canon::Canonicalizer ident;
  model::Checkpoint ck = model::train(cfg, ds, ident);

  auto midx = corpus::motion_index(ds);
  std::vector<size_t> designated(ds.motions.size(), SIZE_MAX);
  std::vector<std::vector<size_t>> own(ds.motions.size());
  for (size_t i = 0; i < ds.captions.size(); ++i) {
    size_t m = midx.at(ds.captions[i].motion_id);
    own[m].push_back(i);
    if (designated[m] == SIZE_MAX || ds.captions[i].id < ds.captions[designated[m]].id)
      designated[m] = i;
  }
  std::vector<std::string> texts;
  for (const auto& c : ds.captions) texts.push_back(c.text);
  Mat text_emb = model::embed_texts(ck.params, ck.config.featurizer, texts);
  Mat motion_emb = model::embed_motions(ck.params, ds);

  // t2m: shared queries are the designated captions, gallery is motions,
  // and both protocols mark exactly the owning motion correct.
  Mat q_t(ds.motions.size(), ck.params.w_text.cols());
  std::vector<std::vector<size_t>> corr_t(ds.motions.size());
  for (size_t m = 0; m < ds.motions.size(); ++m) {
    for (size_t j = 0; j < q_t.cols(); ++j) q_t(m, j) = text_emb(designated[m], j);
    corr_t[m] = {m};
  }
  auto ranks_full_t = rank_queries(q_t, motion_emb, corr_t);
  auto ranks_ds_t = rank_queries(q_t, motion_emb, corr_t);
  REQUIRE(ranks_full_t.size() == ranks_ds_t.size());
  for (size_t i = 0; i < ranks_full_t.size(); ++i)
    CHECK(ranks_full_t[i] == ranks_ds_t[i]);

  // m2t: motions query the full caption gallery. Full accepts only the
  // designated caption, dspair accepts any caption of the motion.
  std::vector<std::vector<size_t>> corr_full(ds.motions.size());
  std::vector<std::vector<size_t>> corr_ds(ds.motions.size());
  for (size_t m = 0; m < ds.motions.size(); ++m) {
    corr_full[m] = {designated[m]};
    corr_ds[m] = own[m];
  }
  auto ranks_full_m = rank_queries(motion_emb, text_emb, corr_full);
  auto ranks_ds_m = rank_queries(motion_emb, text_emb, corr_ds);
  for (size_t i = 0; i < ranks_full_m.size(); ++i)
    CHECK(ranks_ds_m[i] <= ranks_full_m[i]);
  for (double k : {1.0, 5.0, 10.0}) {
    CHECK(recall_at_k(ranks_full_m, k) <= recall_at_k(ranks_ds_m, k));
    CHECK(recall_at_k(ranks_full_t, k) <= recall_at_k(ranks_ds_t, k));
  }
}

TEST_CASE("lowering the threshold never lowers recall") {
  corpus::SynthSpec sp;
  sp.n_motions = 30;
  sp.k_captions = 3;
  sp.motion_dim = 16;
  sp.style_rate = 0.5;
  sp.halluc_rate = 0.4;
  sp.seed = 13;
  corpus::Dataset ds = corpus::generate_synthetic(sp);
  model::TrainConfig cfg;
  cfg.embed_dim = 8;
  cfg.featurizer.dim = 128;
  model::Checkpoint ck = model::init_checkpoint(cfg, ds.feature_dim);
  Rng rng(3);
  for (double& w : ck.params.w_text.data()) w = rng.normal();
  for (double& w : ck.params.w_motion.data()) w = rng.normal();

  canon::Canonicalizer ident;
  double prev_r1 = -1.0, prev_r5 = -1.0, prev_r10 = -1.0;
  for (double t : {0.99, 0.95, 0.80, 0.50, 0.0}) {
    Protocol p;
    p.kind = ProtocolKind::kThreshold;
    p.threshold_norm = t;
    auto [t2m, m2t] = evaluate(ck, ds, p, TextMode::kOriginal, ident);
    (void)m2t;
    CHECK(t2m.r1 >= prev_r1);
    CHECK(t2m.r5 >= prev_r5);
    CHECK(t2m.r10 >= prev_r10);
    prev_r1 = t2m.r1;
    prev_r5 = t2m.r5;
    prev_r10 = t2m.r10;
  }
}

TEST_CASE("canonical text mode routes queries through the canonicalizer") {
  corpus::Dataset ds = toy_dataset({{"a person walks", "the man walks"},
                                    {"a person jumps", "the man jumps"}},
                                   4);
  model::Checkpoint ck = aligned_checkpoint(ds, 4);
  canon::Canonicalizer stop;
  stop.kind = canon::Kind::kStopword;
  stop.wordlists = canon::WordLists::load_dir(MOCHA_ASSET_DIR "/wordlists");

  Protocol p;
  p.kind = ProtocolKind::kDsPair;
  auto [orig_t2m, orig_m2t] = evaluate(ck, ds, p, TextMode::kOriginal, stop);
  auto [can_t2m, can_m2t] = evaluate(ck, ds, p, TextMode::kCanonical, stop);
  (void)orig_m2t;
  (void)can_m2t;
  CHECK(orig_t2m.text_mode == TextMode::kOriginal);
  CHECK(can_t2m.text_mode == TextMode::kCanonical);
  // canonicalization collapses both captions of each motion to one string,
  // so the two caption queries of a motion get identical ranks
  REQUIRE(can_t2m.ranks.size() == 4);
  CHECK(can_t2m.ranks[0] == can_t2m.ranks[1]);
  CHECK(can_t2m.ranks[2] == can_t2m.ranks[3]);
}

TEST_CASE("reports carry consistent metrics and serialize to json and csv") {
  Protocol p;
  p.kind = ProtocolKind::kThreshold;
  p.threshold_norm = 0.9;
  RetrievalReport r =
      make_report(Direction::kT2M, p, TextMode::kCanonical, 7, {1, 2, 6});
  CHECK(r.n_queries == 3);
  CHECK(r.n_gallery == 7);
  CHECK(r.r1 == doctest::Approx(100.0 / 3));
  CHECK(r.r5 == doctest::Approx(200.0 / 3));
  CHECK(r.r10 == 100.0);
  CHECK(r.medr == 2.0);
  CHECK(r.r1 <= r.r5);
  CHECK(r.r5 <= r.r10);

  auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j.at("direction") == "t2m");
  CHECK(j.at("protocol") == "threshold");
  CHECK(j.at("threshold_norm") == 0.9);
  CHECK(j.at("text_mode") == "canonical");
  CHECK(j.at("recall_at_1").get<double>() == doctest::Approx(100.0 / 3));
  CHECK(j.at("median_rank").get<double>() == 2.0);
  CHECK(j.at("ranks").size() == 3);
  auto j2 = nlohmann::json::parse(report_to_json(r, false));
  CHECK_FALSE(j2.contains("ranks"));

  RetrievalReport m2t = make_report(Direction::kM2T, p, TextMode::kCanonical, 7, {3, 3});
  std::string csv = reports_to_csv(r, m2t);
  CHECK(csv.find("direction,recall_at_1,recall_at_5,recall_at_10,median_rank") !=
        std::string::npos);
  CHECK(csv.find("t2m,") != std::string::npos);
  CHECK(csv.find("m2t,") != std::string::npos);
}

TEST_CASE("string round trips for the eval enums") {
  CHECK(protocol_kind_from_string("full") == ProtocolKind::kFull);
  CHECK(protocol_kind_from_string("dspair") == ProtocolKind::kDsPair);
  CHECK(protocol_kind_from_string("threshold") == ProtocolKind::kThreshold);
  CHECK_THROWS_AS(protocol_kind_from_string("bogus"), ConfigError);
  CHECK(text_mode_from_string("original") == TextMode::kOriginal);
  CHECK(text_mode_from_string("canonical") == TextMode::kCanonical);
  CHECK_THROWS_AS(text_mode_from_string("bogus"), ConfigError);
  CHECK(std::string(to_string(ProtocolKind::kFull)) == "full");
  CHECK(std::string(to_string(Direction::kM2T)) == "m2t");
  CHECK(std::string(to_string(TextMode::kOriginal)) == "original");
}
