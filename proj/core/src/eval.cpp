#include "mocha/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "mocha/errors.hpp"
#include "mocha/stats.hpp"
#include "mocha/text.hpp"

namespace mocha::eval {

namespace {

constexpr char kSimMagic[4] = {'M', 'S', 'I', 'M'};
constexpr uint32_t kSimVersion = 1;
constexpr double kSimSymTol = 1e-6;

struct SparseDoc {
  std::vector<std::pair<uint32_t, double>> w;  // sorted by index
};

double sparse_dot(const SparseDoc& a, const SparseDoc& b) {
  double s = 0.0;
  size_t i = 0, j = 0;
  while (i < a.w.size() && j < b.w.size()) {
    if (a.w[i].first == b.w[j].first) {
      s += a.w[i].second * b.w[j].second;
      ++i;
      ++j;
    } else if (a.w[i].first < b.w[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  return s;
}

std::vector<std::string> doc_tokens(const std::string& text) {
  return text::tokenize(text::strip_punct(text::lower(text)));
}

// Lexicographically smallest caption id per motion.
std::vector<size_t> designated_captions(const corpus::Dataset& ds) {
  auto caps_of = corpus::captions_of(ds);
  std::vector<size_t> out;
  out.reserve(ds.motions.size());
  for (size_t i = 0; i < ds.motions.size(); ++i) {
    if (caps_of[i].empty())
      throw DataError("motion " + ds.motions[i].id + " has no captions");
    size_t best = caps_of[i][0];
    for (size_t c : caps_of[i])
      if (ds.captions[c].id < ds.captions[best].id) best = c;
    out.push_back(best);
  }
  return out;
}

std::vector<size_t> iota_items(size_t n) {
  std::vector<size_t> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

linalg::Mat select_rows(const linalg::Mat& m, const std::vector<size_t>& items) {
  linalg::Mat out(items.size(), m.cols());
  for (size_t i = 0; i < items.size(); ++i)
    std::copy(m.row(items[i]), m.row(items[i]) + m.cols(), out.row(i));
  return out;
}

}  // namespace

const char* to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::kFull:
      return "full";
    case ProtocolKind::kDsPair:
      return "dspair";
    case ProtocolKind::kThreshold:
      return "threshold";
  }
  return "unknown";
}

const char* to_string(Direction d) { return d == Direction::kT2M ? "t2m" : "m2t"; }

const char* to_string(TextMode m) {
  return m == TextMode::kOriginal ? "original" : "canonical";
}

ProtocolKind protocol_kind_from_string(const std::string& s) {
  if (s == "full") return ProtocolKind::kFull;
  if (s == "dspair") return ProtocolKind::kDsPair;
  if (s == "threshold") return ProtocolKind::kThreshold;
  throw ConfigError("unknown protocol kind: " + s);
}

TextMode text_mode_from_string(const std::string& s) {
  if (s == "original") return TextMode::kOriginal;
  if (s == "canonical") return TextMode::kCanonical;
  throw ConfigError("unknown text mode: " + s);
}

double raw_cutoff(double threshold_norm) { return 2.0 * threshold_norm - 1.0; }

SimMatrix tfidf_cosine(const std::vector<std::string>& texts) {
  const size_t n = texts.size();
  std::map<std::string, uint32_t> vocab;
  std::vector<std::vector<std::string>> toks(n);
  for (size_t i = 0; i < n; ++i) {
    toks[i] = doc_tokens(texts[i]);
    for (const auto& t : toks[i]) vocab.emplace(t, 0);
  }
  uint32_t next = 0;
  for (auto& [tok, id] : vocab) id = next++;

  std::vector<size_t> df(vocab.size(), 0);
  std::vector<std::map<uint32_t, size_t>> tf(n);
  for (size_t i = 0; i < n; ++i) {
    for (const auto& t : toks[i]) ++tf[i][vocab[t]];
    for (const auto& [id, cnt] : tf[i]) ++df[id];
  }

  std::vector<double> idf(vocab.size());
  for (size_t id = 0; id < vocab.size(); ++id)
    idf[id] = std::log((1.0 + static_cast<double>(n)) / (1.0 + static_cast<double>(df[id]))) +
              1.0;

  std::vector<SparseDoc> docs(n);
  for (size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (const auto& [id, cnt] : tf[i]) {
      double w = static_cast<double>(cnt) * idf[id];
      docs[i].w.emplace_back(id, w);
      sq += w * w;
    }
    if (sq > 0.0) {
      double inv = 1.0 / std::sqrt(sq);
      for (auto& [id, w] : docs[i].w) w *= inv;
    }
  }

  SimMatrix s(n);
  for (size_t i = 0; i < n; ++i) {
    s.set(i, i, 1.0);
    for (size_t j = i + 1; j < n; ++j) {
      double v = sparse_dot(docs[i], docs[j]);
      s.set(i, j, v);
      s.set(j, i, v);
    }
  }
  return s;
}

void save_sim_matrix(const SimMatrix& m, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write similarity matrix: " + path);
  f.write(kSimMagic, 4);
  uint32_t ver = kSimVersion;
  f.write(reinterpret_cast<const char*>(&ver), sizeof ver);
  uint64_t n = m.size();
  f.write(reinterpret_cast<const char*>(&n), sizeof n);
  std::vector<float> buf(m.data().size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(m.data()[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw DataError("short write on similarity matrix: " + path);
}

SimMatrix load_sim_matrix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open similarity matrix: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kSimMagic, 4) != 0)
    throw DataError("bad similarity matrix magic in " + path);
  uint32_t ver = 0;
  f.read(reinterpret_cast<char*>(&ver), sizeof ver);
  if (!f || ver != kSimVersion)
    throw DataError("unsupported similarity matrix version in " + path);
  uint64_t n = 0;
  f.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!f) throw DataError("truncated similarity matrix header in " + path);
  std::vector<float> buf(n * n);
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw DataError("truncated similarity matrix payload in " + path);

  SimMatrix m(n);
  for (size_t i = 0; i < buf.size(); ++i) m.data()[i] = static_cast<double>(buf[i]);
  for (size_t i = 0; i < n; ++i) {
    if (std::fabs(m.at(i, i) - 1.0) > kSimSymTol)
      throw DataError("similarity matrix diagonal is not 1 at row " +
                              std::to_string(i));
    for (size_t j = i + 1; j < n; ++j)
      if (std::fabs(m.at(i, j) - m.at(j, i)) > kSimSymTol)
        throw DataError("similarity matrix is not symmetric at (" +
                                std::to_string(i) + "," + std::to_string(j) + ")");
  }
  return m;
}

SimMatrix SimProvider::build(const std::vector<std::string>& texts) const {
  if (kind == Kind::kTfidfCosine) return tfidf_cosine(texts);
  SimMatrix m = load_sim_matrix(path);
  if (m.size() != texts.size())
    throw DataError("similarity matrix size " + std::to_string(m.size()) +
                            " does not match caption count " + std::to_string(texts.size()));
  return m;
}

CorrectSets build_correct_sets(const corpus::Dataset& ds, const Protocol& protocol,
                               Direction direction) {
  CorrectSets cs;
  cs.direction = direction;
  auto caps_of = corpus::captions_of(ds);
  auto midx = corpus::motion_index(ds);
  const size_t n_motions = ds.motions.size();
  const size_t n_captions = ds.captions.size();

  switch (protocol.kind) {
    case ProtocolKind::kFull: {
      auto designated = designated_captions(ds);
      if (direction == Direction::kT2M) {
        cs.query_items = designated;
        cs.gallery_items = iota_items(n_motions);
        for (size_t i = 0; i < n_motions; ++i) cs.correct.push_back({i});
      } else {
        cs.query_items = iota_items(n_motions);
        cs.gallery_items = designated;
        for (size_t i = 0; i < n_motions; ++i) cs.correct.push_back({i});
      }
      break;
    }
    case ProtocolKind::kDsPair: {
      if (direction == Direction::kT2M) {
        cs.query_items = iota_items(n_captions);
        cs.gallery_items = iota_items(n_motions);
        for (size_t c = 0; c < n_captions; ++c)
          cs.correct.push_back({midx.at(ds.captions[c].motion_id)});
      } else {
        cs.query_items = iota_items(n_motions);
        cs.gallery_items = iota_items(n_captions);
        for (size_t i = 0; i < n_motions; ++i) {
          if (caps_of[i].empty())
            throw DataError("motion " + ds.motions[i].id + " has no captions");
          cs.correct.push_back(caps_of[i]);
        }
      }
      break;
    }
    case ProtocolKind::kThreshold: {
      std::vector<std::string> texts;
      texts.reserve(n_captions);
      for (const auto& c : ds.captions) texts.push_back(c.text);
      SimMatrix sim = protocol.sim.build(texts);
      const double cutoff = raw_cutoff(protocol.threshold_norm);
      if (direction == Direction::kT2M) {
        cs.query_items = iota_items(n_captions);
        cs.gallery_items = iota_items(n_motions);
        for (size_t c = 0; c < n_captions; ++c) {
          std::vector<char> ok(n_motions, 0);
          ok[midx.at(ds.captions[c].motion_id)] = 1;
          for (size_t j = 0; j < n_captions; ++j)
            if (sim.at(c, j) >= cutoff) ok[midx.at(ds.captions[j].motion_id)] = 1;
          std::vector<size_t> cor;
          for (size_t i = 0; i < n_motions; ++i)
            if (ok[i]) cor.push_back(i);
          cs.correct.push_back(std::move(cor));
        }
      } else {
        cs.query_items = iota_items(n_motions);
        cs.gallery_items = iota_items(n_captions);
        for (size_t i = 0; i < n_motions; ++i) {
          std::vector<char> ok(n_captions, 0);
          for (size_t c : caps_of[i]) {
            ok[c] = 1;
            for (size_t j = 0; j < n_captions; ++j)
              if (sim.at(c, j) >= cutoff) ok[j] = 1;
          }
          std::vector<size_t> cor;
          for (size_t j = 0; j < n_captions; ++j)
            if (ok[j]) cor.push_back(j);
          cs.correct.push_back(std::move(cor));
        }
      }
      break;
    }
  }
  return cs;
}

std::vector<double> rank_queries(const linalg::Mat& e_query, const linalg::Mat& e_gallery,
                                 const std::vector<std::vector<size_t>>& correct) {
  if (e_query.rows() != correct.size())
    throw DataError("rank_queries: query/correct size mismatch");
  if (e_query.cols() != e_gallery.cols())
    throw DataError("rank_queries: embedding width mismatch");
  const size_t g = e_gallery.rows();
  std::vector<double> ranks;
  ranks.reserve(e_query.rows());
  std::vector<double> sims(g);
  for (size_t q = 0; q < e_query.rows(); ++q) {
    for (size_t j = 0; j < g; ++j)
      sims[j] = linalg::dot(e_query.row(q), e_gallery.row(j), e_query.cols());
    if (correct[q].empty()) throw DataError("rank_queries: empty correct set");
    double best = -std::numeric_limits<double>::infinity();
    for (size_t j : correct[q]) {
      if (j >= g) throw DataError("rank_queries: correct index out of range");
      best = std::max(best, sims[j]);
    }
    size_t greater = 0, ties = 0;
    for (size_t j = 0; j < g; ++j) {
      if (sims[j] > best)
        ++greater;
      else if (sims[j] == best)
        ++ties;
    }
    ranks.push_back(static_cast<double>(greater) + (static_cast<double>(ties) + 1.0) / 2.0);
  }
  return ranks;
}

double recall_at_k(const std::vector<double>& ranks, double k) {
  if (ranks.empty()) return 0.0;
  size_t hits = 0;
  for (double r : ranks)
    if (r <= k) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double median_rank(const std::vector<double>& ranks) { return stats::median(ranks); }

RetrievalReport make_report(Direction dir, const Protocol& protocol, TextMode mode,
                            size_t n_gallery, std::vector<double> ranks) {
  RetrievalReport r;
  r.direction = dir;
  r.protocol = protocol.kind;
  r.threshold_norm = protocol.kind == ProtocolKind::kThreshold ? protocol.threshold_norm : 0.0;
  r.text_mode = mode;
  r.n_queries = ranks.size();
  r.n_gallery = n_gallery;
  r.r1 = recall_at_k(ranks, 1.0);
  r.r5 = recall_at_k(ranks, 5.0);
  r.r10 = recall_at_k(ranks, 10.0);
  r.medr = ranks.empty() ? 0.0 : median_rank(ranks);
  r.ranks = std::move(ranks);
  return r;
}

std::pair<RetrievalReport, RetrievalReport> evaluate(const model::Checkpoint& ckpt,
                                                     const corpus::Dataset& ds,
                                                     const Protocol& protocol, TextMode mode,
                                                     const canon::Canonicalizer& canonicalizer) {
  std::vector<std::string> texts;
  texts.reserve(ds.captions.size());
  for (const auto& c : ds.captions)
    texts.push_back(mode == TextMode::kOriginal ? c.text
                                                : canon::canonicalize_caption(canonicalizer, c));
  linalg::Mat e_text = model::embed_texts(ckpt.params, ckpt.config.featurizer, texts);
  linalg::Mat e_motion = model::embed_motions(ckpt.params, ds);

  auto run = [&](Direction dir) {
    CorrectSets cs = build_correct_sets(ds, protocol, dir);
    const linalg::Mat& qsrc = dir == Direction::kT2M ? e_text : e_motion;
    const linalg::Mat& gsrc = dir == Direction::kT2M ? e_motion : e_text;
    linalg::Mat q = select_rows(qsrc, cs.query_items);
    linalg::Mat g = select_rows(gsrc, cs.gallery_items);
    auto ranks = rank_queries(q, g, cs.correct);
    return make_report(dir, protocol, mode, g.rows(), std::move(ranks));
  };
  return {run(Direction::kT2M), run(Direction::kM2T)};
}

std::string report_to_json(const RetrievalReport& r, bool with_ranks) {
  nlohmann::json j;
  j["direction"] = to_string(r.direction);
  j["protocol"] = to_string(r.protocol);
  if (r.protocol == ProtocolKind::kThreshold) j["threshold_norm"] = r.threshold_norm;
  j["text_mode"] = to_string(r.text_mode);
  j["n_queries"] = r.n_queries;
  j["n_gallery"] = r.n_gallery;
  j["recall_at_1"] = r.r1;
  j["recall_at_5"] = r.r5;
  j["recall_at_10"] = r.r10;
  j["median_rank"] = r.medr;
  if (with_ranks) j["ranks"] = r.ranks;
  return j.dump(2);
}

std::string reports_to_csv(const RetrievalReport& t2m, const RetrievalReport& m2t) {
  std::ostringstream os;
  os << "direction,recall_at_1,recall_at_5,recall_at_10,median_rank\n";
  os << std::setprecision(17);
  for (const RetrievalReport* r : {&t2m, &m2t}) {
    os << to_string(r->direction) << ',' << r->r1 << ',' << r->r5 << ',' << r->r10 << ','
       << r->medr << '\n';
  }
  return os.str();
}

}  // namespace mocha::eval
