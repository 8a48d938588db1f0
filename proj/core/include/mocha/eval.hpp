#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mocha/canon.hpp"
#include "mocha/corpus.hpp"
#include "mocha/linalg.hpp"
#include "mocha/model.hpp"

namespace mocha::eval {

enum class ProtocolKind { kFull, kDsPair, kThreshold };
enum class Direction { kT2M, kM2T };
enum class TextMode { kOriginal, kCanonical };

const char* to_string(ProtocolKind k);
const char* to_string(Direction d);
const char* to_string(TextMode m);
ProtocolKind protocol_kind_from_string(const std::string& s);
TextMode text_mode_from_string(const std::string& s);

// Normalized threshold in [0,1] over (cos+1)/2, equivalent to a raw
// cosine cutoff of 2t - 1.
double raw_cutoff(double threshold_norm);

// Symmetric caption-caption similarity matrix.
class SimMatrix {
 public:
  SimMatrix() = default;
  explicit SimMatrix(size_t n) : n_(n), data_(n * n, 0.0) {}
  size_t size() const { return n_; }
  double at(size_t i, size_t j) const { return data_[i * n_ + j]; }
  void set(size_t i, size_t j, double v) { data_[i * n_ + j] = v; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

 private:
  size_t n_ = 0;
  std::vector<double> data_;
};

// Unigram TF-IDF (smoothed idf, L2-normalized) cosine over the given texts.
SimMatrix tfidf_cosine(const std::vector<std::string>& texts);

// Binary container: magic, format version, n, then n*n float32 row-major.
void save_sim_matrix(const SimMatrix& m, const std::string& path);
SimMatrix load_sim_matrix(const std::string& path);

struct SimProvider {
  enum class Kind { kTfidfCosine, kPrecomputed };
  Kind kind = Kind::kTfidfCosine;
  std::string path;  // precomputed only

  // For precomputed matrices the size must match the text count.
  SimMatrix build(const std::vector<std::string>& texts) const;
};

struct Protocol {
  ProtocolKind kind = ProtocolKind::kDsPair;
  double threshold_norm = 0.95;
  SimProvider sim;
};

// Query/gallery arrangement plus per-query correct gallery positions.
// Items are caption indices on the text side and motion indices on the
// motion side.
struct CorrectSets {
  Direction direction = Direction::kT2M;
  std::vector<size_t> query_items;
  std::vector<size_t> gallery_items;
  std::vector<std::vector<size_t>> correct;  // positions into gallery_items
};

CorrectSets build_correct_sets(const corpus::Dataset& ds, const Protocol& protocol,
                               Direction direction);

// Fair tie rank of the best-ranked correct item per query: the count of
// strictly greater similarities plus half-rank over the tied block.
std::vector<double> rank_queries(const linalg::Mat& e_query, const linalg::Mat& e_gallery,
                                 const std::vector<std::vector<size_t>>& correct);

double recall_at_k(const std::vector<double>& ranks, double k);
double median_rank(const std::vector<double>& ranks);

struct RetrievalReport {
  Direction direction = Direction::kT2M;
  ProtocolKind protocol = ProtocolKind::kDsPair;
  double threshold_norm = 0.0;
  TextMode text_mode = TextMode::kOriginal;
  size_t n_queries = 0;
  size_t n_gallery = 0;
  std::vector<double> ranks;
  double r1 = 0.0, r5 = 0.0, r10 = 0.0;
  double medr = 0.0;
};

RetrievalReport make_report(Direction dir, const Protocol& protocol, TextMode mode,
                            size_t n_gallery, std::vector<double> ranks);

// Embeds the dataset under the protocol and text mode and scores both
// retrieval directions.
std::pair<RetrievalReport, RetrievalReport> evaluate(const model::Checkpoint& ckpt,
                                                     const corpus::Dataset& ds,
                                                     const Protocol& protocol, TextMode mode,
                                                     const canon::Canonicalizer& canonicalizer);

std::string report_to_json(const RetrievalReport& r, bool with_ranks = true);
std::string reports_to_csv(const RetrievalReport& t2m, const RetrievalReport& m2t);

}  // namespace mocha::eval
