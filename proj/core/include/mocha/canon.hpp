#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mocha/corpus.hpp"

namespace mocha::canon {

inline constexpr const char* kPromptId = "canon_v1";

// Token lists by category, loaded from one file per category.
class WordLists {
 public:
  static const std::vector<std::string>& function_categories();
  static const std::vector<std::string>& content_categories();
  static const std::vector<std::string>& default_removal_categories();

  // Reads <dir>/VERSION plus one <category>.txt per category and checks
  // the invariants (lowercase, no whitespace, pairwise disjoint).
  static WordLists load_dir(const std::string& dir);

  bool empty() const { return categories_.empty(); }
  int version() const { return version_; }
  const std::set<std::string>& category(const std::string& name) const;
  bool contains(const std::string& category, const std::string& token) const;
  // Categories are disjoint, so a token maps to at most one.
  std::optional<std::string> category_of(const std::string& token) const;

 private:
  std::map<std::string, std::set<std::string>> categories_;
  int version_ = 0;
};

struct EndpointConfig {
  std::string url;
  int timeout_ms = 5000;
  int max_retries = 2;
  size_t batch_size = 16;
};

// original -> canonical map with optional write-through JSONL backing.
class CanonCache {
 public:
  CanonCache() = default;

  // Binds to the file and loads it when present.
  static std::shared_ptr<CanonCache> open(const std::string& path);

  std::optional<std::string> lookup(const std::string& original) const;
  void put(const std::string& original, const std::string& canonical);
  size_t size() const;

 private:
  static std::string trim(const std::string& s);

  mutable std::mutex mu_;
  std::map<std::string, std::string> map_;
  std::string path_;
};

enum class Kind { kIdentity, kStopword, kOracle, kCached, kRemote };

const char* to_string(Kind k);
Kind kind_from_string(const std::string& s);

struct Canonicalizer {
  Kind kind = Kind::kIdentity;
  WordLists wordlists;
  std::vector<std::string> removal_categories = WordLists::default_removal_categories();
  std::shared_ptr<CanonCache> cache;
  EndpointConfig endpoint;
};

// Rule-based canonicalization: lowercase, strip punctuation, drop tokens in
// the removal categories, join the rest with single spaces.
std::string canon_stopword(const WordLists& wl,
                           const std::vector<std::string>& removal_categories,
                           const std::string& text);

std::string canon_oracle(const corpus::LatentAtoms& latents);

// Cache-first batched remote canonicalization; responses are written
// through to the cache and output order follows the input.
std::vector<std::string> canon_remote(const EndpointConfig& cfg, CanonCache& cache,
                                      const std::vector<std::string>& texts);

// Kind dispatch for plain text. The oracle kind needs latents and is only
// reachable through canonicalize_caption.
std::string canonicalize(const Canonicalizer& c, const std::string& text);

std::string canonicalize_caption(const Canonicalizer& c, const corpus::Caption& caption);

struct ModificationStats {
  size_t n_total = 0;
  size_t n_modified = 0;
  double modified_fraction = 0.0;
  std::map<std::string, size_t> removed_by_category;  // includes "other"
  std::map<std::string, size_t> removed_counts;       // token -> occurrences
  // per-motion count of distinct canonical strings -> number of motions
  std::map<size_t, size_t> unique_canonical_histogram;

  std::vector<std::pair<std::string, size_t>> top_removed(size_t k) const;
};

// Canonical twin of the dataset: one canonical caption per original, same
// ids and motions.
std::pair<corpus::Dataset, ModificationStats> canonicalize_dataset(
    const corpus::Dataset& ds, const Canonicalizer& c);

}  // namespace mocha::canon
