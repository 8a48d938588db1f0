#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mocha/canon.hpp"
#include "mocha/corpus.hpp"
#include "mocha/eval.hpp"
#include "mocha/stats.hpp"

namespace mocha::lingstats {

// Survival tracks four content categories and five function categories;
// hedges and subjects stay out of the function aggregate.
const std::vector<std::string>& survival_content_categories();
const std::vector<std::string>& survival_function_categories();

// Category of a token: exact list membership first, then action verbs by
// stripping one of the suffixes s/ed/ing.
std::optional<std::string> categorize(const canon::WordLists& wl, const std::string& token);

struct CategoryCount {
  size_t total = 0;
  size_t survived = 0;
  std::optional<double> rate_pct() const;  // empty when the category is absent
};

struct SurvivalReport {
  std::map<std::string, CategoryCount> categories;  // the nine survival categories
  std::optional<double> content_rate_pct;
  std::optional<double> function_rate_pct;
  std::optional<double> selectivity;  // empty when the function rate is 0 or absent
  bool function_rate_zero = false;
  size_t n_pairs = 0;
};

SurvivalReport pos_survival(const std::vector<std::string>& original,
                            const std::vector<std::string>& canonical,
                            const canon::WordLists& wl);

struct StripInventory {
  std::map<std::string, size_t> removed_by_category;  // all wordlist categories + "other"
  std::map<std::string, size_t> removed_counts;       // token -> occurrences removed
  size_t total_removed = 0;
  size_t n_pairs = 0;

  std::vector<std::pair<std::string, size_t>> top_removed(size_t k) const;
};

StripInventory strip_inventory(const std::vector<std::string>& original,
                               const std::vector<std::string>& canonical,
                               const canon::WordLists& wl);

struct CollisionMember {
  std::string motion_id;
  std::string caption_id;
  size_t caption_index = 0;  // position in the dataset caption list
};

struct CollisionGroup {
  std::string canonical;
  std::vector<CollisionMember> members;
  size_t n_distinct_motions = 0;
};

// Exact-string groups over canonical captions spanning >= 2 distinct
// motions, ordered by canonical text.
std::vector<CollisionGroup> collision_groups(const corpus::Dataset& canonical_ds);

struct CollisionReport {
  size_t n_groups = 0;
  std::vector<std::pair<double, double>> benign_rate_pct;  // (threshold, rate)
  double mean_max_sim = 0.0;
  std::vector<double> per_group_max_sim;
};

// Max cross-motion similarity between the original captions of each group,
// judged benign at tau when it reaches the raw cutoff 2*tau - 1. The
// original dataset supplies the caption texts behind the group indices.
CollisionReport collision_benignity(const std::vector<CollisionGroup>& groups,
                                    const corpus::Dataset& original_ds,
                                    const eval::SimProvider& sim,
                                    const std::vector<double>& thresholds = {0.95, 0.90,
                                                                             0.85});

struct LengthBin {
  std::string label;
  size_t lo = 0;
  size_t hi = 0;  // inclusive; 0 means unbounded
  size_t n = 0;
  double r1_base = 0.0;
  double r1_treat = 0.0;
  double delta_pp = 0.0;
};

struct LengthGainReport {
  std::vector<LengthBin> bins;  // short 1-6, medium 7-12, long 13+
  stats::Pearson pearson;       // word count vs per-query hit change
  size_t n_queries = 0;
};

LengthGainReport length_gain(const eval::RetrievalReport& base,
                             const eval::RetrievalReport& treat,
                             const std::vector<std::string>& captions);

std::string to_json(const SurvivalReport& r);
std::string to_json(const StripInventory& r);
std::string to_json(const std::vector<CollisionGroup>& groups);
std::string to_json(const CollisionReport& r);
std::string to_json(const LengthGainReport& r);

std::string to_csv(const SurvivalReport& r);
std::string to_csv(const CollisionReport& r);
std::string to_csv(const LengthGainReport& r);

}  // namespace mocha::lingstats
