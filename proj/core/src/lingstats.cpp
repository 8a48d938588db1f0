#include "mocha/lingstats.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mocha/errors.hpp"
#include "mocha/text.hpp"

namespace mocha::lingstats {

namespace {

const std::vector<std::string> kContent = {"action_verbs", "body_parts", "directions",
                                           "manner_adverbs"};
const std::vector<std::string> kFunction = {"determiners", "pronouns", "prepositions",
                                            "conjunctions", "discourse_markers"};
const std::vector<std::string> kVerbSuffixes = {"s", "ed", "ing"};

std::vector<std::string> caption_tokens(const std::string& s) {
  return text::tokenize(text::strip_punct(text::lower(s)));
}

std::set<std::string> token_set(const std::string& s) {
  auto toks = caption_tokens(s);
  return {toks.begin(), toks.end()};
}

bool is_content(const std::string& cat) {
  return std::find(kContent.begin(), kContent.end(), cat) != kContent.end();
}

bool is_function(const std::string& cat) {
  return std::find(kFunction.begin(), kFunction.end(), cat) != kFunction.end();
}

void check_aligned(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size())
    throw DataError("caption lists are misaligned: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
}

}  // namespace

const std::vector<std::string>& survival_content_categories() { return kContent; }
const std::vector<std::string>& survival_function_categories() { return kFunction; }

std::optional<std::string> categorize(const canon::WordLists& wl, const std::string& token) {
  if (auto cat = wl.category_of(token)) return cat;
  for (const auto& suf : kVerbSuffixes) {
    if (token.size() > suf.size() && token.ends_with(suf)) {
      std::string stem = token.substr(0, token.size() - suf.size());
      if (wl.contains("action_verbs", stem)) return std::string("action_verbs");
    }
  }
  return std::nullopt;
}

std::optional<double> CategoryCount::rate_pct() const {
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(survived) / static_cast<double>(total);
}

SurvivalReport pos_survival(const std::vector<std::string>& original,
                            const std::vector<std::string>& canonical,
                            const canon::WordLists& wl) {
  check_aligned(original, canonical);
  SurvivalReport rep;
  rep.n_pairs = original.size();
  for (const auto& cat : kContent) rep.categories[cat];
  for (const auto& cat : kFunction) rep.categories[cat];

  for (size_t i = 0; i < original.size(); ++i) {
    auto canon_set = token_set(canonical[i]);
    for (const auto& tok : caption_tokens(original[i])) {
      auto cat = categorize(wl, tok);
      if (!cat || (!is_content(*cat) && !is_function(*cat))) continue;
      auto& cc = rep.categories[*cat];
      ++cc.total;
      if (canon_set.count(tok)) ++cc.survived;
    }
  }

  size_t ct = 0, cs = 0, ft = 0, fs = 0;
  for (const auto& cat : kContent) {
    ct += rep.categories[cat].total;
    cs += rep.categories[cat].survived;
  }
  for (const auto& cat : kFunction) {
    ft += rep.categories[cat].total;
    fs += rep.categories[cat].survived;
  }
  if (ct > 0) rep.content_rate_pct = 100.0 * static_cast<double>(cs) / static_cast<double>(ct);
  if (ft > 0) rep.function_rate_pct = 100.0 * static_cast<double>(fs) / static_cast<double>(ft);
  if (rep.function_rate_pct && *rep.function_rate_pct > 0.0 && rep.content_rate_pct)
    rep.selectivity = *rep.content_rate_pct / *rep.function_rate_pct;
  else
    rep.function_rate_zero = true;
  return rep;
}

StripInventory strip_inventory(const std::vector<std::string>& original,
                               const std::vector<std::string>& canonical,
                               const canon::WordLists& wl) {
  check_aligned(original, canonical);
  StripInventory inv;
  inv.n_pairs = original.size();
  for (size_t i = 0; i < original.size(); ++i) {
    auto canon_set = token_set(canonical[i]);
    for (const auto& tok : caption_tokens(original[i])) {
      if (canon_set.count(tok)) continue;
      auto cat = categorize(wl, tok);
      ++inv.removed_by_category[cat ? *cat : "other"];
      ++inv.removed_counts[tok];
      ++inv.total_removed;
    }
  }
  return inv;
}

std::vector<std::pair<std::string, size_t>> StripInventory::top_removed(size_t k) const {
  std::vector<std::pair<std::string, size_t>> all(removed_counts.begin(), removed_counts.end());
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

std::vector<CollisionGroup> collision_groups(const corpus::Dataset& canonical_ds) {
  std::map<std::string, std::vector<size_t>> by_text;
  for (size_t i = 0; i < canonical_ds.captions.size(); ++i)
    by_text[canonical_ds.captions[i].text].push_back(i);

  std::vector<CollisionGroup> groups;
  for (const auto& [txt, idx] : by_text) {
    std::set<std::string> motions;
    for (size_t i : idx) motions.insert(canonical_ds.captions[i].motion_id);
    if (motions.size() < 2) continue;
    CollisionGroup g;
    g.canonical = txt;
    g.n_distinct_motions = motions.size();
    for (size_t i : idx)
      g.members.push_back({canonical_ds.captions[i].motion_id, canonical_ds.captions[i].id, i});
    groups.push_back(std::move(g));
  }
  return groups;
}

CollisionReport collision_benignity(const std::vector<CollisionGroup>& groups,
                                    const corpus::Dataset& original_ds,
                                    const eval::SimProvider& sim,
                                    const std::vector<double>& thresholds) {
  CollisionReport rep;
  rep.n_groups = groups.size();
  if (groups.empty()) {
    // No collisions to judge: vacuously benign.
    for (double t : thresholds) rep.benign_rate_pct.emplace_back(t, 100.0);
    return rep;
  }

  std::vector<std::string> texts;
  texts.reserve(original_ds.captions.size());
  for (const auto& c : original_ds.captions) texts.push_back(c.text);
  eval::SimMatrix m = sim.build(texts);

  for (const auto& g : groups) {
    double best = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < g.members.size(); ++a)
      for (size_t b = a + 1; b < g.members.size(); ++b) {
        if (g.members[a].motion_id == g.members[b].motion_id) continue;
        size_t ia = g.members[a].caption_index, ib = g.members[b].caption_index;
        if (ia >= m.size() || ib >= m.size())
          throw DataError("collision_benignity: caption index outside similarity matrix");
        best = std::max(best, m.at(ia, ib));
      }
    rep.per_group_max_sim.push_back(best);
  }
  rep.mean_max_sim = stats::mean(rep.per_group_max_sim);
  for (double t : thresholds) {
    double cutoff = eval::raw_cutoff(t);
    size_t benign = 0;
    for (double s : rep.per_group_max_sim)
      if (s >= cutoff) ++benign;
    rep.benign_rate_pct.emplace_back(
        t, 100.0 * static_cast<double>(benign) / static_cast<double>(rep.n_groups));
  }
  return rep;
}

LengthGainReport length_gain(const eval::RetrievalReport& base,
                             const eval::RetrievalReport& treat,
                             const std::vector<std::string>& captions) {
  if (base.ranks.size() != treat.ranks.size() || base.ranks.size() != captions.size())
    throw DataError("length_gain: reports and captions are not over the same query set");

  LengthGainReport rep;
  rep.n_queries = captions.size();
  rep.bins = {{"short", 1, 6, 0, 0, 0, 0}, {"medium", 7, 12, 0, 0, 0, 0},
              {"long", 13, 0, 0, 0, 0, 0}};

  std::vector<size_t> hits_base(rep.bins.size(), 0), hits_treat(rep.bins.size(), 0);
  std::vector<double> x, y;
  for (size_t i = 0; i < captions.size(); ++i) {
    size_t wc = caption_tokens(captions[i]).size();
    size_t b = wc <= 6 ? 0 : wc <= 12 ? 1 : 2;
    bool hb = base.ranks[i] <= 1.0, ht = treat.ranks[i] <= 1.0;
    ++rep.bins[b].n;
    if (hb) ++hits_base[b];
    if (ht) ++hits_treat[b];
    x.push_back(static_cast<double>(wc));
    y.push_back(static_cast<double>(ht) - static_cast<double>(hb));
  }
  for (size_t b = 0; b < rep.bins.size(); ++b) {
    if (rep.bins[b].n == 0) continue;
    double n = static_cast<double>(rep.bins[b].n);
    rep.bins[b].r1_base = 100.0 * static_cast<double>(hits_base[b]) / n;
    rep.bins[b].r1_treat = 100.0 * static_cast<double>(hits_treat[b]) / n;
    rep.bins[b].delta_pp = rep.bins[b].r1_treat - rep.bins[b].r1_base;
  }
  rep.pearson = stats::pearson(x, y);
  return rep;
}

namespace {

nlohmann::json category_json(const CategoryCount& c) {
  nlohmann::json j;
  j["total"] = c.total;
  j["survived"] = c.survived;
  if (auto r = c.rate_pct())
    j["rate_pct"] = *r;
  else
    j["rate_pct"] = nullptr;
  return j;
}

}  // namespace

std::string to_json(const SurvivalReport& r) {
  nlohmann::json j;
  for (const auto& [cat, c] : r.categories) j["categories"][cat] = category_json(c);
  j["content_rate_pct"] = r.content_rate_pct ? nlohmann::json(*r.content_rate_pct) : nullptr;
  j["function_rate_pct"] = r.function_rate_pct ? nlohmann::json(*r.function_rate_pct) : nullptr;
  j["selectivity"] = r.selectivity ? nlohmann::json(*r.selectivity) : nullptr;
  j["function_rate_zero"] = r.function_rate_zero;
  j["n_pairs"] = r.n_pairs;
  return j.dump(2);
}

std::string to_json(const StripInventory& r) {
  nlohmann::json j;
  j["removed_by_category"] = r.removed_by_category;
  j["removed_counts"] = r.removed_counts;
  j["total_removed"] = r.total_removed;
  j["n_pairs"] = r.n_pairs;
  nlohmann::json top = nlohmann::json::array();
  for (const auto& [tok, n] : r.top_removed(5)) top.push_back({{"token", tok}, {"count", n}});
  j["top_removed"] = top;
  return j.dump(2);
}

std::string to_json(const std::vector<CollisionGroup>& groups) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& g : groups) {
    nlohmann::json jg;
    jg["canonical"] = g.canonical;
    jg["n_distinct_motions"] = g.n_distinct_motions;
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : g.members)
      members.push_back({{"motion_id", m.motion_id},
                         {"caption_id", m.caption_id},
                         {"caption_index", m.caption_index}});
    jg["members"] = members;
    j.push_back(jg);
  }
  return j.dump(2);
}

std::string to_json(const CollisionReport& r) {
  nlohmann::json j;
  j["n_groups"] = r.n_groups;
  nlohmann::json rates = nlohmann::json::array();
  for (const auto& [t, rate] : r.benign_rate_pct)
    rates.push_back({{"threshold", t}, {"benign_rate_pct", rate}});
  j["benign_rates"] = rates;
  j["mean_max_sim"] = r.mean_max_sim;
  j["per_group_max_sim"] = r.per_group_max_sim;
  return j.dump(2);
}

std::string to_json(const LengthGainReport& r) {
  nlohmann::json j;
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : r.bins)
    bins.push_back({{"label", b.label},
                    {"lo", b.lo},
                    {"hi", b.hi},
                    {"n", b.n},
                    {"r1_base", b.r1_base},
                    {"r1_treat", b.r1_treat},
                    {"delta_pp", b.delta_pp}});
  j["bins"] = bins;
  j["pearson_r"] = r.pearson.r;
  j["pearson_p"] = r.pearson.p;
  j["pearson_degenerate"] = r.pearson.degenerate;
  j["n_queries"] = r.n_queries;
  return j.dump(2);
}

std::string to_csv(const SurvivalReport& r) {
  std::ostringstream h, v;
  v << std::setprecision(17);
  bool first = true;
  auto cell = [&](const std::string& name, const std::optional<double>& val) {
    if (!first) {
      h << ',';
      v << ',';
    }
    first = false;
    h << name;
    if (val)
      v << *val;
    else
      v << "na";
  };
  for (const auto& [cat, c] : r.categories) cell(cat, c.rate_pct());
  cell("content_rate", r.content_rate_pct);
  cell("function_rate", r.function_rate_pct);
  cell("selectivity", r.selectivity);
  return h.str() + "\n" + v.str() + "\n";
}

std::string to_csv(const CollisionReport& r) {
  std::ostringstream h, v;
  v << std::setprecision(17);
  h << "n_groups";
  v << r.n_groups;
  for (const auto& [t, rate] : r.benign_rate_pct) {
    h << ",benign_at_" << t;
    v << ',' << rate;
  }
  h << ",mean_max_sim";
  v << ',' << r.mean_max_sim;
  return h.str() + "\n" + v.str() + "\n";
}

std::string to_csv(const LengthGainReport& r) {
  std::ostringstream h, v;
  v << std::setprecision(17);
  bool first = true;
  for (const auto& b : r.bins) {
    if (!first) {
      h << ',';
      v << ',';
    }
    first = false;
    h << b.label << "_n," << b.label << "_r1_base," << b.label << "_r1_treat," << b.label
      << "_delta_pp";
    v << b.n << ',' << b.r1_base << ',' << b.r1_treat << ',' << b.delta_pp;
  }
  h << ",pearson_r,pearson_p";
  v << ',' << r.pearson.r << ',' << r.pearson.p;
  return h.str() + "\n" + v.str() + "\n";
}

}  // namespace mocha::lingstats
