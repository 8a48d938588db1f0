#include "mocha/canon.hpp"

#include <algorithm>
#include <fstream>

#include "httplib.h"
#include "json.hpp"
#include "mocha/errors.hpp"
#include "mocha/text.hpp"

using nlohmann::json;

namespace mocha::canon {

namespace {

const std::vector<std::string> kFunctionCategories = {
    "determiners", "pronouns", "prepositions",   "conjunctions",
    "discourse_markers", "hedges", "subjects"};
const std::vector<std::string> kContentCategories = {
    "action_verbs", "body_parts", "directions", "manner_adverbs"};
const std::vector<std::string> kDefaultRemoval = {
    "determiners", "pronouns", "discourse_markers", "hedges", "subjects"};

std::string nonempty_or_lower(const std::string& canonical, const std::string& original) {
  if (!canonical.empty()) return canonical;
  return text::lower(original);
}

struct ParsedUrl {
  std::string base;  // scheme://host:port
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("endpoint url missing scheme: \"" + url + "\"");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

const std::vector<std::string>& WordLists::function_categories() {
  return kFunctionCategories;
}
const std::vector<std::string>& WordLists::content_categories() {
  return kContentCategories;
}
const std::vector<std::string>& WordLists::default_removal_categories() {
  return kDefaultRemoval;
}

WordLists WordLists::load_dir(const std::string& dir) {
  WordLists wl;
  {
    std::ifstream vf(dir + "/VERSION");
    if (!vf) throw DataError("wordlists: cannot open \"" + dir + "/VERSION\"");
    if (!(vf >> wl.version_)) throw DataError("wordlists: VERSION must hold an integer");
  }
  auto load_file = [&](const std::string& name) {
    std::string path = dir + "/" + name + ".txt";
    std::ifstream in(path);
    if (!in) throw DataError("wordlists: cannot open \"" + path + "\"");
    std::set<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      for (char ch : line) {
        if (ch >= 'A' && ch <= 'Z')
          throw DataError("wordlists: \"" + line + "\" in " + name + " is not lowercase");
        if (ch == ' ' || ch == '\t')
          throw DataError("wordlists: \"" + line + "\" in " + name + " contains whitespace");
      }
      if (!tokens.insert(line).second)
        throw DataError("wordlists: duplicate token \"" + line + "\" in " + name);
    }
    if (tokens.empty()) throw DataError("wordlists: " + name + " is empty");
    wl.categories_.emplace(name, std::move(tokens));
  };
  for (const auto& c : kFunctionCategories) load_file(c);
  for (const auto& c : kContentCategories) load_file(c);

  std::map<std::string, std::string> seen;
  for (const auto& [cat, tokens] : wl.categories_) {
    for (const auto& t : tokens) {
      auto [it, inserted] = seen.emplace(t, cat);
      if (!inserted)
        throw DataError("wordlists: token \"" + t + "\" appears in both " + it->second +
                        " and " + cat);
    }
  }
  return wl;
}

const std::set<std::string>& WordLists::category(const std::string& name) const {
  auto it = categories_.find(name);
  if (it == categories_.end()) throw DataError("wordlists: unknown category \"" + name + "\"");
  return it->second;
}

bool WordLists::contains(const std::string& category, const std::string& token) const {
  auto it = categories_.find(category);
  return it != categories_.end() && it->second.count(token) > 0;
}

std::optional<std::string> WordLists::category_of(const std::string& token) const {
  for (const auto& [cat, tokens] : categories_)
    if (tokens.count(token)) return cat;
  return std::nullopt;
}

std::shared_ptr<CanonCache> CanonCache::open(const std::string& path) {
  auto cache = std::make_shared<CanonCache>();
  cache->path_ = path;
  std::ifstream in(path, std::ios::binary);
  if (!in) return cache;  // fresh cache, file appears on first put
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("canon cache line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("original") || !j.contains("canonical") ||
        !j["original"].is_string() || !j["canonical"].is_string())
      throw DataError("canon cache line " + std::to_string(line_no) +
                      ": expected {\"original\", \"canonical\"}");
    cache->map_[trim(j["original"].get<std::string>())] = j["canonical"].get<std::string>();
  }
  return cache;
}

std::string CanonCache::trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<std::string> CanonCache::lookup(const std::string& original) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = map_.find(trim(original));
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

void CanonCache::put(const std::string& original, const std::string& canonical) {
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = map_.insert_or_assign(trim(original), canonical);
  (void)it;
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw DataError("canon cache: cannot append to \"" + path_ + "\"");
    json j;
    j["original"] = original;
    j["canonical"] = canonical;
    out << j.dump() << '\n';
  }
}

size_t CanonCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

const char* to_string(Kind k) {
  switch (k) {
    case Kind::kIdentity: return "identity";
    case Kind::kStopword: return "stopword";
    case Kind::kOracle: return "oracle";
    case Kind::kCached: return "cached";
    case Kind::kRemote: return "remote";
  }
  return "identity";
}

Kind kind_from_string(const std::string& s) {
  if (s == "identity") return Kind::kIdentity;
  if (s == "stopword") return Kind::kStopword;
  if (s == "oracle") return Kind::kOracle;
  if (s == "cached") return Kind::kCached;
  if (s == "remote") return Kind::kRemote;
  throw ConfigError("unknown canonicalizer kind \"" + s + "\"");
}

std::string canon_stopword(const WordLists& wl,
                           const std::vector<std::string>& removal_categories,
                           const std::string& text_in) {
  std::vector<std::string> kept;
  for (auto& tok : text::tokenize(text_in)) {
    bool removed = false;
    for (const auto& cat : removal_categories) {
      if (wl.contains(cat, tok)) {
        removed = true;
        break;
      }
    }
    if (!removed) kept.push_back(std::move(tok));
  }
  return nonempty_or_lower(text::join(kept), text_in);
}

std::string canon_oracle(const corpus::LatentAtoms& latents) {
  return text::join(corpus::oracle_tokens(latents));
}

std::vector<std::string> canon_remote(const EndpointConfig& cfg, CanonCache& cache,
                                      const std::vector<std::string>& texts) {
  std::vector<std::string> out(texts.size());
  std::vector<size_t> misses;
  for (size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache.lookup(texts[i])) {
      out[i] = nonempty_or_lower(*hit, texts[i]);
    } else {
      misses.push_back(i);
    }
  }
  if (misses.empty()) return out;
  if (cfg.url.empty()) throw ConfigError("remote canonicalizer has no endpoint url");
  if (cfg.batch_size == 0) throw ConfigError("endpoint batch_size must be positive");

  ParsedUrl parsed = parse_url(cfg.url);
  httplib::Client client(parsed.base);
  client.set_connection_timeout(0, cfg.timeout_ms * 1000);
  client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);

  for (size_t start = 0; start < misses.size(); start += cfg.batch_size) {
    size_t end = std::min(misses.size(), start + cfg.batch_size);
    std::vector<size_t> batch(misses.begin() + start, misses.begin() + end);
    json body;
    body["prompt_id"] = kPromptId;
    json caps = json::array();
    for (size_t i : batch) caps.push_back(texts[i]);
    body["captions"] = std::move(caps);
    std::string payload = body.dump();

    httplib::Result res;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      res = client.Post(parsed.path, payload, "application/json");
      if (res) break;
    }
    if (!res)
      throw EndpointError("endpoint transport failure after " +
                              std::to_string(cfg.max_retries + 1) + " attempts",
                          batch);
    if (res->status != 200)
      throw EndpointError("endpoint returned status " + std::to_string(res->status), batch);
    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw EndpointError(std::string("endpoint returned invalid JSON: ") + e.what(), batch);
    }
    if (!reply.is_object() || !reply.contains("canonicals") || !reply["canonicals"].is_array())
      throw EndpointError("endpoint reply missing \"canonicals\" array", batch);
    const json& canon = reply["canonicals"];
    if (canon.size() != batch.size())
      throw EndpointError("endpoint reply length " + std::to_string(canon.size()) +
                              " != request length " + std::to_string(batch.size()),
                          batch);
    for (size_t k = 0; k < batch.size(); ++k) {
      if (!canon[k].is_string())
        throw EndpointError("endpoint reply entry is not a string", batch);
      std::string value = canon[k].get<std::string>();
      cache.put(texts[batch[k]], value);
      out[batch[k]] = nonempty_or_lower(value, texts[batch[k]]);
    }
  }
  return out;
}

std::string canonicalize(const Canonicalizer& c, const std::string& text_in) {
  switch (c.kind) {
    case Kind::kIdentity:
      return text_in;
    case Kind::kStopword:
      return canon_stopword(c.wordlists, c.removal_categories, text_in);
    case Kind::kOracle:
      throw DataError("oracle canonicalizer needs caption latents");
    case Kind::kCached: {
      if (!c.cache) throw ConfigError("cached canonicalizer has no cache");
      auto hit = c.cache->lookup(text_in);
      if (!hit) throw CacheMissError(text_in);
      return nonempty_or_lower(*hit, text_in);
    }
    case Kind::kRemote: {
      if (!c.cache) throw ConfigError("remote canonicalizer has no cache");
      return canon_remote(c.endpoint, *c.cache, {text_in}).front();
    }
  }
  return text_in;
}

std::string canonicalize_caption(const Canonicalizer& c, const corpus::Caption& caption) {
  if (c.kind == Kind::kOracle) {
    if (!caption.latents)
      throw DataError("caption \"" + caption.id + "\" has no latents for oracle canonicalization");
    return canon_oracle(*caption.latents);
  }
  return canonicalize(c, caption.text);
}

std::vector<std::pair<std::string, size_t>> ModificationStats::top_removed(size_t k) const {
  std::vector<std::pair<std::string, size_t>> v(removed_counts.begin(), removed_counts.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (v.size() > k) v.resize(k);
  return v;
}

std::pair<corpus::Dataset, ModificationStats> canonicalize_dataset(
    const corpus::Dataset& ds, const Canonicalizer& c) {
  corpus::Dataset out;
  out.name = ds.name + "-canonical";
  out.feature_dim = ds.feature_dim;
  out.motions = ds.motions;

  ModificationStats stats;
  stats.n_total = ds.captions.size();
  for (const corpus::Caption& cap : ds.captions) {
    corpus::Caption cc = cap;
    cc.text = canonicalize_caption(c, cap);
    cc.source = corpus::Source::kCanonical;
    if (cc.text != cap.text) ++stats.n_modified;

    std::set<std::string> canon_tokens;
    for (auto& t : text::tokenize(cc.text)) canon_tokens.insert(std::move(t));
    for (const auto& tok : text::tokenize(cap.text)) {
      if (canon_tokens.count(tok)) continue;
      auto cat = c.wordlists.empty() ? std::nullopt : c.wordlists.category_of(tok);
      ++stats.removed_by_category[cat ? *cat : std::string("other")];
      ++stats.removed_counts[tok];
    }
    out.captions.push_back(std::move(cc));
  }
  stats.modified_fraction =
      stats.n_total ? static_cast<double>(stats.n_modified) / static_cast<double>(stats.n_total)
                    : 0.0;

  for (const auto& group : corpus::captions_of(out)) {
    std::set<std::string> unique;
    for (size_t ci : group) unique.insert(out.captions[ci].text);
    ++stats.unique_canonical_histogram[unique.size()];
  }
  return {std::move(out), std::move(stats)};
}

}  // namespace mocha::canon
