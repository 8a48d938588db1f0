#include "mocha/canon.hpp"

#include <atomic>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "mocha/corpus.hpp"
#include "mocha/errors.hpp"
#include "mocha/text.hpp"

namespace fs = std::filesystem;
using namespace mocha;
using namespace mocha::canon;
using nlohmann::json;

namespace {

const char* kWordlistsDir = MOCHA_ASSET_DIR "/wordlists";

WordLists default_lists() { return WordLists::load_dir(kWordlistsDir); }

Canonicalizer stopword_canon() {
  Canonicalizer c;
  c.kind = Kind::kStopword;
  c.wordlists = default_lists();
  return c;
}

fs::path temp_path(const std::string& stem) {
  static int counter = 0;
  return fs::temp_directory_path() /
         (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
}

// Writes a miniature wordlists directory for invariant violation tests.
fs::path fixture_dir(const std::map<std::string, std::string>& files) {
  fs::path dir = temp_path("wl_fixture");
  fs::create_directories(dir);
  std::ofstream(dir / "VERSION") << "1\n";
  const char* names[] = {"determiners", "pronouns",       "prepositions",
                         "conjunctions", "discourse_markers", "hedges",
                         "subjects",     "action_verbs",   "body_parts",
                         "directions",   "manner_adverbs"};
  for (const char* n : names) {
    auto it = files.find(n);
    std::ofstream out(dir / (std::string(n) + ".txt"));
    out << (it != files.end() ? it->second : std::string("zz_") + n + "\n");
  }
  return dir;
}

corpus::LatentAtoms make_latents(std::vector<corpus::Atom> atoms) {
  return corpus::LatentAtoms{std::move(atoms)};
}

// Local HTTP fixture implementing the canonicalization wire protocol.
class MockEndpoint {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit MockEndpoint(Handler h) : handler_(std::move(h)) {
    server_.Post("/canon", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls_;
      handler_(req, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/canon"; }
  int calls() const { return calls_; }

 private:
  httplib::Server server_;
  Handler handler_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> calls_{0};
};

MockEndpoint::Handler uppercase_handler() {
  return [](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body);
    REQUIRE(body.at("prompt_id") == std::string(kPromptId));
    json out = json::array();
    for (const auto& t : body.at("captions")) {
      std::string s = t.get<std::string>();
      for (char& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      out.push_back(s);
    }
    res.set_content(json{{"canonicals", out}}.dump(), "application/json");
  };
}

}  // namespace

TEST_CASE("default wordlists load with pinned version and categories") {
  WordLists wl = default_lists();
  CHECK(wl.version() == 1);
  CHECK(WordLists::function_categories().size() == 7);
  CHECK(WordLists::content_categories().size() == 4);
  CHECK(WordLists::default_removal_categories().size() == 5);

  CHECK(wl.contains("determiners", "a"));
  CHECK(wl.contains("subjects", "person"));
  CHECK(wl.contains("pronouns", "he"));
  CHECK(wl.contains("action_verbs", "walk"));
  CHECK(wl.contains("directions", "forward"));
  CHECK_FALSE(wl.contains("determiners", "walk"));
  CHECK(wl.category_of("slowly") == std::string("manner_adverbs"));
  CHECK_FALSE(wl.category_of("xylophone").has_value());
}

TEST_CASE("wordlists reject invariant violations") {
  SUBCASE("uppercase token") {
    fs::path dir = fixture_dir({{"determiners", "The\n"}});
    CHECK_THROWS_AS(WordLists::load_dir(dir.string()), DataError);
    fs::remove_all(dir);
  }
  SUBCASE("token with whitespace") {
    fs::path dir = fixture_dir({{"hedges", "sort of\n"}});
    CHECK_THROWS_AS(WordLists::load_dir(dir.string()), DataError);
    fs::remove_all(dir);
  }
  SUBCASE("token in two categories") {
    fs::path dir = fixture_dir({{"determiners", "both\n"}, {"pronouns", "both\n"}});
    CHECK_THROWS_AS(WordLists::load_dir(dir.string()), DataError);
    fs::remove_all(dir);
  }
  SUBCASE("missing category file") {
    fs::path dir = fixture_dir({});
    fs::remove(dir / "subjects.txt");
    CHECK_THROWS_AS(WordLists::load_dir(dir.string()), DataError);
    fs::remove_all(dir);
  }
}

TEST_CASE("stopword canonicalization strips the documented noise") {
  WordLists wl = default_lists();
  auto cats = WordLists::default_removal_categories();
  CHECK(canon_stopword(wl, cats, "a person walks forward, slowly.") ==
        "walks forward slowly");
  CHECK(canon_stopword(wl, cats, "The man, he walks.") == "walks");
}

TEST_CASE("stopword output falls back to the lowercased original when empty") {
  WordLists wl = default_lists();
  auto cats = WordLists::default_removal_categories();
  CHECK(canon_stopword(wl, cats, "A the Person") == "a the person");
}

TEST_CASE("stopword canonicalization is idempotent on generated captions") {
  WordLists wl = default_lists();
  auto cats = WordLists::default_removal_categories();
  corpus::SynthSpec sp;
  sp.n_motions = 80;
  sp.k_captions = 3;
  sp.motion_dim = 8;
  sp.style_rate = 0.8;
  sp.halluc_rate = 0.6;
  sp.seed = 21;
  corpus::Dataset ds = corpus::generate_synthetic(sp);
  for (const auto& c : ds.captions) {
    std::string once = canon_stopword(wl, cats, c.text);
    CHECK(canon_stopword(wl, cats, once) == once);
  }
}

TEST_CASE("stopword canonicalization never removes content-category tokens") {
  WordLists wl = default_lists();
  auto cats = WordLists::default_removal_categories();
  corpus::SynthSpec sp;
  sp.n_motions = 60;
  sp.k_captions = 2;
  sp.motion_dim = 8;
  sp.style_rate = 0.9;
  sp.halluc_rate = 0.5;
  sp.seed = 8;
  corpus::Dataset ds = corpus::generate_synthetic(sp);
  for (const auto& c : ds.captions) {
    auto before = text::tokenize(c.text);
    std::multiset<std::string> after;
    for (auto& t : text::tokenize(canon_stopword(wl, cats, c.text))) after.insert(t);
    for (const auto& tok : before) {
      auto cat = wl.category_of(tok);
      if (!cat) continue;
      bool content = std::find(WordLists::content_categories().begin(),
                               WordLists::content_categories().end(),
                               *cat) != WordLists::content_categories().end();
      if (content) CHECK(after.count(tok) > 0);
    }
  }
}

TEST_CASE("oracle rendering follows slot order and joins atoms with arrows") {
  using corpus::Atom;
  CHECK(canon_oracle(make_latents({Atom{"walk", "forward", {}, {}, {}}})) == "walk forward");
  CHECK(canon_oracle(make_latents({Atom{"walk", "forward", {}, {}, {}},
                                   Atom{"turn", "around", {}, {}, {}}})) ==
        "walk forward → turn around");
  CHECK(canon_oracle(make_latents({Atom{"raise", {}, "right arm", {}, 2}})) ==
        "raise right arm 2times");
  // slot order: verb, object, limb, direction
  CHECK(canon_oracle(make_latents({Atom{"lift", "up", "arm", "cup", 3}})) ==
        "lift cup arm up 3times");
  // repetition of one is not rendered
  CHECK(canon_oracle(make_latents({Atom{"wave", {}, {}, {}, 1}})) == "wave");
}

TEST_CASE("identity kind returns text unchanged and is idempotent") {
  Canonicalizer c;
  c.kind = Kind::kIdentity;
  CHECK(canonicalize(c, "Walk ForWard") == "Walk ForWard");
  CHECK(canonicalize(c, canonicalize(c, "x y z")) == canonicalize(c, "x y z"));
}

TEST_CASE("cached kind answers from the map and reports misses") {
  Canonicalizer c;
  c.kind = Kind::kCached;
  c.cache = std::make_shared<CanonCache>();
  c.cache->put("x", "y");
  CHECK(canonicalize(c, "x") == "y");
  try {
    canonicalize(c, "z");
    FAIL("expected CacheMissError");
  } catch (const CacheMissError& e) {
    CHECK(e.text() == "z");
  }
}

TEST_CASE("cache lookups trim the key but keep case") {
  CanonCache cache;
  cache.put("  Walk Forward  ", "walk forward");
  CHECK(cache.lookup("Walk Forward") == std::string("walk forward"));
  CHECK_FALSE(cache.lookup("walk forward").has_value());
  CHECK(cache.size() == 1);
}

TEST_CASE("cache file round trips and rejects malformed lines") {
  fs::path f = temp_path("canon_cache");
  {
    auto cache = CanonCache::open(f.string());
    cache->put("alpha", "a");
    cache->put("beta", "b");
  }
  auto reloaded = CanonCache::open(f.string());
  CHECK(reloaded->size() == 2);
  CHECK(reloaded->lookup("alpha") == std::string("a"));
  fs::remove(f);

  fs::path bad = temp_path("canon_cache_bad");
  std::ofstream(bad) << "{\"original\":\"x\"}\n";
  CHECK_THROWS_AS(CanonCache::open(bad.string()), DataError);
  fs::remove(bad);
}

TEST_CASE("remote kind answers fully cached batches without network access") {
  EndpointConfig cfg;  // deliberately no url: any network attempt would throw
  auto cache = std::make_shared<CanonCache>();
  cache->put("one", "1");
  cache->put("two", "2");
  CanonCache& c = *cache;
  auto out = canon_remote(cfg, c, {"one", "two", "one"});
  CHECK(out == std::vector<std::string>{"1", "2", "1"});
  CHECK(canon_remote(cfg, c, {}).empty());
}

TEST_CASE("remote canonicalization round trips through a live endpoint") {
  MockEndpoint ep(uppercase_handler());
  EndpointConfig cfg;
  cfg.url = ep.url();
  cfg.batch_size = 2;

  fs::path cache_file = temp_path("canon_remote_cache");
  auto cache = CanonCache::open(cache_file.string());
  std::vector<std::string> texts = {"walk forward", "turn around", "jump up"};
  auto out = canon_remote(cfg, *cache, texts);
  CHECK(out == std::vector<std::string>{"WALK FORWARD", "TURN AROUND", "JUMP UP"});
  CHECK(ep.calls() == 2);  // 3 misses at batch_size 2

  // write-through: a fresh cache object sees the entries, no further calls
  auto cache2 = CanonCache::open(cache_file.string());
  CHECK(cache2->size() == 3);
  auto again = canon_remote(cfg, *cache2, texts);
  CHECK(again == out);
  CHECK(ep.calls() == 2);
  fs::remove(cache_file);
}

TEST_CASE("remote protocol errors carry the failed batch indices") {
  auto cache = std::make_shared<CanonCache>();
  cache->put("cached", "hit");

  SUBCASE("non-200 status") {
    MockEndpoint ep([](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
      res.set_content("boom", "text/plain");
    });
    EndpointConfig cfg;
    cfg.url = ep.url();
    try {
      canon_remote(cfg, *cache, {"cached", "miss-a", "miss-b"});
      FAIL("expected EndpointError");
    } catch (const EndpointError& e) {
      CHECK(e.failed_indices() == std::vector<size_t>{1, 2});
    }
  }
  SUBCASE("length mismatch") {
    MockEndpoint ep([](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"canonicals", json::array({"only one"})}}.dump(),
                      "application/json");
    });
    EndpointConfig cfg;
    cfg.url = ep.url();
    CHECK_THROWS_AS(canon_remote(cfg, *cache, {"x", "y"}), EndpointError);
  }
  SUBCASE("invalid json") {
    MockEndpoint ep([](const httplib::Request&, httplib::Response& res) {
      res.set_content("not json", "application/json");
    });
    EndpointConfig cfg;
    cfg.url = ep.url();
    CHECK_THROWS_AS(canon_remote(cfg, *cache, {"x"}), EndpointError);
  }
  SUBCASE("unreachable endpoint after retries") {
    EndpointConfig cfg;
    cfg.url = "http://127.0.0.1:9/canon";  // discard port, nothing listens
    cfg.timeout_ms = 200;
    cfg.max_retries = 1;
    try {
      canon_remote(cfg, *cache, {"miss"});
      FAIL("expected EndpointError");
    } catch (const EndpointError& e) {
      CHECK(e.failed_indices() == std::vector<size_t>{0});
    }
  }
}

TEST_CASE("remote endpoint empty reply entry falls back to lowercased input") {
  MockEndpoint ep([](const httplib::Request& req, httplib::Response& res) {
    json body = json::parse(req.body);
    json out = json::array();
    for (size_t i = 0; i < body.at("captions").size(); ++i) out.push_back("");
    res.set_content(json{{"canonicals", out}}.dump(), "application/json");
  });
  EndpointConfig cfg;
  cfg.url = ep.url();
  auto cache = std::make_shared<CanonCache>();
  auto out = canon_remote(cfg, *cache, {"Walk Forward"});
  CHECK(out == std::vector<std::string>{"walk forward"});
}

TEST_CASE("oracle invariance: all captions of a motion share one canonical string") {
  corpus::SynthSpec sp;
  sp.n_motions = 40;
  sp.k_captions = 4;
  sp.motion_dim = 8;
  sp.style_rate = 0.8;
  sp.halluc_rate = 0.6;
  sp.seed = 4;
  corpus::Dataset ds = corpus::generate_synthetic(sp);
  Canonicalizer c;
  c.kind = Kind::kOracle;
  auto groups = corpus::captions_of(ds);
  for (const auto& caps : groups) {
    REQUIRE(!caps.empty());
    std::string first = canonicalize_caption(c, ds.captions[caps[0]]);
    for (size_t ci : caps) CHECK(canonicalize_caption(c, ds.captions[ci]) == first);
  }
}

TEST_CASE("oracle kind requires latents") {
  Canonicalizer c;
  c.kind = Kind::kOracle;
  corpus::Caption cap;
  cap.id = "c0";
  cap.motion_id = "m0";
  cap.text = "walk";
  CHECK_THROWS_AS(canonicalize_caption(c, cap), DataError);
  CHECK_THROWS_AS(canonicalize(c, "walk"), DataError);
}

TEST_CASE("canonicalize_dataset with identity reports zero modifications") {
  corpus::SynthSpec sp;
  sp.n_motions = 12;
  sp.k_captions = 3;
  sp.motion_dim = 8;
  sp.seed = 5;
  corpus::Dataset ds = corpus::generate_synthetic(sp);
  Canonicalizer c;
  c.kind = Kind::kIdentity;
  auto [twin, stats] = canonicalize_dataset(ds, c);
  CHECK(stats.n_total == ds.captions.size());
  CHECK(stats.n_modified == 0);
  CHECK(stats.modified_fraction == 0.0);
  REQUIRE(twin.captions.size() == ds.captions.size());
  for (size_t i = 0; i < twin.captions.size(); ++i) {
    CHECK(twin.captions[i].source == corpus::Source::kCanonical);
    CHECK(twin.captions[i].id == ds.captions[i].id);
    CHECK(twin.captions[i].motion_id == ds.captions[i].motion_id);
    CHECK(twin.captions[i].text == ds.captions[i].text);
  }
}

TEST_CASE("canonicalize_dataset tallies removals by category") {
  corpus::Dataset ds;
  ds.feature_dim = 1;
  ds.motions = {{"m0", corpus::Split::kTrain, std::nullopt, {1.0}},
                {"m1", corpus::Split::kTrain, std::nullopt, {1.0}}};
  ds.captions = {{"m0.c0", "m0", "a person walks", corpus::Source::kOriginal, {}},
                 {"m1.c0", "m1", "a person walks", corpus::Source::kOriginal, {}}};
  auto [twin, stats] = canonicalize_dataset(ds, stopword_canon());
  CHECK(twin.captions[0].text == "walks");
  CHECK(stats.n_total == 2);
  CHECK(stats.n_modified == 2);
  CHECK(stats.modified_fraction == 1.0);
  CHECK(stats.removed_by_category.at("determiners") == 2);
  CHECK(stats.removed_by_category.at("subjects") == 2);
  auto top = stats.top_removed(2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].second == 2);
  CHECK(top[1].second == 2);
}

TEST_CASE("canonicalize_dataset on zero-noise synthetic data changes nothing") {
  corpus::SynthSpec sp;
  sp.n_motions = 50;
  sp.k_captions = 3;
  sp.motion_dim = 8;
  sp.style_rate = 0.0;
  sp.halluc_rate = 0.0;
  sp.seed = 17;
  corpus::Dataset ds = corpus::generate_synthetic(sp);
  Canonicalizer c;
  c.kind = Kind::kOracle;
  auto [twin, stats] = canonicalize_dataset(ds, c);
  CHECK(stats.n_modified == 0);
  for (size_t i = 0; i < twin.captions.size(); ++i)
    CHECK(twin.captions[i].text == ds.captions[i].text);
}

TEST_CASE("unique canonical histogram counts per-motion distinct strings") {
  corpus::Dataset ds;
  ds.feature_dim = 1;
  ds.motions = {{"m0", corpus::Split::kTrain, std::nullopt, {1.0}},
                {"m1", corpus::Split::kTrain, std::nullopt, {1.0}}};
  ds.captions = {{"m0.c0", "m0", "walk", corpus::Source::kOriginal, {}},
                 {"m0.c1", "m0", "walk", corpus::Source::kOriginal, {}},
                 {"m1.c0", "m1", "jump", corpus::Source::kOriginal, {}},
                 {"m1.c1", "m1", "hop", corpus::Source::kOriginal, {}}};
  Canonicalizer c;
  c.kind = Kind::kIdentity;
  auto [twin, stats] = canonicalize_dataset(ds, c);
  CHECK(stats.unique_canonical_histogram.at(1) == 1);  // m0 collapses
  CHECK(stats.unique_canonical_histogram.at(2) == 1);  // m1 stays split
}
