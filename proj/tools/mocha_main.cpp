// mocha: config-driven front end for the synthetic caption-noise testbed.
//
// mocha <command> --config run.json [--seed N] [--out DIR]
//
// Commands: synth, canon, train, eval, noise, ling. Each reads one JSON
// config, writes its reports under <out>/<command>/<config-hash>/ and
// finishes with an atomically written manifest.json. Exit codes: 0 ok,
// 2 config error, 3 data error, 4 endpoint error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mocha/canon.hpp"
#include "mocha/corpus.hpp"
#include "mocha/errors.hpp"
#include "mocha/eval.hpp"
#include "mocha/lingstats.hpp"
#include "mocha/model.hpp"
#include "mocha/noiselab.hpp"
#include "mocha/rng.hpp"
#include "mocha/version.hpp"

#ifndef MOCHA_ASSET_DIR
#define MOCHA_ASSET_DIR "core/assets"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mocha;

namespace {

constexpr int kSchemaVersion = 1;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("short write on " + path.string());
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_file(tmp, content);
  fs::rename(tmp, path);
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string digest_file(const fs::path& path) { return hex64(fnv1a64(read_file(path))); }

// --- config schema helpers -------------------------------------------------

void check_keys(const json& o, const std::string& path, const std::set<std::string>& allowed) {
  if (!o.is_object()) throw ConfigError(path + ": must be an object");
  for (const auto& [k, v] : o.items())
    if (!allowed.count(k)) throw ConfigError(path + "." + k + ": unknown key");
}

bool has_key(const json& o, const char* key) { return o.contains(key); }

const json& req_key(const json& o, const std::string& path, const char* key) {
  auto it = o.find(key);
  if (it == o.end()) throw ConfigError(path + "." + key + ": required key is missing");
  return *it;
}

double req_num(const json& o, const std::string& path, const char* key) {
  const json& v = req_key(o, path, key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": must be a number");
  return v.get<double>();
}

double opt_num(const json& o, const std::string& path, const char* key, double def) {
  if (!has_key(o, key)) return def;
  return req_num(o, path, key);
}

int64_t req_int(const json& o, const std::string& path, const char* key) {
  const json& v = req_key(o, path, key);
  if (!v.is_number_integer()) throw ConfigError(path + "." + key + ": must be an integer");
  return v.get<int64_t>();
}

int64_t opt_int(const json& o, const std::string& path, const char* key, int64_t def) {
  if (!has_key(o, key)) return def;
  return req_int(o, path, key);
}

uint64_t opt_u64(const json& o, const std::string& path, const char* key, uint64_t def) {
  if (!has_key(o, key)) return def;
  const json& v = o.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<int64_t>() < 0 &&
                                 !v.is_number_unsigned()))
    throw ConfigError(path + "." + std::string(key) + ": must be a nonnegative integer");
  return v.get<uint64_t>();
}

std::string req_str(const json& o, const std::string& path, const char* key) {
  const json& v = req_key(o, path, key);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": must be a string");
  return v.get<std::string>();
}

std::string opt_str(const json& o, const std::string& path, const char* key,
                    const std::string& def) {
  if (!has_key(o, key)) return def;
  return req_str(o, path, key);
}

double prob_field(const json& o, const std::string& path, const char* key, double def) {
  double v = opt_num(o, path, key, def);
  if (v < 0.0 || v > 1.0)
    throw ConfigError(path + "." + key + ": must be a probability in [0,1]");
  return v;
}

// --- run scaffold ------------------------------------------------------------

struct RunCtx {
  std::string command;
  fs::path run_dir;
  std::string config_hash;
  std::optional<uint64_t> seed;
  json inputs = json::object();
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
};

RunCtx begin_run(const std::string& command, const json& cfg) {
  json hashable = cfg;
  hashable.erase("out");
  RunCtx ctx;
  ctx.command = command;
  ctx.config_hash = hex64(fnv1a64(command + "\n" + hashable.dump()));
  std::string out = cfg.contains("out") ? cfg.at("out").get<std::string>() : "runs";
  ctx.run_dir = fs::path(out) / command / ctx.config_hash;
  fs::create_directories(ctx.run_dir);
  return ctx;
}

void add_input(RunCtx& ctx, const fs::path& path) {
  ctx.inputs[path.string()] = digest_file(path);
}

void emit(RunCtx& ctx, const std::string& name, const std::string& content) {
  write_file(ctx.run_dir / name, content);
  ctx.outputs.push_back(name);
}

void finish_run(RunCtx& ctx) {
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - ctx.t0)
                .count();
  json m;
  m["command"] = ctx.command;
  m["config_hash"] = ctx.config_hash;
  m["artifact_version"] = kArtifactVersion;
  m["wordlists_version"] = kWordlistsVersion;
  if (ctx.seed)
    m["seed"] = *ctx.seed;
  else
    m["seed"] = nullptr;
  m["inputs"] = ctx.inputs;
  m["outputs"] = ctx.outputs;
  m["wall_clock_ms"] = ms;
  write_file_atomic(ctx.run_dir / "manifest.json", m.dump(2) + "\n");
  std::cout << ctx.run_dir.string() << "\n";
}

// --- canonicalizer block -----------------------------------------------------

std::string default_wordlists_dir() { return std::string(MOCHA_ASSET_DIR) + "/wordlists"; }

const std::set<std::string> kCanonKeys = {"kind", "wordlists_dir", "removal_categories",
                                          "cache_path", "endpoint"};
const std::set<std::string> kEndpointKeys = {"url", "timeout_ms", "max_retries", "batch_size"};

struct CanonSetup {
  canon::Canonicalizer c;
  std::string kind_str = "identity";
  std::string wordlists_dir;
};

CanonSetup parse_canonicalizer(const json& block, const std::string& path) {
  check_keys(block, path, kCanonKeys);
  CanonSetup s;
  s.kind_str = req_str(block, path, "kind");
  s.c.kind = canon::kind_from_string(s.kind_str);
  s.wordlists_dir = opt_str(block, path, "wordlists_dir", default_wordlists_dir());

  if (s.c.kind == canon::Kind::kStopword) {
    s.c.wordlists = canon::WordLists::load_dir(s.wordlists_dir);
    if (has_key(block, "removal_categories")) {
      const json& cats = block.at("removal_categories");
      if (!cats.is_array()) throw ConfigError(path + ".removal_categories: must be an array");
      std::set<std::string> known;
      for (const auto& c : canon::WordLists::function_categories()) known.insert(c);
      for (const auto& c : canon::WordLists::content_categories()) known.insert(c);
      s.c.removal_categories.clear();
      for (const auto& c : cats) {
        if (!c.is_string() || !known.count(c.get<std::string>()))
          throw ConfigError(path + ".removal_categories: unknown category " + c.dump());
        s.c.removal_categories.push_back(c.get<std::string>());
      }
    }
  }
  if (s.c.kind == canon::Kind::kCached || s.c.kind == canon::Kind::kRemote) {
    std::string cp = opt_str(block, path, "cache_path", "");
    if (s.c.kind == canon::Kind::kCached && cp.empty())
      throw ConfigError(path + ".cache_path: required for the cached kind");
    s.c.cache = cp.empty() ? std::make_shared<canon::CanonCache>() : canon::CanonCache::open(cp);
  }
  if (s.c.kind == canon::Kind::kRemote) {
    json ep = block.contains("endpoint") ? block.at("endpoint") : json::object();
    check_keys(ep, path + ".endpoint", kEndpointKeys);
    s.c.endpoint.url = opt_str(ep, path + ".endpoint", "url", "");
    s.c.endpoint.timeout_ms =
        static_cast<int>(opt_int(ep, path + ".endpoint", "timeout_ms", 5000));
    s.c.endpoint.max_retries =
        static_cast<int>(opt_int(ep, path + ".endpoint", "max_retries", 2));
    s.c.endpoint.batch_size =
        static_cast<size_t>(opt_int(ep, path + ".endpoint", "batch_size", 16));
    if (const char* env = std::getenv("MOCHA_CANON_ENDPOINT"); env && *env)
      s.c.endpoint.url = env;
    if (s.c.endpoint.url.empty())
      throw ConfigError(path +
                        ".endpoint.url: required for the remote kind "
                        "(or set MOCHA_CANON_ENDPOINT)");
  }
  return s;
}

// --- commands ------------------------------------------------------------------

const std::set<std::string> kSynthKeys = {
    "n_motions",   "k_captions", "atom_count_min", "atom_count_max", "verb_vocab",
    "direction_vocab", "limb_vocab", "object_vocab", "style_rate",  "halluc_rate",
    "motion_dim",  "motion_noise_sd", "seed",       "name"};

corpus::SynthSpec parse_synth(const json& block, const std::string& path) {
  check_keys(block, path, kSynthKeys);
  corpus::SynthSpec sp;
  int64_t nm = opt_int(block, path, "n_motions", 100);
  if (nm < 1) throw ConfigError(path + ".n_motions: must be >= 1");
  sp.n_motions = static_cast<size_t>(nm);
  int64_t k = opt_int(block, path, "k_captions", 3);
  if (k < 2) throw ConfigError(path + ".k_captions: must be >= 2");
  sp.k_captions = static_cast<size_t>(k);
  sp.atom_count_min = static_cast<int>(opt_int(block, path, "atom_count_min", 1));
  sp.atom_count_max = static_cast<int>(opt_int(block, path, "atom_count_max", 4));
  if (sp.atom_count_min < 1 || sp.atom_count_max > 4 ||
      sp.atom_count_min > sp.atom_count_max)
    throw ConfigError(path + ".atom_count_min/atom_count_max: need 1 <= min <= max <= 4");
  auto vocab = [&](const char* key, size_t def, size_t limit) {
    int64_t v = opt_int(block, path, key, static_cast<int64_t>(def));
    if (v < 1 || v > static_cast<int64_t>(limit))
      throw ConfigError(path + "." + key + ": must be in [1," + std::to_string(limit) + "]");
    return static_cast<size_t>(v);
  };
  sp.verb_vocab = vocab("verb_vocab", 24, corpus::verb_vocabulary().size());
  sp.direction_vocab = vocab("direction_vocab", 10, corpus::direction_vocabulary().size());
  sp.limb_vocab = vocab("limb_vocab", 12, corpus::limb_vocabulary().size());
  sp.object_vocab = vocab("object_vocab", 12, corpus::object_vocabulary().size());
  sp.style_rate = prob_field(block, path, "style_rate", 0.5);
  sp.halluc_rate = prob_field(block, path, "halluc_rate", 0.2);
  int64_t md = opt_int(block, path, "motion_dim", 64);
  if (md < 1) throw ConfigError(path + ".motion_dim: must be >= 1");
  sp.motion_dim = static_cast<size_t>(md);
  sp.motion_noise_sd = opt_num(block, path, "motion_noise_sd", 0.01);
  if (sp.motion_noise_sd < 0.0)
    throw ConfigError(path + ".motion_noise_sd: must be nonnegative");
  sp.seed = opt_u64(block, path, "seed", 0);
  return sp;
}

void cmd_synth(const json& cfg) {
  check_keys(cfg, "config", {"schema_version", "synth", "out"});
  const json& block = req_key(cfg, "config", "synth");
  corpus::SynthSpec sp = parse_synth(block, "config.synth");

  RunCtx ctx = begin_run("synth", cfg);
  ctx.seed = sp.seed;
  corpus::Dataset ds = corpus::generate_synthetic(sp);
  if (has_key(block, "name")) ds.name = req_str(block, "config.synth", "name");
  corpus::save_jsonl(ds, (ctx.run_dir / "dataset.jsonl").string());
  ctx.outputs.push_back("dataset.jsonl");
  finish_run(ctx);
}

json modification_stats_json(const canon::ModificationStats& st) {
  json j;
  j["n_total"] = st.n_total;
  j["n_modified"] = st.n_modified;
  j["modified_fraction"] = st.modified_fraction;
  j["removed_by_category"] = st.removed_by_category;
  json top = json::array();
  for (const auto& [tok, n] : st.top_removed(20)) top.push_back({{"token", tok}, {"count", n}});
  j["top_removed"] = top;
  json hist = json::object();
  for (const auto& [k, n] : st.unique_canonical_histogram) hist[std::to_string(k)] = n;
  j["unique_canonical_histogram"] = hist;
  return j;
}

void cmd_canon(const json& cfg) {
  check_keys(cfg, "config", {"schema_version", "input", "canonicalizer", "out"});
  std::string input = req_str(cfg, "config", "input");
  CanonSetup cs = parse_canonicalizer(req_key(cfg, "config", "canonicalizer"),
                                      "config.canonicalizer");

  RunCtx ctx = begin_run("canon", cfg);
  add_input(ctx, input);
  corpus::Dataset ds = corpus::load_jsonl(input);

  if (cs.c.kind == canon::Kind::kCached) {
    std::vector<std::string> missing;
    for (const auto& cap : ds.captions)
      if (!cs.c.cache->lookup(cap.text)) missing.push_back(cap.id);
    if (!missing.empty()) {
      std::string ids;
      for (size_t i = 0; i < missing.size(); ++i) ids += (i ? ", " : "") + missing[i];
      throw DataError("canonical cache misses for captions: " + ids);
    }
  }
  if (cs.c.kind == canon::Kind::kRemote) {
    std::vector<std::string> texts;
    texts.reserve(ds.captions.size());
    for (const auto& cap : ds.captions) texts.push_back(cap.text);
    canon::canon_remote(cs.c.endpoint, *cs.c.cache, texts);
  }

  auto [twin, st] = canon::canonicalize_dataset(ds, cs.c);
  corpus::save_jsonl(twin, (ctx.run_dir / "dataset-canonical.jsonl").string());
  ctx.outputs.push_back("dataset-canonical.jsonl");
  emit(ctx, "stats.json", modification_stats_json(st).dump(2) + "\n");
  {
    std::ostringstream os;
    os << "n_total,n_modified,modified_fraction\n"
       << st.n_total << ',' << st.n_modified << ',' << std::setprecision(17)
       << st.modified_fraction << "\n";
    emit(ctx, "stats.csv", os.str());
  }
  finish_run(ctx);
}

const std::set<std::string> kTrainKeys = {"mode",       "lambda",        "tau",
                                          "epochs",     "batch_size",    "base_lr",
                                          "motion_lr_mult", "seed",      "paraphrase_rate",
                                          "embed_dim",  "feature_dim",   "resume"};

void cmd_train(const json& cfg) {
  check_keys(cfg, "config",
             {"schema_version", "input", "paraphrases", "canonicalizer", "train", "out"});
  std::string input = req_str(cfg, "config", "input");
  const json& block = req_key(cfg, "config", "train");
  check_keys(block, "config.train", kTrainKeys);

  model::TrainConfig tc;
  tc.mode = model::train_mode_from_string(opt_str(block, "config.train", "mode", "baseline"));
  tc.lambda = prob_field(block, "config.train", "lambda", 0.5);
  tc.tau = opt_num(block, "config.train", "tau", 0.07);
  if (tc.tau <= 0.0) throw ConfigError("config.train.tau: must be positive");
  int64_t epochs = opt_int(block, "config.train", "epochs", 50);
  if (epochs < 0) throw ConfigError("config.train.epochs: must be >= 0");
  tc.epochs = static_cast<int>(epochs);
  int64_t bs = opt_int(block, "config.train", "batch_size", 128);
  if (bs < 1) throw ConfigError("config.train.batch_size: must be >= 1");
  tc.batch_size = static_cast<size_t>(bs);
  tc.base_lr = opt_num(block, "config.train", "base_lr", 1e-3);
  if (tc.base_lr <= 0.0) throw ConfigError("config.train.base_lr: must be positive");
  tc.motion_lr_mult = opt_num(block, "config.train", "motion_lr_mult", 1.0);
  if (tc.motion_lr_mult <= 0.0)
    throw ConfigError("config.train.motion_lr_mult: must be positive");
  tc.seed = opt_u64(block, "config.train", "seed", 0);
  tc.paraphrase_rate = prob_field(block, "config.train", "paraphrase_rate",
                                  tc.mode == model::TrainMode::kParaphraseSub ? 0.2 : 0.0);
  int64_t ed = opt_int(block, "config.train", "embed_dim", 64);
  if (ed < 1) throw ConfigError("config.train.embed_dim: must be >= 1");
  tc.embed_dim = static_cast<size_t>(ed);
  int64_t fd = opt_int(block, "config.train", "feature_dim", 2048);
  if (fd < 1) throw ConfigError("config.train.feature_dim: must be >= 1");
  tc.featurizer.dim = static_cast<size_t>(fd);

  CanonSetup cs;
  if (has_key(cfg, "canonicalizer"))
    cs = parse_canonicalizer(cfg.at("canonicalizer"), "config.canonicalizer");
  tc.canonicalizer = cs.kind_str;

  corpus::ParaphraseRegistry reg;
  const corpus::ParaphraseRegistry* reg_ptr = nullptr;
  std::string para_path = opt_str(cfg, "config", "paraphrases", "");
  if (tc.mode == model::TrainMode::kParaphraseSub && para_path.empty())
    throw ConfigError("config.paraphrases: required for paraphrase_sub mode");

  RunCtx ctx = begin_run("train", cfg);
  ctx.seed = tc.seed;
  add_input(ctx, input);
  corpus::Dataset ds = corpus::load_jsonl(input);
  if (!para_path.empty()) {
    add_input(ctx, para_path);
    reg = corpus::load_paraphrases(para_path);
    reg_ptr = &reg;
  }

  model::Checkpoint resume;
  const model::Checkpoint* resume_ptr = nullptr;
  std::string resume_path = opt_str(block, "config.train", "resume", "");
  if (!resume_path.empty()) {
    add_input(ctx, resume_path);
    resume = model::load_checkpoint(resume_path);
    resume_ptr = &resume;
  }

  fs::path ckpt_path = ctx.run_dir / "checkpoint.json";
  auto on_epoch = [&](const model::Checkpoint& c) {
    fs::path tmp = ckpt_path;
    tmp += ".tmp";
    model::save_checkpoint(c, tmp.string());
    fs::rename(tmp, ckpt_path);
  };
  model::Checkpoint ckpt = model::train(tc, ds, cs.c, reg_ptr, resume_ptr, on_epoch);
  model::save_checkpoint(ckpt, ckpt_path.string());
  ctx.outputs.push_back("checkpoint.json");

  std::ostringstream os;
  os << "epoch,step,lr";
  for (const auto& name : ckpt.pass_names) os << ",loss_" << name;
  os << "\n" << std::setprecision(17);
  for (const auto& sl : ckpt.history) {
    os << sl.epoch << ',' << sl.step << ',' << sl.lr;
    for (double l : sl.losses) os << ',' << l;
    os << "\n";
  }
  emit(ctx, "loss.csv", os.str());
  finish_run(ctx);
}

const std::set<std::string> kEvalKeys = {"protocol", "threshold_norm", "sim", "text_mode"};
const std::set<std::string> kSimKeys = {"kind", "path"};

eval::SimProvider parse_sim(const json& block, const std::string& path) {
  check_keys(block, path, kSimKeys);
  eval::SimProvider sp;
  std::string kind = opt_str(block, path, "kind", "tfidf_cosine");
  if (kind == "tfidf_cosine") {
    sp.kind = eval::SimProvider::Kind::kTfidfCosine;
  } else if (kind == "precomputed") {
    sp.kind = eval::SimProvider::Kind::kPrecomputed;
    sp.path = req_str(block, path, "path");
  } else {
    throw ConfigError(path + ".kind: unknown similarity provider " + kind);
  }
  return sp;
}

void cmd_eval(const json& cfg) {
  check_keys(cfg, "config",
             {"schema_version", "input", "checkpoint", "canonicalizer", "eval", "out"});
  std::string input = req_str(cfg, "config", "input");
  std::string ckpt_path = req_str(cfg, "config", "checkpoint");
  const json& block = req_key(cfg, "config", "eval");
  check_keys(block, "config.eval", kEvalKeys);

  eval::Protocol protocol;
  protocol.kind =
      eval::protocol_kind_from_string(opt_str(block, "config.eval", "protocol", "dspair"));
  protocol.threshold_norm = prob_field(block, "config.eval", "threshold_norm", 0.95);
  if (has_key(block, "sim")) protocol.sim = parse_sim(block.at("sim"), "config.eval.sim");

  eval::TextMode mode =
      eval::text_mode_from_string(opt_str(block, "config.eval", "text_mode", "original"));
  if (mode == eval::TextMode::kCanonical && !has_key(cfg, "canonicalizer"))
    throw ConfigError("config.canonicalizer: required when eval.text_mode is canonical");
  CanonSetup cs;
  if (has_key(cfg, "canonicalizer"))
    cs = parse_canonicalizer(cfg.at("canonicalizer"), "config.canonicalizer");

  RunCtx ctx = begin_run("eval", cfg);
  add_input(ctx, input);
  add_input(ctx, ckpt_path);
  if (protocol.sim.kind == eval::SimProvider::Kind::kPrecomputed)
    add_input(ctx, protocol.sim.path);
  corpus::Dataset ds = corpus::load_jsonl(input);
  model::Checkpoint ckpt = model::load_checkpoint(ckpt_path);

  auto [t2m, m2t] = eval::evaluate(ckpt, ds, protocol, mode, cs.c);
  emit(ctx, "report_t2m.json", eval::report_to_json(t2m) + "\n");
  emit(ctx, "report_m2t.json", eval::report_to_json(m2t) + "\n");
  emit(ctx, "report.csv", eval::reports_to_csv(t2m, m2t));
  finish_run(ctx);
}

const std::set<std::string> kNoiseKeys = {"suites", "text_mode", "pair_input"};
const std::set<std::string> kNoiseSuites = {"variance", "gradvar", "concentration",
                                            "geometry", "alignment"};

void cmd_noise(const json& cfg) {
  check_keys(cfg, "config",
             {"schema_version", "input", "checkpoint", "canonicalizer", "noise", "out"});
  std::string input = req_str(cfg, "config", "input");
  std::string ckpt_path = req_str(cfg, "config", "checkpoint");
  json block = cfg.contains("noise") ? cfg.at("noise") : json::object();
  check_keys(block, "config.noise", kNoiseKeys);

  std::string pair_input = opt_str(block, "config.noise", "pair_input", "");
  std::set<std::string> suites;
  if (has_key(block, "suites")) {
    const json& arr = block.at("suites");
    if (!arr.is_array()) throw ConfigError("config.noise.suites: must be an array");
    for (const auto& s : arr) {
      if (!s.is_string() || !kNoiseSuites.count(s.get<std::string>()))
        throw ConfigError("config.noise.suites: unknown suite " + s.dump());
      suites.insert(s.get<std::string>());
    }
  } else {
    suites = {"variance", "gradvar", "concentration", "geometry"};
    if (!pair_input.empty()) suites.insert("alignment");
  }
  if (suites.count("alignment") && pair_input.empty())
    throw ConfigError("config.noise.pair_input: required for the alignment suite");
  eval::TextMode mode =
      eval::text_mode_from_string(opt_str(block, "config.noise", "text_mode", "original"));

  CanonSetup cs;
  if (has_key(cfg, "canonicalizer"))
    cs = parse_canonicalizer(cfg.at("canonicalizer"), "config.canonicalizer");

  RunCtx ctx = begin_run("noise", cfg);
  add_input(ctx, input);
  add_input(ctx, ckpt_path);
  corpus::Dataset ds = corpus::load_jsonl(input);
  model::Checkpoint ckpt = model::load_checkpoint(ckpt_path);

  if (suites.count("variance")) {
    auto rep = noiselab::variance_report(ckpt, ds, cs.c);
    emit(ctx, "variance.json", noiselab::to_json(rep) + "\n");
    emit(ctx, "variance.csv", noiselab::to_csv(rep));
  }
  if (suites.count("gradvar")) {
    auto rep = noiselab::gradient_variance(ckpt, ds, cs.c);
    emit(ctx, "gradvar.json", noiselab::to_json(rep) + "\n");
    emit(ctx, "gradvar.csv", noiselab::to_csv(rep));
  }
  if (suites.count("concentration")) {
    auto rep = noiselab::concentration(ckpt, ds, mode, cs.c);
    emit(ctx, "concentration.json", noiselab::to_json(rep) + "\n");
    emit(ctx, "concentration.csv", noiselab::to_csv(rep));
  }
  if (suites.count("geometry")) {
    auto rep = noiselab::geometry(ckpt, ds, mode, cs.c);
    emit(ctx, "geometry.json", noiselab::to_json(rep) + "\n");
    emit(ctx, "geometry.csv", noiselab::to_csv(rep));
  }
  if (suites.count("alignment")) {
    add_input(ctx, pair_input);
    corpus::Dataset ds_b = corpus::load_jsonl(pair_input);
    auto pairs = corpus::match_paired_motions(ds, ds_b);
    auto rep = noiselab::cross_alignment(ckpt, pairs, ds, ds_b, cs.c);
    emit(ctx, "alignment.json", noiselab::to_json(rep) + "\n");
    emit(ctx, "alignment.csv", noiselab::to_csv(rep));
  }
  finish_run(ctx);
}

const std::set<std::string> kLingKeys = {"suites", "thresholds", "sim",
                                         "base_report", "treat_report"};
const std::set<std::string> kLingSuites = {"survival", "inventory", "collisions",
                                           "benignity", "length"};

eval::RetrievalReport load_rank_report(const fs::path& path) {
  json j = json::parse(read_file(path));
  eval::RetrievalReport r;
  if (!j.contains("ranks") || !j.at("ranks").is_array())
    throw DataError(path.string() + ": report has no ranks array");
  r.ranks = j.at("ranks").get<std::vector<double>>();
  r.n_queries = r.ranks.size();
  return r;
}

void cmd_ling(const json& cfg) {
  check_keys(cfg, "config", {"schema_version", "input", "canonicalizer", "ling", "out"});
  std::string input = req_str(cfg, "config", "input");
  json block = cfg.contains("ling") ? cfg.at("ling") : json::object();
  check_keys(block, "config.ling", kLingKeys);

  std::string base_report = opt_str(block, "config.ling", "base_report", "");
  std::string treat_report = opt_str(block, "config.ling", "treat_report", "");
  std::set<std::string> suites;
  if (has_key(block, "suites")) {
    const json& arr = block.at("suites");
    if (!arr.is_array()) throw ConfigError("config.ling.suites: must be an array");
    for (const auto& s : arr) {
      if (!s.is_string() || !kLingSuites.count(s.get<std::string>()))
        throw ConfigError("config.ling.suites: unknown suite " + s.dump());
      suites.insert(s.get<std::string>());
    }
  } else {
    suites = {"survival", "inventory", "collisions", "benignity"};
    if (!base_report.empty() && !treat_report.empty()) suites.insert("length");
  }
  if (suites.count("length") && (base_report.empty() || treat_report.empty()))
    throw ConfigError("config.ling.base_report/treat_report: required for the length suite");

  std::vector<double> thresholds = {0.95, 0.90, 0.85};
  if (has_key(block, "thresholds")) {
    const json& arr = block.at("thresholds");
    if (!arr.is_array() || arr.empty())
      throw ConfigError("config.ling.thresholds: must be a non-empty array");
    thresholds.clear();
    for (const auto& t : arr) {
      if (!t.is_number() || t.get<double>() < 0.0 || t.get<double>() > 1.0)
        throw ConfigError("config.ling.thresholds: entries must be numbers in [0,1]");
      thresholds.push_back(t.get<double>());
    }
  }
  eval::SimProvider sim;
  if (has_key(block, "sim")) sim = parse_sim(block.at("sim"), "config.ling.sim");

  CanonSetup cs;
  if (has_key(cfg, "canonicalizer"))
    cs = parse_canonicalizer(cfg.at("canonicalizer"), "config.canonicalizer");
  canon::WordLists wl = cs.c.wordlists.empty()
                            ? canon::WordLists::load_dir(
                                  cs.wordlists_dir.empty() ? default_wordlists_dir()
                                                           : cs.wordlists_dir)
                            : cs.c.wordlists;

  RunCtx ctx = begin_run("ling", cfg);
  add_input(ctx, input);
  corpus::Dataset ds = corpus::load_jsonl(input);
  auto [twin, st] = canon::canonicalize_dataset(ds, cs.c);

  std::vector<std::string> orig, canon_texts;
  for (const auto& c : ds.captions) orig.push_back(c.text);
  for (const auto& c : twin.captions) canon_texts.push_back(c.text);

  if (suites.count("survival")) {
    auto rep = lingstats::pos_survival(orig, canon_texts, wl);
    emit(ctx, "survival.json", lingstats::to_json(rep) + "\n");
    emit(ctx, "survival.csv", lingstats::to_csv(rep));
  }
  if (suites.count("inventory")) {
    auto rep = lingstats::strip_inventory(orig, canon_texts, wl);
    emit(ctx, "inventory.json", lingstats::to_json(rep) + "\n");
  }
  if (suites.count("collisions") || suites.count("benignity")) {
    auto groups = lingstats::collision_groups(twin);
    if (suites.count("collisions"))
      emit(ctx, "collisions.json", lingstats::to_json(groups) + "\n");
    if (suites.count("benignity")) {
      if (sim.kind == eval::SimProvider::Kind::kPrecomputed) add_input(ctx, sim.path);
      auto rep = lingstats::collision_benignity(groups, ds, sim, thresholds);
      emit(ctx, "benignity.json", lingstats::to_json(rep) + "\n");
      emit(ctx, "benignity.csv", lingstats::to_csv(rep));
    }
  }
  if (suites.count("length")) {
    add_input(ctx, base_report);
    add_input(ctx, treat_report);
    auto base = load_rank_report(base_report);
    auto treat = load_rank_report(treat_report);
    auto rep = lingstats::length_gain(base, treat, orig);
    emit(ctx, "length.json", lingstats::to_json(rep) + "\n");
    emit(ctx, "length.csv", lingstats::to_csv(rep));
  }
  finish_run(ctx);
}

json load_config(const std::string& path) {
  std::string raw;
  try {
    raw = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  json cfg;
  try {
    cfg = json::parse(raw);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("config: top level must be an object");
  if (!cfg.contains("schema_version"))
    throw ConfigError("config.schema_version: required key is missing");
  if (!cfg.at("schema_version").is_number_integer() ||
      cfg.at("schema_version").get<int64_t>() != kSchemaVersion)
    throw ConfigError("config.schema_version: unsupported version (expected " +
                      std::to_string(kSchemaVersion) + ")");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic caption-noise testbed"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<uint64_t> seed_override;
  std::optional<std::string> out_override;

  const std::vector<std::string> commands = {"synth", "canon", "train",
                                             "eval",  "noise", "ling"};
  for (const auto& name : commands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run config JSON")->required();
    sub->add_option("--seed", seed_override, "override the run seed");
    sub->add_option("--out", out_override, "override the output root");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    json cfg = load_config(config_path);
    if (out_override) cfg["out"] = *out_override;
    if (seed_override) {
      if (command == "synth")
        cfg["synth"]["seed"] = *seed_override;
      else if (command == "train")
        cfg["train"]["seed"] = *seed_override;
      else
        throw ConfigError("--seed: the " + command + " command takes no seed");
    }
    if (command == "synth")
      cmd_synth(cfg);
    else if (command == "canon")
      cmd_canon(cfg);
    else if (command == "train")
      cmd_train(cfg);
    else if (command == "eval")
      cmd_eval(cfg);
    else if (command == "noise")
      cmd_noise(cfg);
    else
      cmd_ling(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const EndpointError& e) {
    std::cerr << "endpoint error: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
