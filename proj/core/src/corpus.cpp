#include "mocha/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "mocha/errors.hpp"
#include "mocha/rng.hpp"
#include "mocha/text.hpp"

using nlohmann::json;

namespace mocha::corpus {

namespace {

const std::vector<std::string> kVerbs = {
    "walk", "run",   "jump",  "turn",    "step",  "raise", "lower", "lift",
    "kick", "punch", "wave",  "spin",    "crouch", "bend",  "stretch", "hop",
    "lean", "push",  "pull",  "throw",   "catch", "clap",  "dance", "nod"};

const std::vector<std::string> kDirections = {
    "forward", "backward", "left", "right", "up",
    "down",    "around",   "clockwise", "counterclockwise", "sideways"};

const std::vector<std::string> kLimbs = {
    "arm",  "arms", "hand", "hands", "leg",  "legs",
    "foot", "feet", "head", "shoulder", "knee", "elbow"};

const std::vector<std::string> kObjects = {
    "item", "cloth", "chair", "plate", "stick",  "rope",
    "bag",  "broom", "cup",   "towel", "basket", "drum"};

// Style insertions: annotator habits with no motion content.
const std::vector<std::vector<std::string>> kSubjectPhrases = {
    {"a", "person"}, {"the", "person"}, {"a", "man"},    {"the", "man"},
    {"a", "woman"},  {"the", "woman"},  {"someone"},     {"a", "figure"},
    {"the", "individual"}, {"somebody"}};
const std::vector<std::string> kHedges = {"seemingly", "apparently", "perhaps",
                                          "maybe", "possibly"};
const std::vector<std::string> kFillers = {"then", "just", "really",
                                           "simply", "basically", "actually"};

// Hallucinated content: never overlaps any atom vocabulary.
const std::vector<std::string> kEmotions = {"nervously", "happily", "angrily",
                                            "sadly",     "calmly",  "eagerly",
                                            "proudly",   "anxiously"};
const std::vector<std::string> kHallucObjects = {"box",    "mirror", "ladder",
                                                 "bottle", "camera", "phone"};
const std::vector<std::string> kPurposes = {"greet",  "celebrate", "escape",
                                            "relax",  "impress",   "exercise"};

constexpr double kDirectionP = 0.7;
constexpr double kLimbP = 0.45;
constexpr double kObjectP = 0.35;
constexpr double kRepetitionP = 0.15;

constexpr const char* kArrow = "→";

std::vector<std::string> atom_tokens(const Atom& a) {
  std::vector<std::string> t;
  t.push_back(a.verb);
  if (a.object) t.push_back(*a.object);
  if (a.limb) t.push_back(*a.limb);
  if (a.direction) t.push_back(*a.direction);
  if (a.repetition && *a.repetition > 1)
    t.push_back(std::to_string(*a.repetition) + "times");
  return t;
}

LatentAtoms draw_latents(const SynthSpec& spec, Rng& rng) {
  LatentAtoms lat;
  int n = static_cast<int>(
      rng.uniform_int(static_cast<uint64_t>(spec.atom_count_min),
                      static_cast<uint64_t>(spec.atom_count_max)));
  for (int i = 0; i < n; ++i) {
    Atom a;
    a.verb = kVerbs[rng.index(spec.verb_vocab)];
    if (rng.bernoulli(kDirectionP)) a.direction = kDirections[rng.index(spec.direction_vocab)];
    if (rng.bernoulli(kLimbP)) a.limb = kLimbs[rng.index(spec.limb_vocab)];
    if (rng.bernoulli(kObjectP)) a.object = kObjects[rng.index(spec.object_vocab)];
    if (rng.bernoulli(kRepetitionP)) a.repetition = static_cast<int>(rng.uniform_int(2, 4));
    lat.atoms.push_back(std::move(a));
  }
  return lat;
}

// A fixed unit vector per slot value, derived from the token itself so it
// is stable across specs and seeds.
std::vector<double> slot_vector(const std::string& slot, const std::string& token,
                                size_t dim) {
  Rng rng(seed_for(fnv1a64(slot + ":" + token), "slot-vector"));
  std::vector<double> v(dim);
  double n2 = 0.0;
  for (size_t i = 0; i < dim; ++i) {
    v[i] = rng.normal();
    n2 += v[i] * v[i];
  }
  double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

std::vector<double> motion_features(const LatentAtoms& lat, const SynthSpec& spec,
                                    Rng& rng) {
  std::vector<double> f(spec.motion_dim, 0.0);
  auto add = [&](const std::string& slot, const std::string& token) {
    auto v = slot_vector(slot, token, spec.motion_dim);
    for (size_t i = 0; i < f.size(); ++i) f[i] += v[i];
  };
  for (const Atom& a : lat.atoms) {
    add("verb", a.verb);
    if (a.direction) add("direction", *a.direction);
    if (a.limb) add("limb", *a.limb);
    if (a.object) add("object", *a.object);
    if (a.repetition && *a.repetition > 1)
      add("repetition", std::to_string(*a.repetition) + "times");
  }
  auto normalize = [&] {
    double n2 = 0.0;
    for (double x : f) n2 += x * x;
    double inv = 1.0 / std::sqrt(n2);
    for (double& x : f) x *= inv;
  };
  normalize();
  for (double& x : f) x += rng.normal(0.0, spec.motion_noise_sd);
  normalize();
  return f;
}

// Renders one annotator's caption. Insertion-only: every canonical token
// appears in the output, and with both rates at zero the output equals the
// canonical rendering exactly.
std::string render_caption(const LatentAtoms& lat, double style_rate,
                           double halluc_rate, Rng& rng) {
  std::vector<std::string> out;
  if (rng.bernoulli(style_rate)) {
    const auto& subj = kSubjectPhrases[rng.index(kSubjectPhrases.size())];
    out.insert(out.end(), subj.begin(), subj.end());
  }
  if (rng.bernoulli(style_rate)) out.push_back(kHedges[rng.index(kHedges.size())]);
  for (size_t i = 0; i < lat.atoms.size(); ++i) {
    if (i > 0) out.push_back(kArrow);
    if (rng.bernoulli(style_rate)) out.push_back(kFillers[rng.index(kFillers.size())]);
    auto at = atom_tokens(lat.atoms[i]);
    out.insert(out.end(), at.begin(), at.end());
    if (rng.bernoulli(halluc_rate)) out.push_back(kEmotions[rng.index(kEmotions.size())]);
    if (rng.bernoulli(halluc_rate)) {
      out.push_back("with");
      out.push_back(kHallucObjects[rng.index(kHallucObjects.size())]);
    }
  }
  if (rng.bernoulli(halluc_rate)) {
    out.push_back("to");
    out.push_back(kPurposes[rng.index(kPurposes.size())]);
  }
  return text::join(out);
}

std::string motion_id_for(size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "m%06zu", i);
  return buf;
}

json atom_to_json(const Atom& a) {
  json j;
  j["verb"] = a.verb;
  j["direction"] = a.direction ? json(*a.direction) : json(nullptr);
  j["limb"] = a.limb ? json(*a.limb) : json(nullptr);
  j["object"] = a.object ? json(*a.object) : json(nullptr);
  j["repetition"] = a.repetition ? json(*a.repetition) : json(nullptr);
  return j;
}

void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& where, size_t line) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw DataError("line " + std::to_string(line) + ": unknown key \"" + it.key() +
                      "\" in " + where);
  }
}

const json& require_key(const json& j, const std::string& key, const std::string& where,
                        size_t line) {
  auto it = j.find(key);
  if (it == j.end())
    throw DataError("line " + std::to_string(line) + ": missing \"" + key + "\" in " + where);
  return *it;
}

Atom atom_from_json(const json& j, size_t line) {
  if (!j.is_object()) throw DataError("line " + std::to_string(line) + ": atom must be an object");
  expect_keys(j, {"verb", "direction", "limb", "object", "repetition"}, "atom", line);
  Atom a;
  const json& verb = require_key(j, "verb", "atom", line);
  if (!verb.is_string() || verb.get<std::string>().empty())
    throw DataError("line " + std::to_string(line) + ": atom verb must be a non-empty string");
  a.verb = verb.get<std::string>();
  auto opt_str = [&](const char* key) -> std::optional<std::string> {
    const json& v = require_key(j, key, "atom", line);
    if (v.is_null()) return std::nullopt;
    if (!v.is_string())
      throw DataError("line " + std::to_string(line) + ": atom " + key + " must be string or null");
    return v.get<std::string>();
  };
  a.direction = opt_str("direction");
  a.limb = opt_str("limb");
  a.object = opt_str("object");
  const json& rep = require_key(j, "repetition", "atom", line);
  if (!rep.is_null()) {
    if (!rep.is_number_integer() || rep.get<int>() < 1)
      throw DataError("line " + std::to_string(line) +
                      ": atom repetition must be a positive integer or null");
    a.repetition = rep.get<int>();
  }
  return a;
}

}  // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

const char* to_string(Source s) {
  switch (s) {
    case Source::kOriginal: return "original";
    case Source::kCanonical: return "canonical";
    case Source::kParaphrase: return "paraphrase";
  }
  return "original";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split \"" + s + "\"");
}

Source source_from_string(const std::string& s) {
  if (s == "original") return Source::kOriginal;
  if (s == "canonical") return Source::kCanonical;
  if (s == "paraphrase") return Source::kParaphrase;
  throw DataError("unknown caption source \"" + s + "\"");
}

const std::vector<std::string>& verb_vocabulary() { return kVerbs; }
const std::vector<std::string>& direction_vocabulary() { return kDirections; }
const std::vector<std::string>& limb_vocabulary() { return kLimbs; }
const std::vector<std::string>& object_vocabulary() { return kObjects; }

std::vector<std::string> nuisance_vocabulary() {
  std::vector<std::string> v;
  for (const auto& phrase : kSubjectPhrases)
    v.insert(v.end(), phrase.begin(), phrase.end());
  v.insert(v.end(), kHedges.begin(), kHedges.end());
  v.insert(v.end(), kFillers.begin(), kFillers.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<std::string> hallucination_vocabulary() {
  std::vector<std::string> v;
  v.insert(v.end(), kEmotions.begin(), kEmotions.end());
  v.insert(v.end(), kHallucObjects.begin(), kHallucObjects.end());
  v.insert(v.end(), kPurposes.begin(), kPurposes.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<std::string> oracle_tokens(const LatentAtoms& latents) {
  std::vector<std::string> out;
  for (size_t i = 0; i < latents.atoms.size(); ++i) {
    if (i > 0) out.push_back(kArrow);
    auto at = atom_tokens(latents.atoms[i]);
    out.insert(out.end(), at.begin(), at.end());
  }
  return out;
}

void validate(const Dataset& ds) {
  std::set<std::string> motion_ids;
  for (const Motion& m : ds.motions) {
    if (m.id.empty()) throw DataError("motion with empty id");
    if (!motion_ids.insert(m.id).second) throw DataError("duplicate motion id \"" + m.id + "\"");
    if (m.features.size() != ds.feature_dim)
      throw DataError("motion \"" + m.id + "\": feature length " +
                      std::to_string(m.features.size()) + " != feature_dim " +
                      std::to_string(ds.feature_dim));
    for (double f : m.features)
      if (!std::isfinite(f)) throw DataError("motion \"" + m.id + "\": non-finite feature");
  }
  std::set<std::string> caption_ids;
  std::set<std::string> with_captions;
  for (const Caption& c : ds.captions) {
    if (c.id.empty()) throw DataError("caption with empty id");
    if (!caption_ids.insert(c.id).second)
      throw DataError("duplicate caption id \"" + c.id + "\"");
    if (!motion_ids.count(c.motion_id))
      throw DataError("caption \"" + c.id + "\" references unknown motion \"" + c.motion_id + "\"");
    if (c.text.empty()) throw DataError("caption \"" + c.id + "\" has empty text");
    if (c.latents) {
      if (c.latents->atoms.empty())
        throw DataError("caption \"" + c.id + "\" has latents with zero atoms");
      for (const Atom& a : c.latents->atoms) {
        if (a.verb.empty()) throw DataError("caption \"" + c.id + "\" atom with empty verb");
        if (a.repetition && *a.repetition < 1)
          throw DataError("caption \"" + c.id + "\" atom with non-positive repetition");
      }
    }
    with_captions.insert(c.motion_id);
  }
  for (const Motion& m : ds.motions)
    if (!with_captions.count(m.id))
      throw DataError("motion \"" + m.id + "\" has no captions");
}

Dataset generate_synthetic(const SynthSpec& spec) {
  if (spec.n_motions == 0 || spec.k_captions == 0)
    throw ConfigError("generate_synthetic: n_motions and k_captions must be positive");
  if (spec.atom_count_min < 1 || spec.atom_count_max < spec.atom_count_min)
    throw ConfigError("generate_synthetic: bad atom_count range");
  if (spec.verb_vocab == 0 || spec.verb_vocab > kVerbs.size() ||
      spec.direction_vocab == 0 || spec.direction_vocab > kDirections.size() ||
      spec.limb_vocab == 0 || spec.limb_vocab > kLimbs.size() ||
      spec.object_vocab == 0 || spec.object_vocab > kObjects.size())
    throw ConfigError("generate_synthetic: slot vocab size out of range");
  if (spec.style_rate < 0.0 || spec.style_rate > 1.0 || spec.halluc_rate < 0.0 ||
      spec.halluc_rate > 1.0)
    throw ConfigError("generate_synthetic: rates must lie in [0,1]");
  if (spec.motion_dim == 0) throw ConfigError("generate_synthetic: motion_dim must be positive");
  if (spec.motion_noise_sd < 0.0)
    throw ConfigError("generate_synthetic: motion_noise_sd must be non-negative");

  Dataset ds;
  ds.name = "synth";
  ds.feature_dim = spec.motion_dim;

  // Latent structure first, nuisance text second, so the latents depend
  // only on the structural fields and the seed.
  Rng structure(seed_for(spec.seed, "structure"));
  std::vector<LatentAtoms> latents;
  latents.reserve(spec.n_motions);
  for (size_t i = 0; i < spec.n_motions; ++i) {
    Motion m;
    m.id = motion_id_for(i);
    m.split = Split::kTrain;
    char key[16];
    std::snprintf(key, sizeof(key), "lat-%06zu", i);
    m.ext_key = key;
    latents.push_back(draw_latents(spec, structure));
    m.features = motion_features(latents.back(), spec, structure);
    ds.motions.push_back(std::move(m));
  }

  Rng nuisance(seed_for(spec.seed, "nuisance"));
  for (size_t i = 0; i < spec.n_motions; ++i) {
    for (size_t k = 0; k < spec.k_captions; ++k) {
      Caption c;
      c.id = ds.motions[i].id + ".c" + std::to_string(k);
      c.motion_id = ds.motions[i].id;
      c.source = Source::kOriginal;
      c.latents = latents[i];
      c.text = render_caption(latents[i], spec.style_rate, spec.halluc_rate, nuisance);
      ds.captions.push_back(std::move(c));
    }
  }
  validate(ds);
  return ds;
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  validate(ds);
  auto by_motion = captions_of(ds);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open \"" + path + "\" for writing");
  for (size_t i = 0; i < ds.motions.size(); ++i) {
    const Motion& m = ds.motions[i];
    json j;
    j["id"] = m.id;
    j["split"] = to_string(m.split);
    j["ext_key"] = m.ext_key ? json(*m.ext_key) : json(nullptr);
    j["features"] = m.features;
    json caps = json::array();
    for (size_t ci : by_motion[i]) {
      const Caption& c = ds.captions[ci];
      json jc;
      jc["id"] = c.id;
      jc["text"] = c.text;
      jc["source"] = to_string(c.source);
      if (c.latents) {
        json atoms = json::array();
        for (const Atom& a : c.latents->atoms) atoms.push_back(atom_to_json(a));
        jc["latents"] = json{{"atoms", atoms}};
      } else {
        jc["latents"] = nullptr;
      }
      caps.push_back(std::move(jc));
    }
    j["captions"] = std::move(caps);
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed for \"" + path + "\"");
}

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open \"" + path + "\"");
  Dataset ds;
  std::string stem = path;
  if (auto pos = stem.find_last_of('/'); pos != std::string::npos) stem = stem.substr(pos + 1);
  if (auto pos = stem.find_last_of('.'); pos != std::string::npos) stem = stem.substr(0, pos);
  ds.name = stem;

  std::string line;
  size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    if (!j.is_object())
      throw DataError("line " + std::to_string(line_no) + ": expected an object");
    expect_keys(j, {"id", "split", "ext_key", "features", "captions"}, "motion", line_no);

    Motion m;
    const json& id = require_key(j, "id", "motion", line_no);
    if (!id.is_string())
      throw DataError("line " + std::to_string(line_no) + ": motion id must be a string");
    m.id = id.get<std::string>();
    const json& split = require_key(j, "split", "motion", line_no);
    if (!split.is_string())
      throw DataError("line " + std::to_string(line_no) + ": split must be a string");
    m.split = split_from_string(split.get<std::string>());
    const json& ext = require_key(j, "ext_key", "motion", line_no);
    if (!ext.is_null()) {
      if (!ext.is_string())
        throw DataError("line " + std::to_string(line_no) + ": ext_key must be string or null");
      m.ext_key = ext.get<std::string>();
    }
    const json& feats = require_key(j, "features", "motion", line_no);
    if (!feats.is_array())
      throw DataError("line " + std::to_string(line_no) + ": features must be an array");
    for (const json& f : feats) {
      if (!f.is_number())
        throw DataError("line " + std::to_string(line_no) + ": feature must be a number");
      m.features.push_back(f.get<double>());
    }
    if (first) {
      ds.feature_dim = m.features.size();
      first = false;
    }

    const json& caps = require_key(j, "captions", "motion", line_no);
    if (!caps.is_array() || caps.empty())
      throw DataError("line " + std::to_string(line_no) + ": captions must be a non-empty array");
    for (const json& jc : caps) {
      if (!jc.is_object())
        throw DataError("line " + std::to_string(line_no) + ": caption must be an object");
      expect_keys(jc, {"id", "text", "source", "latents"}, "caption", line_no);
      Caption c;
      const json& cid = require_key(jc, "id", "caption", line_no);
      if (!cid.is_string())
        throw DataError("line " + std::to_string(line_no) + ": caption id must be a string");
      c.id = cid.get<std::string>();
      const json& ctext = require_key(jc, "text", "caption", line_no);
      if (!ctext.is_string())
        throw DataError("line " + std::to_string(line_no) + ": caption text must be a string");
      c.text = ctext.get<std::string>();
      const json& src = require_key(jc, "source", "caption", line_no);
      if (!src.is_string())
        throw DataError("line " + std::to_string(line_no) + ": caption source must be a string");
      c.source = source_from_string(src.get<std::string>());
      const json& lat = require_key(jc, "latents", "caption", line_no);
      if (!lat.is_null()) {
        if (!lat.is_object())
          throw DataError("line " + std::to_string(line_no) + ": latents must be object or null");
        expect_keys(lat, {"atoms"}, "latents", line_no);
        const json& atoms = require_key(lat, "atoms", "latents", line_no);
        if (!atoms.is_array())
          throw DataError("line " + std::to_string(line_no) + ": atoms must be an array");
        LatentAtoms la;
        for (const json& ja : atoms) la.atoms.push_back(atom_from_json(ja, line_no));
        c.latents = std::move(la);
      }
      c.motion_id = m.id;
      ds.captions.push_back(std::move(c));
    }
    ds.motions.push_back(std::move(m));
  }
  if (ds.motions.empty()) throw DataError("\"" + path + "\" contains no motions");
  validate(ds);
  return ds;
}

std::vector<MotionGroup> group_by_motion(const Dataset& ds) {
  auto by_motion = captions_of(ds);
  std::vector<MotionGroup> groups;
  groups.reserve(ds.motions.size());
  for (size_t i = 0; i < ds.motions.size(); ++i)
    groups.push_back({i, by_motion[i]});
  return groups;
}

std::vector<std::vector<size_t>> captions_of(const Dataset& ds) {
  auto idx = motion_index(ds);
  std::vector<std::vector<size_t>> out(ds.motions.size());
  for (size_t ci = 0; ci < ds.captions.size(); ++ci) {
    auto it = idx.find(ds.captions[ci].motion_id);
    if (it == idx.end())
      throw DataError("caption \"" + ds.captions[ci].id + "\" references unknown motion");
    out[it->second].push_back(ci);
  }
  return out;
}

std::map<std::string, size_t> motion_index(const Dataset& ds) {
  std::map<std::string, size_t> idx;
  for (size_t i = 0; i < ds.motions.size(); ++i) idx.emplace(ds.motions[i].id, i);
  return idx;
}

std::vector<std::pair<size_t, size_t>> match_paired_motions(const Dataset& a,
                                                            const Dataset& b) {
  std::map<std::string, size_t> first_a, first_b;
  for (size_t i = 0; i < a.motions.size(); ++i)
    if (a.motions[i].ext_key) first_a.try_emplace(*a.motions[i].ext_key, i);
  for (size_t i = 0; i < b.motions.size(); ++i)
    if (b.motions[i].ext_key) first_b.try_emplace(*b.motions[i].ext_key, i);
  std::vector<std::pair<size_t, size_t>> pairs;
  for (const auto& [key, ia] : first_a) {
    auto it = first_b.find(key);
    if (it != first_b.end()) pairs.emplace_back(ia, it->second);
  }
  return pairs;
}

Dataset filter_split(const Dataset& ds, Split split) {
  Dataset out;
  out.name = ds.name;
  out.feature_dim = ds.feature_dim;
  std::set<std::string> kept;
  for (const Motion& m : ds.motions)
    if (m.split == split) {
      kept.insert(m.id);
      out.motions.push_back(m);
    }
  for (const Caption& c : ds.captions)
    if (kept.count(c.motion_id)) out.captions.push_back(c);
  return out;
}

ParaphraseRegistry generate_paraphrases(const Dataset& ds, size_t per_caption,
                                        double style_rate, double halluc_rate,
                                        uint64_t seed) {
  ParaphraseRegistry reg;
  Rng rng(seed_for(seed, "paraphrase"));
  for (const Caption& c : ds.captions) {
    if (!c.latents) continue;
    std::vector<std::string> texts;
    texts.reserve(per_caption);
    for (size_t i = 0; i < per_caption; ++i)
      texts.push_back(render_caption(*c.latents, style_rate, halluc_rate, rng));
    reg.items.emplace(c.id, std::move(texts));
  }
  return reg;
}

void save_paraphrases(const ParaphraseRegistry& reg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open \"" + path + "\" for writing");
  for (const auto& [cid, texts] : reg.items) {
    json j;
    j["caption_id"] = cid;
    j["paraphrases"] = texts;
    out << j.dump() << '\n';
  }
}

ParaphraseRegistry load_paraphrases(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open \"" + path + "\"");
  ParaphraseRegistry reg;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
    expect_keys(j, {"caption_id", "paraphrases"}, "paraphrase entry", line_no);
    const json& cid = require_key(j, "caption_id", "paraphrase entry", line_no);
    const json& texts = require_key(j, "paraphrases", "paraphrase entry", line_no);
    if (!cid.is_string() || !texts.is_array())
      throw DataError("line " + std::to_string(line_no) + ": bad paraphrase entry");
    std::vector<std::string> v;
    for (const json& t : texts) {
      if (!t.is_string())
        throw DataError("line " + std::to_string(line_no) + ": paraphrase must be a string");
      v.push_back(t.get<std::string>());
    }
    if (!reg.items.emplace(cid.get<std::string>(), std::move(v)).second)
      throw DataError("line " + std::to_string(line_no) + ": duplicate caption_id");
  }
  return reg;
}

}  // namespace mocha::corpus
