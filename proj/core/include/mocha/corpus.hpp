#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mocha::corpus {

enum class Split { kTrain, kVal, kTest };
enum class Source { kOriginal, kCanonical, kParaphrase };

const char* to_string(Split s);
const char* to_string(Source s);
Split split_from_string(const std::string& s);
Source source_from_string(const std::string& s);

// One semantic segment of a motion: mandatory verb plus optional slots.
struct Atom {
  std::string verb;
  std::optional<std::string> direction;
  std::optional<std::string> limb;
  std::optional<std::string> object;
  std::optional<int> repetition;  // > 1 when present
  bool operator==(const Atom&) const = default;
};

struct LatentAtoms {
  std::vector<Atom> atoms;
  bool operator==(const LatentAtoms&) const = default;
};

struct Caption {
  std::string id;
  std::string motion_id;
  std::string text;
  Source source = Source::kOriginal;
  std::optional<LatentAtoms> latents;
  bool operator==(const Caption&) const = default;
};

struct Motion {
  std::string id;
  Split split = Split::kTrain;
  std::optional<std::string> ext_key;
  std::vector<double> features;
  bool operator==(const Motion&) const = default;
};

struct Dataset {
  std::string name;
  size_t feature_dim = 0;
  std::vector<Motion> motions;
  std::vector<Caption> captions;

  bool operator==(const Dataset& o) const {
    return feature_dim == o.feature_dim && motions == o.motions && captions == o.captions;
  }
};

// Generator knobs. The same seed always reproduces the same latent corpus
// (atoms and motion features); the nuisance rates only shape the rendered
// caption text, so two specs differing in rates alone share their latents.
struct SynthSpec {
  size_t n_motions = 100;
  size_t k_captions = 3;
  int atom_count_min = 1;
  int atom_count_max = 4;
  size_t verb_vocab = 24;
  size_t direction_vocab = 10;
  size_t limb_vocab = 12;
  size_t object_vocab = 12;
  double style_rate = 0.5;
  double halluc_rate = 0.2;
  size_t motion_dim = 64;
  double motion_noise_sd = 0.01;
  uint64_t seed = 0;
};

struct MotionGroup {
  size_t motion_idx = 0;
  std::vector<size_t> caption_idx;
};

struct ParaphraseRegistry {
  std::map<std::string, std::vector<std::string>> items;  // caption id -> texts
  bool operator==(const ParaphraseRegistry&) const = default;
};

// Built-in generator vocabularies (atom slots and nuisance insertions).
const std::vector<std::string>& verb_vocabulary();
const std::vector<std::string>& direction_vocabulary();
const std::vector<std::string>& limb_vocabulary();
const std::vector<std::string>& object_vocabulary();
std::vector<std::string> nuisance_vocabulary();       // style insertions
std::vector<std::string> hallucination_vocabulary();  // disjoint from atom vocab

// Canonical token stream for a latent: per atom verb, object, limb,
// direction, then "<n>times" when repetition > 1; atoms joined by an arrow.
std::vector<std::string> oracle_tokens(const LatentAtoms& latents);

void validate(const Dataset& ds);

Dataset generate_synthetic(const SynthSpec& spec);

void save_jsonl(const Dataset& ds, const std::string& path);
Dataset load_jsonl(const std::string& path);

// Groups caption indices under their motion, both in dataset order.
std::vector<MotionGroup> group_by_motion(const Dataset& ds);

// Per-motion caption index lists aligned with ds.motions.
std::vector<std::vector<size_t>> captions_of(const Dataset& ds);

std::map<std::string, size_t> motion_index(const Dataset& ds);

// One-to-one motion pairs with equal ext_key, ordered by key; the first
// occurrence in each dataset wins when a key repeats.
std::vector<std::pair<size_t, size_t>> match_paired_motions(const Dataset& a,
                                                            const Dataset& b);

Dataset filter_split(const Dataset& ds, Split split);

// Fresh nuisance redraws of each latent-bearing caption.
ParaphraseRegistry generate_paraphrases(const Dataset& ds, size_t per_caption,
                                        double style_rate, double halluc_rate,
                                        uint64_t seed);

void save_paraphrases(const ParaphraseRegistry& reg, const std::string& path);
ParaphraseRegistry load_paraphrases(const std::string& path);

}  // namespace mocha::corpus
