#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "denrl/types.hpp"

namespace denrl {

struct SynthConfig {
  int n_sentences = 1000;
  int entity_types = 3;
  int relation_types = 5;
  int patterns_per_relation = 6;
  double relation_noise_rate = 0.0;
  double entity_noise_rate = 0.0;
  std::uint64_t seed = 1;
  // Independent sentence stream per split; pools (entities, patterns,
  // ontology) depend on the seed only, so splits share a vocabulary.
  int split = 0;
  double positive_fraction = 0.7;
  double multi_relation_prob = 0.25;
  int entities_per_type = 12;
  int neutral_patterns = 15;
};

// Which train-label annotations of a sentence were corrupted.
struct NoiseFlags {
  std::vector<int> noisy_mentions;   // indices into Sentence::mentions
  std::vector<int> noisy_relations;  // indices into Sentence::relations
  bool any() const { return !noisy_mentions.empty() || !noisy_relations.empty(); }
};

struct SynthResult {
  std::vector<Sentence> train;  // distant-supervision-style labels
  std::vector<Sentence> clean;  // hidden clean labels, same ids and tokens
  std::vector<NoiseFlags> flags;
  Ontology ontology;
  // relation type -> required head entity type
  std::vector<std::pair<std::string, std::string>> rules;
  // relation type -> its true patterns, most frequent first
  std::map<std::string, std::vector<std::string>> planted_patterns;
};

SynthResult synthesize_corpus(const SynthConfig& config);

// Noise sidecar, JSON list aligned with the train sentences.
void save_flags(const std::vector<NoiseFlags>& flags,
                const std::filesystem::path& path);
std::vector<NoiseFlags> load_flags(const std::filesystem::path& path);

// True when none of the annotations the instance depends on were corrupted.
bool instance_is_clean(const Sentence& train_sentence, const NoiseFlags& flags,
                       const Instance& inst);

// Same, but only counting relation-label corruption; mention-label noise is
// ignored. Distinguishing the two matters because instance fitness reacts
// to mislabeled relations but is blind to mislabeled entity types.
bool instance_relation_clean(const Sentence& train_sentence,
                             const NoiseFlags& flags, const Instance& inst);

}  // namespace denrl
