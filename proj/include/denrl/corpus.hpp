#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "denrl/types.hpp"

namespace denrl {

// Validates sentence invariants; throws std::invalid_argument on violation.
void validate_sentence(const Sentence& s, const Ontology& onto);

// One Instance per start position p (T instances for a T-token sentence).
std::vector<Instance> encode_tag_sequences(const Sentence& s,
                                           const TagVocab& tags,
                                           int* conflict_count = nullptr);

// Aggregates the T tag sequences of one sentence into extraction records.
// Dangling I-X is repaired to B-X before span extraction.
std::set<Quadruplet> decode_quadruplets(
    const std::vector<std::vector<int>>& sequences, const TagVocab& tags);

// Gold records of a sentence: one quadruplet per relation plus an
// entity-only record for every mention that heads no relation.
std::set<Quadruplet> gold_records(const Sentence& s, const TagVocab& tags);

struct LoadStats {
  int skipped = 0;             // records violating invariants
  int relation_conflicts = 0;  // duplicate (head, tail) pairs, first kept
};

std::vector<Sentence> load_corpus(const std::filesystem::path& path,
                                  const Ontology& onto,
                                  LoadStats* stats = nullptr);
void save_corpus(const std::vector<Sentence>& sentences,
                 const std::filesystem::path& path);

Ontology load_ontology(const std::filesystem::path& path);
void save_ontology(const Ontology& onto, const std::filesystem::path& path);

}  // namespace denrl
