#pragma once

#include <vector>

#include "denrl/corpus.hpp"
#include "denrl/model.hpp"
#include "denrl/types.hpp"

namespace denrl {

// Sentences with their tag-sequence instances and token ids, ready for
// training and scoring.
struct Dataset {
  TagVocab tags;
  Vocab vocab;
  std::vector<Sentence> sentences;
  std::vector<std::vector<Instance>> instances;  // [sentence][p]
  std::vector<std::vector<int>> token_ids;       // [sentence]

  // Builds instances for every sentence. When shared_vocab is null the
  // vocabulary is built from these sentences (training split), otherwise
  // the given vocabulary is reused (validation/test splits).
  static Dataset build(std::vector<Sentence> sentences, const Ontology& onto,
                       const Vocab* shared_vocab = nullptr);

  const Ontology& ontology() const { return tags.ontology(); }
};

// Reference to one instance of a dataset.
struct ItemRef {
  int sentence = -1;
  int p = -1;
  bool operator==(const ItemRef&) const = default;
  auto operator<=>(const ItemRef&) const = default;
};

inline const Instance& item(const Dataset& d, const ItemRef& r) {
  return d.instances[r.sentence][r.p];
}

}  // namespace denrl
