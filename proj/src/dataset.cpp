#include "denrl/dataset.hpp"

namespace denrl {

Dataset Dataset::build(std::vector<Sentence> sentences, const Ontology& onto,
                       const Vocab* shared_vocab) {
  Dataset d;
  d.tags = TagVocab(onto);
  d.sentences = std::move(sentences);
  if (shared_vocab) {
    d.vocab = *shared_vocab;
  } else {
    std::vector<std::vector<std::string>> token_lists;
    token_lists.reserve(d.sentences.size());
    for (const auto& s : d.sentences) token_lists.push_back(s.tokens);
    d.vocab = Vocab::build(token_lists);
  }
  d.instances.reserve(d.sentences.size());
  d.token_ids.reserve(d.sentences.size());
  for (size_t i = 0; i < d.sentences.size(); ++i) {
    auto insts = encode_tag_sequences(d.sentences[i], d.tags);
    for (auto& inst : insts) inst.sentence_index = static_cast<int>(i);
    d.instances.push_back(std::move(insts));
    d.token_ids.push_back(d.vocab.ids(d.sentences[i].tokens));
  }
  return d;
}

}  // namespace denrl
