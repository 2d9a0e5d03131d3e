#include <cstdio>
#include <filesystem>
#include <fstream>

#include "denrl/corpus.hpp"
#include "denrl/synth.hpp"
#include "doctest.h"

using namespace denrl;

namespace {

Ontology demo_ontology() {
  return {{"PERSON", "ORGANIZATION", "LOCATION"}, {"Founder_of", "Born_in"}};
}

// "Bill Gates , co-founder of Microsoft , was born in Seattle ."
Sentence demo_sentence() {
  Sentence s;
  s.id = "demo";
  s.tokens = {"Bill", "Gates", ",",    "co-founder", "of",      "Microsoft",
              ",",    "was",   "born", "in",         "Seattle", "."};
  s.mentions = {{{0, 2}, "PERSON"},
                {{5, 6}, "ORGANIZATION"},
                {{10, 11}, "LOCATION"}};
  s.relations = {{0, 1, "Founder_of"}, {0, 2, "Born_in"}};
  return s;
}

std::filesystem::path tmpfile(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("tag vocabulary layout and name round trip") {
  TagVocab tags(demo_ontology());
  CHECK(tags.size() == 1 + 2 * (3 + 2));
  CHECK(tags.name(TagVocab::O) == "O");
  CHECK(tags.name(tags.b_entity(0)) == "B-PERSON");
  CHECK(tags.name(tags.i_relation(1)) == "I-Born_in");
  for (int t = 0; t < tags.size(); ++t) CHECK(tags.parse(tags.name(t)) == t);
  CHECK_THROWS_AS(tags.parse("B-Nope"), std::invalid_argument);
  CHECK(tags.is_b(tags.b_relation(0)));
  CHECK(tags.is_i(tags.i_entity(2)));
  CHECK(tags.b_of(tags.i_relation(1)) == tags.b_relation(1));
}

TEST_CASE("start-position tag sequences of the demo sentence") {
  Ontology onto = demo_ontology();
  TagVocab tags(onto);
  Sentence s = demo_sentence();
  auto instances = encode_tag_sequences(s, tags);
  REQUIRE(instances.size() == s.tokens.size());

  const Instance& head = instances[0];
  CHECK(head.positive);
  CHECK(head.head_entity_type == 0);
  CHECK(head.gold_tags[0] == tags.b_entity(0));   // B-PERSON
  CHECK(head.gold_tags[1] == tags.i_entity(0));   // I-PERSON
  CHECK(head.gold_tags[5] == tags.b_relation(0)); // B-Founder_of
  CHECK(head.gold_tags[10] == tags.b_relation(1)); // B-Born_in
  CHECK(head.gold_tags[2] == TagVocab::O);
  CHECK(head.relations.size() == 2);

  // Microsoft heads no relation: entity-only positive=false sequence
  const Instance& ms = instances[5];
  CHECK_FALSE(ms.positive);
  CHECK(ms.head_entity_type == 1);
  CHECK(ms.gold_tags[5] == tags.b_entity(1));

  // non-entity start position: all O
  for (int t : instances[3].gold_tags) CHECK(t == TagVocab::O);
  CHECK(instances[3].head_entity_type == -1);
}

TEST_CASE("decode recovers the gold records") {
  Ontology onto = demo_ontology();
  TagVocab tags(onto);
  Sentence s = demo_sentence();
  auto instances = encode_tag_sequences(s, tags);
  std::vector<std::vector<int>> seqs;
  for (const auto& inst : instances) seqs.push_back(inst.gold_tags);
  CHECK(decode_quadruplets(seqs, tags) == gold_records(s, tags));
}

TEST_CASE("dangling I tags are repaired to B") {
  Ontology onto = demo_ontology();
  TagVocab tags(onto);
  // I-PERSON with no preceding B-PERSON at position 0 and after O
  std::vector<std::vector<int>> seqs(3, std::vector<int>(3, TagVocab::O));
  seqs[0] = {tags.i_entity(0), tags.i_entity(0), TagVocab::O};
  auto records = decode_quadruplets(seqs, tags);
  REQUIRE(records.size() == 1);
  CHECK(records.begin()->e1 == Span{0, 2});
  CHECK(records.begin()->tag1 == 0);
}

TEST_CASE("duplicate (head, tail) pairs keep the first and are counted") {
  Ontology onto = demo_ontology();
  TagVocab tags(onto);
  Sentence s = demo_sentence();
  s.relations.push_back({0, 1, "Born_in"});  // second relation to Microsoft
  int conflicts = 0;
  auto instances = encode_tag_sequences(s, tags, &conflicts);
  CHECK(conflicts == 1);
  CHECK(instances[0].relations.size() == 2);
  CHECK(instances[0].gold_tags[5] == tags.b_relation(0));  // Founder_of won
}

TEST_CASE("validation catches structural violations") {
  Ontology onto = demo_ontology();
  Sentence s = demo_sentence();
  CHECK_NOTHROW(validate_sentence(s, onto));

  Sentence bad = s;
  bad.mentions[0].span = {0, 20};
  CHECK_THROWS_AS(validate_sentence(bad, onto), std::invalid_argument);

  bad = s;
  bad.mentions.push_back({{1, 3}, "PERSON"});  // overlaps Bill Gates
  CHECK_THROWS_AS(validate_sentence(bad, onto), std::invalid_argument);

  bad = s;
  bad.relations[0].tail = 9;
  CHECK_THROWS_AS(validate_sentence(bad, onto), std::invalid_argument);

  bad = s;
  bad.relations[0].tail = 0;  // self loop
  CHECK_THROWS_AS(validate_sentence(bad, onto), std::invalid_argument);
}

TEST_CASE("corpus files round trip and the loader filters bad records") {
  Ontology onto = demo_ontology();
  auto path = tmpfile("corpus_roundtrip.jsonl");
  std::vector<Sentence> sentences = {demo_sentence()};
  save_corpus(sentences, path);
  auto loaded = load_corpus(path, onto);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].tokens == sentences[0].tokens);
  CHECK(loaded[0].mentions == sentences[0].mentions);
  CHECK(loaded[0].relations == sentences[0].relations);

  // structural violation: skipped with a count
  Sentence bad = demo_sentence();
  bad.id = "bad";
  bad.mentions[0].span = {0, 99};
  save_corpus({demo_sentence(), bad}, path);
  LoadStats stats;
  loaded = load_corpus(path, onto, &stats);
  CHECK(loaded.size() == 1);
  CHECK(stats.skipped == 1);

  // unknown label: hard error naming the label
  Sentence unk = demo_sentence();
  unk.mentions[0].entity_type = "ALIEN";
  save_corpus({unk}, path);
  CHECK_THROWS_WITH_AS(load_corpus(path, onto),
                       doctest::Contains("ALIEN"), std::runtime_error);

  std::filesystem::remove(path);
}

TEST_CASE("ontology file round trip") {
  auto path = tmpfile("onto.json");
  Ontology onto = demo_ontology();
  save_ontology(onto, path);
  Ontology back = load_ontology(path);
  CHECK(back.entity_types == onto.entity_types);
  CHECK(back.relation_types == onto.relation_types);
  std::filesystem::remove(path);
}

TEST_CASE("round trip property over random synthetic sentences") {
  SynthConfig cfg;
  cfg.n_sentences = 400;
  cfg.seed = 11;
  SynthResult res = synthesize_corpus(cfg);
  TagVocab tags(res.ontology);
  for (const auto& s : res.clean) {
    auto instances = encode_tag_sequences(s, tags);
    REQUIRE(static_cast<int>(instances.size()) == s.length());
    std::vector<std::vector<int>> seqs;
    for (const auto& inst : instances) seqs.push_back(inst.gold_tags);
    CHECK(decode_quadruplets(seqs, tags) == gold_records(s, tags));
  }
}

TEST_CASE("synthesizer determinism and noise bookkeeping") {
  SynthConfig cfg;
  cfg.n_sentences = 300;
  cfg.relation_noise_rate = 0.3;
  cfg.entity_noise_rate = 0.1;
  cfg.seed = 5;
  SynthResult a = synthesize_corpus(cfg);
  SynthResult b = synthesize_corpus(cfg);
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].tokens == b.train[i].tokens);
    CHECK(a.train[i].mentions == b.train[i].mentions);
    CHECK(a.train[i].relations == b.train[i].relations);
  }

  // clean sidecar shares ids/tokens and the flags mark ~30% of positives
  int noisy_rel = 0, relations = 0;
  for (size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].id == a.clean[i].id);
    CHECK(a.train[i].tokens == a.clean[i].tokens);
    relations += static_cast<int>(a.train[i].relations.size());
    noisy_rel += static_cast<int>(a.flags[i].noisy_relations.size());
  }
  REQUIRE(relations > 0);
  double rate = static_cast<double>(noisy_rel) / relations;
  CHECK(rate > 0.20);
  CHECK(rate < 0.40);

  // different seed changes the corpus
  cfg.seed = 6;
  SynthResult c = synthesize_corpus(cfg);
  bool differs = false;
  for (size_t i = 0; i < std::min(a.train.size(), c.train.size()); ++i)
    if (a.train[i].tokens != c.train[i].tokens) differs = true;
  CHECK(differs);
}

TEST_CASE("noise flag sidecar round trips") {
  std::vector<NoiseFlags> flags(3);
  flags[0].noisy_mentions = {1};
  flags[2].noisy_relations = {0, 2};
  auto path = tmpfile("flags.json");
  save_flags(flags, path);
  auto back = load_flags(path);
  REQUIRE(back.size() == 3);
  CHECK(back[0].noisy_mentions == flags[0].noisy_mentions);
  CHECK(back[2].noisy_relations == flags[2].noisy_relations);
  CHECK_FALSE(back[1].any());
  std::filesystem::remove(path);
}

TEST_CASE("clean instances are identified through the noise flags") {
  Ontology onto = demo_ontology();
  TagVocab tags(onto);
  Sentence s = demo_sentence();
  auto instances = encode_tag_sequences(s, tags);

  NoiseFlags clean;
  CHECK(instance_is_clean(s, clean, instances[0]));

  NoiseFlags rel_noise;
  rel_noise.noisy_relations = {0};
  CHECK_FALSE(instance_is_clean(s, rel_noise, instances[0]));
  // Microsoft's own instance heads no relation, so it is unaffected
  CHECK(instance_is_clean(s, rel_noise, instances[5]));

  NoiseFlags tail_noise;
  tail_noise.noisy_mentions = {1};
  CHECK_FALSE(instance_is_clean(s, tail_noise, instances[0]));
  CHECK_FALSE(instance_is_clean(s, tail_noise, instances[5]));
  CHECK(instance_is_clean(s, tail_noise, instances[10]));
}
