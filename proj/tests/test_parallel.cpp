#include <vector>

#include "denrl/eval.hpp"
#include "denrl/parallel.hpp"
#include "denrl/sal.hpp"
#include "denrl/synth.hpp"
#include "doctest.h"

using namespace denrl;

TEST_CASE("parallel_for covers every index exactly once") {
  std::vector<int> hits(1000, 0);
  parallel_for(1000, 4, [&](int i) { hits[i] += i; });
  for (int i = 0; i < 1000; ++i) CHECK(hits[i] == i);
  parallel_for(0, 4, [&](int) { CHECK(false); });
}

TEST_CASE("parallel kernels match the serial reference bit for bit") {
  SynthConfig cfg;
  cfg.n_sentences = 60;
  cfg.relation_noise_rate = 0.3;
  cfg.seed = 31;
  SynthResult synth = synthesize_corpus(cfg);
  Dataset data = Dataset::build(synth.train, synth.ontology);

  TrainConfig tc;
  tc.dim = 16;
  tc.ffn = 32;
  JointTagger model(tc.model_config(data.vocab.size(), data.tags.size()),
                    tc.seed);
  OntologyRules rules;
  for (const auto& [rel, ent] : synth.rules) rules.push_back({rel, ent});
  CompiledRules crules = compile_rules(rules, data.tags);
  BowTable bow = initial_pattern_set(data).bow();

  auto serial = score_fitness(model, data, bow, crules, 1);
  auto parallel = score_fitness(model, data, bow, crules, 4);
  REQUIRE(serial.size() == parallel.size());
  for (size_t i = 0; i < serial.size(); ++i)
    for (size_t p = 0; p < serial[i].size(); ++p) {
      CHECK(serial[i][p].u == parallel[i][p].u);
      CHECK(serial[i][p].br == parallel[i][p].br);
      CHECK(serial[i][p].olf == parallel[i][p].olf);
    }

  CHECK(predict(model, data, false, 1) == predict(model, data, false, 4));
}
