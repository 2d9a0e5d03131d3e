// Compares the serial reference and the OpenMP path of the corpus-level
// kernels (fitness scoring, decoding) and checks they agree exactly.
#include <chrono>
#include <cstdio>

#include "denrl/eval.hpp"
#include "denrl/sal.hpp"
#include "denrl/synth.hpp"

using namespace denrl;
using Clock = std::chrono::steady_clock;

static double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int main(int argc, char** argv) {
  int n_sentences = argc > 1 ? std::atoi(argv[1]) : 400;
  int threads = argc > 2 ? std::atoi(argv[2]) : 4;

  SynthConfig scfg;
  scfg.n_sentences = n_sentences;
  scfg.seed = 7;
  SynthResult synth = synthesize_corpus(scfg);
  Dataset data = Dataset::build(synth.train, synth.ontology);

  TrainConfig cfg;
  cfg.dim = 32;
  cfg.ffn = 64;
  JointTagger model(cfg.model_config(data.vocab.size(), data.tags.size()),
                    cfg.seed);
  OntologyRules rules;
  for (const auto& [rel, ent] : synth.rules) rules.push_back({rel, ent});
  CompiledRules crules = compile_rules(rules, data.tags);
  BowTable bow = initial_pattern_set(data).bow();

  std::printf("%d sentences, %d threads\n", n_sentences, threads);

  auto t0 = Clock::now();
  auto serial_scores = score_fitness(model, data, bow, crules, 1);
  double serial_fit = ms_since(t0);
  t0 = Clock::now();
  auto parallel_scores = score_fitness(model, data, bow, crules, threads);
  double parallel_fit = ms_since(t0);

  bool fit_ok = true;
  for (size_t i = 0; i < serial_scores.size(); ++i)
    for (size_t p = 0; p < serial_scores[i].size(); ++p)
      if (serial_scores[i][p].u != parallel_scores[i][p].u) fit_ok = false;

  t0 = Clock::now();
  auto serial_pred = predict(model, data, false, 1);
  double serial_dec = ms_since(t0);
  t0 = Clock::now();
  auto parallel_pred = predict(model, data, false, threads);
  double parallel_dec = ms_since(t0);
  bool dec_ok = serial_pred == parallel_pred;

  std::printf("fitness  serial %8.1f ms  parallel %8.1f ms  speedup %.2fx  %s\n",
              serial_fit, parallel_fit, serial_fit / parallel_fit,
              fit_ok ? "identical" : "MISMATCH");
  std::printf("decode   serial %8.1f ms  parallel %8.1f ms  speedup %.2fx  %s\n",
              serial_dec, parallel_dec, serial_dec / parallel_dec,
              dec_ok ? "identical" : "MISMATCH");
  return fit_ok && dec_ok ? 0 : 1;
}
