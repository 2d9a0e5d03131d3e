#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "denrl/dataset.hpp"
#include "denrl/eval.hpp"
#include "denrl/regularizers.hpp"
#include "denrl/sal.hpp"
#include "denrl/synth.hpp"
#include "denrl/trainer.hpp"

namespace denrl {

struct RunInputs {
  std::vector<Sentence> train;
  std::vector<Sentence> valid;
  std::vector<Sentence> test;
  Ontology ontology;
  OntologyRules rules;
  // noise sidecar aligned with train, for selection-precision metrics
  const std::vector<NoiseFlags>* flags = nullptr;
};

struct RunResult {
  SalResult sal;
  EvalReport test_quadruplet;
  EvalReport test_triplet;
};

// Trains per the config and evaluates on the test split. When run_dir is
// set the directory receives config.json, metrics.jsonl, patterns.json,
// loop<k>/epoch<j>.ckpt checkpoints and eval.json.
RunResult run_training(const RunInputs& in, const TrainConfig& cfg,
                       const std::filesystem::path* run_dir = nullptr);

}  // namespace denrl
