#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "denrl/dataset.hpp"
#include "denrl/model.hpp"

namespace denrl {

enum class MatchMode { kQuadruplet, kTriplet };

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long true_positives = 0;
  long predicted = 0;
  long gold = 0;
  MatchMode mode = MatchMode::kQuadruplet;
};

bool match(const Quadruplet& pred, const Quadruplet& gold, MatchMode mode);

// Micro-averaged P/R/F1 with set semantics. Predictions for unknown
// sentence ids are an error.
EvalReport score(const std::map<std::string, std::set<Quadruplet>>& pred,
                 const std::map<std::string, std::set<Quadruplet>>& gold,
                 MatchMode mode);

// Viterbi-decodes all T tag sequences of every sentence and aggregates the
// extraction records. The encoder runs once per sentence. threads > 1
// parallelizes over sentences (read-only, result identical to serial).
std::map<std::string, std::set<Quadruplet>> predict(JointTagger& model,
                                                    const Dataset& data,
                                                    bool fc_decoder = false,
                                                    int threads = 1);

std::map<std::string, std::set<Quadruplet>> gold_sets(const Dataset& data);

// Convenience: predict + score against the dataset's own annotations.
EvalReport evaluate(JointTagger& model, const Dataset& data, MatchMode mode,
                    bool fc_decoder = false, int threads = 1);

std::string report_to_json(const EvalReport& r);
std::string report_to_table(const EvalReport& r);

}  // namespace denrl
