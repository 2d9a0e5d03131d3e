#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "denrl/dataset.hpp"
#include "denrl/regularizers.hpp"
#include "denrl/trainer.hpp"

namespace denrl {

struct Pattern {
  std::string text;
  int frequency = 0;
  int loop_added = 0;
  // running fitness stats of instances matching this pattern
  double fitness_sum = 0.0;
  long fitness_count = 0;

  double avg_fitness() const {
    return fitness_count > 0 ? fitness_sum / fitness_count : 0.0;
  }
};

// Trusted relation patterns. Empty pattern strings are never admitted.
struct PatternSet {
  std::map<std::string, std::vector<Pattern>> by_relation;

  bool contains(const std::string& relation, const std::string& text) const;
  Pattern* find(const std::string& relation, const std::string& text);
  int total() const;
  // Token frequencies aggregated over the pattern strings of each relation.
  BowTable bow() const;

  void save(const std::filesystem::path& path) const;
  static PatternSet load(const std::filesystem::path& path);
};

// Tokens strictly between the two spans in document order, space-joined.
// Adjacent spans give "".
std::string extract_pattern(const std::vector<std::string>& tokens,
                            const Span& a, const Span& b);

// Lowercased space-joined surface form of a span.
std::string span_surface(const std::vector<std::string>& tokens,
                         const Span& s);

// Top ceil(top_percent * distinct) patterns per relation by corpus
// frequency, ties toward the lexicographically smaller pattern; at least
// one per relation that has any non-empty pattern.
PatternSet initial_pattern_set(const Dataset& data,
                               double top_percent = 0.10);

// Initial data redistribution: positives whose extracted pattern is
// trusted, plus entity-start negatives whose surface form equals a head or
// tail of a matched positive occurrence.
std::vector<ItemRef> redistribute(const Dataset& data, const PatternSet& P);

struct Fitness {
  double u = 0.5;
  double br = 0.0;
  double olf = 0.0;
};

inline double fitness_u(double br_mse, double olf_dist) {
  return 1.0 / (1.0 + std::exp(-(br_mse + olf_dist)));
}

// Eval-mode fitness of every entity-start instance, [sentence][p]; other
// positions keep the default. Read-only over the model, parallel over
// sentences.
std::vector<std::vector<Fitness>> score_fitness(JointTagger& model,
                                                const Dataset& data,
                                                const BowTable& bow,
                                                const CompiledRules& rules,
                                                int threads = 1);

// Positives with u strictly below tau.
std::vector<ItemRef> select_instances(
    const Dataset& data, const std::vector<std::vector<Fitness>>& scores,
    double tau);

// Adds the <= k most frequent untrusted non-empty patterns per relation
// found among the selected positives. Returns how many were added.
int mine_patterns(const Dataset& data, const std::vector<ItemRef>& selected,
                  PatternSet& P, int k, int loop);

// Entity selection: entity-start negatives whose surface form equals a
// head or tail entity of a selected positive's relations.
std::vector<ItemRef> entity_selection(
    const Dataset& data, const std::vector<ItemRef>& selected_positives);

// Seeded sample of all-O start positions, `target` many (without
// replacement when possible).
std::vector<ItemRef> sample_nonentity_instances(const Dataset& data,
                                                int target,
                                                std::mt19937_64& rng);

struct LoopMetrics {
  int loop = 0;
  int positives = 0;
  int negatives = 0;
  int nonentity = 0;
  int patterns_total = 0;
  int patterns_added = 0;
  double selection_precision = -1.0;  // -1 when clean labels are unknown
  // precision counting only relation-label noise (mention noise ignored)
  double selection_precision_relations = -1.0;
  double val_precision = 0.0;
  double val_recall = 0.0;
  double val_f1 = 0.0;
  double lc = 0.0, lbr = 0.0, lolf = 0.0;
};

struct SalResult {
  PatternSet patterns;
  std::vector<LoopMetrics> metrics;
  int loops_run = 0;
  int best_loop = 0;
  double best_f1 = 0.0;  // validation quadruplet F1, fraction
  bool selection_warning = false;
};

// Outer training loop. With use_sal the subset is rescored every loop;
// without it the loop-0 subset is reused, so every ablation arm trains on
// the same schedule. is_clean (optional) labels instances for the
// selection-precision metric. run_dir (optional) receives
// loop<k>/epoch<j>.ckpt checkpoints, metrics.jsonl and patterns.json.
// The model is left at the best-validation checkpoint.
SalResult sal_loop(JointTagger& model, AdamW& opt, const Dataset& train,
                   const Dataset& val, const OntologyRules& rules,
                   const TrainConfig& cfg,
                   const std::function<bool(const ItemRef&)>* is_clean = nullptr,
                   const std::filesystem::path* run_dir = nullptr,
                   const std::function<bool(const ItemRef&)>* is_relation_clean =
                       nullptr);

}  // namespace denrl
