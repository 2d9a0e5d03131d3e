#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "denrl/tape.hpp"
#include "denrl/types.hpp"

namespace denrl {

// Per-relation token frequencies aggregated over the trusted pattern set.
struct BowTable {
  std::map<std::string, std::map<std::string, int>> counts;

  int count(const std::string& relation, const std::string& token) const {
    auto it = counts.find(relation);
    if (it == counts.end()) return 0;
    auto jt = it->second.find(token);
    return jt == it->second.end() ? 0 : jt->second;
  }
};

struct OntologyRule {
  std::string relation;
  std::string head_entity;
};
using OntologyRules = std::vector<OntologyRule>;

OntologyRules load_rules(const std::filesystem::path& path,
                         const Ontology& onto);
void save_rules(const OntologyRules& rules, const std::filesystem::path& path);

// Rules mapped onto tag indices: (B-relation tag, B-entity tag).
struct CompiledRules {
  std::vector<std::pair<int, int>> items;
};
CompiledRules compile_rules(const OntologyRules& rules, const TagVocab& tags);

// Guidance distribution a^p for one relation type of a positive instance:
// pre-softmax score per token is the BoW count when the token is in the
// relation's BoW, 1 when it lies inside a head/tail span of that relation,
// 0 otherwise.
Vec guidance_for_relation(const std::vector<std::string>& tokens,
                          const Instance& inst, int relation,
                          const std::string& relation_name,
                          const BowTable& bow);

// a^I: elementwise mean of the per-relation-type guidance vectors.
Vec instance_guidance(const std::vector<Vec>& per_relation);

// Convenience: a^I straight from a positive instance.
Vec instance_guidance_for(const Sentence& s, const Instance& inst,
                          const BowTable& bow, const TagVocab& tags);

// a^S: average of the T position-attention rows.
Vec model_attention_summary(const Mat& attention);

double br_loss(const Vec& guidance, const Vec& summary);

// Distance to satisfaction over rules whose relation matches the predicted
// tail tag; 0 when no rule matches.
double logic_distance(const Vec& p_head, const Vec& p_tail, int yhat1,
                      int yhat2, const CompiledRules& rules);

// Sum of logic distances over the instance's (head, tail) B-token pairs,
// reading softmax probabilities from rows of Z.
double olf_loss(const Mat& Z,
                const std::vector<std::pair<int, int>>& pair_positions,
                const CompiledRules& rules);

inline double total_loss(double lc, double lbr, double lolf, double alpha,
                         double beta) {
  return lc + alpha * lbr + beta * lolf;
}

// Tape nodes (scalar outputs) used during training.
int br_loss_node(Tape& t, int attention, Vec guidance);
int olf_loss_node(Tape& t, int z,
                  std::vector<std::pair<int, int>> pair_positions,
                  CompiledRules rules);

// B-token positions of every (head, tail) pair of an instance.
std::vector<std::pair<int, int>> instance_pair_positions(const Instance& inst);

}  // namespace denrl
