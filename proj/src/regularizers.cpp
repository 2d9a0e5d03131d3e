#include "denrl/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace denrl {

using nlohmann::json;

OntologyRules load_rules(const std::filesystem::path& path,
                         const Ontology& onto) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rules file: " + path.string());
  json j = json::parse(in);
  OntologyRules rules;
  for (const auto& r : j) {
    OntologyRule rule{r.at("relation").get<std::string>(),
                      r.at("head_entity").get<std::string>()};
    if (!onto.has_relation(rule.relation))
      throw std::runtime_error("rule references unknown relation: " +
                               rule.relation);
    if (!onto.has_entity(rule.head_entity))
      throw std::runtime_error("rule references unknown entity type: " +
                               rule.head_entity);
    rules.push_back(std::move(rule));
  }
  return rules;
}

void save_rules(const OntologyRules& rules,
                const std::filesystem::path& path) {
  json j = json::array();
  for (const auto& r : rules)
    j.push_back({{"relation", r.relation}, {"head_entity", r.head_entity}});
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

CompiledRules compile_rules(const OntologyRules& rules, const TagVocab& tags) {
  const Ontology& onto = tags.ontology();
  CompiledRules out;
  for (const auto& r : rules)
    out.items.emplace_back(tags.b_relation(onto.relation_index(r.relation)),
                           tags.b_entity(onto.entity_index(r.head_entity)));
  return out;
}

static Vec softmax(const Vec& x) {
  double m = x.maxCoeff();
  Vec e = (x.array() - m).exp();
  return e / e.sum();
}

Vec guidance_for_relation(const std::vector<std::string>& tokens,
                          const Instance& inst, int relation,
                          const std::string& relation_name,
                          const BowTable& bow) {
  int T = static_cast<int>(tokens.size());
  std::vector<bool> entity_token(T, false);
  bool found = false;
  for (const auto& rel : inst.relations) {
    if (rel.relation != relation) continue;
    found = true;
    for (int t = rel.head.start; t < rel.head.end; ++t) entity_token[t] = true;
    for (int t = rel.tail.start; t < rel.tail.end; ++t) entity_token[t] = true;
  }
  if (!found)
    throw std::invalid_argument("guidance_for_relation: relation " +
                                relation_name + " absent from instance");
  Vec scores = Vec::Zero(T);
  for (int t = 0; t < T; ++t) {
    int c = bow.count(relation_name, tokens[t]);
    if (c > 0)
      scores(t) = c;
    else if (entity_token[t])
      scores(t) = 1.0;
  }
  return softmax(scores);
}

Vec instance_guidance(const std::vector<Vec>& per_relation) {
  if (per_relation.empty())
    throw std::invalid_argument("instance_guidance: no relation guidance");
  Vec out = per_relation[0];
  for (size_t i = 1; i < per_relation.size(); ++i) out += per_relation[i];
  return out / static_cast<double>(per_relation.size());
}

Vec instance_guidance_for(const Sentence& s, const Instance& inst,
                          const BowTable& bow, const TagVocab& tags) {
  std::set<int> rel_types;
  for (const auto& rel : inst.relations) rel_types.insert(rel.relation);
  std::vector<Vec> per_rel;
  for (int r : rel_types)
    per_rel.push_back(guidance_for_relation(
        s.tokens, inst, r, tags.ontology().relation_types[r], bow));
  return instance_guidance(per_rel);
}

Vec model_attention_summary(const Mat& attention) {
  return attention.colwise().mean().transpose();
}

double br_loss(const Vec& guidance, const Vec& summary) {
  if (guidance.size() != summary.size())
    throw std::invalid_argument("br_loss: length mismatch");
  return (guidance - summary).squaredNorm();
}

double logic_distance(const Vec& p_head, const Vec& p_tail, int /*yhat1*/,
                      int yhat2, const CompiledRules& rules) {
  double d = 1.0;
  bool satisfied = false;
  for (const auto& [b_rel, b_ent] : rules.items) {
    if (yhat2 != b_rel) continue;
    double dr = std::max(0.0, p_tail(yhat2) - p_head(b_ent));
    d = std::min(d, dr);
    satisfied = true;
  }
  return satisfied ? d : 0.0;
}

static int argmax(const Vec& v) {
  int arg = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v(i) > v(arg)) arg = i;
  return arg;
}

double olf_loss(const Mat& Z,
                const std::vector<std::pair<int, int>>& pair_positions,
                const CompiledRules& rules) {
  double total = 0.0;
  for (const auto& [t1, t2] : pair_positions) {
    Vec p1 = softmax(Z.row(t1).transpose());
    Vec p2 = softmax(Z.row(t2).transpose());
    total += logic_distance(p1, p2, argmax(p1), argmax(p2), rules);
  }
  return total;
}

std::vector<std::pair<int, int>> instance_pair_positions(
    const Instance& inst) {
  std::vector<std::pair<int, int>> out;
  for (const auto& rel : inst.relations)
    out.emplace_back(rel.head.start, rel.tail.start);
  return out;
}

int br_loss_node(Tape& t, int attention, Vec guidance) {
  const Mat& a = t.val(attention);
  int T = static_cast<int>(a.rows());
  if (guidance.size() != T)
    throw std::invalid_argument("br_loss_node: length mismatch");
  Vec summary = model_attention_summary(a);
  Mat out(1, 1);
  out(0, 0) = br_loss(guidance, summary);
  auto diff = std::make_shared<Vec>(summary - guidance);
  return t.push(std::move(out), [attention, diff, T](Tape& t, int id) {
    double g = t.grad(id)(0, 0);
    // dL/dA_{t,j} = 2 (aS_j - aI_j) / T
    Mat ga =
        (2.0 * g / T) * Mat::Ones(T, 1) * diff->transpose();
    t.accum(attention, ga);
  });
}

int olf_loss_node(Tape& t, int z,
                  std::vector<std::pair<int, int>> pair_positions,
                  CompiledRules rules) {
  const Mat& Z = t.val(z);
  double total = 0.0;
  // Per pair: softmax rows, active rule (argmin over matched rules), and
  // whether the hinge is active.
  struct PairGrad {
    int t1, t2, yhat2, ent_tag;
    Vec p1, p2;
  };
  auto grads = std::make_shared<std::vector<PairGrad>>();
  for (const auto& [t1, t2] : pair_positions) {
    Vec p1 = softmax(Z.row(t1).transpose());
    Vec p2 = softmax(Z.row(t2).transpose());
    int yhat2 = argmax(p2);
    double d = 1.0;
    bool satisfied = false;
    int best_ent = -1;
    for (const auto& [b_rel, b_ent] : rules.items) {
      if (yhat2 != b_rel) continue;
      double dr = std::max(0.0, p2(yhat2) - p1(b_ent));
      if (!satisfied || dr < d) {
        d = dr;
        best_ent = b_ent;
      }
      satisfied = true;
    }
    if (!satisfied) continue;
    total += d;
    if (d > 0.0 && best_ent >= 0)
      grads->push_back({t1, t2, yhat2, best_ent, std::move(p1), std::move(p2)});
  }
  Mat out(1, 1);
  out(0, 0) = total;
  return t.push(std::move(out), [z, grads](Tape& t, int id) {
    double g = t.grad(id)(0, 0);
    if (g == 0.0) return;
    Mat gz = Mat::Zero(t.val(z).rows(), t.val(z).cols());
    for (const auto& pg : *grads) {
      // d = p2[yhat2] - p1[ent]; chain through both row softmaxes.
      Vec gp2 = Vec::Zero(pg.p2.size());
      gp2(pg.yhat2) = 1.0;
      Vec gp1 = Vec::Zero(pg.p1.size());
      gp1(pg.ent_tag) = -1.0;
      double dot2 = gp2.dot(pg.p2);
      double dot1 = gp1.dot(pg.p1);
      gz.row(pg.t2) += (g * (gp2.array() - dot2) * pg.p2.array()).matrix().transpose();
      gz.row(pg.t1) += (g * (gp1.array() - dot1) * pg.p1.array()).matrix().transpose();
    }
    t.accum(z, gz);
  });
}

}  // namespace denrl
