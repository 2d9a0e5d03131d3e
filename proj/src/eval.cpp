#include "denrl/eval.hpp"

#include <memory>
#include <sstream>
#include <stdexcept>

#include "denrl/crf.hpp"
#include "denrl/parallel.hpp"
#include "json.hpp"

namespace denrl {

bool match(const Quadruplet& pred, const Quadruplet& gold, MatchMode mode) {
  if (pred.e1 != gold.e1) return false;
  if (pred.e2 != gold.e2 || pred.re != gold.re) return false;
  if (mode == MatchMode::kQuadruplet && pred.tag1 != gold.tag1) return false;
  return true;
}

namespace {

using Key = std::tuple<Span, int, Span, int>;

std::set<Key> canonical(const std::set<Quadruplet>& items, MatchMode mode) {
  std::set<Key> out;
  for (const auto& q : items)
    out.insert({q.e1, mode == MatchMode::kQuadruplet ? q.tag1 : -1,
                q.e2.value_or(Span{-1, -1}), q.re.value_or(-1)});
  return out;
}

}  // namespace

EvalReport score(const std::map<std::string, std::set<Quadruplet>>& pred,
                 const std::map<std::string, std::set<Quadruplet>>& gold,
                 MatchMode mode) {
  EvalReport r;
  r.mode = mode;
  for (const auto& [id, items] : pred) {
    auto git = gold.find(id);
    if (git == gold.end())
      throw std::invalid_argument("score: unknown sentence id in predictions: " +
                                  id);
    auto p = canonical(items, mode);
    auto g = canonical(git->second, mode);
    r.predicted += static_cast<long>(p.size());
    for (const auto& k : p)
      if (g.count(k)) ++r.true_positives;
  }
  for (const auto& [id, items] : gold)
    r.gold += static_cast<long>(canonical(items, mode).size());
  r.precision = r.predicted > 0
                    ? static_cast<double>(r.true_positives) / r.predicted
                    : 0.0;
  r.recall =
      r.gold > 0 ? static_cast<double>(r.true_positives) / r.gold : 0.0;
  r.f1 = r.precision + r.recall > 0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

std::map<std::string, std::set<Quadruplet>> predict(JointTagger& model,
                                                    const Dataset& data,
                                                    bool fc_decoder,
                                                    int threads) {
  int n = static_cast<int>(data.sentences.size());
  std::vector<std::set<Quadruplet>> per_sentence(n);
  const Mat& trans = model.transitions().value;
  parallel_for(n, threads, [&](int i) {
    Tape tape;
    int hidden = model.encode(tape, data.token_ids[i]);
    int T = data.sentences[i].length();
    std::vector<std::vector<int>> sequences;
    sequences.reserve(T);
    for (int p = 0; p < T; ++p) {
      auto scored = model.score_instance(tape, hidden, p);
      const Mat& z = tape.val(scored.scores);
      sequences.push_back(fc_decoder ? argmax_decode(z) : viterbi(z, trans));
    }
    per_sentence[i] = decode_quadruplets(sequences, data.tags);
  });
  std::map<std::string, std::set<Quadruplet>> out;
  for (int i = 0; i < n; ++i)
    out[data.sentences[i].id] = std::move(per_sentence[i]);
  return out;
}

std::map<std::string, std::set<Quadruplet>> gold_sets(const Dataset& data) {
  std::map<std::string, std::set<Quadruplet>> out;
  for (const auto& s : data.sentences)
    out[s.id] = gold_records(s, data.tags);
  return out;
}

EvalReport evaluate(JointTagger& model, const Dataset& data, MatchMode mode,
                    bool fc_decoder, int threads) {
  return score(predict(model, data, fc_decoder, threads), gold_sets(data),
               mode);
}

std::string report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["mode"] = r.mode == MatchMode::kQuadruplet ? "quadruplet" : "triplet";
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["true_positives"] = r.true_positives;
  j["predicted"] = r.predicted;
  j["gold"] = r.gold;
  // Entity-only records with a "None" relation participate in matching on
  // both sides.
  j["counts_none_relation_records"] = true;
  return j.dump(2);
}

std::string report_to_table(const EvalReport& r) {
  std::ostringstream os;
  os << "mode        precision  recall     f1         tp/pred/gold\n";
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-11s %-10.4f %-10.4f %-10.4f %ld/%ld/%ld\n",
                r.mode == MatchMode::kQuadruplet ? "quadruplet" : "triplet",
                r.precision, r.recall, r.f1, r.true_positives, r.predicted,
                r.gold);
  os << buf;
  return os.str();
}

}  // namespace denrl
