#include "denrl/sal.hpp"

#include <memory>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "denrl/checkpoint.hpp"
#include "denrl/eval.hpp"
#include "denrl/parallel.hpp"
#include "json.hpp"

namespace denrl {

using nlohmann::json;

bool PatternSet::contains(const std::string& relation,
                          const std::string& text) const {
  auto it = by_relation.find(relation);
  if (it == by_relation.end()) return false;
  for (const auto& p : it->second)
    if (p.text == text) return true;
  return false;
}

Pattern* PatternSet::find(const std::string& relation,
                          const std::string& text) {
  auto it = by_relation.find(relation);
  if (it == by_relation.end()) return nullptr;
  for (auto& p : it->second)
    if (p.text == text) return &p;
  return nullptr;
}

int PatternSet::total() const {
  int n = 0;
  for (const auto& [rel, ps] : by_relation) n += static_cast<int>(ps.size());
  return n;
}

static std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

BowTable PatternSet::bow() const {
  BowTable table;
  for (const auto& [rel, ps] : by_relation)
    for (const auto& p : ps)
      for (const auto& tok : split_ws(p.text)) ++table.counts[rel][tok];
  return table;
}

void PatternSet::save(const std::filesystem::path& path) const {
  json j = json::object();
  for (const auto& [rel, ps] : by_relation) {
    json arr = json::array();
    for (const auto& p : ps)
      arr.push_back({{"pattern", p.text},
                     {"frequency", p.frequency},
                     {"loop_added", p.loop_added},
                     {"fitness_sum", p.fitness_sum},
                     {"fitness_count", p.fitness_count}});
    j[rel] = std::move(arr);
  }
  std::ofstream out(path);
  out << j.dump(2) << "\n";
}

PatternSet PatternSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open pattern set: " + path.string());
  json j = json::parse(in);
  PatternSet set;
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::vector<Pattern>& ps = set.by_relation[it.key()];
    for (const auto& e : it.value()) {
      Pattern p;
      p.text = e.at("pattern").get<std::string>();
      p.frequency = e.at("frequency").get<int>();
      p.loop_added = e.at("loop_added").get<int>();
      if (e.contains("fitness_sum"))
        p.fitness_sum = e["fitness_sum"].get<double>();
      if (e.contains("fitness_count"))
        p.fitness_count = e["fitness_count"].get<long>();
      ps.push_back(std::move(p));
    }
  }
  return set;
}

std::string extract_pattern(const std::vector<std::string>& tokens,
                            const Span& a, const Span& b) {
  const Span& first = a.start <= b.start ? a : b;
  const Span& second = a.start <= b.start ? b : a;
  std::string out;
  for (int t = first.end; t < second.start; ++t) {
    if (!out.empty()) out += ' ';
    out += tokens[t];
  }
  return out;
}

std::string span_surface(const std::vector<std::string>& tokens,
                         const Span& s) {
  std::string out;
  for (int t = s.start; t < s.end; ++t) {
    if (!out.empty()) out += ' ';
    for (char c : tokens[t])
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

// relation name -> pattern -> frequency over all positive instances
static std::map<std::string, std::map<std::string, int>> pattern_counts(
    const Dataset& data, const std::vector<ItemRef>* subset = nullptr) {
  std::map<std::string, std::map<std::string, int>> counts;
  auto visit = [&](const ItemRef& ref) {
    const Instance& inst = item(data, ref);
    if (!inst.positive) return;
    const auto& tokens = data.sentences[ref.sentence].tokens;
    for (const auto& rel : inst.relations) {
      std::string pat = extract_pattern(tokens, rel.head, rel.tail);
      if (pat.empty()) continue;
      ++counts[data.ontology().relation_types[rel.relation]][pat];
    }
  };
  if (subset) {
    for (const auto& ref : *subset) visit(ref);
  } else {
    for (int i = 0; i < static_cast<int>(data.sentences.size()); ++i)
      for (int p = 0; p < static_cast<int>(data.instances[i].size()); ++p)
        visit({i, p});
  }
  return counts;
}

// frequency desc, then lexicographic
static std::vector<std::pair<std::string, int>> ranked(
    const std::map<std::string, int>& freq) {
  std::vector<std::pair<std::string, int>> v(freq.begin(), freq.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return v;
}

PatternSet initial_pattern_set(const Dataset& data, double top_percent) {
  PatternSet set;
  for (auto& [rel, freq] : pattern_counts(data)) {
    auto v = ranked(freq);
    int keep = std::max(
        1, static_cast<int>(std::ceil(top_percent * static_cast<double>(v.size()))));
    keep = std::min(keep, static_cast<int>(v.size()));
    for (int i = 0; i < keep; ++i)
      set.by_relation[rel].push_back({v[i].first, v[i].second, 0, 0.0, 0});
  }
  return set;
}

std::vector<ItemRef> redistribute(const Dataset& data, const PatternSet& P) {
  std::vector<ItemRef> out;
  std::set<std::string> surfaces;
  std::vector<ItemRef> negatives;
  for (int i = 0; i < static_cast<int>(data.sentences.size()); ++i) {
    const auto& tokens = data.sentences[i].tokens;
    for (int p = 0; p < static_cast<int>(data.instances[i].size()); ++p) {
      const Instance& inst = data.instances[i][p];
      if (inst.head_entity_type < 0) continue;
      if (!inst.positive) {
        negatives.push_back({i, p});
        continue;
      }
      bool matched = false;
      for (const auto& rel : inst.relations) {
        std::string pat = extract_pattern(tokens, rel.head, rel.tail);
        if (pat.empty() ||
            !P.contains(data.ontology().relation_types[rel.relation], pat))
          continue;
        matched = true;
        surfaces.insert(span_surface(tokens, rel.head));
        surfaces.insert(span_surface(tokens, rel.tail));
      }
      if (matched) out.push_back({i, p});
    }
  }
  for (const auto& ref : negatives) {
    const Instance& inst = item(data, ref);
    Span head{inst.start_position,
              inst.start_position + [&] {
                // span length from the gold B/I run at the start position
                int len = 1;
                const auto& g = inst.gold_tags;
                for (int t = inst.start_position + 1;
                     t < static_cast<int>(g.size()) && data.tags.is_i(g[t]) &&
                     data.tags.is_entity(g[t]);
                     ++t)
                  ++len;
                return len;
              }()};
    if (surfaces.count(
            span_surface(data.sentences[ref.sentence].tokens, head)))
      out.push_back(ref);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<Fitness>> score_fitness(JointTagger& model,
                                                const Dataset& data,
                                                const BowTable& bow,
                                                const CompiledRules& rules,
                                                int threads) {
  int n = static_cast<int>(data.sentences.size());
  std::vector<std::vector<Fitness>> scores(n);
  for (int i = 0; i < n; ++i)
    scores[i].resize(data.instances[i].size());
  parallel_for(n, threads, [&](int i) {
    bool any = false;
    for (const auto& inst : data.instances[i])
      if (inst.head_entity_type >= 0) any = true;
    if (!any) return;
    Tape tape;
    int hidden = model.encode(tape, data.token_ids[i]);
    for (int p = 0; p < static_cast<int>(data.instances[i].size()); ++p) {
      const Instance& inst = data.instances[i][p];
      if (inst.head_entity_type < 0) continue;
      auto scored = model.score_instance(tape, hidden, p);
      Fitness f;
      if (inst.positive && !inst.relations.empty()) {
        Vec guidance =
            instance_guidance_for(data.sentences[i], inst, bow, data.tags);
        f.br = br_loss(guidance,
                       model_attention_summary(tape.val(scored.attention)));
        f.olf = olf_loss(tape.val(scored.scores),
                         instance_pair_positions(inst), rules);
      }
      f.u = fitness_u(f.br, f.olf);
      scores[i][p] = f;
    }
  });
  return scores;
}

std::vector<ItemRef> select_instances(
    const Dataset& data, const std::vector<std::vector<Fitness>>& scores,
    double tau) {
  std::vector<ItemRef> out;
  for (int i = 0; i < static_cast<int>(data.instances.size()); ++i)
    for (int p = 0; p < static_cast<int>(data.instances[i].size()); ++p)
      if (data.instances[i][p].positive && scores[i][p].u < tau)
        out.push_back({i, p});
  return out;
}

int mine_patterns(const Dataset& data, const std::vector<ItemRef>& selected,
                  PatternSet& P, int k, int loop) {
  int added = 0;
  for (auto& [rel, freq] : pattern_counts(data, &selected)) {
    auto v = ranked(freq);
    int taken = 0;
    for (const auto& [pat, f] : v) {
      if (taken >= k) break;
      if (P.contains(rel, pat)) continue;
      P.by_relation[rel].push_back({pat, f, loop, 0.0, 0});
      ++taken;
      ++added;
    }
  }
  return added;
}

std::vector<ItemRef> entity_selection(
    const Dataset& data, const std::vector<ItemRef>& selected_positives) {
  std::set<std::string> surfaces;
  for (const auto& ref : selected_positives) {
    const Instance& inst = item(data, ref);
    const auto& tokens = data.sentences[ref.sentence].tokens;
    for (const auto& rel : inst.relations) {
      surfaces.insert(span_surface(tokens, rel.head));
      surfaces.insert(span_surface(tokens, rel.tail));
    }
  }
  std::vector<ItemRef> out;
  if (surfaces.empty()) return out;
  for (int i = 0; i < static_cast<int>(data.instances.size()); ++i) {
    const auto& tokens = data.sentences[i].tokens;
    for (int p = 0; p < static_cast<int>(data.instances[i].size()); ++p) {
      const Instance& inst = data.instances[i][p];
      if (inst.positive || inst.head_entity_type < 0) continue;
      // mention span at the start position from the gold tag run
      int end = p + 1;
      const auto& g = inst.gold_tags;
      while (end < static_cast<int>(g.size()) && data.tags.is_i(g[end]) &&
             data.tags.is_entity(g[end]))
        ++end;
      if (surfaces.count(span_surface(tokens, Span{p, end})))
        out.push_back({i, p});
    }
  }
  return out;
}

std::vector<ItemRef> sample_nonentity_instances(const Dataset& data,
                                                int target,
                                                std::mt19937_64& rng) {
  std::vector<ItemRef> pool;
  for (int i = 0; i < static_cast<int>(data.instances.size()); ++i)
    for (int p = 0; p < static_cast<int>(data.instances[i].size()); ++p)
      if (data.instances[i][p].head_entity_type < 0) pool.push_back({i, p});
  if (target >= static_cast<int>(pool.size())) return pool;
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(target);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace {

void append_jsonl(const std::filesystem::path& path, const json& record) {
  std::ofstream out(path, std::ios::app);
  out << record.dump() << "\n";
}

void split_subset(const Dataset& data, const std::vector<ItemRef>& refs,
                  std::vector<ItemRef>& positives,
                  std::vector<ItemRef>& negatives) {
  positives.clear();
  negatives.clear();
  for (const auto& r : refs)
    (item(data, r).positive ? positives : negatives).push_back(r);
}

std::vector<ItemRef> all_entity_start(const Dataset& data) {
  std::vector<ItemRef> out;
  for (int i = 0; i < static_cast<int>(data.instances.size()); ++i)
    for (int p = 0; p < static_cast<int>(data.instances[i].size()); ++p)
      if (data.instances[i][p].head_entity_type >= 0) out.push_back({i, p});
  return out;
}

// attribute instance fitness to the trusted patterns it matched
void accumulate_pattern_fitness(
    const Dataset& data, const std::vector<std::vector<Fitness>>& scores,
    PatternSet& P) {
  for (int i = 0; i < static_cast<int>(data.instances.size()); ++i) {
    const auto& tokens = data.sentences[i].tokens;
    for (int p = 0; p < static_cast<int>(data.instances[i].size()); ++p) {
      const Instance& inst = data.instances[i][p];
      if (!inst.positive) continue;
      for (const auto& rel : inst.relations) {
        Pattern* pat =
            P.find(data.ontology().relation_types[rel.relation],
                   extract_pattern(tokens, rel.head, rel.tail));
        if (!pat) continue;
        pat->fitness_sum += scores[i][p].u;
        ++pat->fitness_count;
      }
    }
  }
}

}  // namespace

SalResult sal_loop(JointTagger& model, AdamW& opt, const Dataset& train,
                   const Dataset& val, const OntologyRules& rules,
                   const TrainConfig& cfg,
                   const std::function<bool(const ItemRef&)>* is_clean,
                   const std::filesystem::path* run_dir,
                   const std::function<bool(const ItemRef&)>* is_relation_clean) {
  SalResult res;
  res.patterns = initial_pattern_set(train, cfg.top_percent);
  CompiledRules crules = compile_rules(rules, train.tags);
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + 17);

  std::vector<ItemRef> positives, negatives;
  {
    auto base = cfg.use_idr ? redistribute(train, res.patterns)
                            : all_entity_start(train);
    split_subset(train, base, positives, negatives);
  }

  Checkpoint best;
  bool have_best = false;
  int no_gain = 0;
  std::filesystem::path metrics_path;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    metrics_path = *run_dir / "metrics.jsonl";
  }
  BowTable bow = res.patterns.bow();

  for (int loop = 0; loop <= cfg.max_loops; ++loop) {
    LoopMetrics lm;
    lm.loop = loop;
    if (loop > 0 && cfg.use_sal) {
      auto scores = score_fitness(model, train, bow, crules, cfg.threads);
      accumulate_pattern_fitness(train, scores, res.patterns);
      // u lives in [0.5, 1), so a fixed cut at tau = 0.5 would always be
      // empty; the loop instead keeps the tau-fraction of positives with
      // the best (lowest) fitness.
      std::vector<double> us;
      for (size_t si = 0; si < train.sentences.size(); ++si)
        for (size_t p = 0; p < scores[si].size(); ++p)
          if (train.instances[si][p].positive) us.push_back(scores[si][p].u);
      double loop_tau = 1.0;
      if (!us.empty()) {
        size_t k = static_cast<size_t>(cfg.tau * (us.size() - 1));
        std::nth_element(us.begin(), us.begin() + k, us.end());
        // nudge past ties so the quantile element itself stays selected
        loop_tau = us[k] + 1e-12;
      }
      positives = select_instances(train, scores, loop_tau);
      if (positives.empty()) {
        std::cerr << "[sal] warning: loop " << loop
                  << " selected no instances (all u >= threshold)\n";
        res.selection_warning = true;
      }
      negatives = cfg.use_es ? entity_selection(train, positives)
                             : std::vector<ItemRef>{};
      lm.patterns_added =
          mine_patterns(train, positives, res.patterns, cfg.k_new_patterns, loop);
      bow = res.patterns.bow();
    }
    if (is_clean && !positives.empty()) {
      int clean = 0;
      for (const auto& r : positives) clean += (*is_clean)(r) ? 1 : 0;
      lm.selection_precision =
          static_cast<double>(clean) / static_cast<double>(positives.size());
    }
    if (is_relation_clean && !positives.empty()) {
      int clean = 0;
      for (const auto& r : positives) clean += (*is_relation_clean)(r) ? 1 : 0;
      lm.selection_precision_relations =
          static_cast<double>(clean) / static_cast<double>(positives.size());
    }

    std::vector<ItemRef> items = positives;
    items.insert(items.end(), negatives.begin(), negatives.end());
    int target = static_cast<int>(
        std::lround(cfg.nonentity_ratio * static_cast<double>(items.size())));
    auto nonentity = sample_nonentity_instances(train, target, rng);
    items.insert(items.end(), nonentity.begin(), nonentity.end());
    lm.positives = static_cast<int>(positives.size());
    lm.negatives = static_cast<int>(negatives.size());
    lm.nonentity = static_cast<int>(nonentity.size());
    lm.patterns_total = res.patterns.total();
    if (items.empty()) {
      std::ostringstream msg;
      msg << "sal_loop: empty training subset at loop " << loop
          << " (positives=0, negatives=0, nonentity=0)";
      throw std::runtime_error(msg.str());
    }

    int epochs = loop == 0 ? cfg.first_loop_epochs : cfg.later_loop_epochs;
    for (int e = 0; e < epochs; ++e) {
      EpochLosses losses = train_epoch(model, opt, train, items,
                                       cfg.use_br ? &bow : nullptr, crules,
                                       cfg, rng);
      lm.lc = losses.lc;
      lm.lbr = losses.lbr;
      lm.lolf = losses.lolf;
      if (run_dir) {
        auto loop_dir = *run_dir / ("loop" + std::to_string(loop));
        std::filesystem::create_directories(loop_dir);
        save_checkpoint(
            make_checkpoint(model, cfg, opt, train.vocab, loop, res.patterns),
            loop_dir / ("epoch" + std::to_string(e) + ".ckpt"));
        append_jsonl(metrics_path,
                     {{"type", "epoch"},
                      {"loop", loop},
                      {"epoch", e},
                      {"lc", losses.lc},
                      {"lbr", losses.lbr},
                      {"lolf", losses.lolf},
                      {"total", losses.total(cfg.alpha, cfg.beta)}});
      }
    }

    EvalReport r = evaluate(model, val, MatchMode::kQuadruplet,
                            cfg.fc_decoder, cfg.threads);
    lm.val_precision = r.precision;
    lm.val_recall = r.recall;
    lm.val_f1 = r.f1;
    res.metrics.push_back(lm);
    res.loops_run = loop + 1;
    if (run_dir) {
      json rec = {{"type", "loop"},
                  {"loop", loop},
                  {"positives", lm.positives},
                  {"negatives", lm.negatives},
                  {"nonentity", lm.nonentity},
                  {"patterns_total", lm.patterns_total},
                  {"patterns_added", lm.patterns_added},
                  {"val_precision", lm.val_precision},
                  {"val_recall", lm.val_recall},
                  {"val_f1", lm.val_f1}};
      if (lm.selection_precision >= 0.0)
        rec["selection_precision"] = lm.selection_precision;
      if (lm.selection_precision_relations >= 0.0)
        rec["selection_precision_relations"] = lm.selection_precision_relations;
      append_jsonl(metrics_path, rec);
    }

    // convergence on validation F1, percentage points
    if (!have_best || r.f1 * 100.0 > res.best_f1 * 100.0 + cfg.min_f1_gain) {
      res.best_f1 = r.f1;
      res.best_loop = loop;
      best = make_checkpoint(model, cfg, opt, train.vocab, loop, res.patterns);
      have_best = true;
      no_gain = 0;
    } else {
      ++no_gain;
      if (no_gain >= cfg.patience) break;
    }
  }

  if (have_best) restore_checkpoint(best, model, opt);
  if (run_dir) res.patterns.save(*run_dir / "patterns.json");
  return res;
}

}  // namespace denrl
