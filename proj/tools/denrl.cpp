#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "denrl/checkpoint.hpp"
#include "denrl/corpus.hpp"
#include "denrl/crf.hpp"
#include "denrl/pipeline.hpp"
#include "denrl/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace denrl;

namespace {

struct SynthArgs {
  std::string out = "data";
  SynthConfig cfg;
};

int cmd_synthesize(const SynthArgs& a) {
  fs::create_directories(a.out);
  SynthConfig cfg = a.cfg;
  const char* names[3] = {"train", "valid", "test"};
  Ontology onto;
  for (int split = 0; split < 3; ++split) {
    SynthConfig c = cfg;
    c.split = split;
    if (split > 0) {
      // evaluation splits carry clean labels and are smaller
      c.relation_noise_rate = 0.0;
      c.entity_noise_rate = 0.0;
      c.n_sentences = std::max(1, cfg.n_sentences / 5);
    }
    SynthResult res = synthesize_corpus(c);
    fs::path dir(a.out);
    save_corpus(res.train, dir / (std::string(names[split]) + ".jsonl"));
    save_corpus(res.clean, dir / (std::string(names[split]) + ".clean.jsonl"));
    save_flags(res.flags, dir / (std::string(names[split]) + ".flags.json"));
    if (split == 0) {
      onto = res.ontology;
      save_ontology(res.ontology, dir / "ontology.json");
      OntologyRules rules;
      for (const auto& [rel, ent] : res.rules) rules.push_back({rel, ent});
      save_rules(rules, dir / "rules.json");
      json pj = json::object();
      for (const auto& [rel, pats] : res.planted_patterns) pj[rel] = pats;
      std::ofstream out(dir / "planted_patterns.json");
      out << pj.dump(2) << "\n";
    }
  }
  std::cout << "wrote " << a.out << "/{train,valid,test}.jsonl with clean "
            << "sidecars, ontology.json, rules.json\n";
  return 0;
}

struct TrainArgs {
  std::string train, valid, test, ontology, rules, out = "runs/run", flags;
  TrainConfig cfg;
  bool no_br = false, no_olf = false, no_sal = false, no_idr = false,
       no_es = false;
  std::string decoder = "crf";
};

int cmd_train(const TrainArgs& a) {
  Ontology onto = load_ontology(a.ontology);
  RunInputs in;
  in.ontology = onto;
  LoadStats stats;
  in.train = load_corpus(a.train, onto, &stats);
  in.valid = load_corpus(a.valid, onto);
  in.test = load_corpus(a.test, onto);
  in.rules = load_rules(a.rules, onto);
  std::vector<NoiseFlags> flags;
  if (!a.flags.empty()) {
    flags = load_flags(a.flags);
    in.flags = &flags;
  }
  if (stats.skipped > 0)
    std::cerr << "[load] skipped " << stats.skipped
              << " invalid train records\n";

  TrainConfig cfg = a.cfg;
  cfg.use_br = !a.no_br;
  cfg.use_olf = !a.no_olf;
  cfg.use_sal = !a.no_sal;
  cfg.use_idr = !a.no_idr;
  cfg.use_es = !a.no_es;
  cfg.fc_decoder = a.decoder == "fc";

  fs::path run_dir(a.out);
  RunResult res = run_training(in, cfg, &run_dir);
  std::cout << "run directory: " << a.out << "\n"
            << "loops: " << res.sal.loops_run
            << " (best " << res.sal.best_loop << ", val F1 "
            << res.sal.best_f1 << ")\n"
            << report_to_table(res.test_quadruplet)
            << report_to_table(res.test_triplet);
  return 0;
}

JointTagger model_from(const Checkpoint& ckpt) {
  JointTagger model(ckpt.model_config, /*seed=*/0);
  AdamW opt;
  opt.init(model.params());
  restore_checkpoint(ckpt, model, opt);
  return model;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus,
             const std::string& ontology, const std::string& mode,
             bool json_out) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Ontology onto = load_ontology(ontology);
  Dataset data = Dataset::build(load_corpus(corpus, onto), onto, &ckpt.vocab);
  JointTagger model = model_from(ckpt);
  MatchMode m = mode == "triplet" ? MatchMode::kTriplet : MatchMode::kQuadruplet;
  EvalReport r = evaluate(model, data, m, ckpt.train_config.fc_decoder,
                          ckpt.train_config.threads);
  std::cout << (json_out ? report_to_json(r) + "\n" : report_to_table(r));
  return 0;
}

int cmd_inspect(const std::string& ckpt_path, const std::string& corpus,
                const std::string& ontology, const std::string& rules_path,
                const std::string& sentence_id, int p) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  Ontology onto = load_ontology(ontology);
  Dataset data = Dataset::build(load_corpus(corpus, onto), onto, &ckpt.vocab);
  int si = -1;
  for (int i = 0; i < static_cast<int>(data.sentences.size()); ++i)
    if (data.sentences[i].id == sentence_id) si = i;
  if (si < 0) {
    std::cerr << "sentence id not found: " << sentence_id << "\n";
    return 1;
  }
  int T = data.sentences[si].length();
  if (p < 0 || p >= T) {
    std::cerr << "start position out of range: " << p << "\n";
    return 1;
  }
  JointTagger model = model_from(ckpt);

  Tape tape;
  int hidden = model.encode(tape, data.token_ids[si]);
  auto scored = model.score_instance(tape, hidden, p);
  const Mat& A = tape.val(scored.attention);
  const Mat& Z = tape.val(scored.scores);

  json j;
  j["sentence"] = sentence_id;
  j["tokens"] = data.sentences[si].tokens;
  j["p"] = p;
  json att = json::array();
  for (int t = 0; t < T; ++t) {
    json row = json::array();
    for (int k = 0; k < T; ++k) row.push_back(A(t, k));
    att.push_back(std::move(row));
  }
  j["attention"] = std::move(att);
  Vec summary = model_attention_summary(A);
  j["attention_summary"] = std::vector<double>(summary.data(),
                                               summary.data() + summary.size());
  json probs = json::array();
  json tag_names = json::array();
  for (int t = 0; t < data.tags.size(); ++t) tag_names.push_back(data.tags.name(t));
  for (int t = 0; t < T; ++t) {
    Vec row = Z.row(t).transpose();
    double m = row.maxCoeff();
    Vec e = (row.array() - m).exp();
    e /= e.sum();
    probs.push_back(std::vector<double>(e.data(), e.data() + e.size()));
  }
  j["tag_names"] = std::move(tag_names);
  j["tag_softmax"] = std::move(probs);

  CompiledRules crules =
      compile_rules(load_rules(rules_path, onto), data.tags);
  const Instance& inst = data.instances[si][p];
  json dists = json::array();
  for (const auto& [t1, t2] : instance_pair_positions(inst)) {
    double d = olf_loss(Z, {{t1, t2}}, crules);
    dists.push_back({{"head_pos", t1}, {"tail_pos", t2}, {"distance", d}});
  }
  j["logic_distances"] = std::move(dists);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_patterns(const std::string& run_dir) {
  fs::path path = fs::path(run_dir) / "patterns.json";
  if (!fs::exists(path)) {
    std::cout << "(no patterns)\n";
    return 0;
  }
  PatternSet set = PatternSet::load(path);
  std::printf("%-18s %-36s %9s %5s %12s\n", "relation", "pattern", "freq",
              "loop", "avg_fitness");
  for (const auto& [rel, ps] : set.by_relation) {
    auto sorted = ps;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      return a.avg_fitness() < b.avg_fitness();  // most trusted first
    });
    for (const auto& p : sorted)
      std::printf("%-18s %-36s %9d %5d %12.4f\n", rel.c_str(),
                  ("\"" + p.text + "\"").c_str(), p.frequency, p.loop_added,
                  p.avg_fitness());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"joint entity and relation extraction with noise-robust training"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synthesize", "generate a noisy corpus");
  synth->add_option("--out", sa.out, "output directory");
  synth->add_option("--sentences", sa.cfg.n_sentences, "train sentences");
  synth->add_option("--entity-types", sa.cfg.entity_types);
  synth->add_option("--relation-types", sa.cfg.relation_types);
  synth->add_option("--patterns-per-relation", sa.cfg.patterns_per_relation);
  synth->add_option("--relation-noise", sa.cfg.relation_noise_rate);
  synth->add_option("--entity-noise", sa.cfg.entity_noise_rate);
  synth->add_option("--seed", sa.cfg.seed);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "run the training loop");
  train->add_option("--train", ta.train)->required();
  train->add_option("--valid", ta.valid)->required();
  train->add_option("--test", ta.test)->required();
  train->add_option("--ontology", ta.ontology)->required();
  train->add_option("--rules", ta.rules)->required();
  train->add_option("--out", ta.out, "run directory");
  train->add_option("--flags", ta.flags, "noise sidecar for selection metrics");
  train->add_flag("--no-br", ta.no_br, "disable attention regularization");
  train->add_flag("--no-olf", ta.no_olf, "disable logic fusion");
  train->add_flag("--no-sal", ta.no_sal, "disable adaptive reselection");
  train->add_flag("--no-idr", ta.no_idr, "disable initial redistribution");
  train->add_flag("--no-es", ta.no_es, "disable entity selection");
  train->add_option("--decoder", ta.decoder, "crf|fc")
      ->check(CLI::IsMember({"crf", "fc"}));
  train->add_option("--alpha", ta.cfg.alpha);
  train->add_option("--beta", ta.cfg.beta);
  train->add_option("--lr", ta.cfg.learning_rate);
  train->add_option("--dropout", ta.cfg.dropout);
  train->add_option("--batch-size", ta.cfg.batch_size);
  train->add_option("--weight-decay", ta.cfg.weight_decay);
  train->add_option("--tau", ta.cfg.tau);
  train->add_option("--k-new-patterns", ta.cfg.k_new_patterns);
  train->add_option("--top-percent", ta.cfg.top_percent);
  train->add_option("--first-epochs", ta.cfg.first_loop_epochs);
  train->add_option("--later-epochs", ta.cfg.later_loop_epochs);
  train->add_option("--patience", ta.cfg.patience);
  train->add_option("--max-loops", ta.cfg.max_loops);
  train->add_option("--nonentity-ratio", ta.cfg.nonentity_ratio);
  train->add_option("--seed", ta.cfg.seed);
  train->add_option("--threads", ta.cfg.threads);
  train->add_option("--dim", ta.cfg.dim);
  train->add_option("--layers", ta.cfg.layers);
  train->add_option("--heads", ta.cfg.heads);
  train->add_option("--ffn", ta.cfg.ffn);
  train->add_option("--max-len", ta.cfg.max_len);

  std::string e_ckpt, e_corpus, e_onto, e_mode = "quadruplet";
  bool e_json = false;
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a corpus");
  ev->add_option("--checkpoint", e_ckpt)->required();
  ev->add_option("--corpus", e_corpus)->required();
  ev->add_option("--ontology", e_onto)->required();
  ev->add_option("--mode", e_mode)->check(CLI::IsMember({"quadruplet", "triplet"}));
  ev->add_flag("--json", e_json, "emit JSON instead of a table");

  std::string i_ckpt, i_corpus, i_onto, i_rules, i_sent;
  int i_p = 0;
  auto* insp = app.add_subcommand("inspect",
                                  "dump attention and logic distances");
  insp->add_option("--checkpoint", i_ckpt)->required();
  insp->add_option("--corpus", i_corpus)->required();
  insp->add_option("--ontology", i_onto)->required();
  insp->add_option("--rules", i_rules)->required();
  insp->add_option("--sentence", i_sent, "sentence id")->required();
  insp->add_option("--p", i_p, "start position");

  std::string p_run;
  auto* pat = app.add_subcommand("patterns", "pattern table of a run");
  pat->add_option("run", p_run, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synthesize(sa);
    if (train->parsed()) return cmd_train(ta);
    if (ev->parsed()) return cmd_eval(e_ckpt, e_corpus, e_onto, e_mode, e_json);
    if (insp->parsed())
      return cmd_inspect(i_ckpt, i_corpus, i_onto, i_rules, i_sent, i_p);
    if (pat->parsed()) return cmd_patterns(p_run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
