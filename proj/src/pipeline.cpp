#include "denrl/pipeline.hpp"

#include <memory>
#include <fstream>

#include "json.hpp"

namespace denrl {

using nlohmann::json;

RunResult run_training(const RunInputs& in, const TrainConfig& cfg,
                       const std::filesystem::path* run_dir) {
  Dataset train = Dataset::build(in.train, in.ontology);
  Dataset valid = Dataset::build(in.valid, in.ontology, &train.vocab);
  Dataset test = Dataset::build(in.test, in.ontology, &train.vocab);

  JointTagger model(cfg.model_config(train.vocab.size(), train.tags.size()),
                    cfg.seed);
  AdamW opt;
  opt.lr = cfg.learning_rate;
  opt.weight_decay = cfg.weight_decay;
  opt.init(model.params());

  if (run_dir) {
    std::filesystem::create_directories(*run_dir);
    json j = {{"alpha", cfg.alpha},
              {"beta", cfg.beta},
              {"learning_rate", cfg.learning_rate},
              {"dropout", cfg.dropout},
              {"batch_size", cfg.batch_size},
              {"weight_decay", cfg.weight_decay},
              {"tau", cfg.tau},
              {"k_new_patterns", cfg.k_new_patterns},
              {"top_percent", cfg.top_percent},
              {"first_loop_epochs", cfg.first_loop_epochs},
              {"later_loop_epochs", cfg.later_loop_epochs},
              {"patience", cfg.patience},
              {"max_loops", cfg.max_loops},
              {"min_f1_gain", cfg.min_f1_gain},
              {"nonentity_ratio", cfg.nonentity_ratio},
              {"use_br", cfg.use_br},
              {"use_olf", cfg.use_olf},
              {"use_sal", cfg.use_sal},
              {"use_idr", cfg.use_idr},
              {"use_es", cfg.use_es},
              {"decoder", cfg.fc_decoder ? "fc" : "crf"},
              {"seed", cfg.seed},
              {"threads", cfg.threads},
              {"dim", cfg.dim},
              {"layers", cfg.layers},
              {"heads", cfg.heads},
              {"ffn", cfg.ffn},
              {"max_len", cfg.max_len}};
    std::ofstream out(*run_dir / "config.json");
    out << j.dump(2) << "\n";
  }

  std::function<bool(const ItemRef&)> is_clean, is_rel_clean;
  const std::function<bool(const ItemRef&)>* is_clean_ptr = nullptr;
  const std::function<bool(const ItemRef&)>* is_rel_clean_ptr = nullptr;
  if (in.flags) {
    const auto* flags = in.flags;
    const Dataset* tp = &train;
    is_clean = [flags, tp](const ItemRef& r) {
      return instance_is_clean(tp->sentences[r.sentence],
                               (*flags)[r.sentence], item(*tp, r));
    };
    is_clean_ptr = &is_clean;
    is_rel_clean = [flags, tp](const ItemRef& r) {
      return instance_relation_clean(tp->sentences[r.sentence],
                                     (*flags)[r.sentence], item(*tp, r));
    };
    is_rel_clean_ptr = &is_rel_clean;
  }

  RunResult res;
  res.sal = sal_loop(model, opt, train, valid, in.rules, cfg, is_clean_ptr,
                     run_dir, is_rel_clean_ptr);
  res.test_quadruplet =
      evaluate(model, test, MatchMode::kQuadruplet, cfg.fc_decoder, cfg.threads);
  res.test_triplet =
      evaluate(model, test, MatchMode::kTriplet, cfg.fc_decoder, cfg.threads);

  if (run_dir) {
    json j = {{"quadruplet", json::parse(report_to_json(res.test_quadruplet))},
              {"triplet", json::parse(report_to_json(res.test_triplet))},
              {"best_loop", res.sal.best_loop},
              {"best_val_f1", res.sal.best_f1},
              {"loops_run", res.sal.loops_run}};
    std::ofstream out(*run_dir / "eval.json");
    out << j.dump(2) << "\n";
  }
  return res;
}

}  // namespace denrl
