#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "denrl/dataset.hpp"
#include "denrl/model.hpp"
#include "denrl/regularizers.hpp"

namespace denrl {

struct TrainConfig {
  // objective
  double alpha = 1.0;
  double beta = 0.5;
  // optimization
  double learning_rate = 5e-4;
  double dropout = 0.2;
  int batch_size = 8;
  double weight_decay = 0.01;
  bool grad_clip = false;
  double clip_norm = 5.0;
  // self-adaptive learning
  double tau = 0.5;
  int k_new_patterns = 5;
  double top_percent = 0.10;
  int first_loop_epochs = 5;
  int later_loop_epochs = 1;
  int patience = 2;
  int max_loops = 12;
  double min_f1_gain = 0.1;  // validation F1 percentage points
  // every training subset carries sampled all-O instances at this ratio of
  // its entity-start instance count, so decoding stays calibrated at
  // non-entity start positions
  double nonentity_ratio = 1.0;
  // component switches (ablation arms)
  bool use_br = true;
  bool use_olf = true;
  bool use_sal = true;
  bool use_idr = true;
  bool use_es = true;
  bool fc_decoder = false;
  // misc
  std::uint64_t seed = 42;
  int threads = 1;
  // encoder geometry
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 128;
  int max_len = 64;

  ModelConfig model_config(int vocab_size, int n_tags) const;
};

struct AdamW {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long step_count = 0;
  std::vector<Mat> m, v;

  void init(const std::vector<Param>& params);
  void step(std::vector<Param>& params, bool clip = false,
            double clip_norm = 5.0);
};

struct EpochLosses {
  double lc = 0.0;
  double lbr = 0.0;
  double lolf = 0.0;
  int count = 0;
  double total(double alpha, double beta) const {
    return lc + alpha * lbr + beta * lolf;
  }
};

// One pass over items in shuffled batches. bow may be null (BR disabled or
// no pattern set yet). Throws on non-finite loss.
EpochLosses train_epoch(JointTagger& model, AdamW& opt, const Dataset& data,
                        const std::vector<ItemRef>& items,
                        const BowTable* bow, const CompiledRules& rules,
                        const TrainConfig& cfg, std::mt19937_64& rng);

// Scalar total loss of one instance (eval mode, no dropout); used by the
// finite-difference harness and fitness scoring paths.
double instance_total_loss(JointTagger& model, const Dataset& data,
                           const ItemRef& ref, const BowTable* bow,
                           const CompiledRules& rules, const TrainConfig& cfg);

// Max relative error between analytic and central-finite-difference
// gradients of the total loss over every parameter tensor. The fixture flag
// corrupts the analytic transition gradient to prove the check can fail.
double gradient_check(JointTagger& model, const Dataset& data,
                      const ItemRef& ref, const BowTable* bow,
                      const CompiledRules& rules, const TrainConfig& cfg,
                      double h = 1e-5, bool corrupt_transition_grad = false);

}  // namespace denrl
