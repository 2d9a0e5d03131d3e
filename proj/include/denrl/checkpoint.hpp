#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "denrl/model.hpp"
#include "denrl/sal.hpp"
#include "denrl/trainer.hpp"

namespace denrl {

// Everything needed to resume or inspect a run. Round-trips exactly:
// doubles are serialized with shortest-round-trip formatting.
struct Checkpoint {
  ModelConfig model_config;
  TrainConfig train_config;
  std::vector<std::pair<std::string, Mat>> params;
  AdamW optimizer;
  Vocab vocab;
  int loop = 0;
  PatternSet patterns;
};

Checkpoint make_checkpoint(const JointTagger& model, const TrainConfig& cfg,
                           const AdamW& opt, const Vocab& vocab, int loop,
                           const PatternSet& patterns);

// Copies parameter values and optimizer state back into model/opt.
// Throws if the parameter inventory does not match.
void restore_checkpoint(const Checkpoint& ckpt, JointTagger& model,
                        AdamW& opt);

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace denrl
