#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "denrl/tape.hpp"

namespace denrl {

struct ModelConfig {
  int dim = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 128;
  int max_len = 64;
  double dropout = 0.2;
  int vocab_size = 0;
  int n_tags = 0;
};

// Lowercased surface-form vocabulary with <unk> at index 0.
struct Vocab {
  std::vector<std::string> words;           // words[0] == "<unk>"
  std::map<std::string, int> index;

  static Vocab build(const std::vector<std::vector<std::string>>& token_lists);
  int id(const std::string& token) const;
  std::vector<int> ids(const std::vector<std::string>& tokens) const;
  int size() const { return static_cast<int>(words.size()); }
};

// Position-attentive joint tagger: token+position embeddings, L transformer
// layers, self-matching attention conditioned on the start position, and a
// linear emission layer feeding the CRF.
class JointTagger {
 public:
  JointTagger(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  Param& transitions() { return params_[trans_]; }
  const Param& transitions() const { return params_[trans_]; }
  void zero_grad();

  // Contextual encoding h^L of a token-id sequence. Dropout only in train
  // mode; rng must be supplied then.
  int encode(Tape& t, const std::vector<int>& token_ids, bool train = false,
             std::mt19937_64* rng = nullptr);

  struct Scored {
    int attention;  // T x T, row t = attention of target position t
    int features;   // T x 2d, [h_t ; m_t]
    int scores;     // T x V emission scores
  };
  // Self-matching for start position p plus emission scores.
  Scored score_instance(Tape& t, int hidden, int p);

 private:
  ModelConfig cfg_;
  std::vector<Param> params_;

  int add_param(const std::string& name, int rows, int cols, double range,
                std::mt19937_64& rng);
  int dropout(Tape& t, int x, bool train, std::mt19937_64* rng);

  struct LayerIdx {
    int wq, bq, wk, bk, wv, bv, wo, bo;
    int ln1_g, ln1_b;
    int w1, b1, w2, b2;
    int ln2_g, ln2_b;
  };
  int tok_emb_ = -1, pos_emb_ = -1;
  std::vector<LayerIdx> layers_;
  int sm_w_ = -1, emit_ = -1, trans_ = -1;
};

// T x T matrix of self-matching scores s_{t,j} = w . tanh(h_p + h_t + h_j).
int self_match_scores(Tape& t, int hidden, int w, int p);

}  // namespace denrl
