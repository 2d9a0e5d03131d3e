#include "denrl/trainer.hpp"

#include <memory>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "denrl/crf.hpp"

namespace denrl {

ModelConfig TrainConfig::model_config(int vocab_size, int n_tags) const {
  ModelConfig mc;
  mc.dim = dim;
  mc.layers = layers;
  mc.heads = heads;
  mc.ffn = ffn;
  mc.max_len = max_len;
  mc.dropout = dropout;
  mc.vocab_size = vocab_size;
  mc.n_tags = n_tags;
  return mc;
}

void AdamW::init(const std::vector<Param>& params) {
  m.clear();
  v.clear();
  for (const auto& p : params) {
    m.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    v.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
  }
  step_count = 0;
}

void AdamW::step(std::vector<Param>& params, bool clip, double clip_norm) {
  if (m.size() != params.size()) init(params);
  if (clip) {
    double sq = 0.0;
    for (const auto& p : params) sq += p.grad.squaredNorm();
    double norm = std::sqrt(sq);
    if (norm > clip_norm) {
      double s = clip_norm / norm;
      for (auto& p : params) p.grad *= s;
    }
  }
  ++step_count;
  double bc1 = 1.0 - std::pow(beta1, step_count);
  double bc2 = 1.0 - std::pow(beta2, step_count);
  for (size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    m[i] = beta1 * m[i] + (1.0 - beta1) * p.grad;
    v[i] = beta2 * v[i] + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
    Mat mhat = m[i] / bc1;
    Mat vhat = v[i] / bc2;
    p.value -= lr * (mhat.array() / (vhat.array().sqrt() + eps) +
                     weight_decay * p.value.array())
                   .matrix();
  }
}

namespace {

struct InstanceLossNodes {
  int lc = -1, lbr = -1, lolf = -1;
};

InstanceLossNodes instance_loss_nodes(Tape& tape, JointTagger& model,
                                      const Dataset& data, const ItemRef& ref,
                                      const BowTable* bow,
                                      const CompiledRules& rules,
                                      const TrainConfig& cfg, bool train,
                                      std::mt19937_64* rng) {
  const Instance& inst = item(data, ref);
  int hidden = model.encode(tape, data.token_ids[ref.sentence], train, rng);
  auto scored = model.score_instance(tape, hidden, inst.start_position);
  InstanceLossNodes nodes;
  if (cfg.fc_decoder)
    nodes.lc = fc_ce_node(tape, scored.scores, inst.gold_tags);
  else
    nodes.lc = crf_nll_node(tape, scored.scores,
                            tape.input(model.transitions()), inst.gold_tags);
  if (cfg.use_br && inst.positive && bow) {
    Vec guidance = instance_guidance_for(data.sentences[ref.sentence], inst,
                                         *bow, data.tags);
    nodes.lbr = br_loss_node(tape, scored.attention, std::move(guidance));
  }
  if (cfg.use_olf && !rules.items.empty()) {
    auto pairs = instance_pair_positions(inst);
    if (!pairs.empty())
      nodes.lolf = olf_loss_node(tape, scored.scores, std::move(pairs), rules);
  }
  return nodes;
}

}  // namespace

EpochLosses train_epoch(JointTagger& model, AdamW& opt, const Dataset& data,
                        const std::vector<ItemRef>& items,
                        const BowTable* bow, const CompiledRules& rules,
                        const TrainConfig& cfg, std::mt19937_64& rng) {
  if (items.empty()) throw std::invalid_argument("train_epoch: no instances");
  std::vector<ItemRef> order = items;
  std::shuffle(order.begin(), order.end(), rng);

  EpochLosses epoch;
  int batch_id = 0;
  for (size_t start = 0; start < order.size();
       start += cfg.batch_size, ++batch_id) {
    size_t end = std::min(order.size(), start + cfg.batch_size);
    Tape tape;
    model.zero_grad();
    int total = -1;
    double lc = 0, lbr = 0, lolf = 0;
    for (size_t i = start; i < end; ++i) {
      auto nodes = instance_loss_nodes(tape, model, data, order[i], bow, rules,
                                       cfg, /*train=*/true, &rng);
      int inst_total = nodes.lc;
      lc += tape.val(nodes.lc)(0, 0);
      if (nodes.lbr >= 0) {
        inst_total = tape.add(inst_total, tape.scale(nodes.lbr, cfg.alpha));
        lbr += tape.val(nodes.lbr)(0, 0);
      }
      if (nodes.lolf >= 0) {
        inst_total = tape.add(inst_total, tape.scale(nodes.lolf, cfg.beta));
        lolf += tape.val(nodes.lolf)(0, 0);
      }
      total = total < 0 ? inst_total : tape.add(total, inst_total);
    }
    int n = static_cast<int>(end - start);
    total = tape.scale(total, 1.0 / n);
    double batch_loss = tape.val(total)(0, 0);
    if (!std::isfinite(batch_loss)) {
      std::ostringstream msg;
      msg << "train_epoch: non-finite loss in batch " << batch_id
          << " (lc=" << lc / n << " lbr=" << lbr / n << " lolf=" << lolf / n
          << ")";
      throw std::runtime_error(msg.str());
    }
    tape.backward(total);
    opt.step(model.params(), cfg.grad_clip, cfg.clip_norm);
    epoch.lc += lc;
    epoch.lbr += lbr;
    epoch.lolf += lolf;
    epoch.count += n;
  }
  epoch.lc /= epoch.count;
  epoch.lbr /= epoch.count;
  epoch.lolf /= epoch.count;
  return epoch;
}

double instance_total_loss(JointTagger& model, const Dataset& data,
                           const ItemRef& ref, const BowTable* bow,
                           const CompiledRules& rules,
                           const TrainConfig& cfg) {
  Tape tape;
  auto nodes = instance_loss_nodes(tape, model, data, ref, bow, rules, cfg,
                                   /*train=*/false, nullptr);
  double total = tape.val(nodes.lc)(0, 0);
  if (nodes.lbr >= 0) total += cfg.alpha * tape.val(nodes.lbr)(0, 0);
  if (nodes.lolf >= 0) total += cfg.beta * tape.val(nodes.lolf)(0, 0);
  return total;
}

double gradient_check(JointTagger& model, const Dataset& data,
                      const ItemRef& ref, const BowTable* bow,
                      const CompiledRules& rules, const TrainConfig& cfg,
                      double h, bool corrupt_transition_grad) {
  // Analytic pass.
  model.zero_grad();
  {
    Tape tape;
    auto nodes = instance_loss_nodes(tape, model, data, ref, bow, rules, cfg,
                                     /*train=*/false, nullptr);
    int total = nodes.lc;
    if (nodes.lbr >= 0) total = tape.add(total, tape.scale(nodes.lbr, cfg.alpha));
    if (nodes.lolf >= 0)
      total = tape.add(total, tape.scale(nodes.lolf, cfg.beta));
    tape.backward(total);
  }
  std::vector<Mat> analytic;
  for (auto& p : model.params()) analytic.push_back(p.grad);
  if (corrupt_transition_grad) {
    for (size_t i = 0; i < model.params().size(); ++i)
      if (model.params()[i].name == "transitions") analytic[i](0, 0) += 0.5;
  }

  double max_err = 0.0;
  for (size_t i = 0; i < model.params().size(); ++i) {
    Mat& value = model.params()[i].value;
    for (int r = 0; r < value.rows(); ++r)
      for (int c = 0; c < value.cols(); ++c) {
        double orig = value(r, c);
        value(r, c) = orig + h;
        double lp = instance_total_loss(model, data, ref, bow, rules, cfg);
        value(r, c) = orig - h;
        double lm = instance_total_loss(model, data, ref, bow, rules, cfg);
        value(r, c) = orig;
        double fd = (lp - lm) / (2.0 * h);
        double a = analytic[i](r, c);
        double err = std::abs(a - fd) /
                     std::max({1.0, std::abs(a), std::abs(fd)});
        max_err = std::max(max_err, err);
      }
  }
  return max_err;
}

}  // namespace denrl
