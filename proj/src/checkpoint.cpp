#include "denrl/checkpoint.hpp"

#include <memory>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace denrl {

using nlohmann::json;

namespace {

json mat_to_json(const Mat& m) {
  std::vector<double> data(m.size());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      data[static_cast<size_t>(r) * m.cols() + c] = m(r, c);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Mat mat_from_json(const json& j) {
  Mat m(j.at("rows").get<long>(), j.at("cols").get<long>());
  const auto& data = j.at("data");
  if (static_cast<long>(data.size()) != m.size())
    throw std::runtime_error("checkpoint: matrix size mismatch");
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c)
      m(r, c) = data[static_cast<size_t>(r) * m.cols() + c].get<double>();
  return m;
}

json model_config_to_json(const ModelConfig& c) {
  return {{"dim", c.dim},     {"layers", c.layers},
          {"heads", c.heads}, {"ffn", c.ffn},
          {"max_len", c.max_len}, {"dropout", c.dropout},
          {"vocab_size", c.vocab_size}, {"n_tags", c.n_tags}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.dim = j.at("dim");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.ffn = j.at("ffn");
  c.max_len = j.at("max_len");
  c.dropout = j.at("dropout");
  c.vocab_size = j.at("vocab_size");
  c.n_tags = j.at("n_tags");
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"learning_rate", c.learning_rate},
          {"dropout", c.dropout},
          {"batch_size", c.batch_size},
          {"weight_decay", c.weight_decay},
          {"grad_clip", c.grad_clip},
          {"clip_norm", c.clip_norm},
          {"tau", c.tau},
          {"k_new_patterns", c.k_new_patterns},
          {"top_percent", c.top_percent},
          {"first_loop_epochs", c.first_loop_epochs},
          {"later_loop_epochs", c.later_loop_epochs},
          {"patience", c.patience},
          {"max_loops", c.max_loops},
          {"min_f1_gain", c.min_f1_gain},
          {"nonentity_ratio", c.nonentity_ratio},
          {"use_br", c.use_br},
          {"use_olf", c.use_olf},
          {"use_sal", c.use_sal},
          {"use_idr", c.use_idr},
          {"use_es", c.use_es},
          {"fc_decoder", c.fc_decoder},
          {"seed", c.seed},
          {"threads", c.threads},
          {"dim", c.dim},
          {"layers", c.layers},
          {"heads", c.heads},
          {"ffn", c.ffn},
          {"max_len", c.max_len}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.alpha = j.at("alpha");
  c.beta = j.at("beta");
  c.learning_rate = j.at("learning_rate");
  c.dropout = j.at("dropout");
  c.batch_size = j.at("batch_size");
  c.weight_decay = j.at("weight_decay");
  c.grad_clip = j.at("grad_clip");
  c.clip_norm = j.at("clip_norm");
  c.tau = j.at("tau");
  c.k_new_patterns = j.at("k_new_patterns");
  c.top_percent = j.at("top_percent");
  c.first_loop_epochs = j.at("first_loop_epochs");
  c.later_loop_epochs = j.at("later_loop_epochs");
  c.patience = j.at("patience");
  c.max_loops = j.at("max_loops");
  c.min_f1_gain = j.at("min_f1_gain");
  c.nonentity_ratio = j.at("nonentity_ratio");
  c.use_br = j.at("use_br");
  c.use_olf = j.at("use_olf");
  c.use_sal = j.at("use_sal");
  c.use_idr = j.at("use_idr");
  c.use_es = j.at("use_es");
  c.fc_decoder = j.at("fc_decoder");
  c.seed = j.at("seed");
  c.threads = j.at("threads");
  c.dim = j.at("dim");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.ffn = j.at("ffn");
  c.max_len = j.at("max_len");
  return c;
}

json patterns_to_json(const PatternSet& set) {
  json j = json::object();
  for (const auto& [rel, ps] : set.by_relation) {
    json arr = json::array();
    for (const auto& p : ps)
      arr.push_back({{"pattern", p.text},
                     {"frequency", p.frequency},
                     {"loop_added", p.loop_added},
                     {"fitness_sum", p.fitness_sum},
                     {"fitness_count", p.fitness_count}});
    j[rel] = std::move(arr);
  }
  return j;
}

PatternSet patterns_from_json(const json& j) {
  PatternSet set;
  for (auto it = j.begin(); it != j.end(); ++it)
    for (const auto& e : it.value())
      set.by_relation[it.key()].push_back(
          {e.at("pattern").get<std::string>(), e.at("frequency").get<int>(),
           e.at("loop_added").get<int>(), e.at("fitness_sum").get<double>(),
           e.at("fitness_count").get<long>()});
  return set;
}

}  // namespace

Checkpoint make_checkpoint(const JointTagger& model, const TrainConfig& cfg,
                           const AdamW& opt, const Vocab& vocab, int loop,
                           const PatternSet& patterns) {
  Checkpoint c;
  c.model_config = model.config();
  c.train_config = cfg;
  for (const auto& p : model.params()) c.params.emplace_back(p.name, p.value);
  c.optimizer = opt;
  c.vocab = vocab;
  c.loop = loop;
  c.patterns = patterns;
  return c;
}

void restore_checkpoint(const Checkpoint& ckpt, JointTagger& model,
                        AdamW& opt) {
  auto& params = model.params();
  if (params.size() != ckpt.params.size())
    throw std::runtime_error("restore_checkpoint: parameter count mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != ckpt.params[i].first ||
        params[i].value.rows() != ckpt.params[i].second.rows() ||
        params[i].value.cols() != ckpt.params[i].second.cols())
      throw std::runtime_error("restore_checkpoint: parameter mismatch at " +
                               params[i].name);
    params[i].value = ckpt.params[i].second;
    params[i].zero_grad();
  }
  opt = ckpt.optimizer;
}

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  json j;
  j["model_config"] = model_config_to_json(ckpt.model_config);
  j["train_config"] = train_config_to_json(ckpt.train_config);
  json params = json::array();
  for (const auto& [name, value] : ckpt.params) {
    json p = mat_to_json(value);
    p["name"] = name;
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  json opt;
  opt["lr"] = ckpt.optimizer.lr;
  opt["beta1"] = ckpt.optimizer.beta1;
  opt["beta2"] = ckpt.optimizer.beta2;
  opt["eps"] = ckpt.optimizer.eps;
  opt["weight_decay"] = ckpt.optimizer.weight_decay;
  opt["step_count"] = ckpt.optimizer.step_count;
  json ms = json::array(), vs = json::array();
  for (const auto& m : ckpt.optimizer.m) ms.push_back(mat_to_json(m));
  for (const auto& v : ckpt.optimizer.v) vs.push_back(mat_to_json(v));
  opt["m"] = std::move(ms);
  opt["v"] = std::move(vs);
  j["optimizer"] = std::move(opt);
  j["vocab"] = ckpt.vocab.words;
  j["loop"] = ckpt.loop;
  j["patterns"] = patterns_to_json(ckpt.patterns);
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << j.dump() << "\n";
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  json j = json::parse(in);
  Checkpoint c;
  c.model_config = model_config_from_json(j.at("model_config"));
  c.train_config = train_config_from_json(j.at("train_config"));
  for (const auto& p : j.at("params"))
    c.params.emplace_back(p.at("name").get<std::string>(), mat_from_json(p));
  const auto& opt = j.at("optimizer");
  c.optimizer.lr = opt.at("lr");
  c.optimizer.beta1 = opt.at("beta1");
  c.optimizer.beta2 = opt.at("beta2");
  c.optimizer.eps = opt.at("eps");
  c.optimizer.weight_decay = opt.at("weight_decay");
  c.optimizer.step_count = opt.at("step_count");
  for (const auto& m : opt.at("m")) c.optimizer.m.push_back(mat_from_json(m));
  for (const auto& v : opt.at("v")) c.optimizer.v.push_back(mat_from_json(v));
  c.vocab.words = j.at("vocab").get<std::vector<std::string>>();
  for (int i = 0; i < static_cast<int>(c.vocab.words.size()); ++i)
    c.vocab.index[c.vocab.words[i]] = i;
  c.loop = j.at("loop");
  c.patterns = patterns_from_json(j.at("patterns"));
  return c;
}

}  // namespace denrl
