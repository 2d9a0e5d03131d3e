#include "denrl/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace denrl {

static std::string lowercase(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& token_lists) {
  Vocab v;
  v.words.push_back("<unk>");
  v.index["<unk>"] = 0;
  for (const auto& tokens : token_lists)
    for (const auto& tok : tokens) {
      std::string w = lowercase(tok);
      if (v.index.emplace(w, static_cast<int>(v.words.size())).second)
        v.words.push_back(w);
    }
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = index.find(lowercase(token));
  return it == index.end() ? 0 : it->second;
}

std::vector<int> Vocab::ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

int JointTagger::add_param(const std::string& name, int rows, int cols,
                           double range, std::mt19937_64& rng) {
  Mat m(rows, cols);
  if (range == 0.0) {
    m.setZero();
  } else {
    std::uniform_real_distribution<double> dist(-range, range);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  params_.emplace_back(name, std::move(m));
  return static_cast<int>(params_.size()) - 1;
}

JointTagger::JointTagger(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.dim <= 0 || cfg_.layers <= 0 || cfg_.heads <= 0 ||
      cfg_.vocab_size <= 0 || cfg_.n_tags <= 0)
    throw std::invalid_argument("model config: all sizes must be positive");
  if (cfg_.dim % cfg_.heads != 0)
    throw std::invalid_argument("model config: dim must be divisible by heads");
  std::mt19937_64 rng(seed);
  double rd = 1.0 / std::sqrt(static_cast<double>(cfg_.dim));
  double rf = 1.0 / std::sqrt(static_cast<double>(cfg_.ffn));
  tok_emb_ = add_param("tok_emb", cfg_.vocab_size, cfg_.dim, rd, rng);
  pos_emb_ = add_param("pos_emb", cfg_.max_len, cfg_.dim, rd, rng);
  for (int l = 0; l < cfg_.layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    LayerIdx li;
    li.wq = add_param(p + "wq", cfg_.dim, cfg_.dim, rd, rng);
    li.bq = add_param(p + "bq", 1, cfg_.dim, 0.0, rng);
    li.wk = add_param(p + "wk", cfg_.dim, cfg_.dim, rd, rng);
    li.bk = add_param(p + "bk", 1, cfg_.dim, 0.0, rng);
    li.wv = add_param(p + "wv", cfg_.dim, cfg_.dim, rd, rng);
    li.bv = add_param(p + "bv", 1, cfg_.dim, 0.0, rng);
    li.wo = add_param(p + "wo", cfg_.dim, cfg_.dim, rd, rng);
    li.bo = add_param(p + "bo", 1, cfg_.dim, 0.0, rng);
    li.ln1_g = add_param(p + "ln1_g", 1, cfg_.dim, 0.0, rng);
    li.ln1_b = add_param(p + "ln1_b", 1, cfg_.dim, 0.0, rng);
    params_[li.ln1_g].value.setOnes();
    li.w1 = add_param(p + "w1", cfg_.dim, cfg_.ffn, rd, rng);
    li.b1 = add_param(p + "b1", 1, cfg_.ffn, 0.0, rng);
    li.w2 = add_param(p + "w2", cfg_.ffn, cfg_.dim, rf, rng);
    li.b2 = add_param(p + "b2", 1, cfg_.dim, 0.0, rng);
    li.ln2_g = add_param(p + "ln2_g", 1, cfg_.dim, 0.0, rng);
    li.ln2_b = add_param(p + "ln2_b", 1, cfg_.dim, 0.0, rng);
    params_[li.ln2_g].value.setOnes();
    layers_.push_back(li);
  }
  sm_w_ = add_param("sm_w", cfg_.dim, 1, rd, rng);
  emit_ = add_param("emission",
                    2 * cfg_.dim, cfg_.n_tags,
                    1.0 / std::sqrt(2.0 * cfg_.dim), rng);
  trans_ = add_param("transitions", cfg_.n_tags, cfg_.n_tags, 0.0, rng);
}

void JointTagger::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

int JointTagger::dropout(Tape& t, int x, bool train, std::mt19937_64* rng) {
  if (!train || cfg_.dropout <= 0.0) return x;
  if (!rng) throw std::logic_error("train-mode forward needs an rng");
  const Mat& v = t.val(x);
  Mat mask(v.rows(), v.cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double keep = 1.0 - cfg_.dropout;
  for (int i = 0; i < mask.rows(); ++i)
    for (int j = 0; j < mask.cols(); ++j)
      mask(i, j) = u(*rng) < keep ? 1.0 / keep : 0.0;
  return t.hadamard(x, t.constant(std::move(mask)));
}

int JointTagger::encode(Tape& t, const std::vector<int>& token_ids, bool train,
                        std::mt19937_64* rng) {
  int T = static_cast<int>(token_ids.size());
  if (T < 1) throw std::invalid_argument("encode: empty sequence");
  if (T > cfg_.max_len)
    throw std::invalid_argument("encode: sequence longer than max_len");
  for (int id : token_ids)
    if (id < 0 || id >= cfg_.vocab_size)
      throw std::invalid_argument("encode: token id out of vocab");

  std::vector<int> positions(T);
  for (int i = 0; i < T; ++i) positions[i] = i;
  int x = t.add(t.embed(params_[tok_emb_].value, params_[tok_emb_].grad,
                        token_ids),
                t.embed(params_[pos_emb_].value, params_[pos_emb_].grad,
                        positions));
  x = dropout(t, x, train, rng);

  int dh = cfg_.dim / cfg_.heads;
  double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  for (const auto& li : layers_) {
    int q = t.add_rowvec(t.matmul(x, t.input(params_[li.wq])),
                         t.input(params_[li.bq]));
    int k = t.add_rowvec(t.matmul(x, t.input(params_[li.wk])),
                         t.input(params_[li.bk]));
    int v = t.add_rowvec(t.matmul(x, t.input(params_[li.wv])),
                         t.input(params_[li.bv]));
    int heads = -1;
    for (int h = 0; h < cfg_.heads; ++h) {
      int qh = t.cols(q, h * dh, dh);
      int kh = t.cols(k, h * dh, dh);
      int vh = t.cols(v, h * dh, dh);
      int att = t.softmax_rows(t.scale(t.matmul_nt(qh, kh), inv_sqrt_dh));
      int oh = t.matmul(att, vh);
      heads = h == 0 ? oh : t.concat_cols(heads, oh);
    }
    int o = t.add_rowvec(t.matmul(heads, t.input(params_[li.wo])),
                         t.input(params_[li.bo]));
    o = dropout(t, o, train, rng);
    x = t.layer_norm(t.add(x, o), t.input(params_[li.ln1_g]),
                     t.input(params_[li.ln1_b]));
    int f = t.gelu(t.add_rowvec(t.matmul(x, t.input(params_[li.w1])),
                                t.input(params_[li.b1])));
    f = t.add_rowvec(t.matmul(f, t.input(params_[li.w2])),
                     t.input(params_[li.b2]));
    f = dropout(t, f, train, rng);
    x = t.layer_norm(t.add(x, f), t.input(params_[li.ln2_g]),
                     t.input(params_[li.ln2_b]));
  }
  return x;
}

int self_match_scores(Tape& t, int hidden, int w, int p) {
  const Mat& h = t.val(hidden);
  int T = static_cast<int>(h.rows());
  int d = static_cast<int>(h.cols());
  if (p < 0 || p >= T)
    throw std::invalid_argument("self_match: start position out of range");
  const Vec wv = t.val(w).col(0);
  // Cache tanh(h_p + h_t + h_j) for the backward pass; row index t*T + j.
  auto th = std::make_shared<Mat>(T * T, d);
  Mat s(T, T);
  for (int ti = 0; ti < T; ++ti) {
    Eigen::RowVectorXd base = h.row(p) + h.row(ti);
    for (int j = 0; j < T; ++j) {
      Eigen::RowVectorXd u = base + h.row(j);
      th->row(ti * T + j) = u.array().tanh();
      s(ti, j) = th->row(ti * T + j).dot(wv.transpose());
    }
  }
  return t.push(std::move(s), [hidden, w, p, th, T, d](Tape& t, int id) {
    const Mat& gs = t.grad(id);
    const Vec wv = t.val(w).col(0);
    Mat gh = Mat::Zero(T, d);
    Vec gw = Vec::Zero(d);
    for (int ti = 0; ti < T; ++ti)
      for (int j = 0; j < T; ++j) {
        double g = gs(ti, j);
        if (g == 0.0) continue;
        const auto tanh_u = th->row(ti * T + j);
        gw += g * tanh_u.transpose();
        Eigen::RowVectorXd gu =
            (g * wv.transpose().array() * (1.0 - tanh_u.array().square()))
                .matrix();
        gh.row(p) += gu;
        gh.row(ti) += gu;
        gh.row(j) += gu;
      }
    t.accum(hidden, gh);
    t.accum(w, gw);
  });
}

JointTagger::Scored JointTagger::score_instance(Tape& t, int hidden, int p) {
  int s = self_match_scores(t, hidden, t.input(params_[sm_w_]), p);
  int a = t.softmax_rows(s);
  int m = t.matmul(a, hidden);
  int x = t.concat_cols(hidden, m);
  int z = t.matmul(x, t.input(params_[emit_]));
  return {a, x, z};
}

}  // namespace denrl
