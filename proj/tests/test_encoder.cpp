#include <random>

#include "denrl/model.hpp"
#include "doctest.h"

using namespace denrl;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.ffn = 16;
  cfg.max_len = 16;
  cfg.dropout = 0.2;
  cfg.vocab_size = 20;
  cfg.n_tags = 7;
  return cfg;
}

}  // namespace

TEST_CASE("vocabulary lowercases and reserves <unk>") {
  Vocab v = Vocab::build({{"Bill", "Gates"}, {"bill", "works"}});
  CHECK(v.words[0] == "<unk>");
  CHECK(v.id("BILL") == v.id("bill"));
  CHECK(v.id("nonexistent") == 0);
  CHECK(v.ids({"Gates", "works"}).size() == 2);
  CHECK(v.size() == 4);  // <unk>, bill, gates, works
}

TEST_CASE("encoder output shapes and determinism in eval mode") {
  JointTagger model(tiny_config(), 1);
  std::vector<int> ids = {3, 1, 4, 1, 5};

  Tape t1;
  int h1 = model.encode(t1, ids);
  CHECK(t1.val(h1).rows() == 5);
  CHECK(t1.val(h1).cols() == 8);

  Tape t2;
  int h2 = model.encode(t2, ids);
  CHECK((t1.val(h1) - t2.val(h2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("token order matters through position embeddings") {
  JointTagger model(tiny_config(), 1);
  Tape t1, t2;
  Mat a = t1.val(model.encode(t1, {3, 4, 5}));
  Mat b = t2.val(model.encode(t2, {5, 4, 3}));
  CHECK((a - b).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("dropout only perturbs training mode") {
  JointTagger model(tiny_config(), 1);
  std::vector<int> ids = {2, 3, 4};
  Tape te, tt;
  Mat eval_out = te.val(model.encode(te, ids));
  std::mt19937_64 rng(9);
  Mat train_out = tt.val(model.encode(tt, ids, /*train=*/true, &rng));
  CHECK((eval_out - train_out).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("attention rows are simplexes") {
  JointTagger model(tiny_config(), 2);
  Tape t;
  int hidden = model.encode(t, {1, 2, 3, 4, 5, 6});
  auto scored = model.score_instance(t, hidden, 2);
  const Mat& A = t.val(scored.attention);
  REQUIRE(A.rows() == 6);
  REQUIRE(A.cols() == 6);
  for (int r = 0; r < A.rows(); ++r) {
    CHECK(A.row(r).sum() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(A.row(r).minCoeff() >= 0.0);
    CHECK(A.row(r).maxCoeff() <= 1.0);
  }
  CHECK(t.val(scored.features).cols() == 16);  // [h ; m]
  CHECK(t.val(scored.scores).cols() == 7);
}

TEST_CASE("zero scoring vector gives uniform attention and mean pooling") {
  JointTagger model(tiny_config(), 3);
  for (auto& p : model.params())
    if (p.name == "sm_w") p.value.setZero();
  Tape t;
  int hidden = model.encode(t, {1, 2, 3, 4});
  auto scored = model.score_instance(t, hidden, 1);
  const Mat& A = t.val(scored.attention);
  for (int r = 0; r < A.rows(); ++r)
    for (int c = 0; c < A.cols(); ++c)
      CHECK(A(r, c) == doctest::Approx(0.25).epsilon(1e-12));
  // m_t = column mean of h for every t
  const Mat& H = t.val(hidden);
  Eigen::RowVectorXd mean = H.colwise().mean();
  const Mat& F = t.val(scored.features);
  for (int r = 0; r < F.rows(); ++r)
    CHECK((F.row(r).tail(8) - mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("different start positions change the representation") {
  JointTagger model(tiny_config(), 4);
  Tape t;
  int hidden = model.encode(t, {1, 2, 3, 4, 5});
  auto s0 = model.score_instance(t, hidden, 0);
  auto s3 = model.score_instance(t, hidden, 3);
  CHECK((t.val(s0.scores) - t.val(s3.scores)).cwiseAbs().maxCoeff() > 1e-8);
}

TEST_CASE("self-matching scores are shared-bundle symmetric in t and j") {
  // s_{t,j} = w . tanh(h_p + h_t + h_j) is symmetric under t <-> j
  JointTagger model(tiny_config(), 5);
  Tape t;
  int hidden = model.encode(t, {1, 2, 3, 4});
  for (auto& p : model.params())
    if (p.name == "sm_w") {
      int s = self_match_scores(t, hidden, t.input(p), 1);
      const Mat& S = t.val(s);
      for (int a = 0; a < S.rows(); ++a)
        for (int b = 0; b < S.cols(); ++b)
          CHECK(S(a, b) == doctest::Approx(S(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("seeded construction is reproducible") {
  JointTagger a(tiny_config(), 42), b(tiny_config(), 42), c(tiny_config(), 43);
  REQUIRE(a.params().size() == b.params().size());
  bool all_equal = true, differs_from_c = false;
  for (size_t i = 0; i < a.params().size(); ++i) {
    if ((a.params()[i].value - b.params()[i].value).cwiseAbs().maxCoeff() > 0)
      all_equal = false;
    if ((a.params()[i].value - c.params()[i].value).cwiseAbs().maxCoeff() > 0)
      differs_from_c = true;
  }
  CHECK(all_equal);
  CHECK(differs_from_c);
}
