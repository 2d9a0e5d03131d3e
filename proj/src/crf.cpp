#include "denrl/crf.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace denrl {

namespace {

double logsumexp_row(const Eigen::RowVectorXd& x) {
  double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum());
}

void check_shapes(const Mat& Z, const Mat& trans,
                  const std::vector<int>& gold) {
  int V = static_cast<int>(Z.cols());
  if (trans.rows() != V || trans.cols() != V)
    throw std::invalid_argument("crf: transition matrix shape mismatch");
  if (!gold.empty() && static_cast<int>(gold.size()) != Z.rows())
    throw std::invalid_argument("crf: gold path length mismatch");
  for (int y : gold)
    if (y < 0 || y >= V) throw std::invalid_argument("crf: tag out of range");
}

}  // namespace

double path_score(const Mat& Z, const Mat& trans, const std::vector<int>& y) {
  double s = 0.0;
  for (size_t t = 0; t < y.size(); ++t) {
    s += Z(t, y[t]);
    if (t + 1 < y.size()) s += trans(y[t], y[t + 1]);
  }
  return s;
}

double crf_nll(const Mat& Z, const Mat& trans, const std::vector<int>& gold,
               Mat* dZ, Mat* dTrans) {
  check_shapes(Z, trans, gold);
  int T = static_cast<int>(Z.rows());
  int V = static_cast<int>(Z.cols());

  Mat alpha(T, V);
  alpha.row(0) = Z.row(0);
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < V; ++j)
      alpha(t, j) =
          Z(t, j) +
          logsumexp_row(alpha.row(t - 1) + trans.col(j).transpose());
  double log_z = logsumexp_row(alpha.row(T - 1));
  double nll = log_z - path_score(Z, trans, gold);

  if (dZ || dTrans) {
    Mat beta(T, V);
    beta.row(T - 1).setZero();
    for (int t = T - 2; t >= 0; --t)
      for (int i = 0; i < V; ++i)
        beta(t, i) =
            logsumexp_row(trans.row(i) + Z.row(t + 1) + beta.row(t + 1));
    if (dZ) {
      *dZ = ((alpha + beta).array() - log_z).exp().matrix();
      for (int t = 0; t < T; ++t) (*dZ)(t, gold[t]) -= 1.0;
    }
    if (dTrans) {
      *dTrans = Mat::Zero(V, V);
      for (int t = 0; t + 1 < T; ++t) {
        for (int i = 0; i < V; ++i)
          for (int j = 0; j < V; ++j)
            (*dTrans)(i, j) += std::exp(alpha(t, i) + trans(i, j) +
                                        Z(t + 1, j) + beta(t + 1, j) - log_z);
        (*dTrans)(gold[t], gold[t + 1]) -= 1.0;
      }
    }
  }
  return nll;
}

std::vector<int> viterbi(const Mat& Z, const Mat& trans) {
  check_shapes(Z, trans, {});
  int T = static_cast<int>(Z.rows());
  int V = static_cast<int>(Z.cols());
  Mat best(T, V);
  Eigen::MatrixXi from(T, V);
  best.row(0) = Z.row(0);
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < V; ++j) {
      int arg = 0;
      double b = best(t - 1, 0) + trans(0, j);
      for (int i = 1; i < V; ++i) {
        double s = best(t - 1, i) + trans(i, j);
        if (s > b) {  // strict: ties keep the lowest previous tag
          b = s;
          arg = i;
        }
      }
      best(t, j) = b + Z(t, j);
      from(t, j) = arg;
    }
  int last = 0;
  for (int j = 1; j < V; ++j)
    if (best(T - 1, j) > best(T - 1, last)) last = j;
  std::vector<int> path(T);
  path[T - 1] = last;
  for (int t = T - 1; t > 0; --t) path[t - 1] = from(t, path[t]);
  return path;
}

int crf_nll_node(Tape& t, int z, int trans, std::vector<int> gold) {
  auto dZ = std::make_shared<Mat>();
  auto dT = std::make_shared<Mat>();
  double nll = crf_nll(t.val(z), t.val(trans), gold, dZ.get(), dT.get());
  Mat out(1, 1);
  out(0, 0) = nll;
  return t.push(std::move(out), [z, trans, dZ, dT](Tape& t, int id) {
    double g = t.grad(id)(0, 0);
    t.accum(z, g * (*dZ));
    t.accum(trans, g * (*dT));
  });
}

int fc_ce_node(Tape& t, int z, std::vector<int> gold) {
  const Mat& Z = t.val(z);
  int T = static_cast<int>(Z.rows());
  if (static_cast<int>(gold.size()) != T)
    throw std::invalid_argument("fc_ce: gold path length mismatch");
  auto probs = std::make_shared<Mat>(Z.rows(), Z.cols());
  double loss = 0.0;
  for (int r = 0; r < T; ++r) {
    double lse = logsumexp_row(Z.row(r));
    probs->row(r) = (Z.row(r).array() - lse).exp();
    loss += lse - Z(r, gold[r]);
  }
  Mat out(1, 1);
  out(0, 0) = loss;
  auto g = std::make_shared<std::vector<int>>(std::move(gold));
  return t.push(std::move(out), [z, probs, g](Tape& t, int id) {
    Mat d = *probs;
    for (size_t r = 0; r < g->size(); ++r) d(r, (*g)[r]) -= 1.0;
    t.accum(z, t.grad(id)(0, 0) * d);
  });
}

std::vector<int> argmax_decode(const Mat& Z) {
  std::vector<int> path(Z.rows());
  for (int r = 0; r < Z.rows(); ++r) {
    int arg = 0;
    for (int j = 1; j < Z.cols(); ++j)
      if (Z(r, j) > Z(r, arg)) arg = j;
    path[r] = arg;
  }
  return path;
}

}  // namespace denrl
