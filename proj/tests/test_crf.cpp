#include <cmath>
#include <random>
#include <vector>

#include "denrl/crf.hpp"
#include "doctest.h"

using namespace denrl;

namespace {

double brute_log_z(const Mat& Z, const Mat& trans) {
  int T = static_cast<int>(Z.rows()), V = static_cast<int>(Z.cols());
  std::vector<int> path(T, 0);
  double max_score = -1e300;
  std::vector<double> scores;
  while (true) {
    scores.push_back(path_score(Z, trans, path));
    max_score = std::max(max_score, scores.back());
    int i = T - 1;
    while (i >= 0 && ++path[i] == V) path[i--] = 0;
    if (i < 0) break;
  }
  double sum = 0;
  for (double s : scores) sum += std::exp(s - max_score);
  return max_score + std::log(sum);
}

std::vector<int> brute_viterbi(const Mat& Z, const Mat& trans) {
  int T = static_cast<int>(Z.rows()), V = static_cast<int>(Z.cols());
  std::vector<int> path(T, 0), best(T, 0);
  double best_score = path_score(Z, trans, best);
  while (true) {
    int i = T - 1;
    while (i >= 0 && ++path[i] == V) path[i--] = 0;
    if (i < 0) break;
    double s = path_score(Z, trans, path);
    if (s > best_score) {
      best_score = s;
      best = path;
    }
  }
  return best;
}

std::mt19937_64 rng(123);

Mat random_mat(int r, int c) {
  std::normal_distribution<double> d(0.0, 1.5);
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

std::vector<int> random_path(int T, int V) {
  std::uniform_int_distribution<int> d(0, V - 1);
  std::vector<int> p(T);
  for (int& t : p) t = d(rng);
  return p;
}

}  // namespace

TEST_CASE("nll equals brute-force enumeration on 200 random problems") {
  std::uniform_int_distribution<int> Td(1, 6), Vd(2, 5);
  for (int i = 0; i < 200; ++i) {
    int T = Td(rng), V = Vd(rng);
    Mat Z = random_mat(T, V), trans = random_mat(V, V);
    std::vector<int> gold = random_path(T, V);
    double expected = brute_log_z(Z, trans) - path_score(Z, trans, gold);
    CHECK(crf_nll(Z, trans, gold) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("viterbi equals exhaustive argmax on random problems") {
  std::uniform_int_distribution<int> Td(1, 6), Vd(2, 5);
  for (int i = 0; i < 200; ++i) {
    int T = Td(rng), V = Vd(rng);
    Mat Z = random_mat(T, V), trans = random_mat(V, V);
    CHECK(viterbi(Z, trans) == brute_viterbi(Z, trans));
  }
}

TEST_CASE("viterbi tie-break prefers the lowest tag index") {
  Mat Z = Mat::Zero(4, 3), trans = Mat::Zero(3, 3);
  CHECK(viterbi(Z, trans) == std::vector<int>(4, 0));
}

TEST_CASE("dominant per-position tags win with zero transitions") {
  Mat Z = Mat::Zero(3, 4);
  Z(0, 2) = 5;
  Z(1, 0) = 5;
  Z(2, 3) = 5;
  Mat trans = Mat::Zero(4, 4);
  CHECK(viterbi(Z, trans) == std::vector<int>{2, 0, 3});
}

TEST_CASE("path probabilities sum to one") {
  for (int i = 0; i < 20; ++i) {
    int T = 1 + i % 5, V = 2 + i % 3;
    Mat Z = random_mat(T, V), trans = random_mat(V, V);
    std::vector<int> path(T, 0);
    double sum = 0;
    while (true) {
      sum += std::exp(-crf_nll(Z, trans, path));
      int k = T - 1;
      while (k >= 0 && ++path[k] == V) path[k--] = 0;
      if (k < 0) break;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("nll is invariant to shifting an emission row") {
  Mat Z = random_mat(5, 4), trans = random_mat(4, 4);
  std::vector<int> gold = random_path(5, 4);
  double base = crf_nll(Z, trans, gold);
  Z.row(2).array() += 3.7;
  CHECK(crf_nll(Z, trans, gold) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("viterbi beats random paths") {
  Mat Z = random_mat(6, 5), trans = random_mat(5, 5);
  double best = path_score(Z, trans, viterbi(Z, trans));
  for (int i = 0; i < 1000; ++i)
    CHECK(best >= path_score(Z, trans, random_path(6, 5)));
}

TEST_CASE("analytic nll gradients match finite differences") {
  const double h = 1e-6;
  for (int trial = 0; trial < 10; ++trial) {
    int T = 4, V = 4;
    Mat Z = random_mat(T, V), trans = random_mat(V, V);
    std::vector<int> gold = random_path(T, V);
    Mat dZ, dT;
    crf_nll(Z, trans, gold, &dZ, &dT);
    for (int r = 0; r < T; ++r)
      for (int c = 0; c < V; ++c) {
        Mat zp = Z, zm = Z;
        zp(r, c) += h;
        zm(r, c) -= h;
        double fd =
            (crf_nll(zp, trans, gold) - crf_nll(zm, trans, gold)) / (2 * h);
        CHECK(dZ(r, c) == doctest::Approx(fd).epsilon(1e-5));
      }
    for (int r = 0; r < V; ++r)
      for (int c = 0; c < V; ++c) {
        Mat tp = trans, tm = trans;
        tp(r, c) += h;
        tm(r, c) -= h;
        double fd =
            (crf_nll(Z, tp, gold) - crf_nll(Z, tm, gold)) / (2 * h);
        CHECK(dT(r, c) == doctest::Approx(fd).epsilon(1e-5));
      }
  }
}

TEST_CASE("crf tape node backpropagates the same gradients") {
  Mat Zv = random_mat(5, 4);
  Param trans("trans", random_mat(4, 4));
  Param zp("z", Zv);
  std::vector<int> gold = random_path(5, 4);

  Mat dZ, dT;
  double expected = crf_nll(Zv, trans.value, gold, &dZ, &dT);

  Tape tape;
  int z = tape.input(zp);
  int t = tape.input(trans);
  int nll = crf_nll_node(tape, z, t, gold);
  CHECK(tape.val(nll)(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  tape.backward(nll);
  CHECK((zp.grad - dZ).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((trans.grad - dT).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fc decoder node is per-token softmax cross entropy") {
  Mat Zv = random_mat(3, 4);
  Param zp("z", Zv);
  std::vector<int> gold = {1, 0, 3};

  double expected = 0;
  for (int t = 0; t < 3; ++t) {
    Eigen::RowVectorXd row = Zv.row(t);
    double m = row.maxCoeff();
    expected += -(row(gold[t]) - m - std::log((row.array() - m).exp().sum()));
  }

  Tape tape;
  int nll = fc_ce_node(tape, tape.input(zp), gold);
  CHECK(tape.val(nll)(0, 0) == doctest::Approx(expected).epsilon(1e-12));

  tape.backward(nll);
  const double h = 1e-6;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) {
      auto eval = [&](double delta) {
        Mat z2 = Zv;
        z2(r, c) += delta;
        double s = 0;
        for (int t = 0; t < 3; ++t) {
          Eigen::RowVectorXd row = z2.row(t);
          double m = row.maxCoeff();
          s += -(row(gold[t]) - m - std::log((row.array() - m).exp().sum()));
        }
        return s;
      };
      double fd = (eval(h) - eval(-h)) / (2 * h);
      CHECK(zp.grad(r, c) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("argmax decode picks the per-token maximum") {
  Mat Z(2, 3);
  Z << 0.1, 0.9, 0.3, 2.0, -1.0, 0.5;
  CHECK(argmax_decode(Z) == std::vector<int>{1, 0});
}
