#include "denrl/tape.hpp"

#include <memory>
#include <cmath>
#include <stdexcept>

namespace denrl {

int Tape::push(Mat value, BackFn back) {
  nodes_.push_back({std::move(value), Mat(), std::move(back), false});
  return static_cast<int>(nodes_.size()) - 1;
}

Mat& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accum(int id, const Mat& g) { grad(id) += g; }

void Tape::backward(int loss_id) {
  if (nodes_[loss_id].value.size() != 1)
    throw std::logic_error("backward seed must be scalar");
  grad(loss_id)(0, 0) += 1.0;
  for (int i = loss_id; i >= 0; --i)
    if (nodes_[i].back && nodes_[i].has_grad) nodes_[i].back(*this, i);
}

int Tape::input(Param& p) {
  Param* pp = &p;
  return push(p.value, [pp](Tape& t, int id) { pp->grad += t.grad(id); });
}

int Tape::embed(const Mat& table, Mat& table_grad,
                const std::vector<int>& rows) {
  Mat out(rows.size(), table.cols());
  for (size_t i = 0; i < rows.size(); ++i) out.row(i) = table.row(rows[i]);
  Mat* tg = &table_grad;
  std::vector<int> idx = rows;
  return push(std::move(out), [tg, idx](Tape& t, int id) {
    const Mat& g = t.grad(id);
    for (size_t i = 0; i < idx.size(); ++i) tg->row(idx[i]) += g.row(i);
  });
}

int Tape::add(int a, int b) {
  return push(val(a) + val(b), [a, b](Tape& t, int id) {
    t.accum(a, t.grad(id));
    t.accum(b, t.grad(id));
  });
}

int Tape::add_rowvec(int a, int b) {
  Mat out = val(a);
  out.rowwise() += val(b).row(0);
  return push(std::move(out), [a, b](Tape& t, int id) {
    t.accum(a, t.grad(id));
    t.accum(b, t.grad(id).colwise().sum());
  });
}

int Tape::scale(int a, double s) {
  return push(val(a) * s,
              [a, s](Tape& t, int id) { t.accum(a, t.grad(id) * s); });
}

int Tape::hadamard(int a, int b) {
  return push(val(a).cwiseProduct(val(b)), [a, b](Tape& t, int id) {
    t.accum(a, t.grad(id).cwiseProduct(t.val(b)));
    t.accum(b, t.grad(id).cwiseProduct(t.val(a)));
  });
}

int Tape::cols(int a, int start, int n) {
  return push(val(a).middleCols(start, n), [a, start, n](Tape& t, int id) {
    t.grad(a).middleCols(start, n) += t.grad(id);
  });
}

int Tape::concat_cols(int a, int b) {
  Mat out(val(a).rows(), val(a).cols() + val(b).cols());
  out << val(a), val(b);
  int na = static_cast<int>(val(a).cols());
  int nb = static_cast<int>(val(b).cols());
  return push(std::move(out), [a, b, na, nb](Tape& t, int id) {
    t.grad(a) += t.grad(id).leftCols(na);
    t.grad(b) += t.grad(id).rightCols(nb);
  });
}

int Tape::matmul(int a, int b) {
  return push(val(a) * val(b), [a, b](Tape& t, int id) {
    const Mat& g = t.grad(id);
    t.accum(a, g * t.val(b).transpose());
    t.accum(b, t.val(a).transpose() * g);
  });
}

int Tape::matmul_nt(int a, int b) {
  return push(val(a) * val(b).transpose(), [a, b](Tape& t, int id) {
    const Mat& g = t.grad(id);
    t.accum(a, g * t.val(b));
    t.accum(b, g.transpose() * t.val(a));
  });
}

int Tape::softmax_rows(int a) {
  Mat x = val(a);
  for (int r = 0; r < x.rows(); ++r) {
    Eigen::RowVectorXd row = x.row(r);
    double m = row.maxCoeff();
    row = (row.array() - m).exp();
    x.row(r) = row / row.sum();
  }
  return push(std::move(x), [a](Tape& t, int id) {
    const Mat& y = t.val(id);
    const Mat& gy = t.grad(id);
    Mat gx(y.rows(), y.cols());
    for (int r = 0; r < y.rows(); ++r) {
      double dot = gy.row(r).dot(y.row(r));
      gx.row(r) = (gy.row(r).array() - dot) * y.row(r).array();
    }
    t.accum(a, gx);
  });
}

int Tape::gelu(int a) {
  const Mat& x = val(a);
  Mat y = x.unaryExpr(
      [](double v) { return 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0))); });
  return push(std::move(y), [a](Tape& t, int id) {
    const Mat& x = t.val(a);
    Mat d = x.unaryExpr([](double v) {
      double cdf = 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
      double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
      return cdf + v * pdf;
    });
    t.accum(a, t.grad(id).cwiseProduct(d));
  });
}

int Tape::layer_norm(int x, int gamma, int beta) {
  constexpr double kEps = 1e-5;
  const Mat& xin = val(x);
  int rows = static_cast<int>(xin.rows());
  int d = static_cast<int>(xin.cols());
  Mat xhat(rows, d);
  Vec inv_sigma(rows);
  for (int r = 0; r < rows; ++r) {
    double mu = xin.row(r).mean();
    Eigen::RowVectorXd c = xin.row(r).array() - mu;
    double var = c.squaredNorm() / d;
    double is = 1.0 / std::sqrt(var + kEps);
    xhat.row(r) = c * is;
    inv_sigma(r) = is;
  }
  Mat out = xhat;
  out.array().rowwise() *= val(gamma).row(0).array();
  out.rowwise() += val(beta).row(0);
  auto xh = std::make_shared<Mat>(std::move(xhat));
  auto is = std::make_shared<Vec>(std::move(inv_sigma));
  return push(std::move(out), [x, gamma, beta, xh, is](Tape& t, int id) {
    const Mat& gy = t.grad(id);
    int rows = static_cast<int>(gy.rows());
    int d = static_cast<int>(gy.cols());
    Eigen::RowVectorXd g = t.val(gamma).row(0);
    Mat gx(rows, d);
    Eigen::RowVectorXd dgamma = Eigen::RowVectorXd::Zero(d);
    Eigen::RowVectorXd dbeta = Eigen::RowVectorXd::Zero(d);
    for (int r = 0; r < rows; ++r) {
      Eigen::RowVectorXd gyh = gy.row(r).cwiseProduct(g);
      double m1 = gyh.mean();
      double m2 = gyh.cwiseProduct(xh->row(r)).mean();
      gx.row(r) =
          ((gyh.array() - m1) - xh->row(r).array() * m2) * (*is)(r);
      dgamma += gy.row(r).cwiseProduct(xh->row(r));
      dbeta += gy.row(r);
    }
    t.accum(x, gx);
    t.accum(gamma, dgamma);
    t.accum(beta, dbeta);
  });
}

}  // namespace denrl
