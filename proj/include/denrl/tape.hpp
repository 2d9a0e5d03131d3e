#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace denrl {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Param {
  std::string name;
  Mat value;
  Mat grad;

  Param() = default;
  Param(std::string n, Mat v)
      : name(std::move(n)), value(std::move(v)),
        grad(Mat::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(); }
};

// Reverse-mode tape over dense double matrices. Nodes are appended during
// the forward pass; backward() walks them in reverse. Scalars are 1x1.
class Tape {
 public:
  using BackFn = std::function<void(Tape&, int)>;

  int push(Mat value, BackFn back = nullptr);
  const Mat& val(int id) const { return nodes_[id].value; }
  Mat& grad(int id);
  void accum(int id, const Mat& g);
  bool has_grad(int id) const { return nodes_[id].has_grad; }
  void backward(int loss_id);

  // leaves
  int input(Param& p);  // back: p.grad += grad
  int constant(Mat v) { return push(std::move(v)); }
  // Gathers rows of an external table; gradient scatters straight into
  // table_grad without a tape node for the table itself.
  int embed(const Mat& table, Mat& table_grad, const std::vector<int>& rows);

  // elementwise / structural
  int add(int a, int b);
  int add_rowvec(int a, int b);  // b broadcast over rows of a
  int scale(int a, double s);
  int hadamard(int a, int b);
  int cols(int a, int start, int n);
  int concat_cols(int a, int b);

  // linear algebra
  int matmul(int a, int b);
  int matmul_nt(int a, int b);  // a * b^T

  // nonlinearities
  int softmax_rows(int a);
  int gelu(int a);
  int layer_norm(int x, int gamma, int beta);  // row-wise, eps 1e-5

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackFn back;
    bool has_grad = false;
  };
  std::vector<Node> nodes_;
};

}  // namespace denrl
