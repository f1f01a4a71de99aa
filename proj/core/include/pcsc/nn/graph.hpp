#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

#include "pcsc/common.hpp"

namespace pcsc::nn {

using Matrix = Eigen::MatrixXd;

// Reverse-mode tape over dense matrices. Small on purpose: only the ops the
// encoder, JSCC codec, and diffusion backbone need.

struct Node {
  Matrix value;
  Matrix grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;  // scatter this->grad into parents

  Matrix& ensure_grad() {
    if (grad.size() == 0) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

// Scoped switch: while disabled, ops produce detached constants (no tape).
class GradMode {
 public:
  static bool enabled();
  explicit GradMode(bool on);
  ~GradMode();

 private:
  bool prev_;
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  static Var leaf(Matrix value, bool requires_grad);
  static Var constant(Matrix value) { return leaf(std::move(value), false); }

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool defined() const { return node_ != nullptr; }
  std::shared_ptr<Node> node() const { return node_; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() {
    if (node_->grad.size() != 0) node_->grad.setZero();
  }
  double scalar() const { return node_->value(0, 0); }

  // Runs reverse-mode accumulation from this scalar node.
  void backward() const;

 private:
  std::shared_ptr<Node> node_;
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise, equal shapes
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var scale(const Var& a, double s);
Var add_rowvec(const Var& m, const Var& row);  // broadcast 1 x C over rows
Var mul_rowvec(const Var& m, const Var& row);
Var sigmoid(const Var& a);
Var gelu(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var softmax_rows(const Var& a);
Var normalize_rows(const Var& a, double eps = 1e-5);  // per-row standardize
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var colwise_max(const Var& a);   // R x C -> 1 x C, grad to first argmax
Var colwise_mean(const Var& a);  // R x C -> 1 x C
Var tile_rows(const Var& row, Eigen::Index n);
Var sum_all(const Var& a);  // -> 1 x 1

// (1/R) * sum of squared row distances to a constant target, as a scalar.
Var mse_to(const Var& pred, const Matrix& target);
// Symmetric squared-distance Chamfer between pred rows and a constant set.
Var chamfer_to(const Var& pred, const Matrix& target);

}  // namespace pcsc::nn
