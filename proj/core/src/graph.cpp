#include "pcsc/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace pcsc::nn {

namespace {

thread_local bool g_grad_enabled = true;

inline void acc(Node& parent, const Matrix& g) {
  if (parent.requires_grad) parent.ensure_grad() += g;
}

Var make_op(Matrix value, std::vector<Var> parents,
            std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  bool needs = false;
  if (GradMode::enabled()) {
    for (const auto& p : parents) needs = needs || p.node()->requires_grad;
  }
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Var(node);
}

}  // namespace

bool GradMode::enabled() { return g_grad_enabled; }
GradMode::GradMode(bool on) : prev_(g_grad_enabled) { g_grad_enabled = on; }
GradMode::~GradMode() { g_grad_enabled = prev_; }

Var Var::leaf(Matrix value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = requires_grad;
  return Var(node);
}

void Var::backward() const {
  if (node_->value.size() != 1)
    throw InvalidInput("backward: root must be a scalar");
  node_->ensure_grad()(0, 0) = 1.0;

  // DFS postorder, then reverse for topological accumulation.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [cur, next] = stack.back();
    if (next < cur->parents.size()) {
      Node* p = cur->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(cur);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  return make_op(a.value() + b.value(), {a, b}, [](Node& self) {
    acc(*self.parents[0], self.grad);
    acc(*self.parents[1], self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  return make_op(a.value() - b.value(), {a, b}, [](Node& self) {
    acc(*self.parents[0], self.grad);
    acc(*self.parents[1], -self.grad);
  });
}

Var mul(const Var& a, const Var& b) {
  return make_op(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    acc(*self.parents[0], self.grad.cwiseProduct(self.parents[1]->value));
    acc(*self.parents[1], self.grad.cwiseProduct(self.parents[0]->value));
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) throw InvalidInput("matmul: inner dim mismatch");
  return make_op(a.value() * b.value(), {a, b}, [](Node& self) {
    acc(*self.parents[0], self.grad * self.parents[1]->value.transpose());
    acc(*self.parents[1], self.parents[0]->value.transpose() * self.grad);
  });
}

Var transpose(const Var& a) {
  return make_op(a.value().transpose(), {a}, [](Node& self) {
    acc(*self.parents[0], self.grad.transpose());
  });
}

Var scale(const Var& a, double s) {
  return make_op(a.value() * s, {a}, [s](Node& self) {
    acc(*self.parents[0], self.grad * s);
  });
}

Var add_rowvec(const Var& m, const Var& row) {
  if (row.rows() != 1 || row.cols() != m.cols())
    throw InvalidInput("add_rowvec: shape mismatch");
  Matrix v = m.value().rowwise() + row.value().row(0);
  return make_op(std::move(v), {m, row}, [](Node& self) {
    acc(*self.parents[0], self.grad);
    acc(*self.parents[1], self.grad.colwise().sum());
  });
}

Var mul_rowvec(const Var& m, const Var& row) {
  if (row.rows() != 1 || row.cols() != m.cols())
    throw InvalidInput("mul_rowvec: shape mismatch");
  Matrix v = m.value().array().rowwise() * row.value().row(0).array();
  return make_op(std::move(v), {m, row}, [](Node& self) {
    const Matrix& mv = self.parents[0]->value;
    const Matrix& rv = self.parents[1]->value;
    acc(*self.parents[0],
        (self.grad.array().rowwise() * rv.row(0).array()).matrix());
    acc(*self.parents[1], self.grad.cwiseProduct(mv).colwise().sum());
  });
}

Var sigmoid(const Var& a) {
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  return make_op(std::move(y), {a}, [](Node& self) {
    const auto y = self.value.array();
    acc(*self.parents[0], (self.grad.array() * y * (1.0 - y)).matrix());
  });
}

Var gelu(const Var& a) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  Matrix y = a.value().unaryExpr(
      [&](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); });
  return make_op(std::move(y), {a}, [inv_sqrt2](Node& self) {
    const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * M_PI);
    Matrix d = self.parents[0]->value.unaryExpr([&](double x) {
      return 0.5 * (1.0 + std::erf(x * inv_sqrt2)) +
             x * inv_sqrt2pi * std::exp(-0.5 * x * x);
    });
    acc(*self.parents[0], self.grad.cwiseProduct(d));
  });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix y = a.value().unaryExpr(
      [slope](double x) { return x > 0.0 ? x : slope * x; });
  return make_op(std::move(y), {a}, [slope](Node& self) {
    Matrix d = self.parents[0]->value.unaryExpr(
        [slope](double x) { return x > 0.0 ? 1.0 : slope; });
    acc(*self.parents[0], self.grad.cwiseProduct(d));
  });
}

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    Eigen::ArrayXd row = y.row(r).array();
    row -= row.maxCoeff();
    row = row.exp();
    y.row(r) = (row / row.sum()).matrix();
  }
  return make_op(std::move(y), {a}, [](Node& self) {
    Matrix d(self.value.rows(), self.value.cols());
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      const auto y = self.value.row(r).array();
      const auto g = self.grad.row(r).array();
      double dot = (y * g).sum();
      d.row(r) = (y * (g - dot)).matrix();
    }
    acc(*self.parents[0], d);
  });
}

Var normalize_rows(const Var& a, double eps) {
  const Eigen::Index c = a.cols();
  Matrix y(a.rows(), c);
  Eigen::ArrayXd inv_std(a.rows());
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const auto x = a.value().row(r).array();
    double mean = x.mean();
    double var = (x - mean).square().mean();
    double is = 1.0 / std::sqrt(var + eps);
    inv_std(r) = is;
    y.row(r) = ((x - mean) * is).matrix();
  }
  return make_op(std::move(y), {a}, [inv_std](Node& self) {
    Matrix d(self.value.rows(), self.value.cols());
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      const auto y = self.value.row(r).array();
      const auto g = self.grad.row(r).array();
      double gm = g.mean();
      double gym = (g * y).mean();
      d.row(r) = ((g - gm - y * gym) * inv_std(r)).matrix();
    }
    acc(*self.parents[0], d);
  });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a.rows() != b.rows()) throw InvalidInput("concat_cols: row mismatch");
  Matrix v(a.rows(), a.cols() + b.cols());
  v << a.value(), b.value();
  Eigen::Index ac = a.cols();
  return make_op(std::move(v), {a, b}, [ac](Node& self) {
    acc(*self.parents[0], self.grad.leftCols(ac));
    acc(*self.parents[1], self.grad.rightCols(self.grad.cols() - ac));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw InvalidInput("concat_rows: no parts");
  Eigen::Index rows = 0;
  for (const auto& p : parts) rows += p.rows();
  Matrix v(rows, parts[0].cols());
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Eigen::Index> sizes;
  for (const auto& p : parts) sizes.push_back(p.rows());
  return make_op(std::move(v), parts, [sizes](Node& self) {
    Eigen::Index at = 0;
    for (size_t i = 0; i < sizes.size(); ++i) {
      acc(*self.parents[i], self.grad.middleRows(at, sizes[i]));
      at += sizes[i];
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  return make_op(a.value().middleCols(start, count), {a},
                 [start, count](Node& self) {
                   Node& p = *self.parents[0];
                   if (!p.requires_grad) return;
                   p.ensure_grad().middleCols(start, count) += self.grad;
                 });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  return make_op(a.value().middleRows(start, count), {a},
                 [start, count](Node& self) {
                   Node& p = *self.parents[0];
                   if (!p.requires_grad) return;
                   p.ensure_grad().middleRows(start, count) += self.grad;
                 });
}

Var colwise_max(const Var& a) {
  const Eigen::Index c = a.cols();
  Matrix v(1, c);
  std::vector<Eigen::Index> argmax(c);
  for (Eigen::Index j = 0; j < c; ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < a.rows(); ++r)
      if (a.value()(r, j) > a.value()(best, j)) best = r;  // first max wins
    argmax[j] = best;
    v(0, j) = a.value()(best, j);
  }
  return make_op(std::move(v), {a}, [argmax](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    Matrix& g = p.ensure_grad();
    for (Eigen::Index j = 0; j < self.grad.cols(); ++j)
      g(argmax[j], j) += self.grad(0, j);
  });
}

Var colwise_mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a.rows());
  return make_op(a.value().colwise().mean(), {a}, [inv](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad().array().rowwise() += self.grad.row(0).array() * inv;
  });
}

Var tile_rows(const Var& row, Eigen::Index n) {
  if (row.rows() != 1) throw InvalidInput("tile_rows: expects a row vector");
  return make_op(row.value().replicate(n, 1), {row}, [](Node& self) {
    acc(*self.parents[0], self.grad.colwise().sum());
  });
}

Var sum_all(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return make_op(std::move(v), {a}, [](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad().array() += self.grad(0, 0);
  });
}

Var mse_to(const Var& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw InvalidInput("mse_to: shape mismatch");
  const double inv = 1.0 / static_cast<double>(pred.rows());
  Matrix v(1, 1);
  v(0, 0) = (pred.value() - target).rowwise().squaredNorm().sum() * inv;
  return make_op(std::move(v), {pred}, [target, inv](Node& self) {
    acc(*self.parents[0],
        2.0 * inv * self.grad(0, 0) * (self.parents[0]->value - target));
  });
}

Var chamfer_to(const Var& pred, const Matrix& target) {
  if (pred.cols() != target.cols())
    throw InvalidInput("chamfer_to: column mismatch");
  if (pred.rows() < 1 || target.rows() < 1)
    throw InvalidInput("chamfer_to: empty set");
  const Eigen::Index np = pred.rows(), nt = target.rows();
  std::vector<Eigen::Index> nn_pt(np), nn_tp(nt);
  double term1 = 0.0, term2 = 0.0;
  for (Eigen::Index i = 0; i < np; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < nt; ++j) {
      double d2 = (pred.value().row(i) - target.row(j)).squaredNorm();
      if (d2 < best) {
        best = d2;
        nn_pt[i] = j;
      }
    }
    term1 += best;
  }
  for (Eigen::Index j = 0; j < nt; ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < np; ++i) {
      double d2 = (pred.value().row(i) - target.row(j)).squaredNorm();
      if (d2 < best) {
        best = d2;
        nn_tp[j] = i;
      }
    }
    term2 += best;
  }
  Matrix v(1, 1);
  v(0, 0) = term1 / np + term2 / nt;
  // Nearest-neighbor matches are treated as locally constant.
  return make_op(std::move(v), {pred}, [target, nn_pt, nn_tp](Node& self) {
    Node& p = *self.parents[0];
    if (!p.requires_grad) return;
    const double g = self.grad(0, 0);
    const Eigen::Index np = p.value.rows(), nt = target.rows();
    Matrix& pg = p.ensure_grad();
    for (Eigen::Index i = 0; i < np; ++i)
      pg.row(i) +=
          g * 2.0 / np * (p.value.row(i) - target.row(nn_pt[i]));
    for (Eigen::Index j = 0; j < nt; ++j)
      pg.row(nn_tp[j]) +=
          g * 2.0 / nt * (p.value.row(nn_tp[j]) - target.row(j));
  });
}

}  // namespace pcsc::nn
