#pragma once

#include <functional>
#include <vector>

#include <doctest.h>

#include "pcsc/geometry.hpp"
#include "pcsc/nn/graph.hpp"

namespace pcsc::testutil {

inline PointCloud random_cloud(Eigen::Index n, Rng& rng, double extent = 1.0) {
  PointCloud c;
  c.points.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) c.points(i, j) = rng.uniform(-extent, extent);
  return c;
}

inline nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng,
                                double extent = 1.0) {
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-extent, extent);
  return m;
}

// Central-difference check of every entry of every leaf against the tape.
// `build` must rebuild the scalar loss from the (possibly perturbed) leaf
// values on each call.
inline void grad_check(const std::vector<nn::Var>& leaves,
                       const std::function<nn::Var()>& build,
                       double tol = 1e-5) {
  for (const auto& leaf : leaves) {
    REQUIRE(leaf.requires_grad());
    const_cast<nn::Var&>(leaf).zero_grad();
  }
  nn::Var loss = build();
  REQUIRE(loss.rows() == 1);
  REQUIRE(loss.cols() == 1);
  loss.backward();

  std::vector<nn::Matrix> analytic;
  for (const auto& leaf : leaves)
    analytic.push_back(leaf.grad().size() != 0
                           ? leaf.grad()
                           : nn::Matrix::Zero(leaf.rows(), leaf.cols()));

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    nn::Matrix& value = const_cast<nn::Var&>(leaves[li]).mutable_value();
    for (Eigen::Index i = 0; i < value.rows(); ++i)
      for (Eigen::Index j = 0; j < value.cols(); ++j) {
        const double orig = value(i, j);
        const double h = 1e-5 * std::max(1.0, std::abs(orig));
        value(i, j) = orig + h;
        const double up = build().scalar();
        value(i, j) = orig - h;
        const double down = build().scalar();
        value(i, j) = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double ana = analytic[li](i, j);
        const double err = std::abs(numeric - ana) /
                           std::max({1.0, std::abs(numeric), std::abs(ana)});
        INFO("leaf " << li << " entry (" << i << "," << j << ") numeric "
                     << numeric << " analytic " << ana);
        CHECK(err <= tol);
      }
  }
}

}  // namespace pcsc::testutil
