#include <doctest.h>

#include "pcsc/common.hpp"

using namespace pcsc;

TEST_CASE("rng is deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    double x = a.uniform(), y = b.uniform(), z = c.uniform();
    all_equal = all_equal && x == y;
    any_diff = any_diff || x != z;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform stays in [0,1) and respects bounds") {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    double v = rng.uniform(-3.0, 5.0);
    CHECK(v >= -3.0);
    CHECK(v < 5.0);
  }
}

TEST_CASE("uniform_index covers its range without bias") {
  Rng rng(11);
  const int n = 7;
  std::vector<int> counts(n, 0);
  const int trials = 70000;
  for (int i = 0; i < trials; ++i) ++counts[rng.uniform_index(n)];
  for (int k = 0; k < n; ++k) {
    CHECK(counts[k] > trials / n * 0.9);
    CHECK(counts[k] < trials / n * 1.1);
  }
}

TEST_CASE("gaussian moments") {
  Rng rng(13);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double g = rng.gaussian();
    sum += g;
    sum_sq += g * g;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum_sq / n - 1.0) < 0.02);
}

TEST_CASE("rayleigh mean square is 2 sigma^2") {
  Rng rng(17);
  const double sigma = 1.0 / std::sqrt(2.0);
  double sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double h = rng.rayleigh(sigma);
    CHECK(h >= 0.0);
    sum_sq += h * h;
  }
  CHECK(std::abs(sum_sq / n - 1.0) < 0.02);
}

TEST_CASE("fork yields a decorrelated but deterministic stream") {
  Rng a(5), b(5);
  Rng fa = a.fork(), fb = b.fork();
  CHECK(fa.uniform() == fb.uniform());
  Rng c(5);
  double direct = c.uniform();
  Rng d(5);
  double forked = d.fork().uniform();
  CHECK(direct != forked);
}
