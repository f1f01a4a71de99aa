#include "pcsc/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace pcsc {

namespace {

constexpr int kEmdCap = 1024;
constexpr int kBruteForceCap = 8;

void require_nonempty(const PointCloud& a, const PointCloud& b,
                      const char* op) {
  if (a.size() < 1 || b.size() < 1)
    throw InvalidInput(std::string(op) + ": empty cloud");
}

// directed terms: (mean of min squared distances, max of min distances)
std::pair<double, double> directed_nn(const Matrix& from, const Matrix& to) {
  double sum = 0.0, worst = 0.0;
  for (Eigen::Index i = 0; i < from.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < to.rows(); ++j) {
      double d2 = (from.row(i) - to.row(j)).squaredNorm();
      if (d2 < best) best = d2;
    }
    sum += best;
    worst = std::max(worst, best);
  }
  return {sum / static_cast<double>(from.rows()), std::sqrt(worst)};
}

}  // namespace

double mse_paired(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) throw InvalidInput("mse_paired: size mismatch");
  require_nonempty(a, b, "mse_paired");
  return (a.points - b.points).rowwise().squaredNorm().sum() /
         static_cast<double>(a.size());
}

double chamfer(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b, "chamfer");
  return directed_nn(a.points, b.points).first +
         directed_nn(b.points, a.points).first;
}

double hausdorff(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, b, "hausdorff");
  return std::max(directed_nn(a.points, b.points).second,
                  directed_nn(b.points, a.points).second);
}

double solve_assignment(const Matrix& cost, std::vector<int>& row_to_col) {
  const int n = static_cast<int>(cost.rows());
  // Augmenting-path Kuhn-Munkres with potentials, O(n^3).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = std::numeric_limits<double>::infinity();
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  row_to_col.assign(n, -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    if (p[j]) {
      row_to_col[p[j] - 1] = j - 1;
      total += cost(p[j] - 1, j - 1);
    }
  }
  return total;
}

double emd(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) throw InvalidInput("emd: size mismatch");
  require_nonempty(a, b, "emd");
  const int n = static_cast<int>(a.size());
  if (n > kEmdCap) throw CapacityError("emd: cloud exceeds solver cap");

  Matrix cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = (a.points.row(i) - b.points.row(j)).norm();
  std::vector<int> assignment;
  return solve_assignment(cost, assignment) / static_cast<double>(n);
}

double emd_bruteforce(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size())
    throw InvalidInput("emd_bruteforce: size mismatch");
  require_nonempty(a, b, "emd_bruteforce");
  const int n = static_cast<int>(a.size());
  if (n > kBruteForceCap)
    throw CapacityError("emd_bruteforce: too many points to enumerate");

  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i)
      total += (a.points.row(i) - b.points.row(perm[i])).norm();
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

MetricReport evaluate_all(const PointCloud& a, const PointCloud& b) {
  MetricReport r;
  r.mse = a.size() == b.size() ? mse_paired(a, b)
                               : std::numeric_limits<double>::quiet_NaN();
  r.cd = chamfer(a, b);
  r.hd = hausdorff(a, b);
  r.emd = a.size() == b.size() && a.size() <= kEmdCap
              ? emd(a, b)
              : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace pcsc
