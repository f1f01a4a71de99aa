#pragma once

#include "pcsc/geometry.hpp"

namespace pcsc {

struct MetricReport {
  double mse = 0.0;
  double cd = 0.0;
  double hd = 0.0;
  double emd = 0.0;
};

// (1/N) sum ||a_i - b_i||^2 over index-paired points.
double mse_paired(const PointCloud& a, const PointCloud& b);

// Squared-distance Chamfer: both directed average-nearest-neighbor terms.
double chamfer(const PointCloud& a, const PointCloud& b);

// Unsquared, symmetric Hausdorff distance.
double hausdorff(const PointCloud& a, const PointCloud& b);

// Exact optimal-assignment EMD in distance units, |a| = |b| <= 1024.
double emd(const PointCloud& a, const PointCloud& b);

// Oracle: exhaustive minimum over all permutations, |a| = |b| <= 8.
double emd_bruteforce(const PointCloud& a, const PointCloud& b);

MetricReport evaluate_all(const PointCloud& a, const PointCloud& b);

// Kuhn-Munkres on a square cost matrix; returns the minimal total cost and
// fills row_to_col with the optimal assignment.
double solve_assignment(const Matrix& cost, std::vector<int>& row_to_col);

}  // namespace pcsc
