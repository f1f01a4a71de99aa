#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pcsc/common.hpp"

namespace pcsc {

using Matrix = Eigen::MatrixXd;
using Vector3 = Eigen::Vector3d;

struct PointCloud {
  Matrix points;  // N x 3
  std::string id;
  std::string class_label;

  Eigen::Index size() const { return points.rows(); }
};

struct KeypointSet {
  std::vector<int> indices;  // into the owning cloud
};

// G local patches of S points each, in relative coordinates about their
// centers. original_order records the center ordering used everywhere
// downstream; random_mask only toggles flags and never reorders.
struct PatchSet {
  Matrix centers;                    // G x 3
  std::vector<int> center_indices;   // G indices into the source cloud
  std::vector<Matrix> patches;       // G of S x 3, centered
  std::vector<int> original_order;   // permutation of 0..G-1
  std::vector<bool> visible_flags;   // true = visible
  int group_count() const { return static_cast<int>(patches.size()); }
  int visible_count() const;
  int masked_count() const { return group_count() - visible_count(); }
};

struct NormalizeResult {
  PointCloud cloud;
  Vector3 centroid;
  double scale;
};

NormalizeResult normalize_unit_sphere(const PointCloud& cloud);

std::vector<int> fps(const PointCloud& cloud, int count,
                     const std::vector<int>& seeds);

// Farthest point sampling seeded with the keypoints, so the returned
// center set always contains every keypoint index.
std::vector<int> kp_fps(const PointCloud& cloud, const KeypointSet& keypoints,
                        int group_count);

PatchSet knn_group(const PointCloud& cloud, const std::vector<int>& centers,
                   int patch_size);

PatchSet random_mask(const PatchSet& patches, double mask_fraction, Rng& rng);

PointCloud augment(const PointCloud& cloud, Rng& rng,
                   double scale_lo, double scale_hi,
                   double translate_lo, double translate_hi);

}  // namespace pcsc
