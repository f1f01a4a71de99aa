#include "pcsc/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace pcsc {

int PatchSet::visible_count() const {
  return static_cast<int>(
      std::count(visible_flags.begin(), visible_flags.end(), true));
}

NormalizeResult normalize_unit_sphere(const PointCloud& cloud) {
  if (cloud.size() < 1) throw InvalidInput("normalize_unit_sphere: empty cloud");
  if (!cloud.points.allFinite())
    throw InvalidInput("normalize_unit_sphere: non-finite coordinate");

  Vector3 centroid = cloud.points.colwise().mean();
  Matrix centered = cloud.points.rowwise() - centroid.transpose();
  double max_norm = centered.rowwise().norm().maxCoeff();
  double scale = max_norm > 0.0 ? max_norm : 1.0;

  NormalizeResult out;
  out.cloud = cloud;
  out.cloud.points = centered / scale;
  out.centroid = centroid;
  out.scale = scale;
  return out;
}

std::vector<int> fps(const PointCloud& cloud, int count,
                     const std::vector<int>& seeds) {
  const int n = static_cast<int>(cloud.size());
  if (count > n) throw InvalidInput("fps: count exceeds cloud size");
  if (static_cast<int>(seeds.size()) > count)
    throw InvalidInput("fps: more seeds than requested points");

  std::vector<int> selected;
  std::vector<char> taken(n, 0);
  std::vector<double> min_dist2(n, std::numeric_limits<double>::infinity());

  auto add = [&](int idx) {
    selected.push_back(idx);
    taken[idx] = 1;
    for (int j = 0; j < n; ++j) {
      if (taken[j]) continue;
      double d2 = (cloud.points.row(j) - cloud.points.row(idx)).squaredNorm();
      if (d2 < min_dist2[j]) min_dist2[j] = d2;
    }
  };

  if (seeds.empty()) {
    if (count > 0) add(0);
  } else {
    for (int s : seeds) {
      if (s < 0 || s >= n) throw InvalidInput("fps: seed index out of range");
      if (taken[s]) throw InvalidInput("fps: duplicate seed index");
      add(s);
    }
  }

  while (static_cast<int>(selected.size()) < count) {
    int best = -1;
    double best_d2 = -1.0;
    for (int j = 0; j < n; ++j) {
      if (taken[j]) continue;
      if (min_dist2[j] > best_d2) {  // ties keep the lowest index
        best_d2 = min_dist2[j];
        best = j;
      }
    }
    add(best);
  }
  return selected;
}

std::vector<int> kp_fps(const PointCloud& cloud, const KeypointSet& keypoints,
                        int group_count) {
  const int k = static_cast<int>(keypoints.indices.size());
  if (k > group_count)
    throw InvalidInput("kp_fps: more keypoints than requested centers");
  if (k == 0) return fps(cloud, group_count, {0});
  return fps(cloud, group_count, keypoints.indices);
}

PatchSet knn_group(const PointCloud& cloud, const std::vector<int>& centers,
                   int patch_size) {
  const int n = static_cast<int>(cloud.size());
  if (patch_size > n) throw InvalidInput("knn_group: patch size exceeds cloud");

  const int g = static_cast<int>(centers.size());
  PatchSet out;
  out.centers.resize(g, 3);
  out.center_indices = centers;
  out.patches.reserve(g);
  out.original_order.resize(g);
  std::iota(out.original_order.begin(), out.original_order.end(), 0);
  out.visible_flags.assign(g, true);

  std::vector<std::pair<double, int>> dist(n);
  for (int i = 0; i < g; ++i) {
    int ci = centers[i];
    if (ci < 0 || ci >= n) throw InvalidInput("knn_group: center out of range");
    out.centers.row(i) = cloud.points.row(ci);
    for (int j = 0; j < n; ++j)
      dist[j] = {(cloud.points.row(j) - cloud.points.row(ci)).squaredNorm(), j};
    std::partial_sort(dist.begin(), dist.begin() + patch_size, dist.end());
    Matrix patch(patch_size, 3);
    for (int s = 0; s < patch_size; ++s)
      patch.row(s) = cloud.points.row(dist[s].second) - cloud.points.row(ci);
    out.patches.push_back(std::move(patch));
  }
  return out;
}

PatchSet random_mask(const PatchSet& patches, double mask_fraction, Rng& rng) {
  if (mask_fraction < 0.0 || mask_fraction >= 1.0)
    throw InvalidInput("random_mask: mask fraction must lie in [0,1)");
  const int g = patches.group_count();
  const int m = static_cast<int>(std::floor(g * mask_fraction));

  std::vector<int> order(g);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates prefix: first m entries become the masked set
  for (int i = 0; i < m; ++i) {
    int j = i + static_cast<int>(rng.uniform_index(g - i));
    std::swap(order[i], order[j]);
  }

  PatchSet out = patches;
  out.visible_flags.assign(g, true);
  for (int i = 0; i < m; ++i) out.visible_flags[order[i]] = false;
  return out;
}

PointCloud augment(const PointCloud& cloud, Rng& rng,
                   double scale_lo, double scale_hi,
                   double translate_lo, double translate_hi) {
  if (scale_lo <= 0.0 || scale_hi < scale_lo)
    throw InvalidInput("augment: scale range must be positive");
  double s = rng.uniform(scale_lo, scale_hi);
  Vector3 t(rng.uniform(translate_lo, translate_hi),
            rng.uniform(translate_lo, translate_hi),
            rng.uniform(translate_lo, translate_hi));
  PointCloud out = cloud;
  out.points = (cloud.points * s).rowwise() + t.transpose();
  return out;
}

}  // namespace pcsc
