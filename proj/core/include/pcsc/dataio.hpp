#pragma once

#include "pcsc/geometry.hpp"

namespace pcsc {

// ASCII PLY subset: "format ascii 1.0", one vertex element with float/double
// x y z properties, no other elements before vertex.
PointCloud load_ply(const std::string& path);
void save_ply(const PointCloud& cloud, const std::string& path);

enum class ShapeFamily { kBox, kCylinder, kTorus, kCone, kLshape };

struct SyntheticShapeSpec {
  ShapeFamily family = ShapeFamily::kBox;
  int n_points = 256;
  double size_a = 1.0;  // box edge / cylinder radius / torus major radius
  double size_b = 1.0;  // box height scale / cylinder height / torus minor
};

ShapeFamily shape_family_from_name(const std::string& name);
std::string shape_family_name(ShapeFamily family);

// Surface samples plus the family's analytic keypoints, appended as actual
// cloud points; the whole cloud is unit-sphere normalized.
std::pair<PointCloud, KeypointSet> gen_synthetic(const SyntheticShapeSpec& spec,
                                                 Rng& rng);

struct ManifestEntry {
  std::string id;
  std::string class_label;
  std::string cloud_path;  // relative to the manifest file
  std::vector<int> keypoint_indices;
};

struct DatasetManifest {
  int format_version = 1;
  std::string base_dir;
  std::vector<ManifestEntry> entries;
};

DatasetManifest load_manifest(const std::string& path);
void save_manifest(const DatasetManifest& manifest, const std::string& path);
// Checks paths resolve and keypoint indices are valid for their clouds.
void validate_manifest(const DatasetManifest& manifest);

PointCloud load_manifest_cloud(const DatasetManifest& manifest,
                               const ManifestEntry& entry);

}  // namespace pcsc
