#include "pcsc/dataio.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pcsc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

PointCloud load_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_ply: cannot open " + path);

  int line_no = 0;
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) parse_fail(path, line_no, "unexpected EOF");
    ++line_no;
  };

  next_line();
  if (line != "ply") parse_fail(path, line_no, "missing ply magic");
  next_line();
  if (line != "format ascii 1.0")
    parse_fail(path, line_no, "only 'format ascii 1.0' is supported");

  long vertex_count = -1;
  std::vector<std::string> properties;
  bool in_vertex_element = false;
  for (;;) {
    next_line();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment") continue;
    if (tok == "element") {
      std::string name;
      long count;
      if (!(ls >> name >> count))
        parse_fail(path, line_no, "malformed element line");
      if (name == "vertex") {
        if (vertex_count >= 0)
          parse_fail(path, line_no, "duplicate vertex element");
        vertex_count = count;
        in_vertex_element = true;
      } else {
        if (vertex_count < 0)
          parse_fail(path, line_no, "vertex must be the first element");
        in_vertex_element = false;
      }
      continue;
    }
    if (tok == "property") {
      if (!in_vertex_element) continue;
      std::string type, name;
      if (!(ls >> type >> name))
        parse_fail(path, line_no, "malformed property line");
      if (type != "float" && type != "double")
        parse_fail(path, line_no, "vertex property must be float or double");
      properties.push_back(name);
      continue;
    }
    if (tok == "end_header") break;
    parse_fail(path, line_no, "unrecognized header line: " + line);
  }

  if (vertex_count < 0) parse_fail(path, line_no, "no vertex element");
  if (properties.size() < 3 || properties[0] != "x" || properties[1] != "y" ||
      properties[2] != "z")
    parse_fail(path, line_no, "vertex needs x y z as first properties");

  PointCloud cloud;
  cloud.id = fs::path(path).stem().string();
  cloud.points.resize(vertex_count, 3);
  for (long i = 0; i < vertex_count; ++i) {
    next_line();
    std::istringstream ls(line);
    double v;
    for (size_t p = 0; p < properties.size(); ++p) {
      if (!(ls >> v)) parse_fail(path, line_no, "malformed vertex row");
      if (p < 3) cloud.points(i, static_cast<Eigen::Index>(p)) = v;
    }
  }
  return cloud;
}

void save_ply(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_ply: cannot open " + path);
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "end_header\n";
  char buf[96];
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", cloud.points(i, 0),
                  cloud.points(i, 1), cloud.points(i, 2));
    out << buf;
  }
  if (!out) throw IoError("save_ply: write failed for " + path);
}

ShapeFamily shape_family_from_name(const std::string& name) {
  if (name == "box") return ShapeFamily::kBox;
  if (name == "cylinder") return ShapeFamily::kCylinder;
  if (name == "torus") return ShapeFamily::kTorus;
  if (name == "cone") return ShapeFamily::kCone;
  if (name == "lshape") return ShapeFamily::kLshape;
  throw InvalidConfig("unknown shape family: " + name);
}

std::string shape_family_name(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kBox: return "box";
    case ShapeFamily::kCylinder: return "cylinder";
    case ShapeFamily::kTorus: return "torus";
    case ShapeFamily::kCone: return "cone";
    case ShapeFamily::kLshape: return "lshape";
  }
  throw InvalidConfig("unknown shape family");
}

namespace {

using Samples = std::vector<Vector3>;

Samples sample_box(double a, double b, int n, Rng& rng) {
  // edges (a, a, b), centered at origin
  double ax = a, ay = a, az = b;
  double areas[3] = {ay * az, ax * az, ax * ay};  // x-, y-, z-normal faces
  double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  Samples pts;
  for (int i = 0; i < n; ++i) {
    double pick = rng.uniform(0.0, total);
    int axis = 0;
    double acc = 0.0;
    for (; axis < 3; ++axis) {
      acc += 2.0 * areas[axis];
      if (pick < acc) break;
    }
    axis = std::min(axis, 2);
    double sign = rng.uniform() < 0.5 ? -0.5 : 0.5;
    Vector3 p(rng.uniform(-0.5, 0.5) * ax, rng.uniform(-0.5, 0.5) * ay,
              rng.uniform(-0.5, 0.5) * az);
    double extents[3] = {ax, ay, az};
    p(axis) = sign * extents[axis];
    pts.push_back(p);
  }
  return pts;
}

Samples box_corners(double a, double b) {
  Samples c;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        c.push_back(Vector3(0.5 * a * sx, 0.5 * a * sy, 0.5 * b * sz));
  return c;
}

Samples sample_cylinder(double radius, double height, int n, Rng& rng) {
  double lateral = 2.0 * M_PI * radius * height;
  double caps = 2.0 * M_PI * radius * radius;
  Samples pts;
  for (int i = 0; i < n; ++i) {
    if (rng.uniform(0.0, lateral + caps) < lateral) {
      double phi = rng.uniform(0.0, 2.0 * M_PI);
      pts.push_back(Vector3(radius * std::cos(phi), radius * std::sin(phi),
                            rng.uniform(-0.5, 0.5) * height));
    } else {
      double r = radius * std::sqrt(rng.uniform());
      double phi = rng.uniform(0.0, 2.0 * M_PI);
      double z = (rng.uniform() < 0.5 ? -0.5 : 0.5) * height;
      pts.push_back(Vector3(r * std::cos(phi), r * std::sin(phi), z));
    }
  }
  return pts;
}

Samples cylinder_keypoints(double radius, double height) {
  Samples c;
  for (double z : {-0.5 * height, 0.5 * height})
    for (int q = 0; q < 4; ++q) {
      double phi = q * M_PI / 2.0;
      c.push_back(Vector3(radius * std::cos(phi), radius * std::sin(phi), z));
    }
  return c;
}

Samples sample_torus(double major, double minor, int n, Rng& rng) {
  Samples pts;
  while (static_cast<int>(pts.size()) < n) {
    double u = rng.uniform(0.0, 2.0 * M_PI);
    double v = rng.uniform(0.0, 2.0 * M_PI);
    // area element weight (major + minor cos v)
    if (rng.uniform() * (major + minor) > major + minor * std::cos(v)) continue;
    double w = major + minor * std::cos(v);
    pts.push_back(Vector3(w * std::cos(u), w * std::sin(u),
                          minor * std::sin(v)));
  }
  return pts;
}

Samples torus_keypoints(double major, double minor) {
  Samples c;
  for (int q = 0; q < 4; ++q) {
    double u = q * M_PI / 2.0;
    c.push_back(Vector3((major + minor) * std::cos(u),
                        (major + minor) * std::sin(u), 0.0));
    c.push_back(Vector3((major - minor) * std::cos(u),
                        (major - minor) * std::sin(u), 0.0));
  }
  return c;
}

Samples sample_cone(double radius, double height, int n, Rng& rng) {
  double slant = std::sqrt(radius * radius + height * height);
  double lateral = M_PI * radius * slant;
  double base = M_PI * radius * radius;
  Samples pts;
  for (int i = 0; i < n; ++i) {
    if (rng.uniform(0.0, lateral + base) < lateral) {
      // uniform on lateral surface: radius fraction ~ sqrt(u)
      double f = std::sqrt(rng.uniform());
      double phi = rng.uniform(0.0, 2.0 * M_PI);
      pts.push_back(Vector3(radius * f * std::cos(phi),
                            radius * f * std::sin(phi),
                            height * (0.5 - f)));
    } else {
      double r = radius * std::sqrt(rng.uniform());
      double phi = rng.uniform(0.0, 2.0 * M_PI);
      pts.push_back(Vector3(r * std::cos(phi), r * std::sin(phi),
                            -0.5 * height));
    }
  }
  return pts;
}

Samples cone_keypoints(double radius, double height) {
  Samples c;
  c.push_back(Vector3(0.0, 0.0, 0.5 * height));  // apex
  for (int q = 0; q < 4; ++q) {
    double phi = q * M_PI / 2.0;
    c.push_back(Vector3(radius * std::cos(phi), radius * std::sin(phi),
                        -0.5 * height));
  }
  return c;
}

// L polygon (outline in xy), extruded along z by `height`. The polygon is
// the union of [0,a]x[0,a/2] and [0,a/2]x[0,a], shifted to be centered.
Samples lshape_vertices_2d(double a) {
  return {Vector3(0, 0, 0),       Vector3(a, 0, 0),
          Vector3(a, a / 2, 0),   Vector3(a / 2, a / 2, 0),
          Vector3(a / 2, a, 0),   Vector3(0, a, 0)};
}

Samples sample_lshape(double a, double height, int n, Rng& rng) {
  auto verts = lshape_vertices_2d(a);
  const int v_count = static_cast<int>(verts.size());
  double perimeter = 0.0;
  std::vector<double> edge_len(v_count);
  for (int i = 0; i < v_count; ++i) {
    edge_len[i] = (verts[(i + 1) % v_count] - verts[i]).norm();
    perimeter += edge_len[i];
  }
  double caps_area = 2.0 * (a * a / 2.0 + a / 2.0 * a / 2.0);
  double side_area = perimeter * height;
  Samples pts;
  for (int i = 0; i < n; ++i) {
    Vector3 p;
    if (rng.uniform(0.0, caps_area + side_area) < side_area) {
      double pick = rng.uniform(0.0, perimeter);
      int e = 0;
      while (e < v_count - 1 && pick > edge_len[e]) pick -= edge_len[e++];
      Vector3 dir = (verts[(e + 1) % v_count] - verts[e]).normalized();
      p = verts[e] + dir * pick;
      p.z() = rng.uniform(-0.5, 0.5) * height;
    } else {
      // caps: two disjoint rectangles
      double r1 = a * a / 2.0, r2 = a / 2.0 * a / 2.0;
      if (rng.uniform(0.0, r1 + r2) < r1)
        p = Vector3(rng.uniform(0.0, a), rng.uniform(0.0, a / 2.0), 0.0);
      else
        p = Vector3(rng.uniform(0.0, a / 2.0), rng.uniform(a / 2.0, a), 0.0);
      p.z() = (rng.uniform() < 0.5 ? -0.5 : 0.5) * height;
    }
    p.x() -= a / 2.0;
    p.y() -= a / 2.0;
    pts.push_back(p);
  }
  return pts;
}

Samples lshape_keypoints(double a, double height) {
  Samples c;
  for (const auto& v : lshape_vertices_2d(a))
    for (double z : {-0.5 * height, 0.5 * height})
      c.push_back(Vector3(v.x() - a / 2.0, v.y() - a / 2.0, z));
  return c;
}

}  // namespace

std::pair<PointCloud, KeypointSet> gen_synthetic(const SyntheticShapeSpec& spec,
                                                 Rng& rng) {
  if (spec.size_a <= 0.0 || spec.size_b <= 0.0)
    throw InvalidConfig("gen_synthetic: sizes must be positive");
  Samples keypoints;
  Samples surface;
  switch (spec.family) {
    case ShapeFamily::kBox:
      keypoints = box_corners(spec.size_a, spec.size_b);
      surface = sample_box(spec.size_a, spec.size_b,
                           spec.n_points - static_cast<int>(keypoints.size()),
                           rng);
      break;
    case ShapeFamily::kCylinder:
      keypoints = cylinder_keypoints(spec.size_a, spec.size_b);
      surface = sample_cylinder(
          spec.size_a, spec.size_b,
          spec.n_points - static_cast<int>(keypoints.size()), rng);
      break;
    case ShapeFamily::kTorus:
      keypoints = torus_keypoints(spec.size_a, spec.size_b);
      surface = sample_torus(spec.size_a, spec.size_b,
                             spec.n_points - static_cast<int>(keypoints.size()),
                             rng);
      break;
    case ShapeFamily::kCone:
      keypoints = cone_keypoints(spec.size_a, spec.size_b);
      surface = sample_cone(spec.size_a, spec.size_b,
                            spec.n_points - static_cast<int>(keypoints.size()),
                            rng);
      break;
    case ShapeFamily::kLshape:
      keypoints = lshape_keypoints(spec.size_a, spec.size_b);
      surface = sample_lshape(
          spec.size_a, spec.size_b,
          spec.n_points - static_cast<int>(keypoints.size()), rng);
      break;
  }
  if (spec.n_points < 8 * static_cast<int>(keypoints.size()))
    throw InvalidConfig("gen_synthetic: n_points too small for keypoint count");

  PointCloud cloud;
  cloud.class_label = shape_family_name(spec.family);
  cloud.points.resize(spec.n_points, 3);
  Eigen::Index row = 0;
  for (const auto& p : surface) cloud.points.row(row++) = p.transpose();
  KeypointSet kps;
  for (const auto& p : keypoints) {
    kps.indices.push_back(static_cast<int>(row));
    cloud.points.row(row++) = p.transpose();
  }
  return {normalize_unit_sphere(cloud).cloud, kps};
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_manifest: cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("load_manifest: " + std::string(e.what()));
  }
  DatasetManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  for (auto& [key, value] : j.items()) {
    if (key == "format_version") {
      m.format_version = value.get<int>();
    } else if (key == "entries") {
      for (auto& e : value) {
        ManifestEntry entry;
        for (auto& [ekey, evalue] : e.items()) {
          if (ekey == "id") entry.id = evalue.get<std::string>();
          else if (ekey == "class_label")
            entry.class_label = evalue.get<std::string>();
          else if (ekey == "cloud_path")
            entry.cloud_path = evalue.get<std::string>();
          else if (ekey == "keypoint_indices")
            entry.keypoint_indices = evalue.get<std::vector<int>>();
          else
            throw ParseError("load_manifest: unknown entry key '" + ekey +
                             "' in " + path);
        }
        m.entries.push_back(std::move(entry));
      }
    } else {
      throw ParseError("load_manifest: unknown key '" + key + "' in " + path);
    }
  }
  if (m.format_version != 1)
    throw ParseError("load_manifest: unsupported format_version");
  return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
  json j;
  j["format_version"] = manifest.format_version;
  j["entries"] = json::array();
  for (const auto& e : manifest.entries) {
    j["entries"].push_back({{"id", e.id},
                            {"class_label", e.class_label},
                            {"cloud_path", e.cloud_path},
                            {"keypoint_indices", e.keypoint_indices}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("save_manifest: cannot open " + path);
  out << j.dump(2) << "\n";
}

PointCloud load_manifest_cloud(const DatasetManifest& manifest,
                               const ManifestEntry& entry) {
  PointCloud cloud = load_ply((fs::path(manifest.base_dir) / entry.cloud_path).string());
  cloud.id = entry.id;
  cloud.class_label = entry.class_label;
  return cloud;
}

void validate_manifest(const DatasetManifest& manifest) {
  for (const auto& e : manifest.entries) {
    fs::path p = fs::path(manifest.base_dir) / e.cloud_path;
    if (!fs::exists(p))
      throw InvalidInput("manifest entry '" + e.id + "': missing cloud file " +
                         p.string());
    PointCloud cloud = load_ply(p.string());
    for (int k : e.keypoint_indices)
      if (k < 0 || k >= cloud.size())
        throw InvalidInput("manifest entry '" + e.id +
                           "': keypoint index out of range");
  }
}

}  // namespace pcsc
