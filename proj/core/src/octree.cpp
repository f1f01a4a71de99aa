#include "pcsc/octree.hpp"

#include <cstring>
#include <deque>
#include <fstream>

namespace pcsc {

namespace {

struct NodeRef {
  Vector3 corner;   // min corner of the cell
  double edge;
  int level;
  std::vector<int> point_ids;  // encode side only
};

int child_of(const Vector3& p, const Vector3& corner, double half) {
  int cx = p.x() >= corner.x() + half ? 1 : 0;
  int cy = p.y() >= corner.y() + half ? 1 : 0;
  int cz = p.z() >= corner.z() + half ? 1 : 0;
  return (cx << 2) | (cy << 1) | cz;
}

Vector3 child_corner(const Vector3& corner, double half, int child) {
  return corner + half * Vector3((child >> 2) & 1, (child >> 1) & 1, child & 1);
}

}  // namespace

OctreeBitstream octree_encode(const PointCloud& cloud, int depth) {
  if (depth < 1 || depth > 16) throw InvalidInput("octree: depth out of range");
  if (cloud.size() < 1) throw InvalidInput("octree: empty cloud");

  OctreeBitstream out;
  out.depth = depth;
  Vector3 lo = cloud.points.colwise().minCoeff();
  Vector3 hi = cloud.points.colwise().maxCoeff();
  out.box_min = lo;
  out.box_edge = std::max((hi - lo).maxCoeff(), 1e-12);
  // nudge so boundary points land inside the last voxel
  const double edge = out.box_edge * (1.0 + 1e-12);

  std::deque<NodeRef> queue;
  NodeRef root{out.box_min, edge, 0, {}};
  root.point_ids.resize(cloud.size());
  for (int i = 0; i < cloud.size(); ++i) root.point_ids[i] = i;
  queue.push_back(std::move(root));

  while (!queue.empty()) {
    NodeRef node = std::move(queue.front());
    queue.pop_front();
    if (node.level == depth) {
      ++out.leaf_count;
      continue;
    }
    const double half = node.edge / 2.0;
    std::array<std::vector<int>, 8> buckets;
    for (int id : node.point_ids)
      buckets[child_of(cloud.points.row(id).transpose(), node.corner, half)]
          .push_back(id);
    std::uint8_t occ = 0;
    for (int c = 0; c < 8; ++c)
      if (!buckets[c].empty()) occ |= static_cast<std::uint8_t>(1u << c);
    out.occupancy.push_back(occ);
    for (int c = 0; c < 8; ++c) {
      if (buckets[c].empty()) continue;
      queue.push_back(NodeRef{child_corner(node.corner, half, c), half,
                              node.level + 1, std::move(buckets[c])});
    }
  }
  return out;
}

std::optional<PointCloud> octree_decode(const OctreeBitstream& bits) {
  if (bits.depth < 1 || bits.depth > 16) return std::nullopt;
  if (bits.box_edge <= 0.0 || !std::isfinite(bits.box_edge)) return std::nullopt;

  struct Cell {
    Vector3 corner;
    double edge;
    int level;
  };
  std::deque<Cell> queue;
  queue.push_back({bits.box_min, bits.box_edge, 0});
  std::vector<Vector3> leaves;
  size_t cursor = 0;

  while (!queue.empty()) {
    Cell cell = queue.front();
    queue.pop_front();
    if (cell.level == bits.depth) {
      leaves.push_back(cell.corner + Vector3::Constant(cell.edge / 2.0));
      continue;
    }
    if (cursor >= bits.occupancy.size()) return std::nullopt;  // truncated
    std::uint8_t occ = bits.occupancy[cursor++];
    if (occ == 0) return std::nullopt;  // occupied node without children
    const double half = cell.edge / 2.0;
    for (int c = 0; c < 8; ++c)
      if (occ & (1u << c))
        queue.push_back({child_corner(cell.corner, half, c), half,
                         cell.level + 1});
  }
  if (cursor != bits.occupancy.size()) return std::nullopt;  // overlong
  if (leaves.empty()) return std::nullopt;

  PointCloud cloud;
  cloud.points.resize(static_cast<Eigen::Index>(leaves.size()), 3);
  for (size_t i = 0; i < leaves.size(); ++i)
    cloud.points.row(static_cast<Eigen::Index>(i)) = leaves[i].transpose();
  return cloud;
}

std::vector<std::uint8_t> octree_serialize(const OctreeBitstream& bits) {
  std::vector<std::uint8_t> out;
  out.reserve(45 + bits.occupancy.size());
  const char magic[4] = {'O', 'C', 'T', '1'};
  out.insert(out.end(), magic, magic + 4);
  out.push_back(static_cast<std::uint8_t>(bits.depth));
  auto push_double = [&](double v) {
    std::uint8_t buf[8];
    std::memcpy(buf, &v, 8);
    out.insert(out.end(), buf, buf + 8);
  };
  push_double(bits.box_min.x());
  push_double(bits.box_min.y());
  push_double(bits.box_min.z());
  push_double(bits.box_edge);
  std::uint64_t count = bits.occupancy.size();
  std::uint8_t cbuf[8];
  std::memcpy(cbuf, &count, 8);
  out.insert(out.end(), cbuf, cbuf + 8);
  out.insert(out.end(), bits.occupancy.begin(), bits.occupancy.end());
  return out;
}

std::optional<OctreeBitstream> octree_deserialize(
    const std::vector<std::uint8_t>& data) {
  if (data.size() < 45) return std::nullopt;
  if (std::memcmp(data.data(), "OCT1", 4) != 0) return std::nullopt;
  OctreeBitstream bits;
  bits.depth = data[4];
  auto read_double = [&](size_t at) {
    double v;
    std::memcpy(&v, data.data() + at, 8);
    return v;
  };
  bits.box_min = Vector3(read_double(5), read_double(13), read_double(21));
  bits.box_edge = read_double(29);
  std::uint64_t count;
  std::memcpy(&count, data.data() + 37, 8);
  if (data.size() != 45 + count) return std::nullopt;
  bits.occupancy.assign(data.begin() + 45, data.end());
  return bits;
}

void octree_save(const OctreeBitstream& bits, const std::string& path) {
  auto data = octree_serialize(bits);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("octree_save: cannot open " + path);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("octree_save: write failed");
}

double modulation_ber(Modulation, double snr_db) {
  // Q(sqrt(2 * snr)) = 0.5 * erfc(sqrt(snr)); identical per bit for BPSK
  // and Gray-coded QPSK.
  double snr = std::pow(10.0, snr_db / 10.0);
  return 0.5 * std::erfc(std::sqrt(snr));
}

double biawgn_capacity(double snr_db) {
  // C = 1 - E_n[ log2(1 + exp(-2 (1 + sigma n) / sigma^2)) ], x = +1,
  // sigma^2 = 1 / snr. Simpson quadrature over n in [-10, 10].
  double snr = std::pow(10.0, snr_db / 10.0);
  if (snr <= 0.0) return 0.0;
  double sigma = 1.0 / std::sqrt(snr);
  auto integrand = [&](double n) {
    double arg = -2.0 * (1.0 + sigma * n) / (sigma * sigma);
    // log1p(exp(arg)) without overflow
    double l = arg > 30.0 ? arg : std::log1p(std::exp(std::min(arg, 700.0)));
    return std::exp(-0.5 * n * n) / std::sqrt(2.0 * M_PI) * l / std::log(2.0);
  };
  const int steps = 4000;
  const double lo = -10.0, hi = 10.0, h = (hi - lo) / steps;
  double sum = integrand(lo) + integrand(hi);
  for (int i = 1; i < steps; ++i)
    sum += integrand(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  double expectation = sum * h / 3.0;
  return std::max(0.0, 1.0 - expectation);
}

DigitalLinkResult digital_link(const std::vector<std::uint8_t>& data,
                               const DigitalLinkConfig& config, Rng& rng) {
  DigitalLinkResult out;
  const double bits = static_cast<double>(data.size()) * 8.0;
  const double bits_per_symbol =
      config.modulation == Modulation::kQpsk ? 2.0 : 1.0;
  const double code_rate = config.coding == Coding::kIdealRateHalf ? 0.5 : 1.0;
  out.symbol_count = bits / bits_per_symbol / code_rate;

  if (config.coding == Coding::kIdealRateHalf) {
    // error free iff channel capacity supports the code rate
    if (biawgn_capacity(config.snr_db) >= 0.5) {
      out.bits = data;
    } else {
      out.failed = true;
    }
    return out;
  }

  double ber = modulation_ber(config.modulation, config.snr_db);
  out.bits = data;
  for (auto& byte : out.bits)
    for (int b = 0; b < 8; ++b)
      if (rng.uniform() < ber) byte ^= static_cast<std::uint8_t>(1u << b);
  return out;
}

BaselineResult baseline_transmit(const PointCloud& cloud, int depth,
                                 const DigitalLinkConfig& config, Rng& rng) {
  BaselineResult out;
  auto stream = octree_serialize(octree_encode(cloud, depth));
  auto link = digital_link(stream, config, rng);
  out.symbol_count = link.symbol_count;
  if (link.failed) {
    out.decode_failed = true;
    return out;
  }
  auto bits = octree_deserialize(link.bits);
  if (!bits) {
    out.decode_failed = true;
    return out;
  }
  auto decoded = octree_decode(*bits);
  if (!decoded) {
    out.decode_failed = true;
    return out;
  }
  out.cloud = decoded;
  MetricReport r;
  r.cd = chamfer(cloud, *decoded);
  r.hd = hausdorff(cloud, *decoded);
  r.mse = std::numeric_limits<double>::quiet_NaN();
  r.emd = cloud.size() == decoded->size() && cloud.size() <= 1024
              ? emd(cloud, *decoded)
              : std::numeric_limits<double>::quiet_NaN();
  out.metrics = r;
  return out;
}

}  // namespace pcsc
