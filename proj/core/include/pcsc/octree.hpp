#pragma once

#include <cstdint>
#include <optional>

#include "pcsc/metrics.hpp"

namespace pcsc {

// Breadth-first occupancy-byte serialization of a cubic octree. Child bit
// index is (x_bit << 2) | (y_bit << 1) | z_bit.
struct OctreeBitstream {
  int depth = 0;
  Vector3 box_min = Vector3::Zero();
  double box_edge = 1.0;
  std::vector<std::uint8_t> occupancy;
  int leaf_count = 0;
};

OctreeBitstream octree_encode(const PointCloud& cloud, int depth);

// One point per occupied leaf-voxel center. Returns nullopt when the
// stream is structurally inconsistent (truncated, overlong, or an occupied
// node with an all-zero occupancy byte).
std::optional<PointCloud> octree_decode(const OctreeBitstream& bits);

// Serialized form: magic "OCT1", u8 depth, box as 4 doubles, u64 byte
// count, occupancy bytes.
std::vector<std::uint8_t> octree_serialize(const OctreeBitstream& bits);
std::optional<OctreeBitstream> octree_deserialize(
    const std::vector<std::uint8_t>& data);

void octree_save(const OctreeBitstream& bits, const std::string& path);

enum class Modulation { kBpsk, kQpsk };
enum class Coding { kNone, kIdealRateHalf };

struct DigitalLinkConfig {
  Modulation modulation = Modulation::kBpsk;
  Coding coding = Coding::kNone;
  double snr_db = 0.0;
};

// Analytic per-bit error probability; Gray-coded QPSK matches BPSK per bit.
double modulation_ber(Modulation modulation, double snr_db);

// Shannon capacity of the binary-input AWGN channel at this symbol SNR,
// in bits per channel use.
double biawgn_capacity(double snr_db);

struct DigitalLinkResult {
  bool failed = false;  // ideal-code cliff outcome
  std::vector<std::uint8_t> bits;
  double symbol_count = 0.0;
};

DigitalLinkResult digital_link(const std::vector<std::uint8_t>& data,
                               const DigitalLinkConfig& config, Rng& rng);

struct BaselineResult {
  bool decode_failed = false;
  std::optional<PointCloud> cloud;
  double symbol_count = 0.0;
  std::optional<MetricReport> metrics;
};

BaselineResult baseline_transmit(const PointCloud& cloud, int depth,
                                 const DigitalLinkConfig& config, Rng& rng);

}  // namespace pcsc
