#include "pcsc/channel.hpp"

namespace pcsc {

namespace {

double noise_std(double signal_power, double snr_db) {
  return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

}  // namespace

ChannelRealization draw_awgn(Eigen::Index len, double signal_power,
                             double snr_db, Rng& rng) {
  ChannelRealization r;
  r.snr_db = snr_db;
  r.gains = SymbolVector::Ones(len);
  r.noise = SymbolVector::Zero(len);
  if (signal_power > 0.0) {
    double sigma = noise_std(signal_power, snr_db);
    for (Eigen::Index i = 0; i < len; ++i) r.noise(i) = sigma * rng.gaussian();
  }
  return r;
}

ChannelRealization draw_rayleigh(Eigen::Index len, double signal_power,
                                 double snr_db, Rng& rng) {
  ChannelRealization r;
  r.snr_db = snr_db;
  r.gains.resize(len);
  const double scale = 1.0 / std::sqrt(2.0);
  for (Eigen::Index i = 0; i < len; ++i) r.gains(i) = rng.rayleigh(scale);
  r.noise = SymbolVector::Zero(len);
  if (signal_power > 0.0) {
    double sigma = noise_std(signal_power, snr_db);
    for (Eigen::Index i = 0; i < len; ++i) r.noise(i) = sigma * rng.gaussian();
  }
  return r;
}

SymbolVector transmit_awgn(const SymbolVector& s, double snr_db, Rng& rng) {
  if (s.size() == 0) throw InvalidInput("transmit_awgn: empty symbol vector");
  if (!s.allFinite()) throw InvalidInput("transmit_awgn: non-finite symbols");
  auto r = draw_awgn(s.size(), s.squaredNorm() / s.size(), snr_db, rng);
  return s + r.noise;
}

SymbolVector transmit_rayleigh(const SymbolVector& s, double snr_db,
                               Rng& rng) {
  if (s.size() == 0)
    throw InvalidInput("transmit_rayleigh: empty symbol vector");
  if (!s.allFinite())
    throw InvalidInput("transmit_rayleigh: non-finite symbols");
  auto r = draw_rayleigh(s.size(), s.squaredNorm() / s.size(), snr_db, rng);
  return r.gains.cwiseProduct(s) + r.noise;
}

ChannelKind channel_kind_from_name(const std::string& name) {
  if (name == "awgn") return ChannelKind::kAwgn;
  if (name == "rayleigh") return ChannelKind::kRayleigh;
  throw InvalidConfig("unknown channel kind: " + name);
}

std::string channel_kind_name(ChannelKind kind) {
  return kind == ChannelKind::kAwgn ? "awgn" : "rayleigh";
}

SymbolVector transmit(const SymbolVector& s, ChannelKind kind, double snr_db,
                      Rng& rng) {
  return kind == ChannelKind::kAwgn ? transmit_awgn(s, snr_db, rng)
                                    : transmit_rayleigh(s, snr_db, rng);
}

}  // namespace pcsc
