#pragma once

#include <Eigen/Dense>

#include "pcsc/common.hpp"

namespace pcsc {

using SymbolVector = Eigen::VectorXd;

// Noise power is referenced to the empirical power of the transmitted
// vector: sigma_n^2 = mean(s_i^2) / 10^(snr_db / 10).
SymbolVector transmit_awgn(const SymbolVector& s, double snr_db, Rng& rng);

// Real-valued Rayleigh gains with E[h^2] = 1 (scale 1/sqrt(2)), then AWGN.
SymbolVector transmit_rayleigh(const SymbolVector& s, double snr_db, Rng& rng);

enum class ChannelKind { kAwgn, kRayleigh };

ChannelKind channel_kind_from_name(const std::string& name);
std::string channel_kind_name(ChannelKind kind);

SymbolVector transmit(const SymbolVector& s, ChannelKind kind, double snr_db,
                      Rng& rng);

struct ChannelRealization {
  SymbolVector gains;
  SymbolVector noise;
  double snr_db = 0.0;
};

// Draws the realization separately so callers can replay h and n.
ChannelRealization draw_awgn(Eigen::Index len, double signal_power,
                             double snr_db, Rng& rng);
ChannelRealization draw_rayleigh(Eigen::Index len, double signal_power,
                                 double snr_db, Rng& rng);

}  // namespace pcsc
