#pragma once

#include "pcsc/channel.hpp"
#include "pcsc/nn/layers.hpp"

namespace pcsc {

struct JsccConfig {
  int d = 1024;
  int condition_width = 128;  // L
  std::vector<int> rates = {1024, 896, 768, 640, 512, 384, 256, 128, 64, 32};
  std::vector<double> snr_levels_db = {-15, -10, -5, 0, 5, 10, 15, 20};
  int snr_stages = 3;
  int rate_stages_enc = 3;
  int rate_stages_dec = 3;
  int feature_stages = 3;

  void validate() const;
};

enum class JsccInit {
  // Identity stage FCs, unit gates, scaled-truncation CMBC branches and a
  // zero final FC: a noiseless full-rate round trip starts as the identity.
  kNearIdentity,
  kRandom,
};

enum class ConditionKind { kSnr, kRate };

// Per-stage gate deviations gathered during calibration, used for pruning.
struct StageDeviations {
  std::vector<double> sac, rac_enc, rac_dec, fac;
};

// Asymmetric channel-adaptive codec. The encoder is conditioned on SNR and
// rate; the decoder infers the rate from the received length and needs no
// channel feedback at all.
class JsccCodec {
 public:
  JsccCodec() = default;
  JsccCodec(nn::ParamStore& store, const JsccConfig& config, Rng& rng,
            JsccInit init = JsccInit::kNearIdentity);

  const JsccConfig& config() const { return config_; }

  // scalar -> 1 x L; rate values are normalized by d before embedding
  nn::Var embed_condition(double value, ConditionKind kind) const;

  nn::Var sac_forward(int stage, const nn::Var& feature, double snr_db) const;
  nn::Var rac_forward(bool encoder_side, int stage, const nn::Var& feature,
                      int rate) const;
  nn::Var cmbc_encode(const nn::Var& feature, const nn::Var& skip,
                      int rate) const;
  nn::Var fac_forward(int stage, const nn::Var& feature) const;
  nn::Var cmbc_decode(const nn::Var& received) const;

  nn::Var encode(const nn::Var& semantic, double snr_db, int rate) const;
  nn::Var decode(const nn::Var& received) const;

  SymbolVector encode_value(const nn::Matrix& semantic, double snr_db,
                            int rate) const;
  nn::Matrix decode_value(const SymbolVector& received) const;

  // Mean |W - 1| per adaptation stage over a calibration set of
  // (semantic, snr, rate) triples run through a noiseless link.
  StageDeviations calibrate(const std::vector<nn::Matrix>& semantics,
                            const std::vector<double>& snrs,
                            const std::vector<int>& rates) const;

 private:
  struct Stage {
    nn::Gate2 gate;
    nn::Linear fc;
  };
  int rate_index(int rate) const;
  nn::Var stage_apply(const Stage& stage, const nn::Var& cond,
                      const nn::Var& feature, double* deviation) const;

  JsccConfig config_;
  nn::Linear snr_embed_, rate_embed_enc_, rate_embed_dec_;
  nn::Linear fc0_enc_;
  std::vector<Stage> sacs_, racs_enc_, racs_dec_, facs_;
  std::vector<nn::Linear> cmbc_enc_, cmbc_dec_;
  nn::Linear final_fc_;

  friend JsccCodec prune_adaptation_stages(const JsccCodec& base,
                                           nn::ParamStore& pruned_store,
                                           const JsccConfig& target,
                                           const StageDeviations& deviations);
};

// Keeps, per family, the stages whose gate modulation deviates most from
// the identity, preserving their relative order, and rebuilds the codec in
// pruned_store with the target stage counts.
JsccCodec prune_adaptation_stages(const JsccCodec& base,
                                  nn::ParamStore& pruned_store,
                                  const JsccConfig& target,
                                  const StageDeviations& deviations);

}  // namespace pcsc
