#include "pcsc/jscc.hpp"

#include <algorithm>
#include <numeric>

namespace pcsc {

using nn::Matrix;
using nn::Var;

void JsccConfig::validate() const {
  if (d <= 0 || condition_width <= 0)
    throw InvalidConfig("jscc: widths must be positive");
  if (rates.empty()) throw InvalidConfig("jscc: no rates configured");
  std::vector<int> sorted = rates;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw InvalidConfig("jscc: rates must be distinct");
  for (int r : rates)
    if (r <= 0 || r > d) throw InvalidConfig("jscc: rate out of range");
  if (snr_stages < 1 || rate_stages_enc < 1 || rate_stages_dec < 1 ||
      feature_stages < 1)
    throw InvalidConfig("jscc: stage counts must be at least 1");
}

namespace {

nn::Linear make_linear(nn::ParamStore& store, const std::string& prefix,
                       Matrix w, Matrix b) {
  nn::Linear lin;
  lin.w = store.create_value(prefix + "/w", std::move(w));
  lin.b = store.create_value(prefix + "/b", std::move(b));
  return lin;
}

Matrix truncated_identity(int rows, int cols, double gain) {
  Matrix m = Matrix::Zero(rows, cols);
  for (int i = 0; i < std::min(rows, cols); ++i) m(i, i) = gain;
  return m;
}

}  // namespace

JsccCodec::JsccCodec(nn::ParamStore& store, const JsccConfig& config, Rng& rng,
                     JsccInit init)
    : config_(config) {
  config_.validate();
  const int d = config_.d;
  const int L = config_.condition_width;

  snr_embed_ = nn::Linear(store, "jscc/snr_embed", 1, L, rng);
  rate_embed_enc_ = nn::Linear(store, "jscc/rate_embed_enc", 1, L, rng);
  rate_embed_dec_ = nn::Linear(store, "jscc/rate_embed_dec", 1, L, rng);

  auto make_stage = [&](const std::string& prefix, int cond_width) {
    Stage s;
    if (init == JsccInit::kNearIdentity) {
      s.gate.lin = make_linear(store, prefix + "/gate",
                               Matrix::Zero(cond_width, d), Matrix::Zero(1, d));
      s.fc = make_linear(store, prefix + "/fc", Matrix::Identity(d, d),
                         Matrix::Zero(1, d));
    } else {
      s.gate = nn::Gate2(store, prefix + "/gate", cond_width, d, rng);
      s.fc = nn::Linear(store, prefix + "/fc", d, d, rng);
    }
    return s;
  };

  if (init == JsccInit::kNearIdentity) {
    fc0_enc_ = make_linear(store, "jscc/enc/fc0", Matrix::Identity(d, d),
                           Matrix::Zero(1, d));
    final_fc_ = make_linear(store, "jscc/dec/final", Matrix::Zero(d, d),
                            Matrix::Zero(1, d));
  } else {
    fc0_enc_ = nn::Linear(store, "jscc/enc/fc0", d, d, rng);
    final_fc_ = nn::Linear(store, "jscc/dec/final", d, d, rng);
  }

  for (int i = 0; i < config_.snr_stages; ++i)
    sacs_.push_back(make_stage("jscc/enc/sac" + std::to_string(i), L));
  for (int i = 0; i < config_.rate_stages_enc; ++i)
    racs_enc_.push_back(make_stage("jscc/enc/rac" + std::to_string(i), L));
  for (int i = 0; i < config_.rate_stages_dec; ++i)
    racs_dec_.push_back(make_stage("jscc/dec/rac" + std::to_string(i), L));
  for (int i = 0; i < config_.feature_stages; ++i)
    facs_.push_back(make_stage("jscc/dec/fac" + std::to_string(i), d));

  for (int r : config_.rates) {
    std::string re = "jscc/enc/cmbc" + std::to_string(r);
    std::string rd = "jscc/dec/cmbc" + std::to_string(r);
    if (init == JsccInit::kNearIdentity) {
      // encoder halves the skip-doubled feature; decoder pads it back
      cmbc_enc_.push_back(
          make_linear(store, re, truncated_identity(d, r, 0.5),
                      Matrix::Zero(1, r)));
      cmbc_dec_.push_back(
          make_linear(store, rd, truncated_identity(r, d, 1.0),
                      Matrix::Zero(1, d)));
    } else {
      cmbc_enc_.push_back(nn::Linear(store, re, d, r, rng));
      cmbc_dec_.push_back(nn::Linear(store, rd, r, d, rng));
    }
  }
}

int JsccCodec::rate_index(int rate) const {
  for (size_t i = 0; i < config_.rates.size(); ++i)
    if (config_.rates[i] == rate) return static_cast<int>(i);
  throw UnsupportedRate("jscc: rate " + std::to_string(rate) +
                        " not in the configured rate set");
}

Var JsccCodec::embed_condition(double value, ConditionKind kind) const {
  if (!std::isfinite(value))
    throw InvalidInput("embed_condition: non-finite condition");
  Matrix scalar(1, 1);
  if (kind == ConditionKind::kRate) {
    scalar(0, 0) = value / static_cast<double>(config_.d);
    return nn::gelu(rate_embed_enc_.forward(Var::constant(scalar)));
  }
  scalar(0, 0) = value;
  return nn::gelu(snr_embed_.forward(Var::constant(scalar)));
}

Var JsccCodec::stage_apply(const Stage& stage, const Var& cond,
                           const Var& feature, double* deviation) const {
  Var w = stage.gate.forward(cond);
  if (deviation)
    *deviation += (w.value().array() - 1.0).abs().mean();
  return stage.fc.forward(nn::mul(w, feature));
}

Var JsccCodec::sac_forward(int stage, const Var& feature, double snr_db) const {
  return stage_apply(sacs_.at(stage), embed_condition(snr_db, ConditionKind::kSnr),
                     feature, nullptr);
}

Var JsccCodec::rac_forward(bool encoder_side, int stage, const Var& feature,
                           int rate) const {
  double norm = static_cast<double>(rate) / config_.d;
  Matrix scalar(1, 1);
  scalar(0, 0) = norm;
  const nn::Linear& embed = encoder_side ? rate_embed_enc_ : rate_embed_dec_;
  Var cond = nn::gelu(embed.forward(Var::constant(scalar)));
  const auto& stages = encoder_side ? racs_enc_ : racs_dec_;
  return stage_apply(stages.at(stage), cond, feature, nullptr);
}

Var JsccCodec::cmbc_encode(const Var& feature, const Var& skip,
                           int rate) const {
  return cmbc_enc_.at(rate_index(rate)).forward(nn::add(feature, skip));
}

Var JsccCodec::cmbc_decode(const Var& received) const {
  if (received.rows() != 1) throw InvalidInput("cmbc_decode: expects 1 x r");
  return cmbc_dec_.at(rate_index(static_cast<int>(received.cols())))
      .forward(received);
}

Var JsccCodec::fac_forward(int stage, const Var& feature) const {
  return stage_apply(facs_.at(stage), feature, feature, nullptr);
}

Var JsccCodec::encode(const Var& semantic, double snr_db, int rate) const {
  rate_index(rate);  // validate up front
  Var f = fc0_enc_.forward(semantic);
  Var snr_cond = embed_condition(snr_db, ConditionKind::kSnr);
  for (const auto& sac : sacs_) f = stage_apply(sac, snr_cond, f, nullptr);
  Matrix scalar(1, 1);
  scalar(0, 0) = static_cast<double>(rate) / config_.d;
  Var rate_cond = nn::gelu(rate_embed_enc_.forward(Var::constant(scalar)));
  for (const auto& rac : racs_enc_) f = stage_apply(rac, rate_cond, f, nullptr);
  return cmbc_encode(f, semantic, rate);
}

Var JsccCodec::decode(const Var& received) const {
  Var after_cmbc = cmbc_decode(received);
  int rate = static_cast<int>(received.cols());
  Matrix scalar(1, 1);
  scalar(0, 0) = static_cast<double>(rate) / config_.d;
  Var rate_cond = nn::gelu(rate_embed_dec_.forward(Var::constant(scalar)));
  Var f = after_cmbc;
  for (const auto& rac : racs_dec_) f = stage_apply(rac, rate_cond, f, nullptr);
  for (const auto& fac : facs_) f = stage_apply(fac, f, f, nullptr);
  return nn::add(final_fc_.forward(f), after_cmbc);
}

SymbolVector JsccCodec::encode_value(const Matrix& semantic, double snr_db,
                                     int rate) const {
  nn::GradMode off(false);
  Matrix row = encode(Var::constant(semantic), snr_db, rate).value();
  return row.row(0).transpose();
}

Matrix JsccCodec::decode_value(const SymbolVector& received) const {
  nn::GradMode off(false);
  return decode(Var::constant(received.transpose())).value();
}

StageDeviations JsccCodec::calibrate(const std::vector<Matrix>& semantics,
                                     const std::vector<double>& snrs,
                                     const std::vector<int>& rates) const {
  nn::GradMode off(false);
  StageDeviations dev;
  dev.sac.assign(sacs_.size(), 0.0);
  dev.rac_enc.assign(racs_enc_.size(), 0.0);
  dev.rac_dec.assign(racs_dec_.size(), 0.0);
  dev.fac.assign(facs_.size(), 0.0);
  const size_t n = semantics.size();
  if (n == 0 || snrs.size() != n || rates.size() != n)
    throw InvalidInput("calibrate: inconsistent calibration set");

  for (size_t s = 0; s < n; ++s) {
    Var fs = Var::constant(semantics[s]);
    Var f = fc0_enc_.forward(fs);
    Var snr_cond = embed_condition(snrs[s], ConditionKind::kSnr);
    for (size_t i = 0; i < sacs_.size(); ++i)
      f = stage_apply(sacs_[i], snr_cond, f, &dev.sac[i]);
    Matrix scalar(1, 1);
    scalar(0, 0) = static_cast<double>(rates[s]) / config_.d;
    Var rc_enc = nn::gelu(rate_embed_enc_.forward(Var::constant(scalar)));
    for (size_t i = 0; i < racs_enc_.size(); ++i)
      f = stage_apply(racs_enc_[i], rc_enc, f, &dev.rac_enc[i]);
    Var sent = cmbc_encode(f, fs, rates[s]);

    // noiseless link for calibration
    Var after_cmbc = cmbc_decode(sent);
    Var rc_dec = nn::gelu(rate_embed_dec_.forward(Var::constant(scalar)));
    Var g = after_cmbc;
    for (size_t i = 0; i < racs_dec_.size(); ++i)
      g = stage_apply(racs_dec_[i], rc_dec, g, &dev.rac_dec[i]);
    for (size_t i = 0; i < facs_.size(); ++i)
      g = stage_apply(facs_[i], g, g, &dev.fac[i]);
  }
  auto scale_all = [&](std::vector<double>& v) {
    for (double& x : v) x /= static_cast<double>(n);
  };
  scale_all(dev.sac);
  scale_all(dev.rac_enc);
  scale_all(dev.rac_dec);
  scale_all(dev.fac);
  return dev;
}

namespace {

std::vector<int> keep_top(const std::vector<double>& deviations, int target) {
  if (target > static_cast<int>(deviations.size()))
    throw InvalidInput("prune: target exceeds base stage count");
  std::vector<int> order(deviations.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return deviations[a] > deviations[b];
  });
  std::vector<int> keep(order.begin(), order.begin() + target);
  std::sort(keep.begin(), keep.end());  // preserve original stage order
  return keep;
}

void copy_linear(nn::Linear& dst, const nn::Linear& src) {
  dst.w.mutable_value() = src.w.value();
  dst.b.mutable_value() = src.b.value();
}

}  // namespace

JsccCodec prune_adaptation_stages(const JsccCodec& base,
                                  nn::ParamStore& pruned_store,
                                  const JsccConfig& target,
                                  const StageDeviations& deviations) {
  Rng scratch(0);
  JsccCodec pruned(pruned_store, target, scratch, JsccInit::kNearIdentity);

  copy_linear(pruned.snr_embed_, base.snr_embed_);
  copy_linear(pruned.rate_embed_enc_, base.rate_embed_enc_);
  copy_linear(pruned.rate_embed_dec_, base.rate_embed_dec_);
  copy_linear(pruned.fc0_enc_, base.fc0_enc_);
  copy_linear(pruned.final_fc_, base.final_fc_);
  for (size_t i = 0; i < base.cmbc_enc_.size(); ++i) {
    copy_linear(pruned.cmbc_enc_[i], base.cmbc_enc_[i]);
    copy_linear(pruned.cmbc_dec_[i], base.cmbc_dec_[i]);
  }

  auto copy_stages = [](std::vector<JsccCodec::Stage>& dst,
                        const std::vector<JsccCodec::Stage>& src,
                        const std::vector<int>& keep) {
    for (size_t j = 0; j < keep.size(); ++j) {
      copy_linear(dst[j].gate.lin, src[keep[j]].gate.lin);
      copy_linear(dst[j].fc, src[keep[j]].fc);
    }
  };
  copy_stages(pruned.sacs_, base.sacs_,
              keep_top(deviations.sac, target.snr_stages));
  copy_stages(pruned.racs_enc_, base.racs_enc_,
              keep_top(deviations.rac_enc, target.rate_stages_enc));
  copy_stages(pruned.racs_dec_, base.racs_dec_,
              keep_top(deviations.rac_dec, target.rate_stages_dec));
  copy_stages(pruned.facs_, base.facs_,
              keep_top(deviations.fac, target.feature_stages));
  return pruned;
}

}  // namespace pcsc
