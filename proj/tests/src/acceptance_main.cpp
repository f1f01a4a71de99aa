// Acceptance harness: one pass/fail line per release criterion. Criteria
// 7, 8, and 11 train the toy model in-process and take the bulk of the
// runtime; run with --only N to exercise a single criterion.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "pcsc/channel.hpp"
#include "pcsc/config.hpp"
#include "pcsc/dataio.hpp"
#include "pcsc/diffusion.hpp"
#include "pcsc/encoder.hpp"
#include "pcsc/jscc.hpp"
#include "pcsc/metrics.hpp"
#include "pcsc/nn/checkpoint.hpp"
#include "pcsc/octree.hpp"
#include "pcsc/training.hpp"

using namespace pcsc;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
  void note(const std::string& what) {
    if (ok) detail = what;
  }
};

PointCloud random_cloud(Eigen::Index n, Rng& rng, double extent = 1.0) {
  PointCloud c;
  c.points.resize(n, 3);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) c.points(i, j) = rng.uniform(-extent, extent);
  return c;
}

nn::Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  nn::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

// Central-difference check of every leaf entry; returns the worst relative
// error seen. `build` rebuilds the scalar loss from current leaf values.
double max_grad_error(const std::vector<nn::Var>& leaves,
                      const std::function<nn::Var()>& build) {
  for (const auto& leaf : leaves) const_cast<nn::Var&>(leaf).zero_grad();
  nn::Var loss = build();
  loss.backward();
  std::vector<nn::Matrix> analytic;
  for (const auto& leaf : leaves)
    analytic.push_back(leaf.grad().size() != 0
                           ? leaf.grad()
                           : nn::Matrix::Zero(leaf.rows(), leaf.cols()));
  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    nn::Matrix& value = const_cast<nn::Var&>(leaves[li]).mutable_value();
    for (Eigen::Index i = 0; i < value.rows(); ++i)
      for (Eigen::Index j = 0; j < value.cols(); ++j) {
        const double orig = value(i, j);
        const double h = 5e-5 * std::max(1.0, std::abs(orig));
        value(i, j) = orig + h;
        const double up = build().scalar();
        value(i, j) = orig - h;
        const double down = build().scalar();
        value(i, j) = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double ana = analytic[li](i, j);
        worst = std::max(worst,
                         std::abs(numeric - ana) /
                             std::max({1.0, std::abs(numeric), std::abs(ana)}));
      }
  }
  return worst;
}

// ---- criterion 1: metric suite ---------------------------------------------

bool criterion_metrics(Check& c) {
  auto make = [](std::vector<std::array<double, 3>> pts) {
    PointCloud pc;
    pc.points.resize(static_cast<Eigen::Index>(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i)
      pc.points.row(static_cast<Eigen::Index>(i)) << pts[i][0], pts[i][1],
          pts[i][2];
    return pc;
  };
  auto a1 = make({{0, 0, 0}});
  auto b1 = make({{1, 0, 0}});
  c.require(std::abs(mse_paired(a1, b1) - 1.0) < 1e-12, "mse hand case");
  c.require(std::abs(chamfer(a1, b1) - 2.0) < 1e-12, "chamfer hand case");
  c.require(std::abs(hausdorff(a1, b1) - 1.0) < 1e-12, "hausdorff hand case");
  c.require(std::abs(emd(a1, b1) - 1.0) < 1e-12, "emd hand case");
  auto a2 = make({{0, 0, 0}, {0, 0, 0}});
  auto b2 = make({{1, 0, 0}, {0, 2, 0}});
  c.require(std::abs(mse_paired(a2, b2) - 2.5) < 1e-12, "mse hand case 2");
  c.require(std::abs(emd(a2, b2) - 1.5) < 1e-12, "emd hand case 2");

  Rng rng(101);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform_index(5));
    PointCloud a = random_cloud(n, rng);
    PointCloud b = random_cloud(n, rng);
    if (trial < 200)
      c.require(std::abs(emd(a, b) - emd_bruteforce(a, b)) < 1e-9,
                "emd oracle mismatch");
    c.require(std::abs(chamfer(a, b) - chamfer(b, a)) < 1e-12,
              "chamfer symmetry");
    c.require(std::abs(hausdorff(a, b) - hausdorff(b, a)) < 1e-12,
              "hausdorff symmetry");
    c.require(std::abs(emd(a, b) - emd(b, a)) < 1e-9, "emd symmetry");
    // permutation invariance
    PointCloud p = a;
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const Eigen::Index j =
          static_cast<Eigen::Index>(rng.uniform_index(i + 1));
      p.points.row(i).swap(p.points.row(j));
    }
    c.require(std::abs(chamfer(p, b) - chamfer(a, b)) < 1e-12,
              "chamfer permutation invariance");
    c.require(std::abs(emd(p, b) - emd(a, b)) < 1e-9,
              "emd permutation invariance");
  }
  return c.ok;
}

// ---- criterion 2: gradient correctness -------------------------------------

bool criterion_gradients(Check& c) {
  const double tol = 1e-5;
  Rng rng(202);

  auto check_block = [&](const std::string& name, nn::ParamStore& store,
                         const std::vector<nn::Var>& extra,
                         const std::function<nn::Var()>& build) {
    std::vector<nn::Var> leaves = extra;
    for (auto& [pname, var] : store.all()) leaves.push_back(var);
    const double err = max_grad_error(leaves, build);
    c.require(err <= tol, name + " grad error " + std::to_string(err));
  };

  {
    nn::ParamStore store;
    nn::Linear lin(store, "lin", 4, 3, rng);
    nn::Var x = nn::Var::leaf(random_matrix(2, 4, rng), true);
    check_block("linear", store, {x},
                [&] { return nn::sum_all(nn::mul(lin.forward(x), lin.forward(x))); });
  }
  {
    nn::ParamStore store;
    nn::Mlp mlp(store, "mlp", 4, 6, 3, rng);
    nn::Var x = nn::Var::leaf(random_matrix(2, 4, rng), true);
    check_block("mlp", store, {x},
                [&] { return nn::mse_to(mlp.forward(x), nn::Matrix::Zero(2, 3)); });
  }
  {
    nn::ParamStore store;
    nn::Gate2 gate(store, "gate", 4, 5, rng);
    nn::Var x = nn::Var::leaf(random_matrix(1, 4, rng), true);
    check_block("gate2", store, {x},
                [&] { return nn::sum_all(nn::mul(gate.forward(x), gate.forward(x))); });
  }
  {
    nn::ParamStore store;
    nn::TransformerConfig tc;
    tc.layers = 1;
    tc.heads = 2;
    tc.width = 8;
    nn::TransformerEncoder tf(store, "tf", tc, rng);
    nn::Var x = nn::Var::leaf(random_matrix(4, 8, rng), true);
    check_block("transformer block", store, {x},
                [&] { return nn::mse_to(tf.forward(x), nn::Matrix::Zero(4, 8)); });
  }
  {
    nn::ParamStore store;
    nn::Var x = nn::Var::leaf(random_matrix(5, 4, rng), true);
    check_block("max pool", store, {x}, [&] {
      return nn::sum_all(nn::mul(nn::pool_tokens(x, nn::PoolMode::kMax),
                                 nn::pool_tokens(x, nn::PoolMode::kMax)));
    });
    check_block("mean pool", store, {x}, [&] {
      return nn::sum_all(nn::mul(nn::pool_tokens(x, nn::PoolMode::kMean),
                                 nn::pool_tokens(x, nn::PoolMode::kMean)));
    });
  }
  {
    // SAC/RAC/CMBC/FAC all sit on the encode/decode path of a tiny codec
    JsccConfig cfg;
    cfg.d = 6;
    cfg.condition_width = 4;
    cfg.rates = {6, 4};
    cfg.snr_stages = cfg.rate_stages_enc = cfg.rate_stages_dec =
        cfg.feature_stages = 1;
    nn::ParamStore store;
    JsccCodec codec(store, cfg, rng, JsccInit::kRandom);
    nn::Var f = nn::Var::leaf(random_matrix(1, 6, rng), true);
    check_block("adaptation stages (sac/rac/cmbc/fac)", store, {f}, [&] {
      return nn::mse_to(codec.decode(codec.encode(f, 3.0, 4)),
                        nn::Matrix::Zero(1, 6));
    });
  }
  {
    nn::ParamStore store;
    CpcConfig cc;
    cc.widths = {8, 3};
    cc.condition_width = 11;
    CpcBackbone backbone(store, "cpc", cc, rng);
    auto schedule = linear_beta_schedule(40, 1e-4, 1e-2);
    nn::Var x = nn::Var::leaf(random_matrix(4, 3, rng), true);
    nn::Var f = nn::Var::leaf(random_matrix(1, 8, rng), true);
    check_block("conditioned diffusion block", store, {x, f}, [&] {
      return nn::mse_to(backbone.predict(x, f, 7, schedule),
                        nn::Matrix::Zero(4, 3));
    });
  }
  return c.ok;
}

// ---- criterion 3: forward-noising law --------------------------------------

bool criterion_forward_law(Check& c) {
  const int T = 200;
  auto schedule = linear_beta_schedule(T, 1e-4, 1e-2);
  nn::Matrix x0(1, 3);
  x0 << 2.0, -3.0, 1.5;
  Rng rng(303);
  for (int t : {1, T / 4, T / 2, T}) {
    const double abar = schedule.alpha_bar_at(t);
    const int draws = 100000;
    Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
    Eigen::RowVector3d m2 = Eigen::RowVector3d::Zero();
    for (int i = 0; i < draws; ++i) {
      nn::Matrix eps(1, 3);
      eps << rng.gaussian(), rng.gaussian(), rng.gaussian();
      nn::Matrix xt = q_sample(x0, t, eps, schedule);
      mean += xt.row(0);
      m2 += xt.row(0).cwiseProduct(xt.row(0));
    }
    mean /= draws;
    m2 /= draws;
    Eigen::RowVector3d var = m2 - mean.cwiseProduct(mean);
    for (int j = 0; j < 3; ++j) {
      const double want_mean = std::sqrt(abar) * x0(0, j);
      c.require(std::abs(mean(j) - want_mean) <=
                    0.01 * std::max(0.1, std::abs(want_mean)),
                "mean off at t=" + std::to_string(t));
      const double want_var = 1.0 - abar;
      c.require(std::abs(var(j) - want_var) <= 0.01 * std::max(0.02, want_var),
                "variance off at t=" + std::to_string(t));
    }
  }
  return c.ok;
}

// ---- criterion 4: sampler equivalence --------------------------------------

bool criterion_sampler_equivalence(Check& c) {
  Rng rng(404);
  nn::ParamStore store;
  CpcConfig cc;
  cc.widths = {16, 16, 3};
  cc.condition_width = 11;
  CpcBackbone backbone(store, "cpc", cc, rng);
  auto schedule = linear_beta_schedule(200, 1e-4, 1e-2);
  nn::Matrix f = random_matrix(1, 8, rng);
  nn::Matrix x_start = random_matrix(16, 3, rng);

  Rng r1(1), r2(1);
  auto ddim_full =
      ddim_sample_from(backbone, f, schedule, make_subsequence(200, 200),
                       DdimSigma::kDdpmMatched, x_start, r1);
  auto ddpm = ddpm_sample_from(backbone, f, schedule, x_start, r2);
  const double gap = (ddim_full - ddpm).cwiseAbs().maxCoeff();
  c.require(gap < 1e-6, "shared-noise gap " + std::to_string(gap));

  Rng r3(2), r4(2);
  auto tau = make_subsequence(200, 8);
  auto a = ddim_sample_from(backbone, f, schedule, tau,
                            DdimSigma::kDeterministic, x_start, r3);
  auto b = ddim_sample_from(backbone, f, schedule, tau,
                            DdimSigma::kDeterministic, x_start, r4);
  c.require((a - b).cwiseAbs().maxCoeff() == 0.0,
            "deterministic sampler not bit-stable");
  c.note("max |ddim - ddpm| = " + std::to_string(gap));
  return c.ok;
}

// ---- criterion 5: channel calibration --------------------------------------

bool criterion_channel(Check& c) {
  Rng rng(505);
  const Eigen::Index n = 1000000;
  SymbolVector s(n);
  for (Eigen::Index i = 0; i < n; ++i) s(i) = rng.gaussian();
  for (double target : {-5.0, 0.0, 10.0}) {
    Rng ch(606 + static_cast<std::uint64_t>(target + 50));
    SymbolVector r = transmit_awgn(s, target, ch);
    const double sp = s.squaredNorm() / n;
    const double np = (r - s).squaredNorm() / n;
    const double measured = 10.0 * std::log10(sp / np);
    c.require(std::abs(measured - target) <= 0.1,
              "awgn snr " + std::to_string(measured) + " vs " +
                  std::to_string(target));
  }
  Rng ray(707);
  auto real = draw_rayleigh(n, 1.0, 10.0, ray);
  const double eh2 = real.gains.squaredNorm() / n;
  c.require(std::abs(eh2 - 1.0) <= 0.01,
            "rayleigh E[h^2] = " + std::to_string(eh2));
  c.note("rayleigh E[h^2] = " + std::to_string(eh2));
  return c.ok;
}

// ---- criterion 6: structural contracts -------------------------------------

bool criterion_structural(Check& c) {
  Rng rng(808);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = 16 + static_cast<Eigen::Index>(rng.uniform_index(112));
    PointCloud cloud = random_cloud(n, rng);
    KeypointSet kps;
    const int k = static_cast<int>(rng.uniform_index(13));
    std::set<int> picked;
    while (static_cast<int>(picked.size()) < k)
      picked.insert(static_cast<int>(rng.uniform_index(n)));
    kps.indices.assign(picked.begin(), picked.end());
    const int g = std::max(k, 1) +
                  static_cast<int>(rng.uniform_index(
                      static_cast<std::uint64_t>(n - std::max(k, 1))));
    auto centers = kp_fps(cloud, kps, g);
    std::set<int> center_set(centers.begin(), centers.end());
    for (int idx : kps.indices)
      c.require(center_set.count(idx) == 1, "keypoint missing from centers");
  }

  // one encoder branch and one decoder branch per rate, selected purely by
  // length, over the full production rate grid
  JsccConfig cfg;  // defaults to the 10-level grid ending at 32, d = 1024
  nn::ParamStore store;
  Rng init(909);
  JsccCodec codec(store, cfg, init);
  nn::Matrix f = random_matrix(1, cfg.d, rng);
  std::set<int> lengths;
  for (int r : cfg.rates) {
    SymbolVector sent = codec.encode_value(f, 10.0, r);
    c.require(sent.size() == r, "encode length != rate");
    lengths.insert(static_cast<int>(sent.size()));
    nn::Matrix back = codec.decode_value(sent);
    c.require(back.rows() == 1 && back.cols() == cfg.d, "decode width");
  }
  c.require(lengths.size() == cfg.rates.size(), "rate lengths collide");
  for (int bad : {0, 12, 33, 1023, 1025}) {
    SymbolVector wrong = SymbolVector::Ones(bad);
    try {
      codec.decode_value(wrong);
      c.require(false, "off-grid length accepted");
    } catch (const UnsupportedRate&) {
    }
  }

  // the decoder consumes the received vector and nothing else
  static_assert(
      std::is_same_v<decltype(&JsccCodec::decode_value),
                     nn::Matrix (JsccCodec::*)(const SymbolVector&) const>);
  return c.ok;
}

// ---- toy training shared by criteria 7, 8, 11 ------------------------------

struct ToyModel {
  nn::ParamStore store;
  SemanticEncoder encoder;
  CpcBackbone backbone;
  DiffusionSchedule schedule;

  explicit ToyModel(const RunConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    encoder = SemanticEncoder(store, cfg.encoder, rng);
    backbone = CpcBackbone(store, "cpc", cfg.backbone, rng);
    schedule = linear_beta_schedule(cfg.diffusion_T, cfg.beta_start,
                                    cfg.beta_end);
  }
};

struct ToyRun {
  RunConfig cfg = toy_preset();
  std::vector<TrainSample> train, heldout;
  ToyModel model;
  ToyModel control;  // never trained
  nn::ParamStore codec_store;
  JsccCodec codec;
  bool trained = false;
  bool codec_trained = false;

  ToyRun() : model(cfg, 11), control(cfg, 77) {
    Rng data(31);
    for (const auto& family : cfg.datagen.families) {
      SyntheticShapeSpec spec;
      spec.family = shape_family_from_name(family);
      spec.n_points = cfg.datagen.n_points;
      spec.size_a = 1.0;
      spec.size_b = spec.family == ShapeFamily::kTorus ? 0.35 : 1.4;
      for (int i = 0; i < cfg.datagen.train_per_class; ++i) {
        auto [cloud, kps] = gen_synthetic(spec, data);
        train.push_back({std::move(cloud), std::move(kps)});
      }
      for (int i = 0; i < cfg.datagen.heldout_per_class; ++i) {
        auto [cloud, kps] = gen_synthetic(spec, data);
        heldout.push_back({std::move(cloud), std::move(kps)});
      }
    }
    Rng crng(13);
    codec = JsccCodec(codec_store, cfg.jscc, crng);
  }

  void ensure_trained() {
    if (trained) return;
    Rng rng(97);
    run_pretrain(model.store, model.encoder, model.backbone, model.schedule,
                 train, cfg.training, nullptr, 0, rng);
    run_finetune(model.store, model.encoder, model.backbone, model.schedule,
                 train, cfg.training, nullptr, 0, rng);
    trained = true;
  }

  void ensure_codec_trained() {
    if (codec_trained) return;
    ensure_trained();
    TrainingConfig tc = cfg.training;
    // The codec starts near the identity, so a short low-rate run adapts the
    // gates without destabilizing the per-rate branches.
    tc.jscc.epochs = 12;
    tc.jscc.lr = 1e-4;
    tc.jscc.warmup_epochs = 1;
    tc.snr_levels_db = {-10, -5, 0, 5, 10, 15, 20};
    Rng rng(113);
    run_train_jscc(codec_store, model.store, model.encoder, model.backbone,
                   model.schedule, codec, train, tc, nullptr, 0, rng);
    codec_trained = true;
  }

  double transmit_cd(const ToyModel& m, const TrainSample& sample,
                     double snr_db, int rate, int ddim_steps,
                     std::uint64_t seed) const {
    Rng mask(seed * 2654435761u + 1);
    nn::Matrix f = m.encoder.extract_value(sample.cloud, sample.keypoints, mask);
    SymbolVector sent = codec.encode_value(f, snr_db, rate);
    Rng ch(seed * 2654435761u + 2);
    SymbolVector received = transmit(sent, ChannelKind::kAwgn, snr_db, ch);
    nn::Matrix f_hat = codec.decode_value(received);
    Rng samp(seed * 2654435761u + 3);
    nn::Matrix x_hat = ddim_sample(
        m.backbone, f_hat, m.schedule,
        make_subsequence(m.schedule.T, ddim_steps), DdimSigma::kDeterministic,
        sample.cloud.size(), samp);
    PointCloud recon;
    recon.points = x_hat;
    return chamfer(recon, sample.cloud);
  }
};

// ---- criterion 7: end-to-end learning --------------------------------------

bool criterion_learning(ToyRun& toy, Check& c) {
  toy.ensure_trained();
  const int rate_max = toy.cfg.jscc.rates.front();
  double trained_sum = 0.0, control_sum = 0.0;
  int count = 0;
  for (const auto& sample : toy.heldout) {
    trained_sum += toy.transmit_cd(toy.model, sample, 300.0, rate_max, 50,
                                   1000 + count);
    control_sum += toy.transmit_cd(toy.control, sample, 300.0, rate_max, 50,
                                   1000 + count);
    ++count;
  }
  const double trained_cd = trained_sum / count;
  const double control_cd = control_sum / count;
  c.require(count >= 50, "not enough held-out clouds");
  c.require(trained_cd * 5.0 <= control_cd,
            "ratio " + std::to_string(control_cd / trained_cd));
  c.note("held-out CD " + std::to_string(trained_cd) + " vs untrained " +
         std::to_string(control_cd) + " (" +
         std::to_string(control_cd / std::max(trained_cd, 1e-12)) + "x)");
  return c.ok;
}

// ---- criterion 8: snr / rate trends ----------------------------------------

int count_increases(const std::vector<double>& seq) {
  int inversions = 0;
  for (std::size_t i = 1; i < seq.size(); ++i)
    if (seq[i] > seq[i - 1]) ++inversions;
  return inversions;
}

bool criterion_trends(ToyRun& toy, Check& c) {
  toy.ensure_codec_trained();
  const int per_cell = 100;
  const int ddim_steps = toy.cfg.training.ddim_steps_jscc;
  auto cell_mean = [&](double snr_db, int rate, std::uint64_t salt) {
    double sum = 0.0;
    for (int i = 0; i < per_cell; ++i) {
      const auto& sample = toy.heldout[i % toy.heldout.size()];
      sum += toy.transmit_cd(toy.model, sample, snr_db, rate, ddim_steps,
                             salt * 100000 + i);
    }
    return sum / per_cell;
  };

  const int rate_max = toy.cfg.jscc.rates.front();
  std::vector<double> by_snr;
  std::string snr_txt;
  int salt = 1;
  for (double snr : {-10.0, 0.0, 10.0, 20.0}) {
    by_snr.push_back(cell_mean(snr, rate_max, salt++));
    snr_txt += (snr_txt.empty() ? "" : " ") + std::to_string(by_snr.back());
  }
  // CD should fall (or hold) as the channel improves
  const int snr_inv = count_increases(by_snr);
  c.require(snr_inv <= 1, "snr trend inversions " + std::to_string(snr_inv) +
                              " [" + snr_txt + "]");

  std::vector<int> rate_grid(toy.cfg.jscc.rates.rbegin(),
                             toy.cfg.jscc.rates.rend());  // ascending
  std::vector<double> by_rate;
  std::string rate_txt;
  for (int rate : rate_grid) {
    by_rate.push_back(cell_mean(20.0, rate, salt++));
    rate_txt += (rate_txt.empty() ? "" : " ") + std::to_string(by_rate.back());
  }
  const int rate_inv = count_increases(by_rate);
  c.require(rate_inv <= 1, "rate trend inversions " + std::to_string(rate_inv) +
                               " [" + rate_txt + "]");
  c.note("CD by snr [" + snr_txt + "], by rate [" + rate_txt + "]");
  return c.ok;
}

// ---- criterion 9: cliff effect + octree fidelity ---------------------------

bool criterion_cliff(Check& c) {
  Rng rng(1212);
  PointCloud cloud = random_cloud(512, rng);
  auto payload = octree_serialize(octree_encode(cloud, 6));

  int transitions = 0;
  bool prev_ok = false, first = true;
  for (double snr : {-15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0}) {
    DigitalLinkConfig link{Modulation::kBpsk, Coding::kIdealRateHalf, snr};
    auto r = digital_link(payload, link, rng);
    if (!r.failed) c.require(r.bits == payload, "ideal code corrupted bits");
    if (!first && (r.failed == prev_ok)) ++transitions;
    prev_ok = !r.failed;
    first = false;
  }
  c.require(transitions == 1,
            "cliff transitions " + std::to_string(transitions));

  for (int trial = 0; trial < 3; ++trial) {
    PointCloud cl = random_cloud(1024, rng);
    auto bits = octree_encode(cl, 8);
    auto decoded = octree_decode(bits);
    c.require(decoded.has_value(), "depth-8 decode failed");
    if (!decoded) continue;
    const double voxel = bits.box_edge * (1.0 + 1e-12) / 256.0;
    const double bound = voxel * std::sqrt(3.0) / 2.0;
    const double hd = hausdorff(cl, *decoded);
    c.require(hd <= bound + 1e-12,
              "half-voxel bound " + std::to_string(hd) + " > " +
                  std::to_string(bound));
  }
  c.note("one transition across the snr grid; depth-8 bound holds");
  return c.ok;
}

// ---- criterion 10: symbol-count comparison ---------------------------------

bool criterion_symbol_count(Check& c) {
  Rng rng(1313);
  const double semantic_symbols = 1024.0;  // full-rate feature length
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (auto family : {ShapeFamily::kBox, ShapeFamily::kCylinder,
                      ShapeFamily::kTorus, ShapeFamily::kCone,
                      ShapeFamily::kLshape}) {
    SyntheticShapeSpec spec;
    spec.family = family;
    spec.n_points = 1024;
    spec.size_b = family == ShapeFamily::kTorus ? 0.35 : 1.4;
    auto [cloud, kps] = gen_synthetic(spec, rng);
    DigitalLinkConfig link{Modulation::kBpsk, Coding::kIdealRateHalf, 20.0};
    auto result = baseline_transmit(cloud, 8, link, rng);
    const double ratio = result.symbol_count / semantic_symbols;
    worst_ratio = std::min(worst_ratio, ratio);
    c.require(ratio >= 10.0, "ratio " + std::to_string(ratio) + " for " +
                                 shape_family_name(family));
  }
  c.note("baseline uses >= " + std::to_string(worst_ratio) +
         "x more symbols on every cloud");
  return c.ok;
}

// ---- criterion 11: few-step decoding ---------------------------------------

bool criterion_fast_decode(ToyRun& toy, Check& c) {
  toy.ensure_trained();
  const auto& m = toy.model;
  const int T = m.schedule.T;
  const int eval_count = 20;

  std::vector<nn::Matrix> features;
  for (int i = 0; i < eval_count; ++i) {
    Rng mask(4000 + i);
    features.push_back(m.encoder.extract_value(toy.heldout[i].cloud,
                                               toy.heldout[i].keypoints, mask));
  }

  double t0 = now_seconds();
  double ddpm_sum = 0.0;
  for (int i = 0; i < eval_count; ++i) {
    Rng samp(5000 + i);
    nn::Matrix x = ddpm_sample(m.backbone, features[i], m.schedule,
                               toy.heldout[i].cloud.size(), samp);
    PointCloud pc;
    pc.points = x;
    ddpm_sum += chamfer(pc, toy.heldout[i].cloud);
  }
  const double ddpm_time = now_seconds() - t0;

  t0 = now_seconds();
  double ddim_sum = 0.0;
  for (int i = 0; i < eval_count; ++i) {
    Rng samp(6000 + i);
    nn::Matrix x = ddim_sample(m.backbone, features[i], m.schedule,
                               make_subsequence(T, 8),
                               DdimSigma::kDeterministic,
                               toy.heldout[i].cloud.size(), samp);
    PointCloud pc;
    pc.points = x;
    ddim_sum += chamfer(pc, toy.heldout[i].cloud);
  }
  const double ddim_time = now_seconds() - t0;

  const double speedup = ddpm_time / std::max(ddim_time, 1e-9);
  const double ddpm_cd = ddpm_sum / eval_count;
  const double ddim_cd = ddim_sum / eval_count;
  c.require(speedup >= 10.0, "speedup " + std::to_string(speedup));
  c.require(ddim_cd <= 2.0 * ddpm_cd,
            "8-step CD " + std::to_string(ddim_cd) + " vs full " +
                std::to_string(ddpm_cd));

  // A/B: straightened-trajectory retraining against the frozen original at
  // 4 sampler steps. The comparison conditions on channel-degraded features
  // (low rate over AWGN), matching how the backbone is used at the receiver:
  // with clean toy features the conditional is so tight that the sampler is
  // already straight and no few-step headroom exists.
  namespace fs = std::filesystem;
  const std::string snapshot =
      (fs::temp_directory_path() / "pcsc_acceptance_model.ckpt").string();
  nn::save_checkpoint(m.store, snapshot);
  ToyModel retrained(toy.cfg, 11);
  nn::load_checkpoint(retrained.store, snapshot);
  std::remove(snapshot.c_str());

  const int ab_rate = toy.cfg.jscc.rates.back();
  const double ab_snr = 20.0;
  nn::ParamStore ab_codec_store;
  Rng ab_crng(13);
  JsccCodec ab_codec(ab_codec_store, toy.cfg.jscc, ab_crng);  // near identity
  auto degraded_feature = [&](const TrainSample& sample, std::uint64_t seed) {
    Rng mask(seed * 2654435761u + 1);
    nn::Matrix f = m.encoder.extract_value(sample.cloud, sample.keypoints, mask);
    SymbolVector sent = ab_codec.encode_value(f, ab_snr, ab_rate);
    Rng ch(seed * 2654435761u + 2);
    return ab_codec.decode_value(transmit(sent, ChannelKind::kAwgn, ab_snr, ch));
  };

  Rng gen(7000);
  std::vector<RdTriplet> triplets;
  auto gen_tau = make_subsequence(T, toy.cfg.training.rd_sample_steps);
  {
    nn::GradMode off(false);
    for (int fi = 0; fi < 96; ++fi) {
      const TrainSample& sample = toy.train[gen.uniform_index(toy.train.size())];
      nn::Matrix f = degraded_feature(sample, gen.next_u64());
      for (int ni = 0; ni < 2; ++ni) {
        RdTriplet t;
        t.F_s = f;
        t.x_T = nn::Matrix(sample.cloud.size(), 3);
        for (Eigen::Index r = 0; r < t.x_T.rows(); ++r)
          for (int col = 0; col < 3; ++col) t.x_T(r, col) = gen.gaussian();
        Rng samp(gen.next_u64());
        t.x_0 = ddim_sample_from(m.backbone, t.F_s, m.schedule, gen_tau,
                                 DdimSigma::kDeterministic, t.x_T, samp);
        triplets.push_back(std::move(t));
      }
    }
  }
  TrainingConfig rd_cfg = toy.cfg.training;
  rd_cfg.rd.epochs = 10;
  rd_cfg.rd.lr = 1e-4;
  rd_cfg.rd.weight_decay = 0.0;
  rd_cfg.rd.warmup_epochs = 0;
  Rng rdr(7100);
  run_rd_retrain(retrained.store, retrained.backbone, retrained.schedule,
                 triplets, rd_cfg, nullptr, 0, rdr);

  auto mean_cd_4step = [&](const ToyModel& which) {
    double sum = 0.0;
    int idx = 0;
    for (const auto& sample : toy.heldout) {
      nn::Matrix f = degraded_feature(sample, 8000 + idx);
      Rng samp(9000 + idx);
      nn::Matrix x = ddim_sample(which.backbone, f, which.schedule,
                                 make_subsequence(T, 4),
                                 DdimSigma::kDeterministic,
                                 sample.cloud.size(), samp);
      PointCloud pc;
      pc.points = x;
      sum += chamfer(pc, sample.cloud);
      ++idx;
    }
    return sum / static_cast<double>(toy.heldout.size());
  };
  const double plain4 = mean_cd_4step(toy.model);
  const double straight4 = mean_cd_4step(retrained);
  c.require(toy.heldout.size() >= 50, "not enough clouds for the A/B");
  c.require(straight4 < plain4, "4-step CD " + std::to_string(straight4) +
                                    " not below " + std::to_string(plain4));
  c.note("speedup " + std::to_string(speedup) + "x, 8-step CD " +
         std::to_string(ddim_cd) + " vs full " + std::to_string(ddpm_cd) +
         "; 4-step retrained " + std::to_string(straight4) + " vs " +
         std::to_string(plain4));
  return c.ok;
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
      only = std::atoi(argv[i + 1]);

  struct Entry {
    int number;
    const char* title;
    double budget_seconds;  // 0 = no budget asserted
    std::function<bool(Check&)> run;
  };

  ToyRun* toy = nullptr;
  auto get_toy = [&]() -> ToyRun& {
    if (!toy) toy = new ToyRun();
    return *toy;
  };

  std::vector<Entry> entries = {
      {1, "metric suite matches hand cases and the assignment oracle", 10.0,
       [](Check& c) { return criterion_metrics(c); }},
      {2, "finite-difference gradients for every differentiable block", 60.0,
       [](Check& c) { return criterion_gradients(c); }},
      {3, "forward-noising moments match the closed form", 30.0,
       [](Check& c) { return criterion_forward_law(c); }},
      {4, "matched-variance accelerated sampler tracks ancestral sampling",
       60.0, [](Check& c) { return criterion_sampler_equivalence(c); }},
      {5, "channel calibration (awgn snr, rayleigh gain power)", 30.0,
       [](Check& c) { return criterion_channel(c); }},
      {6, "keypoint-seeded sampling and rate-branch contracts", 0.0,
       [](Check& c) { return criterion_structural(c); }},
      {7, "toy end-to-end learning beats the untrained control 5x", 0.0,
       [&](Check& c) { return criterion_learning(get_toy(), c); }},
      {8, "reconstruction quality trends with snr and rate", 0.0,
       [&](Check& c) { return criterion_trends(get_toy(), c); }},
      {9, "digital baseline cliff and octree fidelity bound", 0.0,
       [](Check& c) { return criterion_cliff(c); }},
      {10, "semantic link needs 10x fewer channel symbols", 0.0,
       [](Check& c) { return criterion_symbol_count(c); }},
      {11, "few-step decoding: speedup, quality, trajectory retraining", 0.0,
       [&](Check& c) { return criterion_fast_decode(get_toy(), c); }},
  };

  int failures = 0;
  for (auto& entry : entries) {
    if (only != 0 && entry.number != only) continue;
    Check check;
    const double start = now_seconds();
    bool ok = false;
    try {
      ok = entry.run(check);
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = now_seconds() - start;
    if (entry.budget_seconds > 0.0 && elapsed > entry.budget_seconds) {
      ok = false;
      check.ok = false;
      check.detail = "over time budget: " + std::to_string(elapsed) + "s > " +
                     std::to_string(entry.budget_seconds) + "s";
    }
    ok = ok && check.ok;
    std::printf("[%s] criterion %d: %s (%.1fs)%s%s\n", ok ? "PASS" : "FAIL",
                entry.number, entry.title, elapsed,
                check.detail.empty() ? "" : " -- ", check.detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  delete toy;
  return failures == 0 ? 0 : 1;
}
