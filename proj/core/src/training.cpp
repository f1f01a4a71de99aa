#include "pcsc/training.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>

#include "pcsc/nn/checkpoint.hpp"

namespace pcsc {

void TrainingConfig::validate() const {
  for (const PhaseHyper* p : {&pretrain, &finetune, &jscc, &rd}) {
    if (p->epochs < 1 || p->batch_size < 1)
      throw InvalidConfig("training: epochs and batch_size must be positive");
    if (p->lr <= 0.0 || p->weight_decay < 0.0)
      throw InvalidConfig("training: bad lr or weight decay");
  }
  if (segment_count < 1) throw InvalidConfig("training: segment_count < 1");
  if (ddim_steps_jscc < 1 || rd_sample_steps < 1)
    throw InvalidConfig("training: sampler step counts must be positive");
  if (snr_levels_db.empty() || rates.empty())
    throw InvalidConfig("training: empty SNR or rate grid");
}

std::vector<int> segmented_timesteps(int T, int segments, Rng& rng) {
  if (segments < 1 || T < segments)
    throw InvalidInput("segmented_timesteps: need T >= segments >= 1");
  std::vector<int> out(segments);
  for (int k = 1; k <= segments; ++k) {
    // segment k covers ((k-1)T/seg, kT/seg]
    const long lo = static_cast<long>(k - 1) * T / segments;
    const long hi = static_cast<long>(k) * T / segments;
    out[k - 1] = static_cast<int>(
        lo + 1 + static_cast<long>(rng.uniform_index(
                     static_cast<std::size_t>(hi - lo))));
  }
  return out;
}

namespace {

nn::Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

double finish_step(const nn::Var& loss, double grad_scale, const char* phase) {
  const double value = loss.scalar();
  if (!std::isfinite(value))
    throw TrainingError(std::string(phase) + ": non-finite loss");
  nn::scale(loss, grad_scale).backward();
  return value;
}

nn::Var denoising_loss(const SemanticEncoder& encoder,
                       const CpcBackbone& backbone,
                       const DiffusionSchedule& schedule,
                       const TrainSample& sample, int segment_count,
                       bool with_cd, bool cd_on_noise, Rng& rng) {
  nn::Var f_s = encoder.extract(sample.cloud, sample.keypoints, rng);
  const auto steps = segmented_timesteps(schedule.T, segment_count, rng);
  nn::Var total;
  for (int t : steps) {
    nn::Matrix eps =
        gaussian_matrix(sample.cloud.size(), 3, rng);
    nn::Matrix x_t = q_sample(sample.cloud.points, t, eps, schedule);
    nn::Var eps_hat =
        backbone.predict(nn::Var::constant(x_t), f_s, t, schedule);
    nn::Var term = nn::mse_to(eps_hat, eps);
    if (with_cd) {
      if (cd_on_noise) {
        term = nn::add(term, nn::chamfer_to(eps_hat, eps));
      } else {
        // single-step clean estimate x0_hat = (x_t - sqrt(1-abar) eps_hat)
        //                                      / sqrt(abar)
        const double abar = schedule.alpha_bar_at(t);
        nn::Var x0_hat = nn::scale(
            nn::sub(nn::Var::constant(x_t),
                    nn::scale(eps_hat, std::sqrt(1.0 - abar))),
            1.0 / std::sqrt(abar));
        term = nn::add(term, nn::chamfer_to(x0_hat, sample.cloud.points));
      }
    }
    total = total.defined() ? nn::add(total, term) : term;
  }
  return nn::scale(total, 1.0 / segment_count);
}

}  // namespace

double pretrain_step(const SemanticEncoder& encoder, const CpcBackbone& backbone,
                     const DiffusionSchedule& schedule, const TrainSample& sample,
                     int segment_count, Rng& rng, double grad_scale) {
  nn::Var loss = denoising_loss(encoder, backbone, schedule, sample,
                                segment_count, false, false, rng);
  return finish_step(loss, grad_scale, "pretrain");
}

double finetune_step(const SemanticEncoder& encoder, const CpcBackbone& backbone,
                     const DiffusionSchedule& schedule, const TrainSample& sample,
                     int segment_count, bool cd_on_noise, Rng& rng,
                     double grad_scale) {
  nn::Var loss = denoising_loss(encoder, backbone, schedule, sample,
                                segment_count, true, cd_on_noise, rng);
  return finish_step(loss, grad_scale, "finetune");
}

double train_jscc_step(const SemanticEncoder& encoder,
                       const CpcBackbone& backbone,
                       const DiffusionSchedule& schedule, const JsccCodec& codec,
                       const TrainSample& sample, double snr_db, int rate,
                       ChannelKind channel, int ddim_steps, Rng& rng,
                       double grad_scale) {
  nn::Var f_s = encoder.extract(sample.cloud, sample.keypoints, rng);
  nn::Var sent = codec.encode(f_s, snr_db, rate);

  const double power = sent.value().squaredNorm() / sent.value().size();
  ChannelRealization real =
      channel == ChannelKind::kAwgn
          ? draw_awgn(sent.cols(), power, snr_db, rng)
          : draw_rayleigh(sent.cols(), power, snr_db, rng);
  nn::Var received = nn::add(
      nn::mul(sent, nn::Var::constant(real.gains.transpose())),
      nn::Var::constant(real.noise.transpose()));

  nn::Var f_hat = codec.decode(received);
  nn::Var feature_term = nn::mse_to(f_hat, f_s.value());

  nn::Matrix x_start = gaussian_matrix(sample.cloud.size(), 3, rng);
  auto tau = make_subsequence(schedule.T, ddim_steps);
  nn::Var x_hat = ddim_sample_var(backbone, f_hat, schedule, tau, x_start);
  nn::Var cd_term = nn::chamfer_to(x_hat, sample.cloud.points);

  return finish_step(nn::add(feature_term, cd_term), grad_scale, "train_jscc");
}

std::vector<RdTriplet> rd_generate(const SemanticEncoder& encoder,
                                   const CpcBackbone& backbone,
                                   const DiffusionSchedule& schedule,
                                   const std::vector<TrainSample>& dataset,
                                   int count, int sample_steps, Rng& rng) {
  if (dataset.empty()) throw InvalidInput("rd_generate: empty dataset");
  nn::GradMode off(false);
  auto tau = make_subsequence(schedule.T, sample_steps);
  std::vector<RdTriplet> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const TrainSample& s = dataset[rng.uniform_index(dataset.size())];
    RdTriplet t;
    t.F_s = encoder.extract_value(s.cloud, s.keypoints, rng);
    t.x_T = gaussian_matrix(s.cloud.size(), 3, rng);
    t.x_0 = ddim_sample_from(backbone, t.F_s, schedule, tau,
                             DdimSigma::kDeterministic, t.x_T, rng);
    out.push_back(std::move(t));
  }
  return out;
}

double rd_retrain_step(const CpcBackbone& backbone,
                       const DiffusionSchedule& schedule,
                       const RdTriplet& triplet, int segment_count, Rng& rng,
                       double grad_scale) {
  const double abar_T = schedule.alpha_bar_at(schedule.T);
  nn::Matrix eps_pair = (triplet.x_T - std::sqrt(abar_T) * triplet.x_0) /
                        std::sqrt(1.0 - abar_T);
  nn::Var f_s = nn::Var::constant(triplet.F_s);
  nn::Var total;
  for (int t : segmented_timesteps(schedule.T, segment_count, rng)) {
    nn::Matrix x_t = q_sample(triplet.x_0, t, eps_pair, schedule);
    nn::Var eps_hat =
        backbone.predict(nn::Var::constant(x_t), f_s, t, schedule);
    // Regress in sample space rather than noise space: an eps-space error at
    // large t is amplified by sqrt(1-abar)/sqrt(abar) when the sampler
    // reconstructs the clean estimate, so a uniform eps MSE underweights
    // exactly the timesteps few-step sampling depends on. The sample-space
    // MSE is the same regression with that amplification folded in.
    const double abar = schedule.alpha_bar_at(t);
    nn::Var x0_hat =
        nn::scale(nn::sub(nn::Var::constant(x_t),
                          nn::scale(eps_hat, std::sqrt(1.0 - abar))),
                  1.0 / std::sqrt(abar));
    nn::Var term = nn::mse_to(x0_hat, triplet.x_0);
    total = total.defined() ? nn::add(total, term) : term;
  }
  return finish_step(nn::scale(total, 1.0 / segment_count), grad_scale,
                     "rd_retrain");
}

void save_rd_triplets(const std::vector<RdTriplet>& triplets,
                      const std::string& path) {
  std::map<std::string, nn::Matrix> tensors;
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const std::string idx = std::to_string(i);
    tensors["xT/" + idx] = triplets[i].x_T;
    tensors["x0/" + idx] = triplets[i].x_0;
    tensors["Fs/" + idx] = triplets[i].F_s;
  }
  nn::save_tensors(tensors, path);
}

std::vector<RdTriplet> load_rd_triplets(const std::string& path) {
  auto tensors = nn::load_tensors(path);
  std::vector<RdTriplet> out;
  for (std::size_t i = 0;; ++i) {
    const std::string idx = std::to_string(i);
    auto xt = tensors.find("xT/" + idx);
    auto x0 = tensors.find("x0/" + idx);
    auto fs = tensors.find("Fs/" + idx);
    if (xt == tensors.end() || x0 == tensors.end() || fs == tensors.end())
      break;
    out.push_back(RdTriplet{xt->second, x0->second, fs->second});
  }
  if (out.size() * 3 != tensors.size())
    throw ParseError("load_rd_triplets: stray tensors in " + path);
  return out;
}

TrainingLog::TrainingLog(const std::string& path) : path_(path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path_) || fs::file_size(path_) == 0) {
    std::ofstream out(path_);
    if (!out) throw IoError("training log: cannot open " + path_);
    out << "phase,epoch,step,loss,lr,snr_db,rate,seed\n";
  }
}

void TrainingLog::append(const std::string& phase, int epoch, int step,
                         double loss, double lr, double snr_db, int rate,
                         std::uint64_t seed) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("training log: cannot open " + path_);
  char buf[192];
  std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.9g,%.9g,%.9g,%d,%llu\n",
                phase.c_str(), epoch, step, loss, lr, snr_db, rate,
                static_cast<unsigned long long>(seed));
  out << buf;
}

namespace {

// Shared epoch/batch skeleton: shuffles, schedules lr, logs per batch.
void run_epochs(nn::ParamStore& store, std::size_t dataset_size,
                const PhaseHyper& phase, const std::string& phase_name,
                TrainingLog* log, std::uint64_t seed, Rng& rng,
                const EpochCallback& cb,
                const std::function<double(std::size_t, double, double*,
                                           int*)>& sample_loss) {
  if (dataset_size == 0)
    throw InvalidInput(phase_name + ": empty dataset");
  nn::AdamW opt(store, phase.lr, phase.weight_decay);
  const std::int64_t steps_per_epoch =
      (dataset_size + phase.batch_size - 1) / phase.batch_size;
  const std::int64_t total_steps = steps_per_epoch * phase.epochs;
  const std::int64_t warmup_steps =
      std::min(steps_per_epoch * phase.warmup_epochs, total_steps / 2);

  std::vector<std::size_t> order(dataset_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::int64_t global_step = 0;
  for (int epoch = 0; epoch < phase.epochs; ++epoch) {
    for (std::size_t i = dataset_size; i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    double epoch_loss = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < dataset_size;
         start += phase.batch_size, ++batch_index) {
      const std::size_t count =
          std::min<std::size_t>(phase.batch_size, dataset_size - start);
      store.zero_grads();
      double snr_db = std::numeric_limits<double>::quiet_NaN();
      int rate = 0;
      double batch_loss = 0.0;
      for (std::size_t j = 0; j < count; ++j)
        batch_loss +=
            sample_loss(order[start + j], 1.0 / count, &snr_db, &rate);
      batch_loss /= count;
      ++global_step;
      opt.set_lr(nn::cosine_warmup_lr(global_step, total_steps, warmup_steps,
                                      phase.lr));
      opt.step();
      epoch_loss += batch_loss;
      if (log)
        log->append(phase_name, epoch, batch_index, batch_loss, opt.lr(),
                    snr_db, rate, seed);
    }
    epoch_loss /= steps_per_epoch;
    if (cb.on_epoch && !cb.on_epoch(epoch, epoch_loss)) return;
  }
}

}  // namespace

void run_pretrain(nn::ParamStore& store, const SemanticEncoder& encoder,
                  const CpcBackbone& backbone, const DiffusionSchedule& schedule,
                  const std::vector<TrainSample>& dataset,
                  const TrainingConfig& config, TrainingLog* log,
                  std::uint64_t seed, Rng& rng, const EpochCallback& cb) {
  run_epochs(store, dataset.size(), config.pretrain, "pretrain", log, seed, rng,
             cb, [&](std::size_t i, double gs, double*, int*) {
               return pretrain_step(encoder, backbone, schedule, dataset[i],
                                    config.segment_count, rng, gs);
             });
}

void run_finetune(nn::ParamStore& store, const SemanticEncoder& encoder,
                  const CpcBackbone& backbone, const DiffusionSchedule& schedule,
                  const std::vector<TrainSample>& dataset,
                  const TrainingConfig& config, TrainingLog* log,
                  std::uint64_t seed, Rng& rng, const EpochCallback& cb) {
  run_epochs(store, dataset.size(), config.finetune, "finetune", log, seed, rng,
             cb, [&](std::size_t i, double gs, double*, int*) {
               return finetune_step(encoder, backbone, schedule, dataset[i],
                                    config.segment_count,
                                    config.finetune_cd_on_noise, rng, gs);
             });
}

void run_train_jscc(nn::ParamStore& codec_store, nn::ParamStore& model_store,
                    const SemanticEncoder& encoder, const CpcBackbone& backbone,
                    const DiffusionSchedule& schedule, const JsccCodec& codec,
                    const std::vector<TrainSample>& dataset,
                    const TrainingConfig& config, TrainingLog* log,
                    std::uint64_t seed, Rng& rng, const EpochCallback& cb) {
  model_store.set_requires_grad(false);
  // one SNR and one rate per batch, drawn when the batch's first sample runs
  double batch_snr = 0.0;
  int batch_rate = 0;
  try {
    run_epochs(codec_store, dataset.size(), config.jscc, "train_jscc", log,
               seed, rng, cb, [&](std::size_t i, double gs, double* snr_out,
                                  int* rate_out) {
                 if (std::isnan(*snr_out)) {
                   batch_snr = config.snr_levels_db[rng.uniform_index(
                       config.snr_levels_db.size())];
                   batch_rate =
                       config.rates[rng.uniform_index(config.rates.size())];
                   *snr_out = batch_snr;
                   *rate_out = batch_rate;
                 }
                 return train_jscc_step(encoder, backbone, schedule, codec,
                                        dataset[i], batch_snr, batch_rate,
                                        config.channel, config.ddim_steps_jscc,
                                        rng, gs);
               });
  } catch (...) {
    model_store.set_requires_grad(true);
    throw;
  }
  model_store.set_requires_grad(true);
}

void run_rd_retrain(nn::ParamStore& backbone_store, const CpcBackbone& backbone,
                    const DiffusionSchedule& schedule,
                    const std::vector<RdTriplet>& triplets,
                    const TrainingConfig& config, TrainingLog* log,
                    std::uint64_t seed, Rng& rng, const EpochCallback& cb) {
  run_epochs(backbone_store, triplets.size(), config.rd, "rd_retrain", log,
             seed, rng, cb, [&](std::size_t i, double gs, double*, int*) {
               return rd_retrain_step(backbone, schedule, triplets[i],
                                      config.segment_count, rng, gs);
             });
}

}  // namespace pcsc
