#pragma once

#include <functional>

#include "pcsc/channel.hpp"
#include "pcsc/diffusion.hpp"
#include "pcsc/encoder.hpp"
#include "pcsc/jscc.hpp"
#include "pcsc/nn/optim.hpp"

namespace pcsc {

struct PhaseHyper {
  int epochs = 1;
  int batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int warmup_epochs = 1;
};

struct TrainingConfig {
  PhaseHyper pretrain{500, 32, 6e-4, 0.05, 10};
  PhaseHyper finetune{100, 32, 1e-4, 1e-4, 10};
  PhaseHyper jscc{600, 16, 1e-3, 1e-4, 10};
  PhaseHyper rd{50, 8, 1e-4, 1e-4, 5};
  int segment_count = 12;
  int ddim_steps_jscc = 8;
  int rd_sample_steps = 50;  // DDIM steps used to generate triplets
  int rd_triplet_count = 512;
  // Default follows the published objective literally: the Chamfer term of
  // fine-tuning compares true and predicted noise as point sets. The
  // alternative compares the clean cloud with its single-step estimate.
  bool finetune_cd_on_noise = true;
  std::vector<double> snr_levels_db = {-15, -10, -5, 0, 5, 10, 15, 20};
  std::vector<int> rates = {1024, 896, 768, 640, 512, 384, 256, 128, 64, 32};
  ChannelKind channel = ChannelKind::kAwgn;

  void validate() const;
};

struct TrainSample {
  PointCloud cloud;
  KeypointSet keypoints;
};

struct RdTriplet {
  nn::Matrix x_T;  // N x 3 initial noise
  nn::Matrix x_0;  // N x 3 sampler output for (x_T, F_s)
  nn::Matrix F_s;  // 1 x d condition
};

// One uniform draw from each of `segments` equal sub-intervals of (0, T].
std::vector<int> segmented_timesteps(int T, int segments, Rng& rng);

// Each *_step accumulates gradients scaled by grad_scale (caller owns
// zero_grads and the optimizer step) and returns the unscaled scalar loss.
// A non-finite loss throws TrainingError.
double pretrain_step(const SemanticEncoder& encoder, const CpcBackbone& backbone,
                     const DiffusionSchedule& schedule, const TrainSample& sample,
                     int segment_count, Rng& rng, double grad_scale = 1.0);

double finetune_step(const SemanticEncoder& encoder, const CpcBackbone& backbone,
                     const DiffusionSchedule& schedule, const TrainSample& sample,
                     int segment_count, bool cd_on_noise, Rng& rng,
                     double grad_scale = 1.0);

// Encoder and backbone must be frozen (requires_grad off) by the caller;
// gradients reach only the codec, flowing through the received feature and
// the deterministic DDIM trajectory.
double train_jscc_step(const SemanticEncoder& encoder,
                       const CpcBackbone& backbone,
                       const DiffusionSchedule& schedule, const JsccCodec& codec,
                       const TrainSample& sample, double snr_db, int rate,
                       ChannelKind channel, int ddim_steps, Rng& rng,
                       double grad_scale = 1.0);

std::vector<RdTriplet> rd_generate(const SemanticEncoder& encoder,
                                   const CpcBackbone& backbone,
                                   const DiffusionSchedule& schedule,
                                   const std::vector<TrainSample>& dataset,
                                   int count, int sample_steps, Rng& rng);

// Straight-pair regression: with eps_pair = (x_T - sqrt(abar_T) x_0) /
// sqrt(1 - abar_T), regress the backbone's prediction at a segmented t onto
// eps_pair along x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps_pair.
double rd_retrain_step(const CpcBackbone& backbone,
                       const DiffusionSchedule& schedule,
                       const RdTriplet& triplet, int segment_count, Rng& rng,
                       double grad_scale = 1.0);

void save_rd_triplets(const std::vector<RdTriplet>& triplets,
                      const std::string& path);
std::vector<RdTriplet> load_rd_triplets(const std::string& path);

// Appends rows "phase,epoch,step,loss,lr,snr_db,rate,seed"; writes the
// header when the file is fresh.
class TrainingLog {
 public:
  explicit TrainingLog(const std::string& path);
  void append(const std::string& phase, int epoch, int step, double loss,
              double lr, double snr_db, int rate, std::uint64_t seed);

 private:
  std::string path_;
};

struct EpochCallback {
  // called with (epoch, mean loss); return false to stop early
  std::function<bool(int, double)> on_epoch;
};

void run_pretrain(nn::ParamStore& store, const SemanticEncoder& encoder,
                  const CpcBackbone& backbone, const DiffusionSchedule& schedule,
                  const std::vector<TrainSample>& dataset,
                  const TrainingConfig& config, TrainingLog* log,
                  std::uint64_t seed, Rng& rng,
                  const EpochCallback& cb = {});

void run_finetune(nn::ParamStore& store, const SemanticEncoder& encoder,
                  const CpcBackbone& backbone, const DiffusionSchedule& schedule,
                  const std::vector<TrainSample>& dataset,
                  const TrainingConfig& config, TrainingLog* log,
                  std::uint64_t seed, Rng& rng,
                  const EpochCallback& cb = {});

// Optimizes codec_store only; model_store (encoder + backbone) is frozen
// for the duration of the loop and thawed afterwards.
void run_train_jscc(nn::ParamStore& codec_store, nn::ParamStore& model_store,
                    const SemanticEncoder& encoder,
                    const CpcBackbone& backbone,
                    const DiffusionSchedule& schedule, const JsccCodec& codec,
                    const std::vector<TrainSample>& dataset,
                    const TrainingConfig& config, TrainingLog* log,
                    std::uint64_t seed, Rng& rng,
                    const EpochCallback& cb = {});

void run_rd_retrain(nn::ParamStore& backbone_store, const CpcBackbone& backbone,
                    const DiffusionSchedule& schedule,
                    const std::vector<RdTriplet>& triplets,
                    const TrainingConfig& config, TrainingLog* log,
                    std::uint64_t seed, Rng& rng,
                    const EpochCallback& cb = {});

}  // namespace pcsc
