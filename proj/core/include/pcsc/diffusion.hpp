#pragma once

#include <vector>

#include "pcsc/nn/layers.hpp"

namespace pcsc {

struct SamplingError : std::runtime_error {
  explicit SamplingError(const std::string& what) : std::runtime_error(what) {}
};

// Per-step beta/alpha/alpha-bar tables, t indexed 1..T.
struct DiffusionSchedule {
  int T = 0;
  Eigen::VectorXd beta;
  Eigen::VectorXd alpha;
  Eigen::VectorXd alpha_bar;

  double beta_at(int t) const { return beta(t - 1); }
  double alpha_at(int t) const { return alpha(t - 1); }
  double alpha_bar_at(int t) const { return alpha_bar(t - 1); }
  void check_t(int t) const {
    if (t < 1 || t > T) throw InvalidInput("diffusion: step out of range");
  }
};

DiffusionSchedule linear_beta_schedule(int T, double beta_start,
                                       double beta_end);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
nn::Matrix q_sample(const nn::Matrix& x0, int t, const nn::Matrix& eps,
                    const DiffusionSchedule& schedule);

// t_bar = [beta_t, sin beta_t, cos beta_t]
Eigen::RowVector3d time_embed(int t, const DiffusionSchedule& schedule);

struct CpcConfig {
  std::vector<int> widths = {128, 256, 512, 256, 128, 3};
  int condition_width = 0;  // semantic width + 3
};

// Stack of conditioned point-diffusion blocks:
//   H_l = Gate(c_t) (.) MLP(H_{l-1}) + MLP(c_t)
// applied row-wise over points, so the whole stack is permutation
// equivariant over the point dimension.
class CpcBackbone {
 public:
  CpcBackbone() = default;
  CpcBackbone(nn::ParamStore& store, const std::string& prefix,
              const CpcConfig& config, Rng& rng);

  const CpcConfig& config() const { return config_; }

  // x_t: N x 3, cond: 1 x condition_width -> N x w_out of the last block
  nn::Var forward(const nn::Var& x_t, const nn::Var& cond) const;

  // cond = concat(F_s, t_bar); F_s: 1 x d
  nn::Var predict(const nn::Var& x_t, const nn::Var& semantic, int t,
                  const DiffusionSchedule& schedule) const;
  nn::Matrix predict(const nn::Matrix& x_t, const nn::Matrix& semantic, int t,
                     const DiffusionSchedule& schedule) const;

 private:
  struct Block {
    nn::Mlp feature;
    nn::Gate2 gate;
    nn::Mlp bias;
  };
  CpcConfig config_;
  std::vector<Block> blocks_;
};

enum class DdpmVariance { kPosterior, kBeta };

// Ancestral sampling from x_T ~ N(0, I); noise z drawn only for steps with
// nonzero sigma, so matched-variance DDIM can share the same draw stream.
nn::Matrix ddpm_sample(const CpcBackbone& backbone, const nn::Matrix& semantic,
                       const DiffusionSchedule& schedule, Eigen::Index n_points,
                       Rng& rng, DdpmVariance variance = DdpmVariance::kPosterior);
nn::Matrix ddpm_sample_from(const CpcBackbone& backbone,
                            const nn::Matrix& semantic,
                            const DiffusionSchedule& schedule,
                            const nn::Matrix& x_start, Rng& rng,
                            DdpmVariance variance = DdpmVariance::kPosterior);

// S evenly spaced steps with tau_S = T.
std::vector<int> make_subsequence(int T, int S);

enum class DdimSigma { kDeterministic, kDdpmMatched };

nn::Matrix ddim_sample(const CpcBackbone& backbone, const nn::Matrix& semantic,
                       const DiffusionSchedule& schedule,
                       const std::vector<int>& tau, DdimSigma sigma_mode,
                       Eigen::Index n_points, Rng& rng);
nn::Matrix ddim_sample_from(const CpcBackbone& backbone,
                            const nn::Matrix& semantic,
                            const DiffusionSchedule& schedule,
                            const std::vector<int>& tau, DdimSigma sigma_mode,
                            const nn::Matrix& x_start, Rng& rng);

// Differentiable deterministic (sigma = 0) trajectory for training through
// the sampler; gradients flow into `semantic` and the backbone parameters.
nn::Var ddim_sample_var(const CpcBackbone& backbone, const nn::Var& semantic,
                        const DiffusionSchedule& schedule,
                        const std::vector<int>& tau, const nn::Matrix& x_start);

}  // namespace pcsc
