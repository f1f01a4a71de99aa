#include "pcsc/diffusion.hpp"

namespace pcsc {

using nn::Matrix;
using nn::Var;

DiffusionSchedule linear_beta_schedule(int T, double beta_start,
                                       double beta_end) {
  if (T < 2) throw InvalidConfig("schedule: T must be at least 2");
  if (!(beta_start > 0.0 && beta_start < beta_end && beta_end < 1.0))
    throw InvalidConfig("schedule: need 0 < beta_start < beta_end < 1");
  DiffusionSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  double running = 1.0;
  for (int t = 1; t <= T; ++t) {
    double b = beta_start + (beta_end - beta_start) *
                                static_cast<double>(t - 1) /
                                static_cast<double>(T - 1);
    s.beta(t - 1) = b;
    s.alpha(t - 1) = 1.0 - b;
    running *= 1.0 - b;
    s.alpha_bar(t - 1) = running;
  }
  return s;
}

Matrix q_sample(const Matrix& x0, int t, const Matrix& eps,
                const DiffusionSchedule& schedule) {
  schedule.check_t(t);
  if (eps.rows() != x0.rows() || eps.cols() != x0.cols())
    throw InvalidInput("q_sample: eps shape mismatch");
  double ab = schedule.alpha_bar_at(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

Eigen::RowVector3d time_embed(int t, const DiffusionSchedule& schedule) {
  schedule.check_t(t);
  double b = schedule.beta_at(t);
  return {b, std::sin(b), std::cos(b)};
}

CpcBackbone::CpcBackbone(nn::ParamStore& store, const std::string& prefix,
                         const CpcConfig& config, Rng& rng)
    : config_(config) {
  if (config_.condition_width < 4)
    throw InvalidConfig("cpc: condition width must cover semantic + time");
  int w_in = 3;
  for (size_t l = 0; l < config_.widths.size(); ++l) {
    int w_out = config_.widths[l];
    std::string p = prefix + "/block" + std::to_string(l);
    Block b;
    b.feature = nn::Mlp(store, p + "/feature", w_in, w_out, w_out, rng,
                        nn::Activation::kLeakyRelu01);
    b.gate = nn::Gate2(store, p + "/gate", config_.condition_width, w_out, rng);
    b.bias = nn::Mlp(store, p + "/bias", config_.condition_width, w_out, w_out,
                     rng, nn::Activation::kLeakyRelu01);
    blocks_.push_back(std::move(b));
    w_in = w_out;
  }
}

Var CpcBackbone::forward(const Var& x_t, const Var& cond) const {
  if (cond.rows() != 1 || cond.cols() != config_.condition_width)
    throw InvalidInput("cpc: condition shape mismatch");
  if (x_t.cols() != 3) throw InvalidInput("cpc: points must be N x 3");
  Var h = x_t;
  const Eigen::Index n = x_t.rows();
  for (const auto& block : blocks_) {
    Var gated = nn::mul_rowvec(block.feature.forward(h),
                               block.gate.forward(cond));
    h = nn::add(gated, nn::tile_rows(block.bias.forward(cond), n));
  }
  return h;
}

Var CpcBackbone::predict(const Var& x_t, const Var& semantic, int t,
                         const DiffusionSchedule& schedule) const {
  Var tbar = Var::constant(time_embed(t, schedule));
  return forward(x_t, nn::concat_cols(semantic, tbar));
}

Matrix CpcBackbone::predict(const Matrix& x_t, const Matrix& semantic, int t,
                            const DiffusionSchedule& schedule) const {
  nn::GradMode off(false);
  return predict(Var::constant(x_t), Var::constant(semantic), t, schedule)
      .value();
}

namespace {

double posterior_sigma(const DiffusionSchedule& s, int t) {
  double ab_prev = t > 1 ? s.alpha_bar_at(t - 1) : 1.0;
  double var = (1.0 - ab_prev) / (1.0 - s.alpha_bar_at(t)) * s.beta_at(t);
  return std::sqrt(std::max(var, 0.0));
}

Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.gaussian();
  return m;
}

}  // namespace

Matrix ddpm_sample_from(const CpcBackbone& backbone, const Matrix& semantic,
                        const DiffusionSchedule& schedule,
                        const Matrix& x_start, Rng& rng,
                        DdpmVariance variance) {
  nn::GradMode off(false);
  Matrix x = x_start;
  for (int t = schedule.T; t >= 1; --t) {
    Matrix eps_hat = backbone.predict(x, semantic, t, schedule);
    double a = schedule.alpha_at(t);
    double ab = schedule.alpha_bar_at(t);
    x = (x - schedule.beta_at(t) / std::sqrt(1.0 - ab) * eps_hat) /
        std::sqrt(a);
    double sigma = 0.0;
    if (t > 1)
      sigma = variance == DdpmVariance::kBeta ? std::sqrt(schedule.beta_at(t))
                                              : posterior_sigma(schedule, t);
    if (sigma > 0.0)
      x += sigma * gaussian_matrix(x.rows(), x.cols(), rng);
    if (!x.allFinite())
      throw SamplingError("ddpm_sample: non-finite state at step " +
                          std::to_string(t));
  }
  return x;
}

Matrix ddpm_sample(const CpcBackbone& backbone, const Matrix& semantic,
                   const DiffusionSchedule& schedule, Eigen::Index n_points,
                   Rng& rng, DdpmVariance variance) {
  return ddpm_sample_from(backbone, semantic, schedule,
                          gaussian_matrix(n_points, 3, rng), rng, variance);
}

std::vector<int> make_subsequence(int T, int S) {
  if (S < 1 || S > T) throw InvalidInput("make_subsequence: need 1 <= S <= T");
  std::vector<int> tau(S);
  for (int k = 1; k <= S; ++k)
    tau[k - 1] = static_cast<int>(
        static_cast<std::int64_t>(k) * T / S);
  return tau;
}

namespace {

// One Eq.-style DDIM update from tau_i down to tau_prev (tau_prev == 0 means
// the direct x0 estimate with abar_0 == 1).
Matrix ddim_step(const Matrix& x, const Matrix& eps_hat,
                 const DiffusionSchedule& s, int tau_i, int tau_prev,
                 double sigma, Rng& rng) {
  double ab_i = s.alpha_bar_at(tau_i);
  double ab_prev = tau_prev >= 1 ? s.alpha_bar_at(tau_prev) : 1.0;
  double residual = 1.0 - ab_prev - sigma * sigma;
  if (residual < -1e-12)
    throw InvalidConfig("ddim: sigma^2 exceeds 1 - alpha_bar_prev");
  residual = std::max(residual, 0.0);
  Matrix x0_est = (x - std::sqrt(1.0 - ab_i) * eps_hat) / std::sqrt(ab_i);
  Matrix out = std::sqrt(ab_prev) * x0_est + std::sqrt(residual) * eps_hat;
  if (sigma > 0.0)
    out += sigma * gaussian_matrix(x.rows(), x.cols(), rng);
  return out;
}

}  // namespace

Matrix ddim_sample_from(const CpcBackbone& backbone, const Matrix& semantic,
                        const DiffusionSchedule& schedule,
                        const std::vector<int>& tau, DdimSigma sigma_mode,
                        const Matrix& x_start, Rng& rng) {
  nn::GradMode off(false);
  if (tau.empty()) throw InvalidInput("ddim_sample: empty subsequence");
  for (size_t i = 0; i < tau.size(); ++i) {
    schedule.check_t(tau[i]);
    if (i > 0 && tau[i] <= tau[i - 1])
      throw InvalidInput("ddim_sample: subsequence must increase");
  }
  Matrix x = x_start;
  for (int i = static_cast<int>(tau.size()) - 1; i >= 0; --i) {
    int t = tau[i];
    int t_prev = i > 0 ? tau[i - 1] : 0;
    Matrix eps_hat = backbone.predict(x, semantic, t, schedule);
    double sigma = 0.0;
    if (sigma_mode == DdimSigma::kDdpmMatched && t_prev >= 1) {
      double ab_prev = schedule.alpha_bar_at(t_prev);
      double ab_i = schedule.alpha_bar_at(t);
      sigma = std::sqrt(std::max(
          (1.0 - ab_prev) / (1.0 - ab_i) * (1.0 - ab_i / ab_prev), 0.0));
    }
    x = ddim_step(x, eps_hat, schedule, t, t_prev, sigma, rng);
    if (!x.allFinite())
      throw SamplingError("ddim_sample: non-finite state at step " +
                          std::to_string(t));
  }
  return x;
}

Matrix ddim_sample(const CpcBackbone& backbone, const Matrix& semantic,
                   const DiffusionSchedule& schedule,
                   const std::vector<int>& tau, DdimSigma sigma_mode,
                   Eigen::Index n_points, Rng& rng) {
  return ddim_sample_from(backbone, semantic, schedule, tau, sigma_mode,
                          gaussian_matrix(n_points, 3, rng), rng);
}

Var ddim_sample_var(const CpcBackbone& backbone, const Var& semantic,
                    const DiffusionSchedule& schedule,
                    const std::vector<int>& tau, const Matrix& x_start) {
  if (tau.empty()) throw InvalidInput("ddim_sample_var: empty subsequence");
  Var x = Var::constant(x_start);
  for (int i = static_cast<int>(tau.size()) - 1; i >= 0; --i) {
    int t = tau[i];
    int t_prev = i > 0 ? tau[i - 1] : 0;
    Var eps_hat = backbone.predict(x, semantic, t, schedule);
    double ab_i = schedule.alpha_bar_at(t);
    double ab_prev = t_prev >= 1 ? schedule.alpha_bar_at(t_prev) : 1.0;
    Var x0_est = nn::scale(
        nn::sub(x, nn::scale(eps_hat, std::sqrt(1.0 - ab_i))),
        1.0 / std::sqrt(ab_i));
    x = nn::add(nn::scale(x0_est, std::sqrt(ab_prev)),
                nn::scale(eps_hat, std::sqrt(std::max(1.0 - ab_prev, 0.0))));
    if (!x.value().allFinite())
      throw SamplingError("ddim_sample_var: non-finite state at step " +
                          std::to_string(t));
  }
  return x;
}

}  // namespace pcsc
