#include "pcsc/nn/optim.hpp"

#include <cmath>

namespace pcsc::nn {

double cosine_warmup_lr(std::int64_t step, std::int64_t total_steps,
                        std::int64_t warmup_steps, double base_lr) {
  if (warmup_steps >= total_steps)
    throw InvalidConfig("cosine_warmup_lr: warmup must precede total");
  if (step <= 0) return warmup_steps > 0 ? 0.0 : base_lr;
  if (step < warmup_steps)
    return base_lr * static_cast<double>(step) /
           static_cast<double>(warmup_steps);
  if (step >= total_steps) return 0.0;
  double progress = static_cast<double>(step - warmup_steps) /
                    static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

AdamW::AdamW(ParamStore& store, double lr, double weight_decay, double beta1,
             double beta2, double eps)
    : store_(store),
      lr_(lr),
      weight_decay_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void AdamW::step() {
  ++step_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (auto& [name, var] : store_.all()) {
    if (!var.requires_grad()) continue;
    Matrix& p = var.mutable_value();
    Matrix zero;
    if (var.grad().size() == 0) zero = Matrix::Zero(p.rows(), p.cols());
    const Matrix& g = var.grad().size() != 0 ? var.grad() : zero;
    if (!g.allFinite())
      throw TrainingError("adamw_step: non-finite gradient in " + name);

    auto [mi, inserted_m] = m_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    auto [vi, inserted_v] = v_.try_emplace(name, Matrix::Zero(p.rows(), p.cols()));
    Matrix& m = mi->second;
    Matrix& v = vi->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);

    // decoupled weight decay
    p -= lr_ * weight_decay_ * p;
    p.array() -=
        lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
}

}  // namespace pcsc::nn
