#pragma once

#include "pcsc/nn/layers.hpp"

namespace pcsc::nn {

// Linear warmup to base_lr, then half-cosine decay to zero at total_steps.
double cosine_warmup_lr(std::int64_t step, std::int64_t total_steps,
                        std::int64_t warmup_steps, double base_lr);

class AdamW {
 public:
  AdamW(ParamStore& store, double lr, double weight_decay,
        double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::int64_t step_count() const { return step_; }

  // Applies one decoupled-weight-decay Adam update from accumulated grads.
  void step();

 private:
  ParamStore& store_;
  double lr_, weight_decay_, beta1_, beta2_, eps_;
  std::int64_t step_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

}  // namespace pcsc::nn
