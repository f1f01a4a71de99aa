#pragma once

#include <map>
#include <string>

#include "pcsc/nn/graph.hpp"

namespace pcsc::nn {

enum class Activation { kGelu, kLeakyRelu01, kNone };

// Named parameter collection. Iteration order is the name order, which keeps
// optimizer traversal and checkpoint layout deterministic.
class ParamStore {
 public:
  Var create(const std::string& name, Eigen::Index rows, Eigen::Index cols,
             double init_std, Rng& rng);
  Var create_zero(const std::string& name, Eigen::Index rows,
                  Eigen::Index cols);
  Var create_value(const std::string& name, Matrix value);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const {
    return params_.count(name) != 0;
  }

  std::map<std::string, Var>& all() { return params_; }
  const std::map<std::string, Var>& all() const { return params_; }

  void zero_grads();
  void set_requires_grad(bool on);
  // Round every value to 32-bit float precision (checkpoint precision).
  void quantize_f32();

 private:
  std::map<std::string, Var> params_;
};

// Values are quantized to float precision on creation so that a freshly
// initialized model round-trips through the checkpoint format exactly.
Matrix random_init(Eigen::Index rows, Eigen::Index cols, double std,
                   Rng& rng);
double quantize_f32_scalar(double v);

struct Linear {
  Var w, b;
  Linear() = default;
  Linear(ParamStore& store, const std::string& prefix, Eigen::Index in,
         Eigen::Index out, Rng& rng);
  Var forward(const Var& x) const;  // x W + b, rows are samples
};

// Two linear layers with an activation between.
struct Mlp {
  Linear l1, l2;
  Activation act = Activation::kGelu;
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& prefix, Eigen::Index in,
      Eigen::Index hidden, Eigen::Index out, Rng& rng,
      Activation act = Activation::kGelu);
  Var forward(const Var& x) const;
};

Var apply_activation(const Var& x, Activation act);

// w = 2 * sigmoid(x W + b); every component strictly inside (0, 2).
struct Gate2 {
  Linear lin;
  Gate2() = default;
  Gate2(ParamStore& store, const std::string& prefix, Eigen::Index in,
        Eigen::Index out, Rng& rng);
  Var forward(const Var& cond) const;
};

struct TransformerConfig {
  int layers = 2;
  int heads = 2;
  Eigen::Index width = 64;  // must divide by heads
  Eigen::Index ff_hidden = 0;  // 0 -> 4 * width
};

// Pre-norm multi-head self-attention encoder stack; no positional terms
// inside, so it is permutation-equivariant over tokens.
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(ParamStore& store, const std::string& prefix,
                     const TransformerConfig& config, Rng& rng);
  // tokens: V x width. attn_out, when given, receives one (V x V)
  // probability matrix per layer per head.
  Var forward(const Var& tokens, std::vector<Matrix>* attn_out = nullptr) const;
  const TransformerConfig& config() const { return config_; }

 private:
  struct Layer {
    Var ln1_g, ln1_b, ln2_g, ln2_b;
    Linear q, k, v, o;
    Linear ff1, ff2;
  };
  TransformerConfig config_;
  std::vector<Layer> layers_;
};

enum class PoolMode { kMax, kMean };

Var pool_tokens(const Var& tokens, PoolMode mode);

}  // namespace pcsc::nn
