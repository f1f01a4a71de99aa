#include "pcsc/nn/layers.hpp"

#include <cmath>

namespace pcsc::nn {

double quantize_f32_scalar(double v) {
  return static_cast<double>(static_cast<float>(v));
}

Matrix random_init(Eigen::Index rows, Eigen::Index cols, double std,
                   Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = quantize_f32_scalar(std * rng.gaussian());
  return m;
}

Var ParamStore::create(const std::string& name, Eigen::Index rows,
                       Eigen::Index cols, double init_std, Rng& rng) {
  return create_value(name, random_init(rows, cols, init_std, rng));
}

Var ParamStore::create_zero(const std::string& name, Eigen::Index rows,
                            Eigen::Index cols) {
  return create_value(name, Matrix::Zero(rows, cols));
}

Var ParamStore::create_value(const std::string& name, Matrix value) {
  if (params_.count(name))
    throw InvalidConfig("ParamStore: duplicate parameter " + name);
  Var v = Var::leaf(std::move(value), true);
  params_.emplace(name, v);
  return v;
}

Var ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw InvalidConfig("ParamStore: unknown parameter " + name);
  return it->second;
}

void ParamStore::zero_grads() {
  for (auto& [name, v] : params_) v.zero_grad();
}

void ParamStore::set_requires_grad(bool on) {
  for (auto& [name, v] : params_) v.set_requires_grad(on);
}

void ParamStore::quantize_f32() {
  for (auto& [name, v] : params_) {
    Matrix& m = v.mutable_value();
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = quantize_f32_scalar(m.data()[i]);
  }
}

Linear::Linear(ParamStore& store, const std::string& prefix, Eigen::Index in,
               Eigen::Index out, Rng& rng) {
  double std = std::sqrt(2.0 / static_cast<double>(in + out));
  w = store.create(prefix + "/w", in, out, std, rng);
  b = store.create_zero(prefix + "/b", 1, out);
}

Var Linear::forward(const Var& x) const {
  if (x.cols() != w.rows()) throw InvalidInput("linear: shape mismatch");
  return add_rowvec(matmul(x, w), b);
}

Var apply_activation(const Var& x, Activation act) {
  switch (act) {
    case Activation::kGelu:
      return gelu(x);
    case Activation::kLeakyRelu01:
      return leaky_relu(x, 0.1);
    case Activation::kNone:
      return x;
  }
  throw InvalidConfig("unknown activation");
}

Mlp::Mlp(ParamStore& store, const std::string& prefix, Eigen::Index in,
         Eigen::Index hidden, Eigen::Index out, Rng& rng, Activation act)
    : l1(store, prefix + "/l1", in, hidden, rng),
      l2(store, prefix + "/l2", hidden, out, rng),
      act(act) {}

Var Mlp::forward(const Var& x) const {
  return l2.forward(apply_activation(l1.forward(x), act));
}

Gate2::Gate2(ParamStore& store, const std::string& prefix, Eigen::Index in,
             Eigen::Index out, Rng& rng)
    : lin(store, prefix, in, out, rng) {}

Var Gate2::forward(const Var& cond) const {
  return scale(sigmoid(lin.forward(cond)), 2.0);
}

TransformerEncoder::TransformerEncoder(ParamStore& store,
                                       const std::string& prefix,
                                       const TransformerConfig& config,
                                       Rng& rng)
    : config_(config) {
  if (config_.width % config_.heads != 0)
    throw InvalidConfig("transformer: width not divisible by head count");
  if (config_.ff_hidden == 0) config_.ff_hidden = 4 * config_.width;
  for (int l = 0; l < config_.layers; ++l) {
    std::string p = prefix + "/layer" + std::to_string(l);
    Layer layer;
    layer.ln1_g = store.create_value(p + "/ln1_g", Matrix::Ones(1, config_.width));
    layer.ln1_b = store.create_zero(p + "/ln1_b", 1, config_.width);
    layer.ln2_g = store.create_value(p + "/ln2_g", Matrix::Ones(1, config_.width));
    layer.ln2_b = store.create_zero(p + "/ln2_b", 1, config_.width);
    layer.q = Linear(store, p + "/q", config_.width, config_.width, rng);
    layer.k = Linear(store, p + "/k", config_.width, config_.width, rng);
    layer.v = Linear(store, p + "/v", config_.width, config_.width, rng);
    layer.o = Linear(store, p + "/o", config_.width, config_.width, rng);
    layer.ff1 = Linear(store, p + "/ff1", config_.width, config_.ff_hidden, rng);
    layer.ff2 = Linear(store, p + "/ff2", config_.ff_hidden, config_.width, rng);
    layers_.push_back(std::move(layer));
  }
}

Var TransformerEncoder::forward(const Var& tokens,
                                std::vector<Matrix>* attn_out) const {
  if (tokens.cols() != config_.width)
    throw InvalidInput("transformer: token width mismatch");
  const Eigen::Index dh = config_.width / config_.heads;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  Var h = tokens;
  for (const auto& layer : layers_) {
    Var x = add_rowvec(mul_rowvec(normalize_rows(h), layer.ln1_g), layer.ln1_b);
    Var q = layer.q.forward(x);
    Var k = layer.k.forward(x);
    Var v = layer.v.forward(x);
    std::vector<Var> head_outs;
    for (int hd = 0; hd < config_.heads; ++hd) {
      Var qh = slice_cols(q, hd * dh, dh);
      Var kh = slice_cols(k, hd * dh, dh);
      Var vh = slice_cols(v, hd * dh, dh);
      Var probs = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dh));
      if (attn_out) attn_out->push_back(probs.value());
      head_outs.push_back(matmul(probs, vh));
    }
    Var attn = head_outs[0];
    for (size_t i = 1; i < head_outs.size(); ++i)
      attn = concat_cols(attn, head_outs[i]);
    h = add(h, layer.o.forward(attn));

    Var f = add_rowvec(mul_rowvec(normalize_rows(h), layer.ln2_g), layer.ln2_b);
    h = add(h, layer.ff2.forward(gelu(layer.ff1.forward(f))));
  }
  return h;
}

Var pool_tokens(const Var& tokens, PoolMode mode) {
  if (tokens.rows() < 1) throw InvalidInput("pool_tokens: no tokens");
  return mode == PoolMode::kMax ? colwise_max(tokens) : colwise_mean(tokens);
}

}  // namespace pcsc::nn
