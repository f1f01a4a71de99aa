#pragma once

#include "pcsc/geometry.hpp"
#include "pcsc/nn/layers.hpp"

namespace pcsc {

struct EncoderConfig {
  int d1 = 384;   // token width
  int d2 = 512;   // local feature width
  int d = 1024;   // semantic feature width
  int group_count = 64;
  int patch_size = 32;
  double mask_fraction = 0.8;  // fraction of patches masked
  int transformer_layers = 3;
  int transformer_heads = 6;

  void validate() const;
};

// Fixed-size token bookkeeping for one cloud: G rows in original patch
// order, with masked rows carrying the shared learnable mask token.
struct TokenAssembly {
  nn::Var tokens;  // G x d1
  std::vector<bool> visible_flags;
};

// Keypoint-aware masked patch encoder producing the 1 x d semantic feature.
class SemanticEncoder {
 public:
  SemanticEncoder() = default;
  SemanticEncoder(nn::ParamStore& store, const EncoderConfig& config, Rng& rng);

  const EncoderConfig& config() const { return config_; }

  // PointNet-style shared per-point MLP + max pool per visible patch.
  nn::Var embed_patches(const std::vector<nn::Matrix>& visible_patches) const;
  // Two-layer embedding of visible patch centers.
  nn::Var embed_positions(const nn::Matrix& visible_centers) const;
  // Tokens + positions are combined additively, then run through the
  // transformer over visible tokens only.
  nn::Var encode_visible(const nn::Var& patch_tokens,
                         const nn::Var& position_embeddings) const;
  TokenAssembly assemble_tokens(const nn::Var& visible_features,
                                const std::vector<bool>& visible_flags) const;
  // Adds the keypoint embedding to rows whose patch center is a keypoint,
  // masked or not. The keypoint embedding is zero at initialization so a
  // fresh model matches the keypoint-free one.
  nn::Var add_keypoint_embedding(const nn::Var& tokens,
                                 const std::vector<int>& center_indices,
                                 const KeypointSet& keypoints,
                                 const PointCloud& cloud) const;
  // Local MLP -> max pool -> tile + concat -> MLP -> max pool, 1 x d.
  nn::Var aggregate(const nn::Var& tokens) const;

  // Full pipeline. Masking is applied at the configured ratio in both
  // training and inference; the decoder is trained to rely on priors.
  nn::Var extract(const PointCloud& cloud, const KeypointSet& keypoints,
                  Rng& rng) const;
  nn::Matrix extract_value(const PointCloud& cloud, const KeypointSet& keypoints,
                           Rng& rng) const;

 private:
  EncoderConfig config_;
  nn::Mlp point_embed_;     // 3 -> d1
  nn::Mlp pos_embed_;       // 3 -> d1
  nn::TransformerEncoder transformer_;
  nn::Var mask_token_;      // 1 x d1, learnable, shared
  nn::Mlp keypoint_embed_;  // 3 -> d1, zero output at init
  nn::Mlp local_mlp_;       // d1 -> d2
  nn::Mlp final_mlp_;       // 2 d2 -> d
};

}  // namespace pcsc
