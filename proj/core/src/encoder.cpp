#include "pcsc/encoder.hpp"

namespace pcsc {

using nn::Matrix;
using nn::Var;

void EncoderConfig::validate() const {
  if (d1 <= 0 || d2 <= 0 || d <= 0 || group_count <= 0 || patch_size <= 0)
    throw InvalidConfig("encoder: dimensions must be positive");
  if (d1 % transformer_heads != 0)
    throw InvalidConfig("encoder: d1 must divide by head count");
  if (mask_fraction < 0.0 || mask_fraction >= 1.0)
    throw InvalidConfig("encoder: mask fraction must lie in [0,1)");
}

SemanticEncoder::SemanticEncoder(nn::ParamStore& store,
                                 const EncoderConfig& config, Rng& rng)
    : config_(config) {
  config_.validate();
  point_embed_ = nn::Mlp(store, "encoder/point_embed", 3, config_.d1,
                         config_.d1, rng);
  pos_embed_ = nn::Mlp(store, "encoder/pos_embed", 3, config_.d1, config_.d1,
                       rng);
  nn::TransformerConfig tc;
  tc.layers = config_.transformer_layers;
  tc.heads = config_.transformer_heads;
  tc.width = config_.d1;
  transformer_ = nn::TransformerEncoder(store, "encoder/transformer", tc, rng);
  mask_token_ = store.create("encoder/mask_token", 1, config_.d1, 0.02, rng);
  // second layer zero so the embedding starts as an exact no-op but still
  // receives gradient through the first layer's activations
  keypoint_embed_.l1 = nn::Linear(store, "encoder/keypoint_embed/l1", 3,
                                  config_.d1, rng);
  keypoint_embed_.l2.w = store.create_zero("encoder/keypoint_embed/l2/w",
                                           config_.d1, config_.d1);
  keypoint_embed_.l2.b = store.create_zero("encoder/keypoint_embed/l2/b", 1,
                                           config_.d1);
  local_mlp_ = nn::Mlp(store, "encoder/local_mlp", config_.d1, config_.d2,
                       config_.d2, rng);
  final_mlp_ = nn::Mlp(store, "encoder/final_mlp", 2 * config_.d2, config_.d,
                       config_.d, rng);
}

Var SemanticEncoder::embed_patches(
    const std::vector<Matrix>& visible_patches) const {
  if (visible_patches.empty())
    throw InvalidInput("embed_patches: no visible patches");
  std::vector<Var> tokens;
  tokens.reserve(visible_patches.size());
  for (const auto& patch : visible_patches) {
    Var per_point = point_embed_.forward(Var::constant(patch));
    tokens.push_back(nn::colwise_max(per_point));
  }
  return nn::concat_rows(tokens);
}

Var SemanticEncoder::embed_positions(const Matrix& visible_centers) const {
  return pos_embed_.forward(Var::constant(visible_centers));
}

Var SemanticEncoder::encode_visible(const Var& patch_tokens,
                                    const Var& position_embeddings) const {
  if (patch_tokens.rows() != position_embeddings.rows())
    throw InvalidInput("encode_visible: token/position count mismatch");
  return transformer_.forward(nn::add(patch_tokens, position_embeddings));
}

TokenAssembly SemanticEncoder::assemble_tokens(
    const Var& visible_features, const std::vector<bool>& visible_flags) const {
  const int g = static_cast<int>(visible_flags.size());
  std::vector<Var> rows;
  rows.reserve(g);
  Eigen::Index next_visible = 0;
  for (int i = 0; i < g; ++i) {
    if (visible_flags[i]) {
      rows.push_back(nn::slice_rows(visible_features, next_visible++, 1));
    } else {
      rows.push_back(mask_token_);
    }
  }
  if (next_visible != visible_features.rows())
    throw InvalidInput("assemble_tokens: visible count mismatch");
  TokenAssembly out;
  out.tokens = nn::concat_rows(rows);
  out.visible_flags = visible_flags;
  return out;
}

Var SemanticEncoder::add_keypoint_embedding(
    const Var& tokens, const std::vector<int>& center_indices,
    const KeypointSet& keypoints, const PointCloud& cloud) const {
  if (keypoints.indices.empty()) return tokens;
  Matrix coords(keypoints.indices.size(), 3);
  std::vector<Eigen::Index> rows_to_touch;
  for (size_t k = 0; k < keypoints.indices.size(); ++k) {
    int kp = keypoints.indices[k];
    auto it = std::find(center_indices.begin(), center_indices.end(), kp);
    if (it == center_indices.end())
      throw InvalidInput("keypoint embedding: keypoint without matching center");
    rows_to_touch.push_back(it - center_indices.begin());
    coords.row(k) = cloud.points.row(kp);
  }
  Var embeddings = keypoint_embed_.forward(Var::constant(coords));

  // scatter-add the K embedding rows onto their patch rows
  Matrix scatter = Matrix::Zero(keypoints.indices.size(), tokens.rows());
  for (size_t k = 0; k < rows_to_touch.size(); ++k)
    scatter(k, rows_to_touch[k]) = 1.0;
  return nn::add(tokens, nn::matmul(nn::transpose(Var::constant(scatter)),
                                    embeddings));
}

Var SemanticEncoder::aggregate(const Var& tokens) const {
  Var local = local_mlp_.forward(tokens);                // G x d2
  Var global = nn::colwise_max(local);                   // 1 x d2
  Var tiled = nn::tile_rows(global, tokens.rows());      // G x d2
  Var fused = final_mlp_.forward(nn::concat_cols(local, tiled));  // G x d
  return nn::colwise_max(fused);                         // 1 x d
}

Var SemanticEncoder::extract(const PointCloud& cloud,
                             const KeypointSet& keypoints, Rng& rng) const {
  auto centers = kp_fps(cloud, keypoints, config_.group_count);
  PatchSet patches = knn_group(cloud, centers, config_.patch_size);
  patches = random_mask(patches, config_.mask_fraction, rng);

  std::vector<Matrix> visible_patches;
  std::vector<Eigen::Index> visible_rows;
  for (int i = 0; i < patches.group_count(); ++i)
    if (patches.visible_flags[i]) {
      visible_patches.push_back(patches.patches[i]);
      visible_rows.push_back(i);
    }
  Matrix visible_centers(visible_rows.size(), 3);
  for (size_t i = 0; i < visible_rows.size(); ++i)
    visible_centers.row(i) = patches.centers.row(visible_rows[i]);

  Var tokens = embed_patches(visible_patches);
  Var positions = embed_positions(visible_centers);
  Var encoded = encode_visible(tokens, positions);
  TokenAssembly assembly = assemble_tokens(encoded, patches.visible_flags);
  Var with_kp = add_keypoint_embedding(assembly.tokens, patches.center_indices,
                                       keypoints, cloud);
  return aggregate(with_kp);
}

Matrix SemanticEncoder::extract_value(const PointCloud& cloud,
                                      const KeypointSet& keypoints,
                                      Rng& rng) const {
  nn::GradMode off(false);
  return extract(cloud, keypoints, rng).value();
}

}  // namespace pcsc
