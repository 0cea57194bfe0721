#pragma once

#include <string>

#include "ois/order/order_map.hpp"
#include <json.hpp>

namespace ois {

// Which prompt pathways a model uses. The reduced variants are configurations
// of the same network, not separate code paths.
enum class AblationArm { kFull, kNoOrder, kNoObject, kNoSparse, kNoDense };

const char* ArmName(AblationArm arm);
// Throws ValidationError for unknown names.
AblationArm ParseArm(const std::string& name);

const char* NormalizationName(OrderNormalization n);
// Throws ValidationError for unknown names.
OrderNormalization ParseNormalization(const std::string& name);

struct ModelConfig {
  int patch_size = 8;
  int embed_dim = 128;
  int encoder_blocks = 4;
  int encoder_heads = 4;
  int fusion_blocks = 3;
  int ffn_hidden = 256;
  int input_size = 64;
  // RGB plus a normalized depth plane.
  int input_channels = 4;
  int decoder_dim = 32;
  int click_radius = 5;
  OrderNormalization order_normalization = OrderNormalization::kPerMapMax;
  AblationArm arm = AblationArm::kFull;

  bool use_order() const { return arm != AblationArm::kNoOrder && use_sparse(); }
  bool use_object() const {
    return arm != AblationArm::kNoObject && use_sparse();
  }
  bool use_sparse() const { return arm != AblationArm::kNoSparse; }
  bool use_dense() const { return arm != AblationArm::kNoDense; }

  // Throws ValidationError for inconsistent values.
  void Validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LossConfig {
  double gamma = 2.0;
  double eps = 1e-8;
};

struct TrainConfig {
  int epochs = 15;
  int batch_size = 8;
  double learning_rate = 3e-4;
  // Learning-rate multiplier for the order-attention scales sigma_raw.
  double sigma_lr_scale = 30.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 1.0;
  // Probability of 0, 1, 2 extra simulated rounds before the trained round.
  double extra_round_probs[3] = {0.5, 0.3, 0.2};
  int min_instance_area = 16;
  LossConfig loss;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace ois
