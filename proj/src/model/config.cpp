#include "ois/model/config.hpp"

#include "ois/common/errors.hpp"

namespace ois {

const char* ArmName(AblationArm arm) {
  switch (arm) {
    case AblationArm::kFull: return "full";
    case AblationArm::kNoOrder: return "no_order";
    case AblationArm::kNoObject: return "no_object";
    case AblationArm::kNoSparse: return "no_sparse";
    case AblationArm::kNoDense: return "no_dense";
  }
  return "?";
}

AblationArm ParseArm(const std::string& name) {
  for (AblationArm a : {AblationArm::kFull, AblationArm::kNoOrder,
                        AblationArm::kNoObject, AblationArm::kNoSparse,
                        AblationArm::kNoDense}) {
    if (name == ArmName(a)) return a;
  }
  throw ValidationError("unknown ablation arm '" + name + "'");
}

void ModelConfig::Validate() const {
  if (patch_size < 1 || embed_dim < 4 || embed_dim % 4 != 0) {
    throw ValidationError("patch_size >= 1 and embed_dim % 4 == 0 required");
  }
  if (encoder_heads < 1 || embed_dim % encoder_heads != 0) {
    throw ValidationError("embed_dim must divide evenly across encoder heads");
  }
  if (patch_size % 4 != 0) {
    throw ValidationError("patch_size must be a multiple of 4 (decoder "
                          "upsamples 4x before the final resize)");
  }
  if (fusion_blocks < 1 || encoder_blocks < 0 || ffn_hidden < 1 ||
      decoder_dim < 1 || input_channels < 1 || click_radius < 1) {
    throw ValidationError("model sizes must be positive");
  }
  if (input_channels != 4) {
    throw ValidationError("input_channels must be 4 (RGB plus depth)");
  }
  if (input_size % patch_size != 0) {
    throw ValidationError("input_size must be divisible by patch_size");
  }
}

const char* NormalizationName(OrderNormalization n) {
  return n == OrderNormalization::kPerMapMax ? "per_map_max" : "depth_range";
}

OrderNormalization ParseNormalization(const std::string& s) {
  if (s == "per_map_max") return OrderNormalization::kPerMapMax;
  if (s == "depth_range") return OrderNormalization::kDepthRange;
  throw ValidationError("unknown order normalization '" + s + "'");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"patch_size", c.patch_size},
                     {"embed_dim", c.embed_dim},
                     {"encoder_blocks", c.encoder_blocks},
                     {"encoder_heads", c.encoder_heads},
                     {"fusion_blocks", c.fusion_blocks},
                     {"ffn_hidden", c.ffn_hidden},
                     {"input_size", c.input_size},
                     {"input_channels", c.input_channels},
                     {"decoder_dim", c.decoder_dim},
                     {"click_radius", c.click_radius},
                     {"order_normalization",
                      NormalizationName(c.order_normalization)},
                     {"arm", ArmName(c.arm)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.patch_size = j.at("patch_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.encoder_blocks = j.at("encoder_blocks").get<int>();
  c.encoder_heads = j.at("encoder_heads").get<int>();
  c.fusion_blocks = j.at("fusion_blocks").get<int>();
  c.ffn_hidden = j.at("ffn_hidden").get<int>();
  c.input_size = j.at("input_size").get<int>();
  c.input_channels = j.at("input_channels").get<int>();
  c.decoder_dim = j.at("decoder_dim").get<int>();
  c.click_radius = j.at("click_radius").get<int>();
  c.order_normalization =
      ParseNormalization(j.at("order_normalization").get<std::string>());
  c.arm = ParseArm(j.at("arm").get<std::string>());
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"learning_rate", c.learning_rate},
      {"sigma_lr_scale", c.sigma_lr_scale},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"adam_eps", c.adam_eps},
      {"grad_clip", c.grad_clip},
      {"extra_round_probs",
       {c.extra_round_probs[0], c.extra_round_probs[1], c.extra_round_probs[2]}},
      {"min_instance_area", c.min_instance_area},
      {"focal_gamma", c.loss.gamma},
      {"loss_eps", c.loss.eps}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.sigma_lr_scale = j.at("sigma_lr_scale").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.grad_clip = j.at("grad_clip").get<double>();
  const auto& p = j.at("extra_round_probs");
  for (int i = 0; i < 3; ++i) c.extra_round_probs[i] = p.at(i).get<double>();
  c.min_instance_area = j.at("min_instance_area").get<int>();
  c.loss.gamma = j.at("focal_gamma").get<double>();
  c.loss.eps = j.at("loss_eps").get<double>();
}

}  // namespace ois
