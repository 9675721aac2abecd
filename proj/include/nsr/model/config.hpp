#pragma once

#include <cstddef>
#include <json.hpp>
#include <string>
#include <vector>

namespace nsr::model {

struct ModelConfig {
  int hidden_dim = 64;
  int num_heads = 4;
  int num_isab = 2;
  int inducing_points = 16;
  int pma_seeds = 4;
  int decoder_layers = 2;
  int vocab_size = 33;
  int max_target_len = 32;
  int input_feature_dim = 64;

  /// Tables 1-2 sizes.
  static ModelConfig paper();
  /// Small network for gradient checks and memorization tests.
  static ModelConfig toy();

  /// Throws InvalidConfig.
  void validate() const;
  int head_dim() const { return hidden_dim / num_heads; }
  int ff_dim() const { return 4 * hidden_dim; }
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct ParameterShape {
  std::string name;
  int rows;
  int cols;
};

/// Every parameter array in creation order.
std::vector<ParameterShape> parameter_layout(const ModelConfig& c);
std::size_t parameter_count(const ModelConfig& c);

}  // namespace nsr::model
