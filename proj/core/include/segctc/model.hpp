#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "segctc/ctc.hpp"
#include "segctc/encoder.hpp"
#include "segctc/numerics.hpp"
#include "segctc/scrf.hpp"

namespace segctc {

/// Architecture of a joint model.
struct ModelConfig {
  std::size_t input_dim = 0;
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 128;
  std::size_t layers = 3;
  std::vector<std::size_t> subsample{2, 2};
  std::size_t label_dim = 64;
  std::size_t feature_dim = 64;
  std::size_t extra_feature_layers = 0;
  std::size_t max_seg_len = 8;
  Activation activation = Activation::kTanh;

  bool operator==(const ModelConfig&) const = default;
};

/// Shared encoder plus the two output heads. Also used as the gradient
/// container, with the same shapes.
struct ModelParams {
  EncoderParams encoder;
  ScrfParams scrf;
  CtcHead ctc;
};

ModelParams init_model(const ModelConfig& config, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& params);

/// Every tensor with a stable dotted name, in a fixed order.
std::vector<TensorRef> collect_tensors(ModelParams& params);

struct ConstTensorRef {
  std::string name;
  const Matrix* value;
};
std::vector<ConstTensorRef> collect_tensors(const ModelParams& params);

/// params += scale * other, tensor by tensor.
void add_scaled(ModelParams& params, const ModelParams& other, double scale);
double squared_norm(const ModelParams& params);
void scale(ModelParams& params, double factor);

bool operator==(const ModelParams& a, const ModelParams& b);

}  // namespace segctc
