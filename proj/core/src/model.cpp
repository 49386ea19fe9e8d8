#include "segctc/model.hpp"

namespace segctc {
namespace {

std::vector<ConstTensorRef> tensors_of(const ModelParams& params) { return collect_tensors(params); }

}  // namespace

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.input_dim == 0) throw Error("model: input_dim must be >= 1");
  if (config.vocab_size == 0) throw Error("model: vocabulary is empty");
  if (config.max_seg_len == 0) throw Error("model: max_seg_len must be >= 1");
  ModelParams p;
  p.encoder = init_encoder(config.input_dim, config.hidden_dim, config.layers, config.subsample,
                           mix_seed(seed, 100));
  const std::size_t state_dim = p.encoder.output_dim();
  p.scrf = init_scrf(config.vocab_size, state_dim, config.label_dim, config.feature_dim,
                     config.extra_feature_layers, mix_seed(seed, 200), config.activation);
  p.ctc = init_ctc_head(config.vocab_size, state_dim, mix_seed(seed, 300));
  return p;
}

ModelParams zeros_like(const ModelParams& params) {
  return {zeros_like(params.encoder), zeros_like(params.scrf), zeros_like(params.ctc)};
}

std::vector<TensorRef> collect_tensors(ModelParams& params) {
  std::vector<TensorRef> out;
  collect_tensors(params.encoder, out);
  collect_tensors(params.scrf, out);
  collect_tensors(params.ctc, out);
  return out;
}

std::vector<ConstTensorRef> collect_tensors(const ModelParams& params) {
  // the mutable walk only takes addresses
  std::vector<ConstTensorRef> out;
  for (auto& t : collect_tensors(const_cast<ModelParams&>(params))) out.push_back({std::move(t.name), t.value});
  return out;
}

void add_scaled(ModelParams& params, const ModelParams& other, double scale) {
  auto dst = collect_tensors(params);
  auto src = tensors_of(other);
  if (dst.size() != src.size()) throw Error("add_scaled: parameter sets differ");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i].value->add_scaled(*src[i].value, scale);
}

double squared_norm(const ModelParams& params) {
  double s = 0.0;
  for (const auto& t : tensors_of(params)) s += t.value->squared_norm();
  return s;
}

void scale(ModelParams& params, double factor) {
  for (const auto& t : collect_tensors(params)) {
    for (double& v : t.value->values()) v *= factor;
  }
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  auto ta = tensors_of(a);
  auto tb = tensors_of(b);
  if (ta.size() != tb.size()) return false;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].name != tb[i].name || !(*ta[i].value == *tb[i].value)) return false;
  }
  return a.scrf.activation == b.scrf.activation && a.encoder.subsample == b.encoder.subsample;
}

}  // namespace segctc
