#include "febm/nn.hpp"

#include <cmath>

#include "febm/errors.hpp"

namespace febm {

Mlp::Mlp(std::vector<std::size_t> widths, Activation act) : act_(act) {
  if (widths.size() < 2) throw ShapeError("Mlp: need at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    DenseLayer layer;
    layer.w = Tensor::zeros({widths[i], widths[i + 1]});
    layer.b = Tensor::zeros({widths[i + 1]});
    layers_.push_back(std::move(layer));
  }
}

void Mlp::init_xavier(Rng& rng) {
  for (DenseLayer& layer : layers_) {
    const double fan_in = static_cast<double>(layer.w.extent(0));
    const double fan_out = static_cast<double>(layer.w.extent(1));
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t k = 0; k < layer.w.size(); ++k)
      layer.w.data()[k] = limit * (2.0 * rng.uniform() - 1.0);
    for (std::size_t k = 0; k < layer.b.size(); ++k) layer.b.data()[k] = 0.0;
  }
}

void Mlp::zero_last_layer() {
  if (layers_.empty()) throw ShapeError("Mlp::zero_last_layer: empty network");
  DenseLayer& last = layers_.back();
  for (std::size_t k = 0; k < last.w.size(); ++k) last.w.data()[k] = 0.0;
  for (std::size_t k = 0; k < last.b.size(); ++k) last.b.data()[k] = 0.0;
}

std::size_t Mlp::input_dim() const {
  if (layers_.empty()) throw ShapeError("Mlp::input_dim: empty network");
  return layers_.front().w.extent(0);
}

std::size_t Mlp::output_dim() const {
  if (layers_.empty()) throw ShapeError("Mlp::output_dim: empty network");
  return layers_.back().w.extent(1);
}

std::vector<NamedParam> Mlp::params(const std::string& prefix) {
  std::vector<NamedParam> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string tag = prefix + ".l" + std::to_string(i);
    out.push_back({tag + ".w", &layers_[i].w});
    out.push_back({tag + ".b", &layers_[i].b});
  }
  return out;
}

Var Mlp::forward(const std::vector<Var>& vars, Var x) const {
  if (vars.size() != 2 * layers_.size())
    throw ShapeError("Mlp::forward: var list does not match parameter list");
  Var h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = affine(h, vars[2 * i], vars[2 * i + 1]);
    if (i + 1 < layers_.size())
      h = (act_ == Activation::Tanh) ? tanh(h) : lipswish(h);
  }
  return h;
}

Binding::Binding(Tape& tape, const std::vector<NamedParam>& params,
                 bool requires_grad) {
  vars_.reserve(params.size());
  for (const NamedParam& p : params)
    vars_.push_back(tape.leaf(*p.value, requires_grad));
}

std::vector<Tensor> Binding::grads(const GradientMap& gm) const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (const Var& v : vars_) out.push_back(gm.at(v));
  return out;
}

}  // namespace febm
