#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "febm/optim.hpp"
#include "febm/rng.hpp"
#include "febm/tape.hpp"
#include "febm/tensor.hpp"

namespace febm {

enum class Activation { Tanh, LipSwish };

struct DenseLayer {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
};

// Fully connected network with a linear output layer. Parameters are listed
// layer by layer (w then b), which fixes the canonical ordering used by
// optimizers, checkpoints and tape bindings.
class Mlp {
 public:
  Mlp() = default;
  // widths = {in, hidden..., out}; needs at least an input and output entry.
  Mlp(std::vector<std::size_t> widths, Activation act);

  void init_xavier(Rng& rng);
  // Zeroes the final layer so the network starts as the constant 0 map.
  void zero_last_layer();

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t layer_count() const { return layers_.size(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  std::vector<NamedParam> params(const std::string& prefix);

  // vars must align with params(); x is [B, in], result is [B, out].
  Var forward(const std::vector<Var>& vars, Var x) const;

 private:
  std::vector<DenseLayer> layers_;
  Activation act_ = Activation::Tanh;
};

// Registers a parameter list as leaves on a tape. A tape is single-use, so a
// binding is rebuilt per gradient evaluation; the var order matches the
// parameter order.
class Binding {
 public:
  Binding(Tape& tape, const std::vector<NamedParam>& params,
          bool requires_grad = true);

  const std::vector<Var>& vars() const { return vars_; }

  // Gradients aligned with the bound parameter order.
  std::vector<Tensor> grads(const GradientMap& gm) const;

 private:
  std::vector<Var> vars_;
};

}  // namespace febm
