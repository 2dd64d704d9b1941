#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "febm/optim.hpp"
#include "febm/rng.hpp"
#include "febm/tape.hpp"
#include "febm/tensor.hpp"

namespace febm {

struct FlowConfig {
  std::size_t dim = 2;
  std::size_t depth = 6;       // invertible steps; even depth keeps the
                               // zero-initialized model an exact identity
  std::size_t hidden_width = 64;
};

// Named presets selectable from the CLI; dim is filled in by the caller.
FlowConfig flow_preset(const std::string& name);

// Per-coordinate affine layer. Initialized from data so its first batch maps
// to zero mean, unit variance per coordinate.
struct ActNormLayer {
  Tensor log_scale;  // [d]
  Tensor bias;       // [d]
};

// Affine coupling: the masked half passes through and parameterizes an
// elementwise scale-and-shift of the rest. Two tanh hidden layers feed
// separate scale and shift heads; the scale is tanh-squashed before
// exponentiation so log-scales stay in (-1, 1). Heads start at zero, making
// the layer an identity at initialization.
struct CouplingLayer {
  Tensor mask;            // [d], 1 = pass-through
  Tensor one_minus_mask;  // [d]
  Tensor w1, b1;          // d -> width
  Tensor w2, b2;          // width -> width
  Tensor ws, bs;          // width -> d, scale head
  Tensor wt, bt;          // width -> d, shift head
};

struct FlowStep {
  ActNormLayer actnorm;
  CouplingLayer coupling;
};

// Per-row value plus per-row log-det of the applied map, both tape vars.
struct VarWithLogDet {
  Var value;    // [B, d]
  Var log_det;  // [B, 1]
};

// Invertible map x = g(z) with latent dimension equal to data dimension and
// standard-normal prior. One step, in the normalizing direction (x toward z),
// is actnorm -> coordinate reversal -> coupling; generation inverts the steps
// in reverse order. Both directions and their exact log-dets are available as
// tape graphs, so gradients flow to parameters, to z, or to x as needed.
class FlowModel {
 public:
  FlowModel() = default;
  explicit FlowModel(FlowConfig cfg);

  const FlowConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.dim; }

  // Canonical parameter order: per step, actnorm (log_scale, bias) then
  // coupling (w1, b1, w2, b2, ws, bs, wt, bt).
  std::vector<NamedParam> params();

  // Visits (name, tensor) in canonical order; shared by params() and bind().
  template <class F>
  void for_each_param(F&& f) const {
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      const std::string p = "flow.s" + std::to_string(i);
      const FlowStep& st = steps_[i];
      f(p + ".actnorm.log_scale", st.actnorm.log_scale);
      f(p + ".actnorm.bias", st.actnorm.bias);
      f(p + ".coupling.w1", st.coupling.w1);
      f(p + ".coupling.b1", st.coupling.b1);
      f(p + ".coupling.w2", st.coupling.w2);
      f(p + ".coupling.b2", st.coupling.b2);
      f(p + ".coupling.ws", st.coupling.ws);
      f(p + ".coupling.bs", st.coupling.bs);
      f(p + ".coupling.wt", st.coupling.wt);
      f(p + ".coupling.bt", st.coupling.bt);
    }
  }

  void init_weights(Rng& rng);

  // Data-dependent actnorm initialization; runs the normalizing pass once,
  // setting each actnorm so its output on this batch is standardized.
  void init_actnorm(const Tensor& x);
  bool actnorm_ready() const { return actnorm_ready_; }
  void mark_actnorm_ready() { actnorm_ready_ = true; }

  // Tape graphs. vars aligns with params(); inputs are [B, dim].
  Var forward_t(Tape& tape, const std::vector<Var>& vars, Var z) const;
  VarWithLogDet forward_logdet_t(Tape& tape, const std::vector<Var>& vars,
                                 Var z) const;
  VarWithLogDet inverse_t(Tape& tape, const std::vector<Var>& vars,
                          Var x) const;
  // log q(x) per row: prior log-density at g^-1(x) plus the inverse log-det.
  Var log_prob_t(Tape& tape, const std::vector<Var>& vars, Var x) const;

  // Leafs all parameters onto a tape in canonical order.
  std::vector<Var> bind(Tape& tape, bool requires_grad) const;

  // Plain evaluation (internally a throwaway tape, so values match the tape
  // graphs bitwise).
  Tensor forward(const Tensor& z) const;
  std::pair<Tensor, Tensor> inverse(const Tensor& x) const;  // z, log_det [B,1]
  Tensor log_prob(const Tensor& x) const;                    // [B,1]
  std::pair<Tensor, Tensor> sample(std::size_t count, Rng& rng) const;  // z, x

 private:
  FlowConfig cfg_;
  std::vector<FlowStep> steps_;
  std::vector<std::size_t> reverse_perm_;
  bool actnorm_ready_ = false;
};

// Per-row log N(z; 0, I) as a tape graph; z is [B, d], result [B, 1].
Var std_normal_logp_rows(Tape& tape, Var z);

// Draws count x dim i.i.d. standard normals.
Tensor std_normal_batch(std::size_t count, std::size_t dim, Rng& rng);

// Uniform-with-replacement minibatch of dataset rows.
Tensor sample_rows(const Tensor& data, std::size_t count, Rng& rng);

struct FlowTrainConfig {
  std::size_t iterations = 5000;
  std::size_t batch_size = 256;
  AdamConfig adam{1e-3, 0.99, 0.999, 1e-8, 0.0};
};

struct FlowTrainResult {
  std::vector<double> nll_trace;  // one entry per iteration
};

// Minibatch MLE on rows of dataset, uniform with replacement. Performs the
// actnorm data initialization on the first minibatch if still pending.
FlowTrainResult train_flow_mle(FlowModel& model, const Tensor& dataset,
                               const FlowTrainConfig& cfg, Rng& rng);

}  // namespace febm
