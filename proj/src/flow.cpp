#include "febm/flow.hpp"

#include <cmath>
#include <numbers>

#include "febm/errors.hpp"
#include "febm/nn.hpp"

namespace febm {

Tensor sample_rows(const Tensor& data, std::size_t count, Rng& rng) {
  if (data.rank() != 2) throw ShapeError("sample_rows: expected [rows, cols]");
  if (count < 1) throw ShapeError("sample_rows: count must be >= 1");
  const std::size_t cols = data.cols();
  Tensor out = Tensor::zeros({count, cols});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t r = rng.uniform_index(data.rows());
    const double* src = data.row_ptr(r);
    double* dst = out.row_ptr(i);
    for (std::size_t j = 0; j < cols; ++j) dst[j] = src[j];
  }
  return out;
}

FlowConfig flow_preset(const std::string& name) {
  FlowConfig cfg;
  if (name == "small") {
    cfg.depth = 4;
    cfg.hidden_width = 128;
  } else if (name == "medium") {
    cfg.depth = 8;
    cfg.hidden_width = 128;
  } else if (name == "large") {
    cfg.depth = 16;
    cfg.hidden_width = 256;
  } else {
    throw ConfigError("unknown flow preset '" + name +
                      "' (expected small, medium or large)");
  }
  return cfg;
}

FlowModel::FlowModel(FlowConfig cfg) : cfg_(cfg) {
  if (cfg_.dim < 1) throw ShapeError("FlowModel: dim must be >= 1");
  if (cfg_.hidden_width < 1) throw ShapeError("FlowModel: hidden_width must be >= 1");
  const std::size_t d = cfg_.dim;
  const std::size_t w = cfg_.hidden_width;
  reverse_perm_.resize(d);
  for (std::size_t j = 0; j < d; ++j) reverse_perm_[j] = d - 1 - j;
  steps_.resize(cfg_.depth);
  for (std::size_t i = 0; i < cfg_.depth; ++i) {
    FlowStep& st = steps_[i];
    st.actnorm.log_scale = Tensor::zeros({d});
    st.actnorm.bias = Tensor::zeros({d});
    CouplingLayer& c = st.coupling;
    c.mask = Tensor::zeros({d});
    c.one_minus_mask = Tensor::zeros({d});
    for (std::size_t j = 0; j < d; ++j) {
      const bool pass = (j % 2 == i % 2);
      c.mask[j] = pass ? 1.0 : 0.0;
      c.one_minus_mask[j] = pass ? 0.0 : 1.0;
    }
    c.w1 = Tensor::zeros({d, w});
    c.b1 = Tensor::zeros({w});
    c.w2 = Tensor::zeros({w, w});
    c.b2 = Tensor::zeros({w});
    c.ws = Tensor::zeros({w, d});
    c.bs = Tensor::zeros({d});
    c.wt = Tensor::zeros({w, d});
    c.bt = Tensor::zeros({d});
  }
}

std::vector<NamedParam> FlowModel::params() {
  std::vector<NamedParam> out;
  for_each_param([&](const std::string& name, const Tensor& t) {
    out.push_back({name, const_cast<Tensor*>(&t)});
  });
  return out;
}

std::vector<Var> FlowModel::bind(Tape& tape, bool requires_grad) const {
  std::vector<Var> out;
  for_each_param([&](const std::string&, const Tensor& t) {
    out.push_back(tape.leaf(t, requires_grad));
  });
  return out;
}

void FlowModel::init_weights(Rng& rng) {
  for (FlowStep& st : steps_) {
    CouplingLayer& c = st.coupling;
    auto xavier = [&](Tensor& w) {
      const double limit =
          std::sqrt(6.0 / static_cast<double>(w.extent(0) + w.extent(1)));
      for (std::size_t k = 0; k < w.size(); ++k)
        w.data()[k] = limit * (2.0 * rng.uniform() - 1.0);
    };
    xavier(c.w1);
    xavier(c.w2);
    // Heads stay zero: every step starts as the identity map.
  }
}

namespace {

struct RangeResult {
  Var value;
  Var log_det;  // invalid when log-det tracking is off
};

}  // namespace

// Steps [first, last) in the normalizing direction x -> z. When ld is null the
// log-det graph is skipped entirely (the latent sampler never needs it).
static RangeResult normalize_range(const FlowModel& model, Tape& tape,
                                   const std::vector<Var>& vars,
                                   const std::vector<FlowStep>& steps,
                                   const std::vector<std::size_t>& rev, Var x,
                                   std::size_t first, std::size_t last,
                                   bool want_ld) {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 2)
    throw ShapeError("FlowModel: expected a [batch, dim] tensor, got " +
                     xv.shape_string());
  if (xv.cols() != model.dim())
    throw ShapeError("FlowModel: input has " + std::to_string(xv.cols()) +
                     " columns, model dim is " + std::to_string(model.dim()));
  Var cur = x;
  Var ld{};
  if (want_ld) ld = tape.leaf(Tensor::zeros({xv.rows(), 1}));
  for (std::size_t i = first; i < last; ++i) {
    const std::size_t o = 10 * i;
    cur = mul(sub(cur, vars[o + 1]), exp(neg(vars[o + 0])));
    if (want_ld) ld = add(ld, sum(neg(vars[o + 0])));
    cur = permute_cols(cur, rev);
    const CouplingLayer& c = steps[i].coupling;
    Var mask_v = tape.leaf(c.mask);
    Var om_v = tape.leaf(c.one_minus_mask);
    Var mx = mul(cur, mask_v);
    Var h1 = tanh(affine(mx, vars[o + 2], vars[o + 3]));
    Var h2 = tanh(affine(h1, vars[o + 4], vars[o + 5]));
    Var s = tanh(affine(h2, vars[o + 6], vars[o + 7]));
    Var t = affine(h2, vars[o + 8], vars[o + 9]);
    cur = add(mx, mul(mul(sub(cur, t), exp(neg(s))), om_v));
    if (want_ld) ld = add(ld, row_sum(mul(neg(s), om_v)));
  }
  return {cur, ld};
}

// Steps [first, last) in the generative direction z -> x (iterated backward).
static RangeResult generate_range(const FlowModel& model, Tape& tape,
                                  const std::vector<Var>& vars,
                                  const std::vector<FlowStep>& steps,
                                  const std::vector<std::size_t>& rev, Var z,
                                  std::size_t first, std::size_t last,
                                  bool want_ld) {
  const Tensor& zv = tape.value(z);
  if (zv.rank() != 2)
    throw ShapeError("FlowModel: expected a [batch, dim] tensor, got " +
                     zv.shape_string());
  if (zv.cols() != model.dim())
    throw ShapeError("FlowModel: input has " + std::to_string(zv.cols()) +
                     " columns, model dim is " + std::to_string(model.dim()));
  Var cur = z;
  Var ld{};
  if (want_ld) ld = tape.leaf(Tensor::zeros({zv.rows(), 1}));
  for (std::size_t i = last; i-- > first;) {
    const std::size_t o = 10 * i;
    const CouplingLayer& c = steps[i].coupling;
    Var mask_v = tape.leaf(c.mask);
    Var om_v = tape.leaf(c.one_minus_mask);
    Var mu = mul(cur, mask_v);
    Var h1 = tanh(affine(mu, vars[o + 2], vars[o + 3]));
    Var h2 = tanh(affine(h1, vars[o + 4], vars[o + 5]));
    Var s = tanh(affine(h2, vars[o + 6], vars[o + 7]));
    Var t = affine(h2, vars[o + 8], vars[o + 9]);
    cur = add(mu, mul(add(mul(cur, exp(s)), t), om_v));
    if (want_ld) ld = add(ld, row_sum(mul(s, om_v)));
    cur = permute_cols(cur, rev);
    cur = add(mul(cur, exp(vars[o + 0])), vars[o + 1]);
    if (want_ld) ld = add(ld, sum(vars[o + 0]));
  }
  return {cur, ld};
}

void FlowModel::init_actnorm(const Tensor& x) {
  if (x.rank() != 2 || x.cols() != cfg_.dim)
    throw ShapeError("init_actnorm: expected [batch, dim] data");
  const std::size_t rows = x.rows();
  Tensor cur = x;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    ActNormLayer& an = steps_[i].actnorm;
    for (std::size_t j = 0; j < cfg_.dim; ++j) {
      double m = 0.0;
      for (std::size_t r = 0; r < rows; ++r) m += cur.at(r, j);
      m /= static_cast<double>(rows);
      double v = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = cur.at(r, j) - m;
        v += d * d;
      }
      v /= static_cast<double>(rows);
      an.bias[j] = m;
      // Constant coordinate: keep unit scale instead of exploding.
      an.log_scale[j] = (v < 1e-12) ? 0.0 : 0.5 * std::log(v);
    }
    Tape tape;
    std::vector<Var> vars = bind(tape, false);
    RangeResult r = normalize_range(*this, tape, vars, steps_, reverse_perm_,
                                    tape.leaf(cur), i, i + 1, false);
    cur = tape.value(r.value);
  }
  actnorm_ready_ = true;
}

Var FlowModel::forward_t(Tape& tape, const std::vector<Var>& vars,
                         Var z) const {
  return generate_range(*this, tape, vars, steps_, reverse_perm_, z, 0,
                        steps_.size(), false)
      .value;
}

VarWithLogDet FlowModel::forward_logdet_t(Tape& tape,
                                          const std::vector<Var>& vars,
                                          Var z) const {
  RangeResult r = generate_range(*this, tape, vars, steps_, reverse_perm_, z,
                                 0, steps_.size(), true);
  return {r.value, r.log_det};
}

VarWithLogDet FlowModel::inverse_t(Tape& tape, const std::vector<Var>& vars,
                                   Var x) const {
  RangeResult r = normalize_range(*this, tape, vars, steps_, reverse_perm_, x,
                                  0, steps_.size(), true);
  return {r.value, r.log_det};
}

Var FlowModel::log_prob_t(Tape& tape, const std::vector<Var>& vars,
                          Var x) const {
  VarWithLogDet inv = inverse_t(tape, vars, x);
  return add(std_normal_logp_rows(tape, inv.value), inv.log_det);
}

Tensor FlowModel::forward(const Tensor& z) const {
  Tape tape;
  std::vector<Var> vars = bind(tape, false);
  Var x = forward_t(tape, vars, tape.leaf(z));
  return tape.value(x);
}

std::pair<Tensor, Tensor> FlowModel::inverse(const Tensor& x) const {
  Tape tape;
  std::vector<Var> vars = bind(tape, false);
  VarWithLogDet r = inverse_t(tape, vars, tape.leaf(x));
  Tensor z = tape.value(r.value);
  Tensor ld = tape.value(r.log_det);
  if (!z.all_finite() || !ld.all_finite())
    throw NumericalError("FlowModel::inverse: non-finite result");
  return {z, ld};
}

Tensor FlowModel::log_prob(const Tensor& x) const {
  Tape tape;
  std::vector<Var> vars = bind(tape, false);
  Var lp = log_prob_t(tape, vars, tape.leaf(x));
  return tape.value(lp);
}

std::pair<Tensor, Tensor> FlowModel::sample(std::size_t count,
                                            Rng& rng) const {
  if (count < 1) throw ShapeError("FlowModel::sample: count must be >= 1");
  Tensor z = std_normal_batch(count, cfg_.dim, rng);
  return {z, forward(z)};
}

Var std_normal_logp_rows(Tape& tape, Var z) {
  const Tensor& zv = tape.value(z);
  if (zv.rank() != 2)
    throw ShapeError("std_normal_logp_rows: expected [batch, dim]");
  const double c =
      -0.5 * static_cast<double>(zv.cols()) * std::log(2.0 * std::numbers::pi);
  return add_scalar(scale(row_sum(mul(z, z)), -0.5), c);
}

Tensor std_normal_batch(std::size_t count, std::size_t dim, Rng& rng) {
  Tensor out = Tensor::zeros({count, dim});
  for (std::size_t k = 0; k < out.size(); ++k) out.data()[k] = rng.normal();
  return out;
}

FlowTrainResult train_flow_mle(FlowModel& model, const Tensor& dataset,
                               const FlowTrainConfig& cfg, Rng& rng) {
  if (dataset.rank() != 2 || dataset.cols() != model.dim())
    throw ShapeError("train_flow_mle: dataset must be [rows, dim]");
  if (cfg.iterations < 1) throw DomainError("train_flow_mle: iterations must be >= 1");
  if (cfg.batch_size < 1) throw DomainError("train_flow_mle: batch_size must be >= 1");
  std::vector<NamedParam> params = model.params();
  Adam opt(cfg.adam, params);
  FlowTrainResult res;
  res.nll_trace.reserve(cfg.iterations);
  for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
    Tensor batch = sample_rows(dataset, cfg.batch_size, rng);
    if (iter == 0 && !model.actnorm_ready()) model.init_actnorm(batch);
    Tape tape;
    Binding bound(tape, params, true);
    Var nll = neg(mean(model.log_prob_t(tape, bound.vars(), tape.leaf(batch))));
    const double loss = tape.value(nll).item();
    if (!std::isfinite(loss))
      throw NumericalError("train_flow_mle: non-finite loss at iteration " +
                           std::to_string(iter));
    GradientMap gm = tape.backward(nll);
    std::vector<Tensor> grads = bound.grads(gm);
    opt.step(params, grads);
    res.nll_trace.push_back(loss);
  }
  return res;
}

}  // namespace febm
