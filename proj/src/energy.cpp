#include "febm/energy.hpp"

#include <cmath>
#include <numbers>

#include "febm/errors.hpp"

namespace febm {

void StdNormalDensity::logp_grad(const Tensor& z, Tensor* logp,
                                 Tensor* grad) const {
  if (z.rank() != 2 || z.cols() != dim_)
    throw ShapeError("StdNormalDensity: expected [batch, dim]");
  const std::size_t rows = z.rows();
  if (logp) {
    const double c =
        -0.5 * static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi);
    Tensor lp = Tensor::zeros({rows, 1});
    for (std::size_t i = 0; i < rows; ++i) {
      const double* p = z.row_ptr(i);
      double sq = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) sq += p[j] * p[j];
      lp[i] = c - 0.5 * sq;
    }
    *logp = std::move(lp);
  }
  if (grad) {
    Tensor g = Tensor::zeros(z.shape());
    for (std::size_t k = 0; k < z.size(); ++k) g.data()[k] = -z.data()[k];
    *grad = std::move(g);
  }
}

EnergyModel::EnergyModel(EnergyConfig cfg) : cfg_(cfg) {
  if (cfg_.dim < 1) throw ShapeError("EnergyModel: dim must be >= 1");
  std::vector<std::size_t> widths;
  widths.push_back(cfg_.dim);
  for (std::size_t i = 0; i < cfg_.hidden_layers; ++i)
    widths.push_back(cfg_.hidden_width);
  widths.push_back(1);
  net_ = Mlp(widths, Activation::LipSwish);
}

void EnergyModel::init_weights(Rng& rng) {
  net_.init_xavier(rng);
  net_.zero_last_layer();
}

std::vector<NamedParam> EnergyModel::params() { return net_.params("energy"); }

std::vector<Var> EnergyModel::bind(Tape& tape, bool requires_grad) const {
  std::vector<Var> out;
  for (const DenseLayer& layer : net_.layers()) {
    out.push_back(tape.leaf(layer.w, requires_grad));
    out.push_back(tape.leaf(layer.b, requires_grad));
  }
  return out;
}

Var EnergyModel::value_t(Tape& tape, const std::vector<Var>& vars,
                         Var x) const {
  const Tensor& xv = tape.value(x);
  if (xv.rank() != 2 || xv.cols() != cfg_.dim)
    throw ShapeError("EnergyModel: expected [batch, " +
                     std::to_string(cfg_.dim) + "], got " + xv.shape_string());
  return net_.forward(vars, x);
}

Tensor EnergyModel::value(const Tensor& x) const {
  Tape tape;
  std::vector<Var> vars = bind(tape, false);
  Var f = value_t(tape, vars, tape.leaf(x));
  Tensor out = tape.value(f);
  if (!out.all_finite())
    throw NumericalError("EnergyModel::value: non-finite output");
  return out;
}

TiltedModel::TiltedModel(const FlowModel& flow, const EnergyModel& energy)
    : flow_(&flow), energy_(&energy) {
  if (flow.dim() != energy.dim())
    throw ShapeError("TiltedModel: flow dim " + std::to_string(flow.dim()) +
                     " != energy dim " + std::to_string(energy.dim()));
}

Var TiltedModel::log_p_z_unnorm_t(Tape& tape, const std::vector<Var>& fvars,
                                  const std::vector<Var>& evars, Var z) const {
  Var x = flow_->forward_t(tape, fvars, z);
  Var f = energy_->value_t(tape, evars, x);
  return add(f, std_normal_logp_rows(tape, z));
}

Var TiltedModel::log_p_x_unnorm_t(Tape& tape, const std::vector<Var>& fvars,
                                  const std::vector<Var>& evars, Var x) const {
  Var f = energy_->value_t(tape, evars, x);
  return add(f, flow_->log_prob_t(tape, fvars, x));
}

Tensor TiltedModel::log_p_z_unnorm(const Tensor& z) const {
  Tape tape;
  Var rows = log_p_z_unnorm_t(tape, flow_->bind(tape, false),
                              energy_->bind(tape, false), tape.leaf(z));
  Tensor out = tape.value(rows);
  if (!out.all_finite())
    throw NumericalError("TiltedModel::log_p_z_unnorm: non-finite output");
  return out;
}

Tensor TiltedModel::log_p_x_unnorm(const Tensor& x) const {
  Tape tape;
  Var rows = log_p_x_unnorm_t(tape, flow_->bind(tape, false),
                              energy_->bind(tape, false), tape.leaf(x));
  Tensor out = tape.value(rows);
  if (!out.all_finite())
    throw NumericalError("TiltedModel::log_p_x_unnorm: non-finite output");
  return out;
}

Tensor TiltedModel::grad_z_log_p(const Tensor& z) const {
  Tape tape;
  Var zv = tape.leaf(z, true);
  Var rows = log_p_z_unnorm_t(tape, flow_->bind(tape, false),
                              energy_->bind(tape, false), zv);
  GradientMap gm = tape.backward(sum(rows));
  Tensor g = gm.at(zv);
  if (!g.all_finite())
    throw NumericalError("TiltedModel::grad_z_log_p: non-finite gradient");
  return g;
}

void LatentTiltedDensity::logp_grad(const Tensor& z, Tensor* logp,
                                    Tensor* grad) const {
  Tape tape;
  Var zv = tape.leaf(z, grad != nullptr);
  Var rows = model_->log_p_z_unnorm_t(tape, model_->flow().bind(tape, false),
                                      model_->energy().bind(tape, false), zv);
  if (logp) *logp = tape.value(rows);
  if (grad) *grad = tape.backward(sum(rows)).at(zv);
}

void DataTiltedDensity::logp_grad(const Tensor& x, Tensor* logp,
                                  Tensor* grad) const {
  Tape tape;
  Var xv = tape.leaf(x, grad != nullptr);
  Var rows = model_->log_p_x_unnorm_t(tape, model_->flow().bind(tape, false),
                                      model_->energy().bind(tape, false), xv);
  if (logp) *logp = tape.value(rows);
  if (grad) *grad = tape.backward(sum(rows)).at(xv);
}

}  // namespace febm
