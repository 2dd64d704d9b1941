#include "febm/optim.hpp"

#include <cmath>

#include "febm/errors.hpp"

namespace febm {

Adam::Adam(AdamConfig cfg, const std::vector<NamedParam>& params) : cfg_(cfg) {
  if (cfg_.learning_rate <= 0.0) throw DomainError("Adam: learning_rate must be positive");
  if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0) throw DomainError("Adam: beta1 out of [0,1)");
  if (cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0) throw DomainError("Adam: beta2 out of [0,1)");
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const NamedParam& p : params) {
    m_.push_back(Tensor::zeros(p.value->shape()));
    v_.push_back(Tensor::zeros(p.value->shape()));
  }
}

void Adam::step(const std::vector<NamedParam>& params,
                const std::vector<Tensor>& grads) {
  if (params.size() != m_.size())
    throw ShapeError("Adam::step: parameter list changed since construction");
  if (grads.size() != params.size())
    throw ShapeError("Adam::step: got " + std::to_string(grads.size()) +
                     " gradients for " + std::to_string(params.size()) + " parameters");
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].value;
    const Tensor& g = grads[i];
    if (!p.same_shape(m_[i]))
      throw ShapeError("Adam::step: parameter '" + params[i].name + "' changed shape");
    const std::string what = "Adam::step gradient for '" + params[i].name + "'";
    require_same_shape(g, p, what.c_str());
    require_finite(g, what.c_str());
    double* pd = p.data();
    double* md = m_[i].data();
    double* vd = v_[i].data();
    const double* gd = g.data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = gd[k] + cfg_.weight_decay * pd[k];
      md[k] = cfg_.beta1 * md[k] + (1.0 - cfg_.beta1) * gk;
      vd[k] = cfg_.beta2 * vd[k] + (1.0 - cfg_.beta2) * gk * gk;
      const double mhat = md[k] / bc1;
      const double vhat = vd[k] / bc2;
      pd[k] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  if (max_norm <= 0.0) throw DomainError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const Tensor& g : grads)
    for (std::size_t k = 0; k < g.size(); ++k) sq += g.data()[k] * g.data()[k];
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (Tensor& g : grads)
      for (std::size_t k = 0; k < g.size(); ++k) g.data()[k] *= scale;
  }
  return norm;
}

}  // namespace febm
