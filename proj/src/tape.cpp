#include "febm/tape.hpp"

#include <cmath>

#include "febm/parallel.hpp"

namespace febm {

const Tensor& Var::value() const { return tape->value(*this); }

const Tensor& GradientMap::at(Var v) const {
  auto it = grads_.find(v.id);
  if (it == grads_.end()) {
    throw Error("GradientMap: no gradient recorded for node " +
                std::to_string(v.id) + " (not a differentiable leaf?)");
  }
  return it->second;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double log_sigmoid_scalar(double x) {
  return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x)));
}

double lipswish_scalar(double x) { return x * sigmoid_scalar(x) / 1.1; }

namespace {

constexpr std::size_t kRowGrain = 16;

// Right operand broadcastable over the rows of the left?
bool row_broadcast(const Tensor& a, const Tensor& b) {
  return a.rank() == 2 && b.rank() == 1 && b.extent(0) == a.extent(1);
}

template <class F>
Tensor ew_binary(const Tensor& a, const Tensor& b, F f, const char* op) {
  if (a.same_shape(b)) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
    return out;
  }
  if (row_broadcast(a, b)) {
    Tensor out = Tensor::zeros(a.shape());
    const std::size_t rows = a.rows(), cols = a.cols();
    const double* pb = b.data();
    parallel_for(
        rows,
        [&](std::size_t i) {
          const double* pa = a.row_ptr(i);
          double* po = out.row_ptr(i);
          for (std::size_t j = 0; j < cols; ++j) po[j] = f(pa[j], pb[j]);
        },
        kRowGrain);
    return out;
  }
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                   " vs " + b.shape_string());
}

template <class F>
Tensor ew_unary(const Tensor& a, F f) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t rows = a.rows(), cols = a.cols();
  parallel_for(
      rows,
      [&](std::size_t i) {
        const double* pa = a.data() + i * cols;
        double* po = out.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) po[j] = f(pa[j]);
      },
      kRowGrain);
  return out;
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  const std::size_t rows = a.extent(0), inner = a.extent(1), cols = b.extent(1);
  Tensor out = Tensor::zeros({rows, cols});
  parallel_for(
      rows,
      [&](std::size_t i) {
        const double* pa = a.row_ptr(i);
        double* po = out.row_ptr(i);
        for (std::size_t k = 0; k < inner; ++k) {
          const double aik = pa[k];
          const double* pb = b.row_ptr(k);
          for (std::size_t j = 0; j < cols; ++j) po[j] += aik * pb[j];
        }
      },
      kRowGrain);
  return out;
}

// acc[i,j] += g[i,j] * f(input values); row-partitioned, fixed inner order.
template <class F>
void accumulate_rows(Tensor& acc, const Tensor& g, F f) {
  const std::size_t rows = acc.rows(), cols = acc.cols();
  parallel_for(
      rows,
      [&](std::size_t i) {
        double* pacc = acc.data() + i * cols;
        const double* pg = g.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) pacc[j] += pg[j] * f(i * cols + j);
      },
      kRowGrain);
}

}  // namespace

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.needs_grad = requires_grad;
  return Var{this, push(std::move(n))};
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Tensor& Tape::value(Var v) const {
  check_tape(v, "value");
  return nodes_[static_cast<std::size_t>(v.id)].value;
}

void Tape::check_tape(Var v, const char* op) const {
  if (v.tape != this || v.id < 0 ||
      v.id >= static_cast<int>(nodes_.size())) {
    throw Error(std::string(op) + ": Var does not belong to this tape");
  }
}

Var Tape::unary(Op op, Var a, double scalar) {
  check_tape(a, "unary op");
  const Tensor& av = nodes_[a.id].value;
  Node n;
  n.op = op;
  n.a = a.id;
  n.scalar = scalar;
  n.needs_grad = nodes_[a.id].needs_grad;
  switch (op) {
    case Op::Scale:
      n.value = ew_unary(av, [scalar](double x) { return x * scalar; });
      break;
    case Op::AddScalar:
      n.value = ew_unary(av, [scalar](double x) { return x + scalar; });
      break;
    case Op::Neg:
      n.value = ew_unary(av, [](double x) { return -x; });
      break;
    case Op::Exp:
      n.value = ew_unary(av, [](double x) { return std::exp(x); });
      break;
    case Op::Log: {
      for (std::size_t i = 0; i < av.size(); ++i) {
        if (!(av.data()[i] > 0.0)) {
          throw DomainError("log: non-positive input");
        }
      }
      n.value = ew_unary(av, [](double x) { return std::log(x); });
      break;
    }
    case Op::Tanh:
      n.value = ew_unary(av, [](double x) { return std::tanh(x); });
      break;
    case Op::Sigmoid:
      n.value = ew_unary(av, sigmoid_scalar);
      break;
    case Op::Softplus:
      n.value = ew_unary(av, softplus_scalar);
      break;
    case Op::LogSigmoid:
      n.value = ew_unary(av, log_sigmoid_scalar);
      break;
    case Op::LipSwish:
      n.value = ew_unary(av, lipswish_scalar);
      break;
    case Op::Sum: {
      double s = 0.0;
      for (std::size_t i = 0; i < av.size(); ++i) s += av.data()[i];
      n.value = Tensor::scalar(s);
      break;
    }
    case Op::Mean: {
      double s = 0.0;
      for (std::size_t i = 0; i < av.size(); ++i) s += av.data()[i];
      n.value = Tensor::scalar(s / static_cast<double>(av.size()));
      break;
    }
    case Op::SquareNorm: {
      double s = 0.0;
      for (std::size_t i = 0; i < av.size(); ++i) {
        s += av.data()[i] * av.data()[i];
      }
      n.value = Tensor::scalar(s);
      break;
    }
    case Op::RowSum: {
      if (av.rank() != 2) throw ShapeError("row_sum: rank-2 tensor required");
      const std::size_t rows = av.rows(), cols = av.cols();
      Tensor out = Tensor::zeros({rows, 1});
      parallel_for(
          rows,
          [&](std::size_t i) {
            const double* p = av.row_ptr(i);
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) s += p[j];
            out[i] = s;
          },
          kRowGrain);
      n.value = std::move(out);
      break;
    }
    default:
      throw Error("unary: bad op");
  }
  return Var{this, push(std::move(n))};
}

Var Tape::binary(Op op, Var a, Var b) {
  check_tape(a, "binary op");
  check_tape(b, "binary op");
  const Tensor& av = nodes_[a.id].value;
  const Tensor& bv = nodes_[b.id].value;
  Node n;
  n.op = op;
  n.a = a.id;
  n.b = b.id;
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  switch (op) {
    case Op::Add:
      n.value = ew_binary(av, bv, [](double x, double y) { return x + y; }, "add");
      break;
    case Op::Sub:
      n.value = ew_binary(av, bv, [](double x, double y) { return x - y; }, "sub");
      break;
    case Op::Mul:
      n.value = ew_binary(av, bv, [](double x, double y) { return x * y; }, "mul");
      break;
    case Op::MatMul: {
      if (av.rank() != 2 || bv.rank() != 2 || av.extent(1) != bv.extent(0)) {
        throw ShapeError("matmul: shape mismatch " + av.shape_string() +
                         " x " + bv.shape_string());
      }
      n.value = matmul_values(av, bv);
      break;
    }
    default:
      throw Error("binary: bad op");
  }
  return Var{this, push(std::move(n))};
}

GradientMap Tape::backward(Var root) {
  check_tape(root, "backward");
  if (consumed_) throw Error("backward: tape already consumed");
  if (nodes_[root.id].value.size() != 1) {
    throw ShapeError("backward: root must be scalar, got shape " +
                     nodes_[root.id].value.shape_string());
  }
  consumed_ = true;

  std::vector<Tensor> grads(static_cast<std::size_t>(root.id) + 1);
  auto grad_of = [&](int id) -> Tensor& {
    Tensor& g = grads[static_cast<std::size_t>(id)];
    if (g.empty()) g = Tensor::zeros(nodes_[id].value.shape());
    return g;
  };

  if (nodes_[root.id].needs_grad) {
    grad_of(root.id)[0] = 1.0;

    for (int id = root.id; id >= 0; --id) {
      const Node& node = nodes_[static_cast<std::size_t>(id)];
      if (!node.needs_grad || grads[static_cast<std::size_t>(id)].empty()) {
        continue;
      }
      const Tensor& g = grads[static_cast<std::size_t>(id)];
      const bool need_a = node.a >= 0 && nodes_[node.a].needs_grad;
      const bool need_b = node.b >= 0 && nodes_[node.b].needs_grad;
      if (node.op != Op::Leaf && !need_a && !need_b) continue;

      switch (node.op) {
        case Op::Leaf:
          break;
        case Op::Add:
        case Op::Sub: {
          const double bsign = node.op == Op::Add ? 1.0 : -1.0;
          if (need_a) {
            Tensor& da = grad_of(node.a);
            for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i];
          }
          if (need_b) {
            Tensor& db = grad_of(node.b);
            if (db.same_shape(g)) {
              for (std::size_t i = 0; i < db.size(); ++i) {
                db[i] += bsign * g[i];
              }
            } else {  // broadcast: reduce over rows
              const std::size_t rows = g.rows(), cols = g.cols();
              for (std::size_t j = 0; j < cols; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < rows; ++i) s += g.at(i, j);
                db[j] += bsign * s;
              }
            }
          }
          break;
        }
        case Op::Mul: {
          const Tensor& av = nodes_[node.a].value;
          const Tensor& bv = nodes_[node.b].value;
          if (need_a) {
            Tensor& da = grad_of(node.a);
            if (av.same_shape(bv)) {
              accumulate_rows(da, g, [&](std::size_t i) { return bv[i]; });
            } else {
              const std::size_t cols = av.cols();
              accumulate_rows(da, g,
                              [&](std::size_t i) { return bv[i % cols]; });
            }
          }
          if (need_b) {
            Tensor& db = grad_of(node.b);
            if (av.same_shape(bv)) {
              accumulate_rows(db, g, [&](std::size_t i) { return av[i]; });
            } else {
              const std::size_t rows = g.rows(), cols = g.cols();
              for (std::size_t j = 0; j < cols; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < rows; ++i) {
                  s += g.at(i, j) * av.at(i, j);
                }
                db[j] += s;
              }
            }
          }
          break;
        }
        case Op::MatMul: {
          const Tensor& av = nodes_[node.a].value;
          const Tensor& bv = nodes_[node.b].value;
          const std::size_t rows = av.extent(0), inner = av.extent(1),
                            cols = bv.extent(1);
          if (need_a) {  // da = g @ b^T
            Tensor& da = grad_of(node.a);
            parallel_for(
                rows,
                [&](std::size_t i) {
                  const double* pg = g.row_ptr(i);
                  double* pda = da.row_ptr(i);
                  for (std::size_t k = 0; k < inner; ++k) {
                    const double* pb = bv.row_ptr(k);
                    double s = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) s += pg[j] * pb[j];
                    pda[k] += s;
                  }
                },
                kRowGrain);
          }
          if (need_b) {  // db = a^T @ g
            Tensor& db = grad_of(node.b);
            parallel_for(
                inner,
                [&](std::size_t k) {
                  double* pdb = db.row_ptr(k);
                  for (std::size_t i = 0; i < rows; ++i) {
                    const double aik = av.at(i, k);
                    const double* pg = g.row_ptr(i);
                    for (std::size_t j = 0; j < cols; ++j) {
                      pdb[j] += aik * pg[j];
                    }
                  }
                },
                kRowGrain);
          }
          break;
        }
        case Op::Scale: {
          Tensor& da = grad_of(node.a);
          const double c = node.scalar;
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += c * g[i];
          break;
        }
        case Op::AddScalar: {
          Tensor& da = grad_of(node.a);
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += g[i];
          break;
        }
        case Op::Neg: {
          Tensor& da = grad_of(node.a);
          for (std::size_t i = 0; i < da.size(); ++i) da[i] -= g[i];
          break;
        }
        case Op::Exp: {
          const Tensor& y = node.value;
          accumulate_rows(grad_of(node.a), g,
                          [&](std::size_t i) { return y[i]; });
          break;
        }
        case Op::Log: {
          const Tensor& av = nodes_[node.a].value;
          accumulate_rows(grad_of(node.a), g,
                          [&](std::size_t i) { return 1.0 / av[i]; });
          break;
        }
        case Op::Tanh: {
          const Tensor& y = node.value;
          accumulate_rows(grad_of(node.a), g,
                          [&](std::size_t i) { return 1.0 - y[i] * y[i]; });
          break;
        }
        case Op::Sigmoid: {
          const Tensor& y = node.value;
          accumulate_rows(grad_of(node.a), g, [&](std::size_t i) {
            return y[i] * (1.0 - y[i]);
          });
          break;
        }
        case Op::Softplus: {
          const Tensor& av = nodes_[node.a].value;
          accumulate_rows(grad_of(node.a), g, [&](std::size_t i) {
            return sigmoid_scalar(av[i]);
          });
          break;
        }
        case Op::LogSigmoid: {
          const Tensor& av = nodes_[node.a].value;
          accumulate_rows(grad_of(node.a), g, [&](std::size_t i) {
            return sigmoid_scalar(-av[i]);
          });
          break;
        }
        case Op::LipSwish: {
          const Tensor& av = nodes_[node.a].value;
          accumulate_rows(grad_of(node.a), g, [&](std::size_t i) {
            const double s = sigmoid_scalar(av[i]);
            return (s + av[i] * s * (1.0 - s)) / 1.1;
          });
          break;
        }
        case Op::Sum: {
          Tensor& da = grad_of(node.a);
          const double gv = g[0];
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += gv;
          break;
        }
        case Op::Mean: {
          Tensor& da = grad_of(node.a);
          const double gv = g[0] / static_cast<double>(da.size());
          for (std::size_t i = 0; i < da.size(); ++i) da[i] += gv;
          break;
        }
        case Op::SquareNorm: {
          const Tensor& av = nodes_[node.a].value;
          Tensor& da = grad_of(node.a);
          const double gv = g[0];
          for (std::size_t i = 0; i < da.size(); ++i) {
            da[i] += 2.0 * gv * av[i];
          }
          break;
        }
        case Op::RowSum: {
          Tensor& da = grad_of(node.a);
          const std::size_t rows = da.rows(), cols = da.cols();
          parallel_for(
              rows,
              [&](std::size_t i) {
                double* p = da.row_ptr(i);
                const double gv = g[i];
                for (std::size_t j = 0; j < cols; ++j) p[j] += gv;
              },
              kRowGrain);
          break;
        }
        case Op::PermuteCols: {
          Tensor& da = grad_of(node.a);
          const std::size_t rows = g.rows(), cols = g.cols();
          parallel_for(
              rows,
              [&](std::size_t i) {
                double* pda = da.row_ptr(i);
                const double* pg = g.row_ptr(i);
                for (std::size_t j = 0; j < cols; ++j) {
                  pda[node.perm[j]] += pg[j];
                }
              },
              kRowGrain);
          break;
        }
      }
    }
  }

  GradientMap out;
  for (int id = 0; id <= root.id; ++id) {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.op == Op::Leaf && node.requires_grad) {
      Tensor& g = grads[static_cast<std::size_t>(id)];
      out.grads_.emplace(id, g.empty() ? Tensor::zeros(node.value.shape())
                                       : std::move(g));
    }
  }
  // Leaves created after the root still deserve zero gradients.
  for (std::size_t id = static_cast<std::size_t>(root.id) + 1;
       id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.op == Op::Leaf && node.requires_grad) {
      out.grads_.emplace(static_cast<int>(id),
                         Tensor::zeros(node.value.shape()));
    }
  }
  return out;
}

Var add(Var a, Var b) { return a.tape->binary(Tape::Op::Add, a, b); }
Var sub(Var a, Var b) { return a.tape->binary(Tape::Op::Sub, a, b); }
Var mul(Var a, Var b) { return a.tape->binary(Tape::Op::Mul, a, b); }
Var matmul(Var a, Var b) { return a.tape->binary(Tape::Op::MatMul, a, b); }
Var scale(Var a, double c) { return a.tape->unary(Tape::Op::Scale, a, c); }
Var add_scalar(Var a, double c) {
  return a.tape->unary(Tape::Op::AddScalar, a, c);
}
Var neg(Var a) { return a.tape->unary(Tape::Op::Neg, a); }
Var exp(Var a) { return a.tape->unary(Tape::Op::Exp, a); }
Var log(Var a) { return a.tape->unary(Tape::Op::Log, a); }
Var tanh(Var a) { return a.tape->unary(Tape::Op::Tanh, a); }
Var sigmoid(Var a) { return a.tape->unary(Tape::Op::Sigmoid, a); }
Var softplus(Var a) { return a.tape->unary(Tape::Op::Softplus, a); }
Var log_sigmoid(Var a) { return a.tape->unary(Tape::Op::LogSigmoid, a); }
Var lipswish(Var a) { return a.tape->unary(Tape::Op::LipSwish, a); }
Var sum(Var a) { return a.tape->unary(Tape::Op::Sum, a); }
Var mean(Var a) { return a.tape->unary(Tape::Op::Mean, a); }
Var row_sum(Var a) { return a.tape->unary(Tape::Op::RowSum, a); }
Var square_norm(Var a) { return a.tape->unary(Tape::Op::SquareNorm, a); }

Var permute_cols(Var a, const std::vector<std::size_t>& perm) {
  Tape* t = a.tape;
  t->check_tape(a, "permute_cols");
  const Tensor& av = t->nodes_[a.id].value;
  if (av.rank() != 2 || perm.size() != av.extent(1)) {
    throw ShapeError("permute_cols: permutation length " +
                     std::to_string(perm.size()) + " vs tensor " +
                     av.shape_string());
  }
  Tape::Node n;
  n.op = Tape::Op::PermuteCols;
  n.a = a.id;
  n.perm = perm;
  n.needs_grad = t->nodes_[a.id].needs_grad;
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out = Tensor::zeros(av.shape());
  for (std::size_t i = 0; i < rows; ++i) {
    const double* pa = av.row_ptr(i);
    double* po = out.row_ptr(i);
    for (std::size_t j = 0; j < cols; ++j) po[j] = pa[perm[j]];
  }
  n.value = std::move(out);
  return Var{t, t->push(std::move(n))};
}

}  // namespace febm
