#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "febm/tensor.hpp"

namespace febm {

class Tape;

// Handle to a tape node. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Gradients of one backward pass, keyed by leaf handle.
class GradientMap {
 public:
  const Tensor& at(Var v) const;
  bool contains(Var v) const { return grads_.count(v.id) != 0; }

 private:
  friend class Tape;
  std::unordered_map<int, Tensor> grads_;
};

// Define-by-run tape. Records every op of a forward pass; backward() walks
// the record once in reverse creation order (reverse topological order for a
// define-by-run DAG) and returns d(root)/d(leaf) for each differentiable
// leaf. A tape is single-threaded and is consumed by backward().
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);

  const Tensor& value(Var v) const;
  std::size_t num_nodes() const { return nodes_.size(); }

  // Gradient of a scalar root with respect to every differentiable leaf.
  // Leaves the root does not depend on get zero gradients.
  GradientMap backward(Var root);

 private:
  enum class Op : std::uint8_t {
    Leaf,
    Add,
    Sub,
    Mul,
    MatMul,
    Scale,
    AddScalar,
    Neg,
    Exp,
    Log,
    Tanh,
    Sigmoid,
    Softplus,
    LogSigmoid,
    LipSwish,
    Sum,
    Mean,
    RowSum,
    SquareNorm,
    PermuteCols,
  };

  struct Node {
    Op op = Op::Leaf;
    int a = -1;
    int b = -1;
    double scalar = 0.0;
    std::vector<std::size_t> perm;  // PermuteCols only
    Tensor value;
    bool needs_grad = false;
    bool requires_grad = false;  // leaves only
  };

  int push(Node n);
  Var unary(Op op, Var a, double scalar = 0.0);
  Var binary(Op op, Var a, Var b);
  void check_tape(Var v, const char* op) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;

  friend Var add(Var, Var);
  friend Var sub(Var, Var);
  friend Var mul(Var, Var);
  friend Var matmul(Var, Var);
  friend Var scale(Var, double);
  friend Var add_scalar(Var, double);
  friend Var neg(Var);
  friend Var exp(Var);
  friend Var log(Var);
  friend Var tanh(Var);
  friend Var sigmoid(Var);
  friend Var softplus(Var);
  friend Var log_sigmoid(Var);
  friend Var lipswish(Var);
  friend Var sum(Var);
  friend Var mean(Var);
  friend Var row_sum(Var);
  friend Var square_norm(Var);
  friend Var permute_cols(Var, const std::vector<std::size_t>&);
};

// Elementwise binary ops. Shapes must match, or the right operand may be a
// rank-1 vector broadcast across the rows of a rank-2 left operand (the only
// broadcast supported: over the leading batch extent).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

// (B,m) x (m,n) -> (B,n).
Var matmul(Var a, Var b);

Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var neg(Var a);

Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var log_sigmoid(Var a);
Var lipswish(Var a);

Var sum(Var a);
Var mean(Var a);
// (B,d) -> (B,1).
Var row_sum(Var a);
// Scalar sum of squares.
Var square_norm(Var a);
// out[:,j] = a[:,perm[j]].
Var permute_cols(Var a, const std::vector<std::size_t>& perm);

// x @ W + b with b broadcast across rows.
inline Var affine(Var x, Var w, Var b) { return add(matmul(x, w), b); }

// Stable scalar helpers shared by kernels and plain (off-tape) code.
double sigmoid_scalar(double x);
double softplus_scalar(double x);
double log_sigmoid_scalar(double x);
double lipswish_scalar(double x);

}  // namespace febm
