#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <unordered_map>
#include <vector>

#include "gtp/matrix.hpp"
#include "gtp/params.hpp"

namespace gtp {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Append-only record of primitive ops. Node order is a topological order,
// so backward() simply walks it in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Leaf bound to a parameter. Repeated calls for the same parameter return
  // the same node; backward() adds the node gradient into Parameter::grad.
  Var param(Parameter& p);
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn);

  // Seeds d(root)/d(root) = 1 and propagates. Root must be 1x1.
  void backward(Var root);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Zero-initialized on first use. Only meaningful when requires_grad(id).
  Matrix& grad_slot(std::size_t id);
  void accumulate(std::size_t id, const Matrix& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> param_nodes_;
  Matrix empty_grad_;
};

// Differentiable primitives. All inputs must live on the same tape.
namespace ad {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// a (n x c) + row vector b (1 x c) broadcast over rows.
Var add_row(Var a, Var b);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);

Var sum(Var a);
Var sum_squares(Var a);
Var mean_rows(Var a);
Var reshape(Var a, std::size_t rows, std::size_t cols);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var element(Var a, std::size_t r, std::size_t c);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(Var table, std::span<const std::size_t> ids);

Var softmax_rows(Var a, double temperature = 1.0);
Var log_softmax_rows(Var a);
// Mean token cross-entropy of row-wise logits against target ids; rows whose
// target equals ignore_id are masked out.
Var cross_entropy(Var logits, std::span<const std::size_t> targets, std::size_t ignore_id);
// Cosine similarity of the flattened inputs, 1x1. Throws ZeroNormError.
Var cosine(Var u, Var v);

// x: T x C (time-major). Output rows are windows of kernel frames,
// columns ordered (k, c).
Var im2col1d(Var x, std::size_t kernel, std::size_t stride, std::size_t pad);
// Adjoint of im2col1d: scatters T' x (kernel*C) columns onto out_len x C.
Var col2im1d(Var cols, std::size_t kernel, std::size_t stride, std::size_t pad, std::size_t out_len);
// weight: (kernel*Cin) x Cout, bias: 1 x Cout.
Var conv1d(Var x, Var weight, Var bias, std::size_t kernel, std::size_t stride, std::size_t pad);
// weight: Cin x (kernel*Cout), bias: 1 x Cout. Output length (T-1)*stride - 2*pad + kernel.
Var conv_transpose1d(Var x, Var weight, Var bias, std::size_t kernel, std::size_t stride, std::size_t pad);

// Segment b covers rows floor(b*T/S) .. floor((b+1)*T/S); each output row is
// that segment's mean.
Var segment_pool(Var x, std::size_t segments);
// Repeats row b over the frames segment b covers in a length-T sequence.
Var segment_unpool(Var x, std::size_t frames);

}  // namespace ad

// Segment boundaries shared by pooling and unpooling.
std::vector<std::size_t> segment_bounds(std::size_t frames, std::size_t segments);

}  // namespace gtp
