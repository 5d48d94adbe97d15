#pragma once

// Reverse-mode automatic differentiation over 2-D float64 tensors.
//
// A Tape records every operation as a node in creation order, which is a
// topological order by construction. backward() walks the nodes once in
// reverse and each node pushes its gradient into its inputs; fan-out is
// handled by additive accumulation. Parameters enter the tape by reference
// (no copy) and their gradients can be harvested into a Gradients buffer.
//
// One tape per training sample/step. Tapes share nothing mutable, so several
// may run concurrently over the same frozen ParameterSet.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "mmt/params.hpp"
#include "mmt/tensor.hpp"

namespace mmt::ad {

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Bound by reference; the parameter must outlive the tape. Repeated calls
  // for the same (set, index) return the same node.
  Var parameter(const ParameterSet& set, std::size_t index);

  const Tensor& value(Var v) const { return value(v.id()); }
  const Tensor& value(std::size_t id) const;
  // Gradient of the last backward() target w.r.t. v. Zero-filled when no
  // gradient reached v.
  Tensor grad(Var v) const;

  void backward(Var scalar_output);

  // Adds dL/dparam for every parameter of `set` bound on this tape.
  void accumulate_gradients(const ParameterSet& set, Gradients& out) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Attention instrumentation: (query_len, key_len) of every attention
  // evaluated on this tape, per head-group, and the total score count.
  const std::vector<std::pair<std::size_t, std::size_t>>& attention_shapes() const noexcept {
    return attention_shapes_;
  }
  std::uint64_t attention_score_flops() const noexcept { return attention_flops_; }
  void record_attention(std::size_t q_len, std::size_t k_len, std::size_t dim);

  // Op plumbing.
  Var push(Tensor value, std::span<const Var> inputs, Backward backward);
  Tensor& grad_buffer(std::size_t id);
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  const Tensor& grad_ref(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    Backward backward;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  std::map<std::pair<const ParameterSet*, std::size_t>, std::size_t> param_nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> attention_shapes_;
  std::uint64_t attention_flops_ = 0;
  bool backward_done_ = false;
};

// ---- operations --------------------------------------------------------

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double factor);
Var add_row(Var a, Var row);      // a (n x c) + row (1 x c) broadcast
Var repeat_rows(Var row, std::size_t n);
Var gelu(Var x);                  // tanh approximation
Var layer_norm(Var x, Var gain, Var bias, double eps);
Var softmax(Var x, int axis);     // axis 0 (columns) or 1 (rows)
// Scaled dot-product attention per head on pre-projected q (nq x d),
// k, v (nk x d); heads are contiguous column blocks. Returns nq x d.
Var attention(Var q, Var k, Var v, std::size_t heads);
// attention() followed by the output projection.
Var multi_head_attention(Var q, Var k, Var v, std::size_t heads, Var w_out, Var b_out);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var sum(Var a);
Var mean(Var a);
Var mean_of(std::span<const Var> parts);
// weight * -log softmax(logits)[label] for a 1 x C logits row.
Var cross_entropy(Var logits, std::size_t label, double weight = 1.0);
// Mean squared error over the listed rows only; target is a constant.
Var masked_mse(Var prediction, const Tensor& target, std::span<const std::size_t> rows);
// Inverted dropout with an explicit keep mask (1/keep scaling baked in).
Var dropout(Var x, double rate, SplitMix64& rng);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }

}  // namespace mmt::ad
