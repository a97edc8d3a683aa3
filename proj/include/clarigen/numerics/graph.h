#pragma once

// Tape-based reverse-mode differentiation. A Graph records every operation
// applied since construction (or the last reset) in topological order;
// backward() walks the tape in exact reverse, accumulates into the
// Parameter gradients, then clears the tape. Expressions are cheap handles
// into the tape and become stale once it is cleared.

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <unordered_map>
#include <vector>

#include "clarigen/numerics/parameter.h"
#include "clarigen/numerics/rng.h"
#include "clarigen/numerics/tensor.h"

namespace clarigen::numerics {

class Graph;
using NodeId = std::uint32_t;

class Expr {
 public:
  Expr() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Graph& graph() const;
  NodeId id() const { return id_; }
  bool valid() const;

 private:
  friend class Graph;
  Expr(Graph* g, NodeId id, std::uint64_t generation)
      : graph_(g), id_(id), generation_(generation) {}

  Graph* graph_ = nullptr;
  NodeId id_ = 0;
  std::uint64_t generation_ = 0;
};

class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, NodeId self)>;

  // With record_gradients=false parameters enter as constants and no
  // backward rules are kept (inference).
  explicit Graph(bool record_gradients = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool records_gradients() const { return record_; }

  Expr input(Tensor value);
  // Repeated calls with the same parameter return the same node.
  Expr param(Parameter& p);

  void backward(Expr loss);
  void reset();
  std::size_t node_count() const { return nodes_.size(); }

  // --- used by op implementations -------------------------------------
  Expr record(Tensor value, std::initializer_list<Expr> inputs, BackwardFn fn);
  Expr record(Tensor value, std::span<const Expr> inputs, BackwardFn fn);
  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
  bool needs_grad(NodeId id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of an input node, allocated and zeroed on first use.
  Tensor& grad_target(NodeId id);
  void check(const Expr& e) const;

 private:
  friend class Expr;
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool touched = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  bool record_;
  std::uint64_t generation_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, NodeId> param_nodes_;
};

// ---- operations ---------------------------------------------------------
// Shapes follow the rank-2 view (rows × cols). Binary elementwise ops accept
// identical shapes or a size-1 operand on either side.

Expr matmul(Expr a, Expr b);
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);
Expr mul(Expr a, Expr b);
Expr scale(Expr a, double factor);
Expr tanh(Expr a);
Expr sigmoid(Expr a);
// x[m×n] + b[1×n] broadcast over rows
Expr add_bias(Expr x, Expr bias);

Expr softmax_rows(Expr x);
Expr log_softmax_rows(Expr x);
// log-softmax restricted to columns where allowed[j] is true; excluded
// columns get probability zero (value -inf).
Expr log_softmax_rows_restricted(Expr x, const std::vector<bool>& allowed);

// Σ over rows with mask[r] != 0 of -log softmax(logits[r])[targets[r]].
Expr cross_entropy(Expr logits, std::span<const int> targets,
                   std::span<const double> mask);
// Σ over rows of the logistic loss of logit[r] against label[r] ∈ {0,1}.
Expr bce_with_logits(Expr logits, std::span<const double> labels);

// out[r] = x[r, index[r]], shape m×1
Expr pick(Expr x, std::span<const int> index);
Expr sum(Expr x);
// Σ_r weights[r] * x[r] for x of shape m×1 and constant weights.
Expr weighted_sum(Expr x, std::span<const double> weights);

Expr concat_cols(std::span<const Expr> parts);
Expr slice_cols(Expr x, std::size_t begin, std::size_t end);
// Rows of table selected by ids (embedding lookup); out-of-range ids throw.
Expr gather_rows(Expr table, std::span<const int> ids);
// out[r] = take_first[r] ? a[r] : b[r]
Expr select_rows(const std::vector<bool>& take_first, Expr a, Expr b);

// Inverted dropout: survivors are scaled by 1/(1-rate); identity when not
// training or rate == 0.
Expr dropout(Expr x, double rate, bool training, Rng& rng);

// Stack N tensors of shape B×H into B×N×H.
Expr stack_steps(std::span<const Expr> steps);
// scores[b, n] = query[b] · keys[b, n], keys of shape B×N×H.
Expr batched_dot(Expr query, Expr keys);
// Row softmax over positions with mask != 0; masked positions get exactly 0.
// A row with no unmasked position is a contract error.
Expr masked_softmax_rows(Expr x, std::span<const double> mask);
// out[b] = Σ_n weights[b, n] * values[b, n], values of shape B×N×H.
Expr batched_weighted_sum(Expr weights, Expr values);

}  // namespace clarigen::numerics
