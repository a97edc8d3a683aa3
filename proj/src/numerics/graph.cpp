#include "clarigen/numerics/graph.h"

#include <atomic>

#include "clarigen/error.h"
#include "clarigen/simd/kernels.h"

namespace clarigen::numerics {

namespace {
std::uint64_t next_generation() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace

const Tensor& Expr::value() const {
  if (graph_ == nullptr) throw ContractError("use of an empty expression");
  graph_->check(*this);
  return graph_->value(id_);
}

Graph& Expr::graph() const {
  if (graph_ == nullptr) throw ContractError("use of an empty expression");
  return *graph_;
}

bool Expr::valid() const {
  return graph_ != nullptr && graph_->generation_ == generation_ &&
         id_ < graph_->nodes_.size();
}

Graph::Graph(bool record_gradients)
    : record_(record_gradients), generation_(next_generation()) {}

void Graph::check(const Expr& e) const {
  if (e.graph_ != this) {
    throw ContractError("expression belongs to a different graph");
  }
  if (e.generation_ != generation_ || e.id_ >= nodes_.size()) {
    throw ContractError(
        "stale expression: the graph was cleared by backward() or reset()");
  }
}

Expr Graph::input(Tensor value) { return record(std::move(value), {}, nullptr); }

Expr Graph::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) {
    return Expr(this, it->second, generation_);
  }
  Node node;
  node.value = p.value;
  node.requires_grad = record_;
  node.param = record_ ? &p : nullptr;
  nodes_.push_back(std::move(node));
  const auto id = static_cast<NodeId>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Expr(this, id, generation_);
}

Expr Graph::record(Tensor value, std::initializer_list<Expr> inputs,
                   BackwardFn fn) {
  return record(std::move(value), std::span<const Expr>(inputs.begin(), inputs.size()),
                std::move(fn));
}

Expr Graph::record(Tensor value, std::span<const Expr> inputs, BackwardFn fn) {
  bool any_grad = false;
  for (const Expr& e : inputs) {
    check(e);
    any_grad = any_grad || nodes_[e.id()].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = record_ && any_grad;
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Expr(this, static_cast<NodeId>(nodes_.size() - 1), generation_);
}

Tensor& Graph::grad_target(NodeId id) {
  Node& node = nodes_[id];
  if (!node.touched) {
    node.grad = Tensor(node.value.shape());
    node.touched = true;
  }
  return node.grad;
}

void Graph::backward(Expr loss) {
  check(loss);
  if (!record_) throw ContractError("backward() on an inference-only graph");
  if (loss.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_string(loss.shape()));
  }
  const auto& k = simd::active();
  if (nodes_[loss.id()].requires_grad) {
    grad_target(loss.id()).fill(1.0);
    for (std::int64_t id = loss.id(); id >= 0; --id) {
      Node& node = nodes_[static_cast<std::size_t>(id)];
      if (!node.touched) continue;
      if (node.backward) node.backward(*this, static_cast<NodeId>(id));
      if (node.param != nullptr) {
        Parameter& p = *node.param;
        k.add(p.grad.data(), node.grad.data(), p.grad.data(), p.grad.size());
        p.has_grad = true;
      }
    }
  }
  reset();
}

void Graph::reset() {
  nodes_.clear();
  param_nodes_.clear();
  generation_ = next_generation();
}

}  // namespace clarigen::numerics
