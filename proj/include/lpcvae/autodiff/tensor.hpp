#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lpcvae/error.hpp"

namespace lpcvae::ad {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

inline std::size_t numel_of(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Storage behind a Tensor handle. Leaves are created by the user; non-leaf
/// nodes are produced by recorded operations.
struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a backward pass touches it
  bool requires_grad = false;
  bool is_leaf = true;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

/// Dense row-major array of doubles. Copies share storage (handle semantics),
/// which is what lets parameters be updated in place by the optimizer while
/// the model keeps referring to them.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    for (auto d : shape)
      if (d == 0) throw DimensionError("tensor dimension must be >= 1, got " + shape_str(shape));
    if (shape.empty()) shape = {1};
    if (numel_of(shape) != data.size())
      throw DimensionError("shape " + shape_str(shape) + " does not match " +
                           std::to_string(data.size()) + " values");
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }
  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const auto n = numel_of(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }
  static Tensor vector(std::vector<double> v, bool requires_grad = false) {
    const auto n = v.size();
    return Tensor({n}, std::move(v), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const double> data() const { return node_->data; }
  /// Direct write access; bypasses the tape (used by optimizers and gradcheck).
  std::span<double> mutable_data() { return node_->data; }
  double operator[](std::size_t i) const { return node_->data[i]; }
  double item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Value copy detached from any graph.
  Tensor detach() const { return Tensor(shape(), node_->data, false); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Define-by-run record of executed operations. Entries are appended in
/// execution order, so a reverse walk is a valid topological traversal.
class Tape {
 public:
  struct Entry {
    std::string op;
    std::shared_ptr<Node> output;
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void()> backward;
  };

  void record(Entry e) { entries_.push_back(std::move(e)); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

  /// Populates grad on every requires_grad leaf reachable from `loss`.
  /// Intermediate gradients are reset on entry, leaf gradients accumulate, so
  /// running twice without zeroing doubles every leaf gradient.
  void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
      throw ContractError("backward requires a scalar loss, got " +
                          (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    const auto& root = loss.node();
    if (root->is_leaf) throw ContractError("backward: loss was not produced on this tape");
    bool found = false;
    for (auto& e : entries_) {
      e.output->grad.clear();
      found = found || e.output == root;
    }
    if (!found) throw ContractError("backward: loss was not produced on this tape");
    root->grad.assign(1, 1.0);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
      if (it->output->grad.empty()) continue;  // not reachable from loss
      it->backward();
    }
  }

 private:
  std::vector<Entry> entries_;
};

namespace detail {
inline thread_local Tape* active_tape = nullptr;
}

inline Tape* active_tape() { return detail::active_tape; }

/// Routes operations executed in this scope onto `tape`.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape) : previous_(detail::active_tape) { detail::active_tape = &tape; }
  ~TapeScope() { detail::active_tape = previous_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording, e.g. for evaluation-only forward passes.
class NoGradScope {
 public:
  NoGradScope() : previous_(detail::active_tape) { detail::active_tape = nullptr; }
  ~NoGradScope() { detail::active_tape = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

inline void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

namespace detail {

/// Wraps a freshly computed value as an op output and, when a tape is active
/// and any input needs gradients, records the backward closure. The closure
/// receives the output node and may read its grad.
template <class BackwardFn>
Tensor make_result(const char* op, Shape shape, std::vector<double> data,
                   std::initializer_list<Tensor> inputs, BackwardFn&& bwd) {
  Tensor out(std::move(shape), std::move(data), false);
  Tape* tape = active_tape;
  if (tape == nullptr) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || (in.defined() && in.requires_grad());
  if (!any) return out;
  auto node = out.node();
  node->requires_grad = true;
  node->is_leaf = false;
  Tape::Entry e;
  e.op = op;
  e.output = node;
  for (const auto& in : inputs)
    if (in.defined()) e.inputs.push_back(in.node());
  Node* raw = node.get();
  e.backward = [raw, fn = std::forward<BackwardFn>(bwd)]() { fn(*raw); };
  tape->record(std::move(e));
  return out;
}

/// Same as make_result for a variable number of inputs.
template <class BackwardFn>
Tensor make_result_n(const char* op, Shape shape, std::vector<double> data,
                     const std::vector<Tensor>& inputs, BackwardFn&& bwd) {
  Tensor out(std::move(shape), std::move(data), false);
  Tape* tape = active_tape;
  if (tape == nullptr) return out;
  bool any = false;
  for (const auto& in : inputs) any = any || in.requires_grad();
  if (!any) return out;
  auto node = out.node();
  node->requires_grad = true;
  node->is_leaf = false;
  Tape::Entry e;
  e.op = op;
  e.output = node;
  for (const auto& in : inputs) e.inputs.push_back(in.node());
  Node* raw = node.get();
  e.backward = [raw, fn = std::forward<BackwardFn>(bwd)]() { fn(*raw); };
  tape->record(std::move(e));
  return out;
}

inline bool wants_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

}  // namespace detail

}  // namespace lpcvae::ad
