#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "unlearn/tensor.hpp"

namespace unlearn {

// Gradients keyed by tape node id.
template <typename T>
class GradMapT {
 public:
  explicit GradMapT(std::size_t n) : grads_(n), present_(n, 0) {}

  bool has(int id) const {
    return id >= 0 && static_cast<std::size_t>(id) < present_.size() && present_[id];
  }

  const TensorT<T>& at(int id) const {
    if (!has(id)) throw std::invalid_argument("no gradient recorded for node " + std::to_string(id));
    return grads_[id];
  }

  const TensorT<T>* find(int id) const { return has(id) ? &grads_[id] : nullptr; }

  void accumulate(int id, TensorT<T>&& g) {
    if (id < 0 || static_cast<std::size_t>(id) >= grads_.size())
      throw std::invalid_argument("gradient for unknown node " + std::to_string(id));
    if (!present_[id]) {
      grads_[id] = std::move(g);
      present_[id] = 1;
      return;
    }
    TensorT<T>& dst = grads_[id];
    if (dst.shape != g.shape)
      throw std::invalid_argument("gradient shape mismatch at node " + std::to_string(id) + ": " +
                                  shape_str(dst.shape) + " vs " + shape_str(g.shape));
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += g.data[i];
  }

 private:
  std::vector<TensorT<T>> grads_;
  std::vector<char> present_;
};

// Recording tape for one forward pass. Node ids are assigned in execution
// order, so ids are already a topological order of the graph. A tape is
// built fresh for every training step and consumed by a single backward().
template <typename T>
class TapeT {
 public:
  // The closure receives the output gradient and returns one (input node id,
  // input gradient) pair per recorded input of the op.
  using BackFn = std::function<std::vector<std::pair<int, TensorT<T>>>(const TensorT<T>&)>;

  int record(const char* op, BackFn back) {
    nodes_.push_back(Node{op, std::move(back)});
    return static_cast<int>(nodes_.size()) - 1;
  }

  // Registers a tensor as a differentiable leaf.
  int watch(TensorT<T>& t) {
    t.requires_grad = true;
    t.node = record("leaf", nullptr);
    return t.node;
  }

  std::size_t size() const { return nodes_.size(); }
  const char* op_name(int id) const { return nodes_.at(id).op; }

  // Reverse accumulation from a recorded scalar. Seeds with 1 and sums
  // contributions across fan-out. The tape stays valid afterwards (it is
  // discarded by the caller; training rebuilds one per step).
  GradMapT<T> backward(const TensorT<T>& loss) const {
    if (!loss.is_scalar())
      throw std::invalid_argument("backward() requires a scalar loss, got " + shape_str(loss.shape));
    if (loss.node < 0 || static_cast<std::size_t>(loss.node) >= nodes_.size())
      throw std::invalid_argument("backward() loss is not recorded on this tape");

    GradMapT<T> grads(nodes_.size());
    TensorT<T> seed = ones<T>(loss.shape);
    grads.accumulate(loss.node, std::move(seed));

    for (int id = loss.node; id >= 0; --id) {
      if (!grads.has(id) || !nodes_[id].back) continue;
      auto contribs = nodes_[id].back(grads.at(id));
      for (auto& [input_id, g] : contribs) {
        if (input_id >= id)
          throw std::invalid_argument("tape order violated: node consumes a later node");
        grads.accumulate(input_id, std::move(g));
      }
    }
    return grads;
  }

 private:
  struct Node {
    const char* op;
    BackFn back;
  };
  std::vector<Node> nodes_;
};

using Tape = TapeT<double>;

}  // namespace unlearn
