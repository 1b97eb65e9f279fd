#pragma once

#include <functional>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

/// Tape of executed operations.
///
/// Operations append nodes in execution order, which is a topological order
/// of the dataflow. backward() walks the tape in reverse, so every node is
/// visited once and gradients from several consumers add up in the producer's
/// buffer. Leaf gradients (tensors no node produced) accumulate across calls;
/// intermediate gradients are reset at the start of each call.
class Graph {
 public:
  using BackwardFn = std::function<void()>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Marks output as requiring grad and appends a node for it.
  void record(Tensor output, BackwardFn backward);

  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// Whether an op should record: a graph is present and some operand needs grad.
bool should_record(const Graph* graph, std::initializer_list<const Tensor*> inputs);

}  // namespace c2f
