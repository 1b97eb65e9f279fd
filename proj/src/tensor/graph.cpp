#include "c2f/graph.hpp"

#include "c2f/errors.hpp"

namespace c2f {

void Graph::record(Tensor output, BackwardFn backward) {
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(output), std::move(backward)});
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward needs a scalar loss, got " +
                        (loss.defined() ? loss.shape().str() : "undefined"));
  }
  std::size_t end = nodes_.size();
  while (end > 0 && !nodes_[end - 1].output.same_as(loss)) --end;
  if (end == 0) {
    throw ContractError("backward seed was not produced by this graph");
  }
  for (std::size_t i = 0; i < end; ++i) nodes_[i].output.clear_grad();

  Tensor seed = loss;
  seed.grad_buffer()[0] = 1.0;
  for (std::size_t i = end; i-- > 0;) {
    Node& node = nodes_[i];
    if (node.output.has_grad()) node.backward();
  }
}

bool should_record(const Graph* graph,
                   std::initializer_list<const Tensor*> inputs) {
  if (graph == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

}  // namespace c2f
