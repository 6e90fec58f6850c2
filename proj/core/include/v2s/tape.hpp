#pragma once

#include <cstddef>
#include <vector>

#include "v2s/ops.hpp"
#include "v2s/tensor.hpp"

namespace v2s {

// Reverse-mode tape over a fixed op vocabulary: enough to express the source
// classifier, the additive input transform, label aggregation and the training
// loss. Build a graph per evaluation, call backward(root) once, read grads.
class Tape {
 public:
  enum class Op {
    kLeaf,
    kConv1d,
    kMatmul,
    kAddBias,
    kRelu,
    kSoftmax,
    kAttentionPool,
    kAdd,
    kMul,
    kScale,
    kRepeatRows,
    kReshape,
    kSum,
    kMean,
    kLabelAggregate,
    kNllPick,
  };

  int leaf(Tensor v, bool requires_grad = false);
  int conv1d(int x, int w, int b, std::size_t stride);
  int matmul(int a, int b);
  int add_bias(int x, int b);
  int relu(int x);
  int softmax(int x);
  int attention_pool(int h, int w, int b, int v);
  int add(int a, int b);
  int mul(int a, int b);
  int scale(int x, double alpha);
  int repeat_rows(int x, std::size_t n);
  int reshape(int x, std::vector<std::size_t> dims);
  int sum(int x);
  int mean(int x);
  int label_aggregate(int probs, std::vector<std::vector<int>> groups);
  int nll_pick(int scores, std::vector<int> labels);

  const Tensor& value(int id) const;
  // Attention weights of an attention_pool node (softmax over steps).
  const Tensor& attention_weights(int id) const;

  void backward(int root);
  bool has_backward() const { return ran_backward_; }
  // Gradient of the backward root w.r.t. node id; zeros if the node did not
  // participate. Throws StateError before backward has run.
  const Tensor& grad(int id);

  std::size_t clamp_hits() const { return clamp_hits_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    std::vector<int> in;
    Tensor value;
    Tensor grad;
    bool grad_alloc = false;
    bool needs_grad = false;
    std::size_t stride = 1;                // conv1d
    double alpha = 1.0;                    // scale
    std::vector<int> labels;               // nll_pick
    std::vector<std::vector<int>> groups;  // label_aggregate
    Tensor aux_weights;                    // attention softmax weights
    Tensor aux_z;                          // attention tanh activations
  };

  int push(Node n);
  Node& at(int id);
  const Node& at(int id) const;
  Tensor& ensure_grad(int id);
  void backward_node(int id);

  std::vector<Node> nodes_;
  bool ran_backward_ = false;
  std::size_t clamp_hits_ = 0;
};

}  // namespace v2s
