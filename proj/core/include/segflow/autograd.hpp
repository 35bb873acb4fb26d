#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "segflow/tensor.hpp"

namespace segflow::ag {

// Reverse-mode tape over Tensor ops. A forward pass builds a small DAG of
// heap nodes; backward() walks it once in reverse topological order. Nodes
// are freed when the last Var handle goes out of scope, so each training
// step owns exactly one graph.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backfn;
  bool needs_grad = false;
  int param_index = -1;  // >= 0 marks a model-parameter leaf

  void ensure_grad() {
    if (grad.empty()) grad = Tensor::zeros_like(value);
  }
};

using Var = std::shared_ptr<Node>;

Var leaf(Tensor value, bool needs_grad = false, int param_index = -1);

// 2-D convolution, NCHW single sample: x (C,H,W), w (O,C,KH,KW), b (O).
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);

Var relu(const Var& x);

// Bilinear resampling with half-pixel centers; used for every up- and
// down-scaling inside the network. Identity when sizes already match.
Var resize_bilinear(const Var& x, int out_h, int out_w);

Var concat_channels(const Var& a, const Var& b);

Var add(const Var& a, const Var& b);

// a + s * b; scalar-shaped operands, used to combine losses.
Var add_scaled(const Var& a, const Var& b, double s);

// Seeds root.grad with ones and accumulates into every reachable node
// that needs gradients. root must be scalar-shaped.
void backward(const Var& root);

}  // namespace segflow::ag
