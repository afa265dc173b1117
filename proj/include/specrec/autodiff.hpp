#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "specrec/tensor.hpp"

namespace specrec {

// One tape entry. `backprop` scatters this node's grad into its parents;
// parents always precede children on the tape, so a single reverse sweep
// implements the chain rule.
struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backprop;
};

// Reverse-mode tape. All ops append a node whose closure captures raw parent
// pointers; the graph owns every node, so pointers stay valid for its
// lifetime. One backward() per graph.
class Graph {
  public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    // leaf with no parents; requires_grad marks trainable parameters
    Node* leaf(Tensor value, bool requires_grad);

    // stride-1 conv with zero padding keeping spatial size; ksize 1 or 3;
    // input {Cin,H,W}, weight {Cout,Cin,k,k}, bias {Cout}
    Node* conv2d(Node* input, Node* weight, Node* bias);
    Node* leaky_relu(Node* x, double slope);
    Node* avgpool2(Node* x);          // 2x2 stride 2; even dims required
    Node* upsample2x(Node* x);        // bilinear, half-pixel convention
    Node* concat(const std::vector<Node*>& xs);  // along channels
    Node* dense(Node* x, Node* weight, Node* bias);  // x {N}, w {M,N}, b {M}
    Node* global_avg_pool(Node* x);   // {C,H,W} -> {C}
    Node* softplus(Node* x);
    Node* add(Node* a, Node* b);
    Node* sub(Node* a, Node* b);
    Node* mul(Node* a, Node* b);      // elementwise
    Node* scale(Node* x, double c);
    Node* add_const(Node* x, const Tensor& t);
    Node* scale_by(Node* scalar, const Tensor& t);  // scalar {1} times const tensor
    Node* l1_loss(Node* pred, const Tensor& target);  // mean |pred-target| -> {1}

    // seeds d(loss)/d(loss)=1 and sweeps the tape once, accumulating into
    // every requires_grad node's grad
    void backward(Node* loss);

    std::size_t size() const { return nodes_.size(); }

  private:
    Node* append(Tensor value, bool requires_grad);

    std::vector<std::unique_ptr<Node>> nodes_;
    bool backward_done_ = false;
};

}  // namespace specrec
