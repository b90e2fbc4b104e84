#pragma once

#include "hdrsynth/tensor.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace hdrsynth::ad {

enum class Pad : uint8_t { None, Reflect };

// Reverse-mode tape. Ops append nodes in topological order; backward()
// seeds a scalar loss with 1 and replays the tape in reverse. Gradients
// accumulate (+=) so shared nodes (e.g. v_c feeding several projections)
// are handled naturally.
class Graph {
public:
    struct Node {
        Tensor val;
        Tensor grad; // allocated iff needs_grad
        bool needs_grad = false;
    };

    Node* input(Tensor v, bool needs_grad = false);

    // Cross-correlation. w is (Cout, Cin, kh, kw); b is (1, Cout, 1, 1) or
    // null. Pad::Reflect mirrors (k-1)/2 pixels without repeating the edge.
    Node* conv2d(Node* x, Node* w, Node* b, int stride, Pad pad);

    Node* leaky_relu(Node* x, double slope);
    Node* sigmoid(Node* x);
    Node* add(Node* x, Node* y);           // same shape
    Node* mul(Node* x, Node* y);           // same shape, elementwise
    Node* scale(Node* x, double a);
    Node* slice_channels(Node* x, int begin, int end);
    Node* slice_spatial(Node* x, int y0, int x0, int h, int w);
    Node* global_avg_pool(Node* x);        // (N,C,H,W) -> (N,C,1,1)
    Node* linear(Node* x, Node* w, Node* b); // x (N,C,1,1), w (M,C,1,1), b (1,M,1,1)

    // out = x * s + t with s,t of shape (N,C,1,1) broadcast over space.
    Node* channel_affine(Node* x, Node* s, Node* t);

    Node* l1_mean(Node* x, Tensor target);          // scalar: mean |x - T|
    Node* lsq_mean(Node* x, double target);         // scalar: 0.5*mean((x - t)^2)

    void backward(Node* loss); // loss must be scalar (1,1,1,1)

    size_t node_count() const { return nodes_.size(); }

private:
    Node* make(Tensor v, bool needs_grad);

    std::vector<std::unique_ptr<Node>> nodes_;
    std::vector<std::function<void()>> tape_;
};

// Standalone convolution used by the graph op and directly testable.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor* b, int stride, Pad pad);
struct Conv2dGrads {
    Tensor dx, dw, db;
};
Conv2dGrads conv2d_backward(const Tensor& x, const Tensor& w, int stride, Pad pad,
                            const Tensor& dy, bool need_dx, bool need_dw);

} // namespace hdrsynth::ad
