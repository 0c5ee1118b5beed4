#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "icsd/common.hpp"

namespace icsd::nn {

struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<size_t> s) : shape(std::move(s)), v(numel(shape), 0.0) {}
    Tensor(std::vector<size_t> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
        require(v.size() == numel(shape), "tensor data does not match shape");
    }

    static size_t numel(const std::vector<size_t>& s) {
        size_t n = 1;
        for (size_t d : s) n *= d;
        return n;
    }
    size_t size() const { return v.size(); }
};

/// Define-by-run reverse-mode differentiation: ops evaluate eagerly and
/// append a node to the tape; backward() replays the tape in reverse,
/// accumulating exact gradients into every node, leaves included.
class Graph {
public:
    using NodeId = int;

    NodeId input(Tensor t);

    // dense algebra
    NodeId matmul(NodeId x, NodeId w);              // (B,I)x(I,O) -> (B,O)
    NodeId add_row(NodeId x, NodeId b);             // (B,O) + (O) broadcast over rows
    NodeId add(NodeId a, NodeId b);                 // same shape
    NodeId sub(NodeId a, NodeId b);
    NodeId scale_last_dim(NodeId x, const Tensor& s);  // multiply along last dim by a constant vector
    NodeId mul_const(NodeId x, const Tensor& mask);    // elementwise by a constant tensor

    // nonlinearities
    NodeId relu(NodeId x);
    NodeId tanh_act(NodeId x);
    /// Training-time Gaussian corruption; identity in eval mode. The noise is
    /// a constant with respect to x, so backward is the identity.
    NodeId gaussian_noise(NodeId x, double sigma, Rng& rng, bool training);

    // convolution stack, layout (B, L, C)
    NodeId conv1d(NodeId x, NodeId kernels);        // kernels (K, W, Cin) -> (B, L-W+1, K)
    NodeId bias_channels(NodeId x, NodeId b);       // (B,L,K) + (K)
    NodeId maxpool1d(NodeId x, size_t width);       // floor(L/width) windows, stride = width
    NodeId pad_time(NodeId x, size_t lo, size_t hi);

    // shape & windowing
    NodeId reshape(NodeId x, std::vector<size_t> shape);
    NodeId gather_windows(NodeId x, const std::vector<size_t>& starts, size_t len); // (T,F) -> (B,len,F)
    /// Scatter window outputs back onto the time axis, averaging where
    /// windows overlap; rows no window covers stay zero.
    NodeId scatter_mean(NodeId x, const std::vector<size_t>& starts, size_t total_rows);
    /// Per-window discrete derivative along time (row 0 maps to 0).
    NodeId time_diff(NodeId x);
    NodeId concat_last_dim(NodeId a, NodeId b);

    // reductions
    NodeId abs_val(NodeId x);
    NodeId reduce_max(NodeId x);                    // -> scalar, grad to first argmax
    NodeId mse(NodeId pred, NodeId target);         // mean squared error over all elements

    void backward(NodeId root);
    const Tensor& value(NodeId id) const { return nodes_[id].val; }
    const std::vector<double>& grad(NodeId id) const { return nodes_[id].grad; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor val;
        std::vector<double> grad;
        std::function<void(Graph&)> back; // null for leaves
    };

    NodeId push(Tensor val, std::function<void(Graph&)> back);
    Node& node(NodeId id) { return nodes_[id]; }

    std::vector<Node> nodes_;
};

} // namespace icsd::nn
