#pragma once

#include <cstddef>
#include <vector>

#include "semcom/rng.hpp"

namespace semcom {

/// Fully connected net, rectified-linear hidden layers, identity output.
/// Double precision throughout; gradients are checked against finite
/// differences at 1e-4 relative, which single precision cannot meet.
struct DenseNet {
    std::vector<int> layer_dims;               // {in, hidden..., out}
    std::vector<std::vector<double>> weights;  // per layer, out x in row-major
    std::vector<std::vector<double>> biases;   // per layer, out

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    std::size_t num_layers() const { return weights.size(); }
    std::size_t parameter_count() const;

    static DenseNet init(const std::vector<int>& dims, rng::Stream& stream);
};

/// Activations kept from a forward pass for the backward pass. Reusable
/// across calls to avoid reallocation in batch loops.
struct ForwardTrace {
    std::vector<std::vector<double>> act; // act[0] = input, act.back() = output
};

void net_forward(const DenseNet& net, const std::vector<double>& input, ForwardTrace& trace);
std::vector<double> net_forward(const DenseNet& net, const std::vector<double>& input);

/// Per-parameter gradient (or first/second Adam moment) storage shaped like a
/// DenseNet's parameters.
struct GradBuffer {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static GradBuffer zeros_like(const DenseNet& net);
    void zero();
    void add(const GradBuffer& other);
    void scale(double factor);
};

/// Accumulates d(output . upstream)/d(parameters) into `accum` given the
/// trace of the matching forward pass.
void net_backward(const DenseNet& net, const ForwardTrace& trace,
                  const std::vector<double>& upstream, GradBuffer& accum);

/// Convenience wrapper: gradients of output . upstream for one input.
GradBuffer net_gradients(const DenseNet& net, const std::vector<double>& input,
                         const std::vector<double>& upstream);

struct AdamState {
    GradBuffer m;
    GradBuffer v;
    long step = 0;

    static AdamState zeros_like(const DenseNet& net);
};

void adam_update(DenseNet& net, const GradBuffer& grads, AdamState& state, double lr,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Plain gradient descent.
void sgd_update(DenseNet& net, const GradBuffer& grads, double lr);

}  // namespace semcom
