#include "semcom/dense_net.hpp"

#include <cmath>
#include <stdexcept>

namespace semcom {

std::size_t DenseNet::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
}

DenseNet DenseNet::init(const std::vector<int>& dims, rng::Stream& stream) {
    if (dims.size() < 2) throw std::invalid_argument("net needs input and output dims");
    for (int d : dims)
        if (d < 1) throw std::invalid_argument("net layer dims must be positive");
    DenseNet net;
    net.layer_dims = dims;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const double std = std::sqrt(2.0 / fan_in); // He init for the rectifier
        std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
        for (double& x : w) x = stream.normal(0.0, std);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(fan_out, 0.0);
    }
    return net;
}

void net_forward(const DenseNet& net, const std::vector<double>& input, ForwardTrace& trace) {
    if (static_cast<int>(input.size()) != net.input_dim())
        throw std::invalid_argument("net_forward: input dimension mismatch");
    const std::size_t L = net.num_layers();
    trace.act.resize(L + 1);
    trace.act[0] = input;
    for (std::size_t l = 0; l < L; ++l) {
        const int in_dim = net.layer_dims[l];
        const int out_dim = net.layer_dims[l + 1];
        const std::vector<double>& w = net.weights[l];
        const std::vector<double>& b = net.biases[l];
        const std::vector<double>& x = trace.act[l];
        std::vector<double>& y = trace.act[l + 1];
        y.assign(out_dim, 0.0);
        const bool hidden = l + 1 < L;
        for (int o = 0; o < out_dim; ++o) {
            double z = b[o];
            const double* row = &w[static_cast<std::size_t>(o) * in_dim];
            for (int i = 0; i < in_dim; ++i) z += row[i] * x[i];
            y[o] = hidden && z < 0.0 ? 0.0 : z;
        }
    }
}

std::vector<double> net_forward(const DenseNet& net, const std::vector<double>& input) {
    ForwardTrace trace;
    net_forward(net, input, trace);
    return trace.act.back();
}

GradBuffer GradBuffer::zeros_like(const DenseNet& net) {
    GradBuffer g;
    g.weights.reserve(net.weights.size());
    g.biases.reserve(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weights.emplace_back(net.weights[l].size(), 0.0);
        g.biases.emplace_back(net.biases[l].size(), 0.0);
    }
    return g;
}

void GradBuffer::zero() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void GradBuffer::add(const GradBuffer& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (std::size_t i = 0; i < weights[l].size(); ++i) weights[l][i] += other.weights[l][i];
        for (std::size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += other.biases[l][i];
    }
}

void GradBuffer::scale(double factor) {
    for (auto& w : weights)
        for (double& x : w) x *= factor;
    for (auto& b : biases)
        for (double& x : b) x *= factor;
}

void net_backward(const DenseNet& net, const ForwardTrace& trace,
                  const std::vector<double>& upstream, GradBuffer& accum) {
    const std::size_t L = net.num_layers();
    std::vector<double> delta = upstream;
    for (std::size_t l = L; l-- > 0;) {
        const int in_dim = net.layer_dims[l];
        const int out_dim = net.layer_dims[l + 1];
        const std::vector<double>& x = trace.act[l];
        std::vector<double>& gw = accum.weights[l];
        std::vector<double>& gb = accum.biases[l];
        for (int o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            gb[o] += d;
            double* grow = &gw[static_cast<std::size_t>(o) * in_dim];
            for (int i = 0; i < in_dim; ++i) grow[i] += d * x[i];
        }
        if (l == 0) break;
        std::vector<double> prev(in_dim, 0.0);
        const std::vector<double>& w = net.weights[l];
        for (int o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* row = &w[static_cast<std::size_t>(o) * in_dim];
            for (int i = 0; i < in_dim; ++i) prev[i] += d * row[i];
        }
        // Rectifier gate: activation 0 means the unit was clamped.
        for (int i = 0; i < in_dim; ++i)
            if (trace.act[l][i] <= 0.0) prev[i] = 0.0;
        delta = std::move(prev);
    }
}

GradBuffer net_gradients(const DenseNet& net, const std::vector<double>& input,
                         const std::vector<double>& upstream) {
    ForwardTrace trace;
    net_forward(net, input, trace);
    GradBuffer g = GradBuffer::zeros_like(net);
    net_backward(net, trace, upstream, g);
    return g;
}

AdamState AdamState::zeros_like(const DenseNet& net) {
    AdamState s;
    s.m = GradBuffer::zeros_like(net);
    s.v = GradBuffer::zeros_like(net);
    return s;
}

namespace {

void adam_apply(std::vector<double>& param, const std::vector<double>& g, std::vector<double>& m,
                std::vector<double>& v, double lr, double beta1, double beta2, double eps,
                double bc1, double bc2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace

void adam_update(DenseNet& net, const GradBuffer& grads, AdamState& state, double lr, double beta1,
                 double beta2, double eps) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        adam_apply(net.weights[l], grads.weights[l], state.m.weights[l], state.v.weights[l], lr,
                   beta1, beta2, eps, bc1, bc2);
        adam_apply(net.biases[l], grads.biases[l], state.m.biases[l], state.v.biases[l], lr, beta1,
                   beta2, eps, bc1, bc2);
    }
}

void sgd_update(DenseNet& net, const GradBuffer& grads, double lr) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i)
            net.weights[l][i] -= lr * grads.weights[l][i];
        for (std::size_t i = 0; i < net.biases[l].size(); ++i)
            net.biases[l][i] -= lr * grads.biases[l][i];
    }
}

}  // namespace semcom
