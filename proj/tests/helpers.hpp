#pragma once

#include <cmath>
#include <vector>

#include "semcom/learner.hpp"

namespace semcom::testing {

// Small overlapping-coverage world for trainer-level tests.
inline TrainSetup micro_setup(int servers, int users, int rbs, std::uint64_t seed) {
    GeometryParams geom;
    geom.num_servers = servers;
    geom.num_users = users;
    geom.server_ring_radius_m = servers == 1 ? 0.0 : 120.0;
    geom.area_radius_m = 260.0;
    geom.coverage_radius_m = 260.0;
    auto ts = rng::stream(seed, "topology");

    TrainSetup setup;
    setup.env_cfg.num_rbs = rbs;
    setup.topo = gen_topology(geom, ts);
    setup.model = EmbeddingModel(32, 5, 0.1);
    setup.gen = GeneratorParams::defaults();
    setup.gen.triples_min = 3;
    setup.gen.triples_max = 5;
    setup.hyper.hidden_dims = {16, 16};
    setup.hyper.episodes_per_iteration = 4;
    setup.hyper.batch_size = 16;
    setup.hyper.q_steps_per_iteration = 4;
    setup.hyper.policy_max_inner_steps = 60;
    setup.hyper.store_capacity = 256;
    setup.seed = seed;
    setup.world_seed = seed;
    return setup;
}

// Every parameter of every layer, for finite-difference sweeps.
template <typename F>
void for_each_param(DenseNet& net, F&& f) {
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (std::size_t i = 0; i < net.weights[l].size(); ++i) f(net.weights[l][i], l, i, true);
        for (std::size_t i = 0; i < net.biases[l].size(); ++i) f(net.biases[l][i], l, i, false);
    }
}

inline bool grad_close(double analytic, double fd, double rel = 1e-4, double floor_abs = 1e-6) {
    const double scale = std::max(std::fabs(analytic), std::fabs(fd));
    return std::fabs(analytic - fd) <= rel * scale + floor_abs;
}

}  // namespace semcom::testing
