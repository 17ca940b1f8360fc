#pragma once

#include <cstdint>
#include <string>

#include "semcom/learner.hpp"
#include "semcom/net.hpp"

namespace semcom {

/// System constants; defaults follow the reference operating point
/// (Q=8 RBs of 2 MHz, 5 servers, 50 users, 1 W, -174 dBm/Hz, eta=3, rho=-3,
/// epsilon=0.9, xi=0.5).
struct SystemParams {
    int num_rbs = 8;
    double rb_bandwidth_hz = 2e6;
    int num_servers = 5;
    int num_users = 50;
    double tx_power_w = 1.0;
    double noise_psd_dbm_per_hz = -174.0;
    double eta = 3.0;
    double rho = -3.0;
    double reliability_epsilon = 0.9;
    double xi = 0.5;
    double selection_xi = -1.0; // < 0 = follow xi
    int bits_per_letter = 8;
    double reward_time_scale = 1e3; // rewards see latency in milliseconds
    bool strict_conflict_reward = false;
    double min_distance_m = 1.0;
};

struct EmbeddingParams {
    int dimension = 64;
    std::uint64_t token_seed = 42; // independent of the run seed
    double image_noise_std = 0.1;
    std::string token_table; // optional precomputed token -> vector rows
};

struct RunParams {
    long iterations = 300;
    int eval_interval = 25;
    int eval_episodes = 100;
    std::uint64_t seed = 1;
    std::string algorithm = "vd-erl";
    std::string output_dir = "out";
    std::string scenario_mode = "resample"; // resample | fixed
    std::string scenario_path;
    std::string dataset_path;
    int parallel = 1;
};

struct ExperimentConfig {
    SystemParams system;
    GeometryParams geometry;
    GeneratorParams generator = GeneratorParams::defaults();
    EmbeddingParams embedding;
    Hyperparams hyper;
    RunParams run;

    double noise_psd_w_per_hz() const;
    double effective_selection_xi() const;
    EnvConfig env_config() const;
    GeometryParams effective_geometry() const; // counts synced from system

    /// Builds the full training setup: topology from the scenario file when
    /// one is named, otherwise generated from the seed.
    TrainSetup train_setup() const;
};

/// Parse + validate. An empty file yields all defaults; unknown keys are
/// rejected with the offending section and key named.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);

}  // namespace semcom
