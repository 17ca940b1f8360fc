#include "semcom/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "semcom/errors.hpp"

namespace semcom {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, const std::string& name,
                    const std::set<std::string>& allowed) {
    for (auto it = section.begin(); it != section.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in section '" + name + "'");
}

template <typename T>
void read_field(const json& section, const std::string& key, T& out) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field '" + key + "' has the wrong type");
    }
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError("config: " + message);
}

}  // namespace

double ExperimentConfig::noise_psd_w_per_hz() const {
    return dbm_per_hz_to_w_per_hz(system.noise_psd_dbm_per_hz);
}

double ExperimentConfig::effective_selection_xi() const {
    return system.selection_xi < 0.0 ? system.xi : system.selection_xi;
}

EnvConfig ExperimentConfig::env_config() const {
    EnvConfig env;
    env.num_rbs = system.num_rbs;
    env.phy.tx_power_w = system.tx_power_w;
    env.phy.rb_bandwidth_hz = system.rb_bandwidth_hz;
    env.phy.noise_psd_w_per_hz = noise_psd_w_per_hz();
    env.phy.bits_per_letter = system.bits_per_letter;
    env.phy.min_distance_m = system.min_distance_m;
    env.xi = system.xi;
    env.selection_xi = effective_selection_xi();
    env.eta = system.eta;
    env.rho = system.rho;
    env.reward_time_scale = system.reward_time_scale;
    env.strict_conflict_reward = system.strict_conflict_reward;
    return env;
}

GeometryParams ExperimentConfig::effective_geometry() const {
    GeometryParams geom = geometry;
    geom.num_servers = system.num_servers;
    geom.num_users = system.num_users;
    return geom;
}

TrainSetup ExperimentConfig::train_setup() const {
    TrainSetup setup;
    setup.env_cfg = env_config();
    setup.gen = generator;
    setup.hyper = hyper;
    setup.algo = algo_from_string(run.algorithm);
    setup.seed = run.seed;
    setup.world_seed = run.seed;
    setup.fixed_scenario = run.scenario_mode == "fixed";
    setup.dataset_path = run.dataset_path;
    setup.parallel = run.parallel;

    EmbeddingModel model(embedding.dimension, embedding.token_seed, embedding.image_noise_std);
    if (!embedding.token_table.empty()) model.load_token_table(embedding.token_table);
    setup.model = std::move(model);

    if (!run.scenario_path.empty()) {
        Scenario scenario = read_scenario_file(run.scenario_path);
        require(static_cast<int>(scenario.topology.servers.size()) == system.num_servers,
                "scenario server count differs from system.num_servers");
        require(static_cast<int>(scenario.topology.users.size()) == system.num_users,
                "scenario user count differs from system.num_users");
        setup.topo = std::move(scenario.topology);
        setup.world_seed = scenario.channel_seed;
        if (setup.dataset_path.empty()) setup.dataset_path = scenario.dataset_path;
    } else {
        auto ts = rng::stream(run.seed, "topology");
        setup.topo = gen_topology(effective_geometry(), ts);
    }
    return setup;
}

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    {
        // An empty or whitespace-only file means all defaults.
        bool blank = true;
        for (char c : text)
            if (!std::isspace(static_cast<unsigned char>(c))) {
                blank = false;
                break;
            }
        if (blank) {
            j = json::object();
        } else {
            try {
                j = json::parse(text);
            } catch (const json::exception& e) {
                throw ConfigError(std::string("config: parse error: ") + e.what());
            }
        }
    }
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    reject_unknown(j, "(top level)",
                   {"system", "geometry", "generator", "embedding", "hyper", "run"});

    ExperimentConfig cfg;

    if (j.contains("system")) {
        const json& s = j.at("system");
        reject_unknown(s, "system",
                       {"num_rbs", "rb_bandwidth_hz", "num_servers", "num_users", "tx_power_w",
                        "noise_psd_dbm_per_hz", "eta", "rho", "reliability_epsilon", "xi",
                        "selection_xi", "bits_per_letter", "reward_time_scale",
                        "strict_conflict_reward", "min_distance_m"});
        read_field(s, "num_rbs", cfg.system.num_rbs);
        read_field(s, "rb_bandwidth_hz", cfg.system.rb_bandwidth_hz);
        read_field(s, "num_servers", cfg.system.num_servers);
        read_field(s, "num_users", cfg.system.num_users);
        read_field(s, "tx_power_w", cfg.system.tx_power_w);
        read_field(s, "noise_psd_dbm_per_hz", cfg.system.noise_psd_dbm_per_hz);
        read_field(s, "eta", cfg.system.eta);
        read_field(s, "rho", cfg.system.rho);
        read_field(s, "reliability_epsilon", cfg.system.reliability_epsilon);
        read_field(s, "xi", cfg.system.xi);
        read_field(s, "selection_xi", cfg.system.selection_xi);
        read_field(s, "bits_per_letter", cfg.system.bits_per_letter);
        read_field(s, "reward_time_scale", cfg.system.reward_time_scale);
        read_field(s, "strict_conflict_reward", cfg.system.strict_conflict_reward);
        read_field(s, "min_distance_m", cfg.system.min_distance_m);
    }
    if (j.contains("geometry")) {
        const json& g = j.at("geometry");
        reject_unknown(g, "geometry",
                       {"server_ring_radius_m", "area_radius_m", "coverage_radius_m"});
        read_field(g, "server_ring_radius_m", cfg.geometry.server_ring_radius_m);
        read_field(g, "area_radius_m", cfg.geometry.area_radius_m);
        read_field(g, "coverage_radius_m", cfg.geometry.coverage_radius_m);
    }
    if (j.contains("generator")) {
        const json& g = j.at("generator");
        reject_unknown(g, "generator",
                       {"triples_min", "triples_max", "vocab_objects", "vocab_relations",
                        "law_kind", "law_a", "law_b"});
        read_field(g, "triples_min", cfg.generator.triples_min);
        read_field(g, "triples_max", cfg.generator.triples_max);
        read_field(g, "vocab_objects", cfg.generator.vocab_objects);
        read_field(g, "vocab_relations", cfg.generator.vocab_relations);
        std::string kind =
            cfg.generator.detection_prob_law.kind == DetectionProbLaw::Kind::beta ? "beta"
                                                                                  : "uniform";
        read_field(g, "law_kind", kind);
        if (kind == "beta")
            cfg.generator.detection_prob_law.kind = DetectionProbLaw::Kind::beta;
        else if (kind == "uniform")
            cfg.generator.detection_prob_law.kind = DetectionProbLaw::Kind::uniform;
        else
            throw ConfigError("config: generator.law_kind must be 'beta' or 'uniform'");
        read_field(g, "law_a", cfg.generator.detection_prob_law.a);
        read_field(g, "law_b", cfg.generator.detection_prob_law.b);
    }
    if (j.contains("embedding")) {
        const json& e = j.at("embedding");
        reject_unknown(e, "embedding",
                       {"dimension", "token_seed", "image_noise_std", "token_table"});
        read_field(e, "dimension", cfg.embedding.dimension);
        read_field(e, "token_seed", cfg.embedding.token_seed);
        read_field(e, "image_noise_std", cfg.embedding.image_noise_std);
        read_field(e, "token_table", cfg.embedding.token_table);
    }
    if (j.contains("hyper")) {
        const json& h = j.at("hyper");
        reject_unknown(h, "hyper",
                       {"lr_q", "lr_policy", "delta", "delta_final", "delta_decay_iters",
                        "batch_size", "target_sync_interval", "episodes_per_iteration",
                        "q_steps_per_iteration", "policy_max_inner_steps", "policy_inner_tol",
                        "store_capacity", "hidden_dims", "adam", "epsilon_start", "epsilon_final",
                        "epsilon_decay_iters"});
        read_field(h, "lr_q", cfg.hyper.lr_q);
        read_field(h, "lr_policy", cfg.hyper.lr_policy);
        read_field(h, "delta", cfg.hyper.delta);
        read_field(h, "delta_final", cfg.hyper.delta_final);
        read_field(h, "delta_decay_iters", cfg.hyper.delta_decay_iters);
        read_field(h, "batch_size", cfg.hyper.batch_size);
        read_field(h, "target_sync_interval", cfg.hyper.target_sync_interval);
        read_field(h, "episodes_per_iteration", cfg.hyper.episodes_per_iteration);
        read_field(h, "q_steps_per_iteration", cfg.hyper.q_steps_per_iteration);
        read_field(h, "policy_max_inner_steps", cfg.hyper.policy_max_inner_steps);
        read_field(h, "policy_inner_tol", cfg.hyper.policy_inner_tol);
        read_field(h, "store_capacity", cfg.hyper.store_capacity);
        read_field(h, "hidden_dims", cfg.hyper.hidden_dims);
        read_field(h, "adam", cfg.hyper.adam);
        read_field(h, "epsilon_start", cfg.hyper.epsilon_start);
        read_field(h, "epsilon_final", cfg.hyper.epsilon_final);
        read_field(h, "epsilon_decay_iters", cfg.hyper.epsilon_decay_iters);
    }
    if (j.contains("run")) {
        const json& r = j.at("run");
        reject_unknown(r, "run",
                       {"iterations", "eval_interval", "eval_episodes", "seed", "algorithm",
                        "output_dir", "scenario_mode", "scenario_path", "dataset_path",
                        "parallel"});
        read_field(r, "iterations", cfg.run.iterations);
        read_field(r, "eval_interval", cfg.run.eval_interval);
        read_field(r, "eval_episodes", cfg.run.eval_episodes);
        read_field(r, "seed", cfg.run.seed);
        read_field(r, "algorithm", cfg.run.algorithm);
        read_field(r, "output_dir", cfg.run.output_dir);
        read_field(r, "scenario_mode", cfg.run.scenario_mode);
        read_field(r, "scenario_path", cfg.run.scenario_path);
        read_field(r, "dataset_path", cfg.run.dataset_path);
        read_field(r, "parallel", cfg.run.parallel);
    }

    // validation with explicit units
    require(cfg.system.num_rbs >= 1, "system.num_rbs must be >= 1 (count)");
    require(cfg.system.rb_bandwidth_hz > 0.0, "system.rb_bandwidth_hz must be > 0 (Hz)");
    require(cfg.system.num_servers >= 1, "system.num_servers must be >= 1 (count)");
    require(cfg.system.num_users >= 1, "system.num_users must be >= 1 (count)");
    require(cfg.system.tx_power_w > 0.0, "system.tx_power_w must be > 0 (W)");
    require(cfg.system.eta >= 0.0, "system.eta must be >= 0 (reward units)");
    require(cfg.system.reliability_epsilon > 0.0 && cfg.system.reliability_epsilon <= 1.0,
            "system.reliability_epsilon must lie in (0,1] (probability)");
    require(cfg.system.xi > 0.0 && cfg.system.xi <= 1.0,
            "system.xi must lie in (0,1] (similarity)");
    require(cfg.system.selection_xi < 0.0 ||
                (cfg.system.selection_xi > 0.0 && cfg.system.selection_xi <= 1.0),
            "system.selection_xi must lie in (0,1] (similarity)");
    require(cfg.system.bits_per_letter >= 1, "system.bits_per_letter must be >= 1 (bit)");
    require(cfg.system.reward_time_scale > 0.0,
            "system.reward_time_scale must be > 0 (reward units per second)");
    require(cfg.system.min_distance_m > 0.0, "system.min_distance_m must be > 0 (m)");
    require(cfg.geometry.server_ring_radius_m >= 0.0,
            "geometry.server_ring_radius_m must be >= 0 (m)");
    require(cfg.geometry.area_radius_m > 0.0, "geometry.area_radius_m must be > 0 (m)");
    require(cfg.geometry.coverage_radius_m > 0.0, "geometry.coverage_radius_m must be > 0 (m)");
    require(cfg.generator.triples_min >= 1 &&
                cfg.generator.triples_min <= cfg.generator.triples_max,
            "generator.triples_min must satisfy 1 <= min <= max (count)");
    require(!cfg.generator.vocab_objects.empty() && !cfg.generator.vocab_relations.empty(),
            "generator vocabularies must be non-empty");
    require(cfg.embedding.dimension >= 1, "embedding.dimension must be >= 1 (components)");
    require(cfg.embedding.image_noise_std >= 0.0,
            "embedding.image_noise_std must be >= 0 (vector norm)");
    require(cfg.run.iterations >= 0, "run.iterations must be >= 0 (count)");
    require(cfg.run.eval_interval >= 1, "run.eval_interval must be >= 1 (iterations)");
    require(cfg.run.eval_episodes >= 1, "run.eval_episodes must be >= 1 (episodes)");
    require(cfg.run.parallel >= 1, "run.parallel must be >= 1 (threads)");
    require(cfg.run.scenario_mode == "resample" || cfg.run.scenario_mode == "fixed",
            "run.scenario_mode must be 'resample' or 'fixed'");
    algo_from_string(cfg.run.algorithm); // throws on an unknown name
    cfg.hyper.validate();

    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return config_from_json_text(buffer.str());
}

}  // namespace semcom
