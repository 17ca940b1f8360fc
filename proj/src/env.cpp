#include "semcom/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "semcom/errors.hpp"
#include "semcom/similarity.hpp"

namespace semcom {

ConflictResolution resolve_conflicts(const std::vector<int>& proposed_user, int rb,
                                     const ChannelRealization& ch, const PhyParams& phy) {
    const int V = static_cast<int>(proposed_user.size());
    const int U = ch.num_users;
    ConflictResolution res;
    res.proposal_rate_bps.assign(V, 0.0);
    res.winner_of_user.assign(U, -1);
    res.multi_proposed.assign(U, 0);

    // Every transmitting server occupies this RB; build the interference each
    // proposer's target sees from the other transmitters.
    for (int v = 0; v < V; ++v) {
        const int k = proposed_user[v];
        if (k < 0) continue;
        double interference = 0.0;
        for (int s = 0; s < V; ++s) {
            if (s == v || proposed_user[s] < 0) continue;
            interference += phy.tx_power_w * ch.gain_at(s, k, rb);
        }
        const double sinr = phy.tx_power_w * ch.gain_at(v, k, rb) /
                            (interference + phy.rb_bandwidth_hz * phy.noise_psd_w_per_hz);
        res.proposal_rate_bps[v] = phy.rb_bandwidth_hz * std::log2(1.0 + sinr);
    }

    std::vector<int> count(U, 0);
    for (int v = 0; v < V; ++v) {
        const int k = proposed_user[v];
        if (k < 0) continue;
        ++count[k];
        const int current = res.winner_of_user[k];
        if (current < 0 || res.proposal_rate_bps[v] > res.proposal_rate_bps[current])
            res.winner_of_user[k] = v; // ties keep the lower server index
    }
    for (int k = 0; k < U; ++k)
        if (count[k] > 1) res.multi_proposed[k] = 1;
    return res;
}

double user_reward(bool served, double true_iss, double xi, double eta, double latency_rtu) {
    if (!served) return 0.0;
    return (true_iss >= xi ? eta : 0.0) - latency_rtu;
}

Env::Env(EnvConfig cfg, Topology topo, EmbeddingModel model)
    : cfg_(std::move(cfg)), topo_(std::move(topo)), model_(std::move(model)) {
    if (cfg_.num_rbs < 1) throw ConfigError("env: need at least one RB");
}

void Env::prepare_content(std::vector<SceneGraph> graphs, std::uint64_t noise_seed) {
    const int U = num_users();
    if (static_cast<int>(graphs.size()) != U)
        throw ConfigError("env: need one scene graph per user");
    content_.clear();
    content_.reserve(U);
    for (int k = 0; k < U; ++k) {
        UserContent c;
        c.graph = std::move(graphs[k]);
        c.scores = triple_scores(c.graph);
        c.order = score_order(c.scores);
        c.selected_len = select_prefix_len(c.scores, c.order, cfg_.selection_xi);

        std::vector<Triple> selected;
        std::vector<Vec> triple_vecs;
        selected.reserve(c.selected_len);
        triple_vecs.reserve(c.selected_len);
        for (std::size_t n = 0; n < c.selected_len; ++n) {
            const Triple& t = c.graph.triples[c.order[n]];
            selected.push_back(t);
            triple_vecs.push_back(model_.embed_triple(t));
        }
        c.selected_letters = semantic_size(selected);

        auto noise = rng::Stream(rng::mix(noise_seed, static_cast<std::uint64_t>(k)));
        const Vec image_vec = model_.embed_image(c.graph, c.scores, noise);
        c.true_iss = iss(image_vec, triple_vecs, true);
        content_.push_back(std::move(c));
    }

    const int V = num_servers();
    avail_.assign(V, std::vector<std::uint8_t>(cfg_.num_rbs, 1));
    served_by_.assign(V, std::vector<std::uint8_t>(U, 0));
    user_state_.assign(U, UserOutcome{});
    alloc_ = JointAllocation(V, U, cfg_.num_rbs);
    t_ = 0;
    episode_reward_ = 0.0;
}

void Env::reset(const GeneratorParams& gen, std::uint64_t seed, std::uint64_t episode) {
    auto channel_stream = rng::stream(seed, "channels", episode);
    ChannelRealization ch =
        sample_channels(topo_, cfg_.num_rbs, cfg_.phy.min_distance_m, channel_stream);

    std::vector<SceneGraph> graphs;
    graphs.reserve(num_users());
    for (int k = 0; k < num_users(); ++k) {
        auto image_stream = rng::stream(seed, "image", episode, static_cast<std::uint64_t>(k));
        graphs.push_back(generate_scene_graph(
            gen, "ep" + std::to_string(episode) + "-u" + std::to_string(k), image_stream));
    }
    reset_with(std::move(ch), std::move(graphs), rng::derive(seed, "image-noise", episode));
}

void Env::reset_with(ChannelRealization channels, std::vector<SceneGraph> graphs,
                     std::uint64_t noise_seed) {
    if (channels.num_servers != num_servers() || channels.num_users != num_users() ||
        channels.num_rbs != cfg_.num_rbs)
        throw ConfigError("env: channel realization shape mismatch");
    channels_ = std::move(channels);
    prepare_content(std::move(graphs), noise_seed);
}

std::vector<std::uint8_t> Env::action_mask(int server) const {
    const auto& cov = topo_.coverage[server];
    std::vector<std::uint8_t> mask(cov.size() + 1, 0);
    for (std::size_t j = 0; j < cov.size(); ++j)
        if (!served_by_[server][cov[j]]) mask[j] = 1;
    mask.back() = 1; // idle
    return mask;
}

double Env::user_latency(int user, double rate_bps) const {
    return latency_seconds(content_[user].selected_letters, rate_bps, cfg_.phy.bits_per_letter);
}

StepOutcome Env::step(const std::vector<int>& joint_action) {
    if (done()) throw RuntimeFailure("env: step after episode end");
    const int V = num_servers();
    const int U = num_users();
    if (static_cast<int>(joint_action.size()) != V)
        throw RuntimeFailure("env: joint action needs one entry per server");

    // Translate coverage-slot choices to user indices, enforcing the masks.
    std::vector<int> proposed(V, -1);
    for (int v = 0; v < V; ++v) {
        const int slot = joint_action[v];
        if (slot == kIdle) continue;
        const auto& cov = topo_.coverage[v];
        if (slot < 0 || slot >= static_cast<int>(cov.size()))
            throw RuntimeFailure("env: server " + std::to_string(v) +
                                 " chose an out-of-range action");
        const int user = cov[slot];
        if (served_by_[v][user])
            throw RuntimeFailure("env: server " + std::to_string(v) +
                                 " re-served user " + std::to_string(user));
        proposed[v] = user;
    }

    const int rb = t_;
    const ConflictResolution res = resolve_conflicts(proposed, rb, channels_, cfg_.phy);

    // Hold state frozen at step start; same-step processing order must not
    // change who counts as the holder.
    std::vector<std::uint8_t> held_at_start(U, 0);
    for (int k = 0; k < U; ++k) held_at_start[k] = user_state_[k].served ? 1 : 0;

    StepOutcome out;
    out.rb = rb;
    out.server_rewards.assign(V, 0.0);
    out.proposed_user = proposed;
    out.server_lost.assign(V, 0);
    out.users.assign(U, UserOutcome{});

    for (int v = 0; v < V; ++v) {
        const int k = proposed[v];
        if (k < 0) continue;
        alloc_.set(v, k, rb, true);
        avail_[v][rb] = 0;
        served_by_[v][k] = 1;

        UserOutcome& step_user = out.users[k];
        step_user.proposed = true;
        step_user.proposals += 1;

        UserOutcome& final_user = user_state_[k];
        final_user.proposed = true;
        final_user.proposals += 1;

        const bool same_step_conflict = res.multi_proposed[k] != 0;
        const bool already_held = held_at_start[k] != 0;
        const bool wins_step = res.winner_of_user[k] == v && !already_held;

        if (same_step_conflict || (already_held && final_user.proposals > 1)) {
            step_user.conflicted = true;
            final_user.conflicted = true;
        }

        if (wins_step) {
            const double rate_bps = res.proposal_rate_bps[v];
            const double latency_s = user_latency(k, rate_bps);
            const double iss_value = content_[k].true_iss;
            const bool reliable = iss_value >= cfg_.xi;
            const bool charged_rho = cfg_.strict_conflict_reward && same_step_conflict;
            const double reward =
                charged_rho ? cfg_.rho
                            : user_reward(true, iss_value, cfg_.xi, cfg_.eta,
                                          latency_s * cfg_.reward_time_scale);
            out.server_rewards[v] += reward;

            step_user.served = true;
            step_user.winner = v;
            step_user.rate_bps = rate_bps;
            step_user.latency_s = latency_s;
            step_user.iss_value = iss_value;
            step_user.reliable = reliable;

            final_user.served = true;
            final_user.winner = v;
            final_user.rate_bps = rate_bps;
            final_user.latency_s = latency_s;
            final_user.iss_value = iss_value;
            final_user.reliable = reliable;
        } else {
            // Lost to a same-step competitor or to a server that already
            // holds the user; the RB is spent for nothing.
            out.server_lost[v] = 1;
            out.server_rewards[v] += cfg_.rho;

            if (already_held && cfg_.strict_conflict_reward) {
                // Strict mode charges every allocation of a contested user,
                // so take back what the holder earned earlier.
                const int holder = final_user.winner;
                const double earned =
                    user_reward(true, final_user.iss_value, cfg_.xi, cfg_.eta,
                                final_user.latency_s * cfg_.reward_time_scale);
                if (final_user.proposals == 2)
                    out.server_rewards[holder] += cfg_.rho - earned;
            }
        }
    }

    // Same-step strict mode: the winner was already charged rho instead of
    // its user reward above, so nothing more to do here.

    for (int v = 0; v < V; ++v) out.total_reward += out.server_rewards[v];
    episode_reward_ += out.total_reward;
    ++t_;

    check_allocation(alloc_, topo_);
    return out;
}

EpisodeSummary Env::summary() const {
    EpisodeSummary s;
    s.total_reward = episode_reward_;
    s.users = user_state_;
    s.allocation = alloc_;
    return s;
}

double Env::recompute_total_reward() const {
    double total = 0.0;
    for (int k = 0; k < num_users(); ++k) {
        const UserOutcome& u = user_state_[k];
        if (!u.proposed) continue;
        const double winner_earned = user_reward(true, u.iss_value, cfg_.xi, cfg_.eta,
                                                 u.latency_s * cfg_.reward_time_scale);
        if (cfg_.strict_conflict_reward) {
            if (u.proposals > 1)
                total += cfg_.rho * u.proposals;
            else
                total += winner_earned;
        } else {
            total += winner_earned + cfg_.rho * (u.proposals - 1);
        }
    }
    return total;
}

std::optional<double> objective_average_latency(const std::vector<UserOutcome>& users) {
    double sum = 0.0;
    int served = 0;
    for (const UserOutcome& u : users)
        if (u.served) {
            sum += u.latency_s;
            ++served;
        }
    if (served == 0) return std::nullopt;
    return sum / served;
}

std::optional<double> objective_average_latency(const std::vector<EpisodeSummary>& episodes) {
    double sum = 0.0;
    int served = 0;
    for (const EpisodeSummary& ep : episodes)
        for (const UserOutcome& u : ep.users)
            if (u.served) {
                sum += u.latency_s;
                ++served;
            }
    if (served == 0) return std::nullopt;
    return sum / served;
}

double multi_rb_probability(const std::vector<EpisodeSummary>& episodes) {
    if (episodes.empty()) throw std::invalid_argument("multi_rb_probability: no episodes");
    double acc = 0.0;
    for (const EpisodeSummary& ep : episodes) {
        int proposed = 0;
        int multi = 0;
        for (const UserOutcome& u : ep.users) {
            if (u.proposals >= 1) ++proposed;
            if (u.proposals > 1) ++multi;
        }
        acc += proposed > 0 ? static_cast<double>(multi) / proposed : 0.0;
    }
    return acc / static_cast<double>(episodes.size());
}

// --- scenario IO ---

namespace {
constexpr const char* kScenarioFormat = "semcom-scenario";
constexpr int kScenarioVersion = 1;
}  // namespace

void write_scenario_file(const std::string& path, const Scenario& scenario) {
    nlohmann::json j;
    j["format"] = kScenarioFormat;
    j["version"] = kScenarioVersion;
    j["coverage_radius_m"] = scenario.topology.coverage_radius_m;
    auto points = [](const std::vector<Point>& ps) {
        nlohmann::json arr = nlohmann::json::array();
        for (const Point& p : ps) arr.push_back({p.x, p.y});
        return arr;
    };
    j["servers"] = points(scenario.topology.servers);
    j["users"] = points(scenario.topology.users);
    j["coverage_sets"] = scenario.topology.coverage;
    j["channel_seed"] = scenario.channel_seed;
    j["dataset"] = scenario.dataset_path.empty() ? nlohmann::json(nullptr)
                                                 : nlohmann::json(scenario.dataset_path);
    std::ofstream out(path);
    if (!out) throw ConfigError("scenario: cannot open for write: " + path);
    out << j.dump(2) << '\n';
}

Scenario read_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("scenario: cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: parse error: ") + e.what());
    }
    if (j.value("format", "") != kScenarioFormat)
        throw ConfigError("scenario: unrecognized format tag");
    if (j.value("version", -1) != kScenarioVersion)
        throw ConfigError("scenario: unsupported version");

    Scenario s;
    s.topology.coverage_radius_m = j.at("coverage_radius_m").get<double>();
    for (const auto& p : j.at("servers"))
        s.topology.servers.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    for (const auto& p : j.at("users"))
        s.topology.users.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    s.topology.coverage = j.at("coverage_sets").get<std::vector<std::vector<int>>>();
    s.channel_seed = j.at("channel_seed").get<std::uint64_t>();
    if (!j.at("dataset").is_null()) s.dataset_path = j.at("dataset").get<std::string>();

    if (s.topology.coverage.size() != s.topology.servers.size())
        throw ConfigError("scenario: coverage sets inconsistent with servers");
    for (const auto& cov : s.topology.coverage)
        for (int k : cov)
            if (k < 0 || k >= static_cast<int>(s.topology.users.size()))
                throw ConfigError("scenario: coverage set references unknown user");
    return s;
}

}  // namespace semcom
