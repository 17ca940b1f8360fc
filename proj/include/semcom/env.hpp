#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semcom/embedding.hpp"
#include "semcom/net.hpp"
#include "semcom/semantic.hpp"

namespace semcom {

/// Reward and episode constants.
struct EnvConfig {
    int num_rbs = 8;
    PhyParams phy;
    double xi = 0.5;                // similarity threshold in the reward indicator
    double selection_xi = 0.5;      // threshold fed to the triple-selection loop
    double eta = 3.0;               // bias for a reliable served user
    double rho = -3.0;              // penalty for a wasted (conflicted) allocation
    double reward_time_scale = 1e3; // latency multiplier in rewards (1e3 = milliseconds)
    bool strict_conflict_reward = false; // true: the conflict winner also collects rho
};

/// Everything the environment precomputes about one user's image for an
/// episode: scores, the cached descending-score order, the selected prefix at
/// the configured threshold, and the similarity the selection achieves.
struct UserContent {
    SceneGraph graph;
    ScoreVector scores;
    std::vector<std::size_t> order;
    std::size_t selected_len = 0;
    long selected_letters = 0;
    double true_iss = 0.0;
};

struct UserOutcome {
    bool proposed = false;
    bool served = false;
    bool conflicted = false; // proposed by more than one server
    int winner = -1;
    int proposals = 0;
    double rate_bps = 0.0;
    double latency_s = 0.0;
    double iss_value = 0.0;
    bool reliable = false;
};

struct StepOutcome {
    int rb = -1;
    std::vector<double> server_rewards;
    double total_reward = 0.0;
    std::vector<int> proposed_user;        // per server, -1 when idle
    std::vector<std::uint8_t> server_lost; // proposed but another server won
    std::vector<UserOutcome> users;        // per user, this step only
};

/// Same-step collision resolution: every non-idle proposer transmits on the
/// step's RB and interferes with the others; when several target one user the
/// highest single-RB rate wins, ties to the lowest server index.
struct ConflictResolution {
    std::vector<double> proposal_rate_bps; // per server, 0 when idle
    std::vector<int> winner_of_user;       // per user, -1 when nobody proposed
    std::vector<std::uint8_t> multi_proposed;
};
ConflictResolution resolve_conflicts(const std::vector<int>& proposed_user, int rb,
                                     const ChannelRealization& ch, const PhyParams& phy);

struct EpisodeSummary {
    double total_reward = 0.0;
    std::vector<UserOutcome> users; // episode-final state per user
    JointAllocation allocation;
};

/// Sequential RB-allocation environment. An episode is num_rbs steps; at step
/// t each server either assigns RB t to one user in its coverage it has not
/// served before, or idles. Cross-server collisions are resolved by rate and
/// penalized through the reward, never forbidden.
class Env {
  public:
    static constexpr int kIdle = -1;

    Env(EnvConfig cfg, Topology topo, EmbeddingModel model);

    /// Fresh channels and images from streams derived from (seed, episode).
    void reset(const GeneratorParams& gen, std::uint64_t seed, std::uint64_t episode);

    /// Episode from explicit data; graphs are per user.
    void reset_with(ChannelRealization channels, std::vector<SceneGraph> graphs,
                    std::uint64_t noise_seed);

    int num_servers() const { return static_cast<int>(topo_.servers.size()); }
    int num_users() const { return static_cast<int>(topo_.users.size()); }
    int num_rbs() const { return cfg_.num_rbs; }
    int step_index() const { return t_; }
    bool done() const { return t_ >= cfg_.num_rbs; }

    const EnvConfig& config() const { return cfg_; }
    const Topology& topology() const { return topo_; }
    const EmbeddingModel& embedding() const { return model_; }
    const ChannelRealization& channels() const { return channels_; }
    const UserContent& content(int user) const { return content_[user]; }
    const std::vector<std::uint8_t>& availability(int server) const { return avail_[server]; }
    const JointAllocation& allocation() const { return alloc_; }

    /// Admissible action flags for a server: one slot per coverage user (in
    /// coverage order) plus a final always-admissible idle slot.
    std::vector<std::uint8_t> action_mask(int server) const;

    /// joint_action[v] is an index into coverage(v) or kIdle. Throws
    /// RuntimeFailure on a masked action; that is an agent bug.
    StepOutcome step(const std::vector<int>& joint_action);

    double episode_total_reward() const { return episode_reward_; }
    EpisodeSummary summary() const;

    /// Episode-level reward recomputed from the final allocation and outcome
    /// flags, for cross-checking against the step-accumulated total.
    double recompute_total_reward() const;

  private:
    void prepare_content(std::vector<SceneGraph> graphs, std::uint64_t noise_seed);
    double user_latency(int user, double rate_bps) const;

    EnvConfig cfg_;
    Topology topo_;
    EmbeddingModel model_;
    ChannelRealization channels_;
    std::vector<UserContent> content_;
    std::vector<std::vector<std::uint8_t>> avail_;
    std::vector<std::vector<std::uint8_t>> served_by_; // per server, per user
    std::vector<UserOutcome> user_state_;
    JointAllocation alloc_;
    int t_ = 0;
    double episode_reward_ = 0.0;
};

/// eta on reliable delivery, minus the latency in reward time units; 0 when
/// the user was not served.
double user_reward(bool served, double true_iss, double xi, double eta, double latency_rtu);

/// Mean latency over served users; empty when nothing was served.
std::optional<double> objective_average_latency(const std::vector<UserOutcome>& users);
std::optional<double> objective_average_latency(const std::vector<EpisodeSummary>& episodes);

/// Fraction of proposed users that more than one server targeted, averaged
/// over episodes. Episodes without proposals contribute 0.
double multi_rb_probability(const std::vector<EpisodeSummary>& episodes);

// --- scenario file (versioned JSON) ---

struct Scenario {
    Topology topology;
    std::uint64_t channel_seed = 0;
    std::string dataset_path; // empty = generate images on the fly
};

void write_scenario_file(const std::string& path, const Scenario& scenario);
Scenario read_scenario_file(const std::string& path);

}  // namespace semcom
