#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semcom/dense_net.hpp"
#include "semcom/env.hpp"

namespace semcom {

enum class Algo { vderl, vdn_dqn, iql, random_policy };
Algo algo_from_string(const std::string& name);
std::string to_string(Algo algo);

struct Hyperparams {
    double lr_q = 1e-3;
    double lr_policy = 1e-3;
    double delta = 0.1;        // entropy temperature
    double delta_final = 0.01; // exponential decay endpoint (equal => constant)
    long delta_decay_iters = 100;
    int batch_size = 32;
    int target_sync_interval = 10;
    int episodes_per_iteration = 8;
    int q_steps_per_iteration = 8;
    int policy_max_inner_steps = 120;
    double policy_inner_tol = 1e-8; // stop when the mean loss moves less than this
    int store_capacity = 2048;
    std::vector<int> hidden_dims = {128, 128};
    bool adam = true; // false = plain gradient descent per the update rules
    double epsilon_start = 1.0; // epsilon-greedy schedule, baselines only
    double epsilon_final = 0.05;
    long epsilon_decay_iters = 150;

    double delta_at(long iteration) const;
    double epsilon_at(long iteration) const;
    void validate() const;
};

/// Maps environment state to fixed-size per-agent inputs. Score rows are
/// zero-padded to max_cov coverage slots of max_triples scores each; the
/// action space is the padded slot list plus a trailing idle action.
struct ObsEncoder {
    int num_rbs = 0;
    int max_cov = 0;
    int max_triples = 0;

    int obs_dim() const { return 2 * num_rbs + max_cov * max_triples; }
    int action_dim() const { return max_cov + 1; }
    int idle_action() const { return max_cov; }

    Vec encode(const Env& env, int server) const;
    std::vector<std::uint8_t> padded_mask(const Env& env, int server) const;
    int to_env_action(const Env& env, int server, int action) const;
};

struct AgentNets {
    DenseNet policy;
    DenseNet q;
    DenseNet target_q;
    AdamState policy_opt;
    AdamState q_opt;
};

std::vector<AgentNets> init_agents(int num_agents, const ObsEncoder& enc, const Hyperparams& hyper,
                                   std::uint64_t seed);

struct JointRecord {
    std::vector<Vec> obs;
    std::vector<Vec> next_obs;
    std::vector<std::vector<std::uint8_t>> mask;
    std::vector<std::vector<std::uint8_t>> next_mask;
    std::vector<int> action; // padded action index per agent
    std::vector<double> server_reward;
    double total_reward = 0.0;
    bool terminal = false;
};

/// Fixed-capacity ring of joint transition records.
class TrajectoryStore {
  public:
    explicit TrajectoryStore(std::size_t capacity);

    void push(JointRecord record);
    std::size_t size() const { return records_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t cursor() const { return cursor_; }
    const JointRecord& at(std::size_t i) const { return records_[i]; }

    /// Uniform with replacement over filled slots.
    std::vector<std::size_t> sample(int batch_size, rng::Stream& stream) const;

    void restore(std::vector<JointRecord> records, std::size_t cursor);

  private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<JointRecord> records_;
};

// --- action/probability helpers ---

/// Sum of the per-agent action values; the joint value is additive.
double q_total(const std::vector<double>& per_agent_q);

/// Softmax over admissible entries; inadmissible probabilities are exactly 0.
std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<std::uint8_t>& mask);

/// -sum p log p with 0 log 0 = 0.
double policy_entropy(const std::vector<double>& probs);

/// KL(p || q) over admissible entries.
double masked_kl(const std::vector<double>& p, const std::vector<double>& q,
                 const std::vector<std::uint8_t>& mask);

int sample_action(const std::vector<double>& logits, const std::vector<std::uint8_t>& mask,
                  rng::Stream& stream);

/// Highest admissible value, ties to the lowest index.
int argmax_admissible(const std::vector<double>& values, const std::vector<std::uint8_t>& mask);

/// Uniform draw over admissible actions (the random baseline's rule).
int uniform_admissible_action(const std::vector<std::uint8_t>& mask, rng::Stream& stream);

/// Epsilon-greedy over Q values: uniform-admissible with probability epsilon,
/// argmax otherwise (the DQN baselines' behavior rule).
int epsilon_greedy_action(const std::vector<double>& q_values,
                          const std::vector<std::uint8_t>& mask, double epsilon,
                          rng::Stream& stream);

// --- batch kernels ---
// The parallel variants split the batch into fixed-size chunks and merge the
// chunk accumulators in index order, so the result is bit-identical for any
// thread count. The *_serial variants are the plain-loop references used by
// the tests and the benchmark.

struct TdResult {
    double loss = 0.0;
    std::vector<GradBuffer> grads; // per agent, for the online Q nets
};

TdResult td_loss_and_grads(const TrajectoryStore& store, const std::vector<std::size_t>& batch,
                           const std::vector<AgentNets>& agents, bool parallel);
TdResult td_loss_and_grads_serial(const TrajectoryStore& store,
                                  const std::vector<std::size_t>& batch,
                                  const std::vector<AgentNets>& agents);

/// Independent learners: each agent regresses on its own server reward and
/// its own next-state max.
struct IqlResult {
    double mean_loss = 0.0;
    std::vector<double> per_agent_loss;
    std::vector<GradBuffer> grads;
};
IqlResult iql_loss_and_grads(const TrajectoryStore& store, const std::vector<std::size_t>& batch,
                             const std::vector<AgentNets>& agents, bool parallel);

struct PolicyResult {
    double mean_loss = 0.0; // mean over agents of the per-agent batch loss
    std::vector<double> per_agent_loss;
    std::vector<GradBuffer> grads; // per agent, for the policy nets
    double mean_entropy = 0.0;
};

PolicyResult policy_loss_and_grads(const TrajectoryStore& store,
                                   const std::vector<std::size_t>& batch,
                                   const std::vector<AgentNets>& agents, double delta,
                                   bool parallel);
PolicyResult policy_loss_and_grads_serial(const TrajectoryStore& store,
                                          const std::vector<std::size_t>& batch,
                                          const std::vector<AgentNets>& agents, double delta);

// --- training loop ---

struct TrainSetup {
    EnvConfig env_cfg;
    Topology topo;
    EmbeddingModel model{64, 0, 0.1};
    GeneratorParams gen;
    Hyperparams hyper;
    Algo algo = Algo::vderl;
    std::uint64_t seed = 0;       // training randomness (nets, actions, batches)
    std::uint64_t world_seed = 0; // channels/images; scenario files pin this
    bool fixed_scenario = false;  // one realization reused every episode
    std::string dataset_path;     // non-empty = images come from this dataset
    int parallel = 1;             // worker threads; 1 = serial mode
};

struct IterationMetrics {
    long iteration = 0;
    double mean_episode_reward = 0.0;
    double td_loss = 0.0;
    double policy_loss = 0.0;
    double mean_entropy = 0.0;
    double kl_gap_max = 0.0; // max over monitored states of KL_after - KL_before
    int policy_inner_steps = 0;
    bool policy_update_reverted = false;
};

struct EvalMetrics {
    long iteration = 0;
    int episodes = 0;
    double latency_mean_s = 0.0; // over episodes with served users
    double latency_std_s = 0.0;
    double reliability = 0.0; // served users with similarity >= xi, pooled
    double multi_rb_prob = 0.0;
    double served_fraction = 0.0;
    double mean_total_reward = 0.0;
};

class Trainer {
  public:
    explicit Trainer(TrainSetup setup);

    const TrainSetup& setup() const { return setup_; }
    const ObsEncoder& encoder() const { return encoder_; }
    const std::vector<AgentNets>& agents() const { return agents_; }
    const TrajectoryStore& store() const { return store_; }
    long iteration() const { return iteration_; }

    /// One Algorithm-2 iteration: collect episodes, Q-value phase, policy
    /// phase (VD-ERL), target sync. Throws RuntimeFailure when a loss turns
    /// non-finite.
    IterationMetrics run_iteration();

    /// Frozen-policy evaluation with greedy action selection over `episodes`
    /// independent episodes.
    EvalMetrics evaluate(int episodes) const;

    Env make_env() const;
    void reset_env_for_episode(Env& env, std::uint64_t episode_index) const;
    std::vector<int> greedy_joint_action(const Env& env) const; // padded indices

    void save_checkpoint_file(const std::string& path) const;
    static Trainer from_checkpoint_file(const std::string& path);

  private:
    struct EpisodeData {
        std::vector<JointRecord> records;
        EpisodeSummary summary;
    };
    enum class Behavior { policy_sample, epsilon_greedy, greedy, random };

    EpisodeData collect_episode(Env& env, std::uint64_t episode_index, Behavior behavior,
                                long iteration, const std::string& stream_tag) const;
    int select_action(int agent, const Vec& obs, const std::vector<std::uint8_t>& mask,
                      Behavior behavior, double epsilon, rng::Stream& stream) const;
    IterationMetrics vderl_policy_phase(IterationMetrics metrics);
    void sync_targets();
    void guard_finite(double value, const std::string& what) const;

    TrainSetup setup_;
    ObsEncoder encoder_;
    std::vector<AgentNets> agents_;
    TrajectoryStore store_;
    long iteration_ = 0;

    // Fixed-scenario realization, reused on every reset.
    ChannelRealization fixed_channels_;
    std::vector<SceneGraph> fixed_graphs_;
    std::uint64_t fixed_noise_seed_ = 0;
    std::vector<SceneGraph> dataset_graphs_;

    friend struct TrainerCheckpointAccess;
};

}  // namespace semcom
