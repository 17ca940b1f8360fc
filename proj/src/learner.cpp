#include "semcom/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "semcom/errors.hpp"
#include "semcom/similarity.hpp"

namespace semcom {

namespace {
// Batch kernels accumulate per fixed-size chunk and merge in chunk order, so
// the merged result does not depend on the thread count.
constexpr std::size_t kChunk = 8;
}  // namespace

Algo algo_from_string(const std::string& name) {
    if (name == "vd-erl") return Algo::vderl;
    if (name == "vdn-dqn") return Algo::vdn_dqn;
    if (name == "iql") return Algo::iql;
    if (name == "random") return Algo::random_policy;
    throw ConfigError("unknown algorithm '" + name + "' (vd-erl | vdn-dqn | iql | random)");
}

std::string to_string(Algo algo) {
    switch (algo) {
        case Algo::vderl: return "vd-erl";
        case Algo::vdn_dqn: return "vdn-dqn";
        case Algo::iql: return "iql";
        case Algo::random_policy: return "random";
    }
    return "?";
}

double Hyperparams::delta_at(long iteration) const {
    if (delta_decay_iters <= 0 || delta_final == delta) return delta;
    const double f = std::min(1.0, static_cast<double>(iteration) /
                                       static_cast<double>(delta_decay_iters));
    return delta * std::exp(f * std::log(delta_final / delta));
}

double Hyperparams::epsilon_at(long iteration) const {
    if (epsilon_decay_iters <= 0) return epsilon_final;
    const double f = std::min(1.0, static_cast<double>(iteration) /
                                       static_cast<double>(epsilon_decay_iters));
    return epsilon_start + f * (epsilon_final - epsilon_start);
}

void Hyperparams::validate() const {
    if (lr_q <= 0.0 || lr_policy <= 0.0) {
        if (lr_q < 0.0 || lr_policy < 0.0) throw ConfigError("learning rates must be >= 0");
    }
    if (delta <= 0.0 || delta_final <= 0.0) throw ConfigError("temperature delta must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (store_capacity < 1) throw ConfigError("store_capacity must be >= 1");
    if (episodes_per_iteration < 1) throw ConfigError("episodes_per_iteration must be >= 1");
    if (hidden_dims.empty()) throw ConfigError("hidden_dims must not be empty");
    for (int d : hidden_dims)
        if (d < 1) throw ConfigError("hidden_dims entries must be positive");
}

// --- encoder ---

Vec ObsEncoder::encode(const Env& env, int server) const {
    Vec obs;
    obs.reserve(obs_dim());
    const auto& avail = env.availability(server);
    for (int q = 0; q < num_rbs; ++q) obs.push_back(static_cast<double>(avail[q]));
    for (int q = 0; q < num_rbs; ++q) obs.push_back(env.step_index() == q ? 1.0 : 0.0);
    const auto& cov = env.topology().coverage[server];
    for (int j = 0; j < max_cov; ++j) {
        if (j < static_cast<int>(cov.size())) {
            const ScoreVector& scores = env.content(cov[j]).scores;
            if (static_cast<int>(scores.size()) > max_triples)
                throw ConfigError("encoder: image has more triples than max_triples");
            for (int n = 0; n < max_triples; ++n)
                obs.push_back(n < static_cast<int>(scores.size()) ? scores[n] : 0.0);
        } else {
            for (int n = 0; n < max_triples; ++n) obs.push_back(0.0);
        }
    }
    return obs;
}

std::vector<std::uint8_t> ObsEncoder::padded_mask(const Env& env, int server) const {
    std::vector<std::uint8_t> mask(action_dim(), 0);
    const auto env_mask = env.action_mask(server); // |L_v| slots + idle
    const int cov = static_cast<int>(env_mask.size()) - 1;
    for (int j = 0; j < cov && j < max_cov; ++j) mask[j] = env_mask[j];
    mask[idle_action()] = 1;
    return mask;
}

int ObsEncoder::to_env_action(const Env& env, int server, int action) const {
    if (action == idle_action()) return Env::kIdle;
    const int cov = static_cast<int>(env.topology().coverage[server].size());
    if (action < 0 || action >= cov)
        throw RuntimeFailure("encoder: padded action outside coverage");
    return action;
}

std::vector<AgentNets> init_agents(int num_agents, const ObsEncoder& enc, const Hyperparams& hyper,
                                   std::uint64_t seed) {
    std::vector<AgentNets> agents;
    agents.reserve(num_agents);
    std::vector<int> dims;
    dims.push_back(enc.obs_dim());
    for (int h : hyper.hidden_dims) dims.push_back(h);
    dims.push_back(enc.action_dim());
    for (int v = 0; v < num_agents; ++v) {
        AgentNets a;
        auto ps = rng::stream(seed, "init-policy", static_cast<std::uint64_t>(v));
        auto qs = rng::stream(seed, "init-q", static_cast<std::uint64_t>(v));
        a.policy = DenseNet::init(dims, ps);
        a.q = DenseNet::init(dims, qs);
        a.target_q = a.q;
        a.policy_opt = AdamState::zeros_like(a.policy);
        a.q_opt = AdamState::zeros_like(a.q);
        agents.push_back(std::move(a));
    }
    return agents;
}

// --- trajectory store ---

TrajectoryStore::TrajectoryStore(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ < 1) throw ConfigError("trajectory store capacity must be >= 1");
    records_.reserve(std::min(capacity_, std::size_t{4096}));
}

void TrajectoryStore::push(JointRecord record) {
    if (records_.size() < capacity_) {
        records_.push_back(std::move(record));
    } else {
        records_[cursor_] = std::move(record);
    }
    cursor_ = (cursor_ + 1) % capacity_;
}

std::vector<std::size_t> TrajectoryStore::sample(int batch_size, rng::Stream& stream) const {
    if (records_.empty()) throw RuntimeFailure("sampling from an empty trajectory store");
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = stream.below(records_.size());
    return idx;
}

void TrajectoryStore::restore(std::vector<JointRecord> records, std::size_t cursor) {
    if (records.size() > capacity_) throw ConfigError("store restore exceeds capacity");
    records_ = std::move(records);
    cursor_ = cursor % capacity_;
}

// --- helpers ---

double q_total(const std::vector<double>& per_agent_q) {
    double total = 0.0;
    for (double q : per_agent_q) total += q;
    return total;
}

std::vector<double> masked_softmax(const std::vector<double>& logits,
                                   const std::vector<std::uint8_t>& mask) {
    if (logits.size() != mask.size())
        throw std::invalid_argument("masked_softmax: mask size mismatch");
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < logits.size(); ++a)
        if (mask[a] && logits[a] > max_logit) max_logit = logits[a];
    if (max_logit == -std::numeric_limits<double>::infinity())
        throw std::invalid_argument("masked_softmax: no admissible action");
    std::vector<double> probs(logits.size(), 0.0);
    double sum = 0.0;
    for (std::size_t a = 0; a < logits.size(); ++a) {
        if (!mask[a]) continue;
        probs[a] = std::exp(logits[a] - max_logit);
        sum += probs[a];
    }
    for (std::size_t a = 0; a < logits.size(); ++a) probs[a] /= sum;
    return probs;
}

double policy_entropy(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

double masked_kl(const std::vector<double>& p, const std::vector<double>& q,
                 const std::vector<std::uint8_t>& mask) {
    double kl = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        if (!mask[a] || p[a] <= 0.0) continue;
        kl += p[a] * (std::log(p[a]) - std::log(std::max(q[a], 1e-300)));
    }
    return std::max(0.0, kl);
}

int sample_action(const std::vector<double>& logits, const std::vector<std::uint8_t>& mask,
                  rng::Stream& stream) {
    const std::vector<double> probs = masked_softmax(logits, mask);
    const double u = stream.uniform();
    double cum = 0.0;
    int last_admissible = -1;
    for (std::size_t a = 0; a < probs.size(); ++a) {
        if (!mask[a]) continue;
        last_admissible = static_cast<int>(a);
        cum += probs[a];
        if (u < cum) return static_cast<int>(a);
    }
    return last_admissible; // cumulative rounding
}

int argmax_admissible(const std::vector<double>& values, const std::vector<std::uint8_t>& mask) {
    int best = -1;
    for (std::size_t a = 0; a < values.size(); ++a) {
        if (!mask[a]) continue;
        if (best < 0 || values[a] > values[best]) best = static_cast<int>(a);
    }
    if (best < 0) throw std::invalid_argument("argmax_admissible: no admissible action");
    return best;
}

int uniform_admissible_action(const std::vector<std::uint8_t>& mask, rng::Stream& stream) {
    int admissible = 0;
    for (auto m : mask) admissible += m;
    if (admissible == 0) throw std::invalid_argument("no admissible action");
    auto pick = stream.below(static_cast<std::uint64_t>(admissible));
    for (std::size_t a = 0; a < mask.size(); ++a) {
        if (!mask[a]) continue;
        if (pick == 0) return static_cast<int>(a);
        --pick;
    }
    return static_cast<int>(mask.size()) - 1;
}

int epsilon_greedy_action(const std::vector<double>& q_values,
                          const std::vector<std::uint8_t>& mask, double epsilon,
                          rng::Stream& stream) {
    if (stream.uniform() < epsilon) return uniform_admissible_action(mask, stream);
    return argmax_admissible(q_values, mask);
}

// --- TD kernel ---

namespace {

double max_admissible(const std::vector<double>& values, const std::vector<std::uint8_t>& mask) {
    return values[static_cast<std::size_t>(argmax_admissible(values, mask))];
}

// Accumulates delta * dQ_tot/dtheta_v for one record; returns delta.
double td_sample(const JointRecord& rec, const std::vector<AgentNets>& agents,
                 std::vector<ForwardTrace>& traces, std::vector<GradBuffer>& grads) {
    const std::size_t V = agents.size();
    double qtot = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
        net_forward(agents[v].q, rec.obs[v], traces[v]);
        qtot += traces[v].act.back()[rec.action[v]];
    }
    double target = 0.0;
    if (!rec.terminal) {
        // The additive decomposition makes the joint max separable.
        for (std::size_t v = 0; v < V; ++v)
            target += max_admissible(net_forward(agents[v].target_q, rec.next_obs[v]),
                                     rec.next_mask[v]);
    }
    const double delta = qtot - rec.total_reward - target;
    std::vector<double> upstream;
    for (std::size_t v = 0; v < V; ++v) {
        upstream.assign(agents[v].q.output_dim(), 0.0);
        upstream[rec.action[v]] = delta;
        net_backward(agents[v].q, traces[v], upstream, grads[v]);
    }
    return delta;
}

std::vector<GradBuffer> zero_grads_like_q(const std::vector<AgentNets>& agents) {
    std::vector<GradBuffer> g;
    g.reserve(agents.size());
    for (const AgentNets& a : agents) g.push_back(GradBuffer::zeros_like(a.q));
    return g;
}

std::vector<GradBuffer> zero_grads_like_policy(const std::vector<AgentNets>& agents) {
    std::vector<GradBuffer> g;
    g.reserve(agents.size());
    for (const AgentNets& a : agents) g.push_back(GradBuffer::zeros_like(a.policy));
    return g;
}

}  // namespace

TdResult td_loss_and_grads_serial(const TrajectoryStore& store,
                                  const std::vector<std::size_t>& batch,
                                  const std::vector<AgentNets>& agents) {
    const std::size_t V = agents.size();
    TdResult result;
    result.grads = zero_grads_like_q(agents);
    std::vector<ForwardTrace> traces(V);
    for (std::size_t i : batch) {
        const double delta = td_sample(store.at(i), agents, traces, result.grads);
        result.loss += delta * delta;
    }
    const double B = static_cast<double>(batch.size());
    result.loss /= B;
    for (auto& g : result.grads) g.scale(2.0 / B);
    return result;
}

TdResult td_loss_and_grads(const TrajectoryStore& store, const std::vector<std::size_t>& batch,
                           const std::vector<AgentNets>& agents, bool parallel) {
    const std::size_t B = batch.size();
    const std::size_t n_chunks = (B + kChunk - 1) / kChunk;
    std::vector<double> chunk_loss(n_chunks, 0.0);
    std::vector<std::vector<GradBuffer>> chunk_grads(n_chunks);

#pragma omp parallel for schedule(static) if (parallel)
    for (long c = 0; c < static_cast<long>(n_chunks); ++c) {
        auto& grads = chunk_grads[c];
        grads = zero_grads_like_q(agents);
        std::vector<ForwardTrace> traces(agents.size());
        const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
        const std::size_t hi = std::min(lo + kChunk, B);
        for (std::size_t i = lo; i < hi; ++i) {
            const double delta = td_sample(store.at(batch[i]), agents, traces, grads);
            chunk_loss[c] += delta * delta;
        }
    }

    TdResult result;
    result.grads = zero_grads_like_q(agents);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        result.loss += chunk_loss[c];
        for (std::size_t v = 0; v < agents.size(); ++v) result.grads[v].add(chunk_grads[c][v]);
    }
    result.loss /= static_cast<double>(B);
    for (auto& g : result.grads) g.scale(2.0 / static_cast<double>(B));
    return result;
}

IqlResult iql_loss_and_grads(const TrajectoryStore& store, const std::vector<std::size_t>& batch,
                             const std::vector<AgentNets>& agents, bool parallel) {
    const std::size_t V = agents.size();
    const std::size_t B = batch.size();
    const std::size_t n_chunks = (B + kChunk - 1) / kChunk;
    std::vector<std::vector<double>> chunk_loss(n_chunks, std::vector<double>(V, 0.0));
    std::vector<std::vector<GradBuffer>> chunk_grads(n_chunks);

#pragma omp parallel for schedule(static) if (parallel)
    for (long c = 0; c < static_cast<long>(n_chunks); ++c) {
        auto& grads = chunk_grads[c];
        grads = zero_grads_like_q(agents);
        ForwardTrace trace;
        std::vector<double> upstream;
        const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
        const std::size_t hi = std::min(lo + kChunk, B);
        for (std::size_t i = lo; i < hi; ++i) {
            const JointRecord& rec = store.at(batch[i]);
            for (std::size_t v = 0; v < V; ++v) {
                net_forward(agents[v].q, rec.obs[v], trace);
                double target = rec.server_reward[v];
                if (!rec.terminal)
                    target += max_admissible(net_forward(agents[v].target_q, rec.next_obs[v]),
                                             rec.next_mask[v]);
                const double delta = trace.act.back()[rec.action[v]] - target;
                chunk_loss[c][v] += delta * delta;
                upstream.assign(agents[v].q.output_dim(), 0.0);
                upstream[rec.action[v]] = delta;
                net_backward(agents[v].q, trace, upstream, grads[v]);
            }
        }
    }

    IqlResult result;
    result.per_agent_loss.assign(V, 0.0);
    result.grads = zero_grads_like_q(agents);
    for (std::size_t c = 0; c < n_chunks; ++c)
        for (std::size_t v = 0; v < V; ++v) {
            result.per_agent_loss[v] += chunk_loss[c][v];
            result.grads[v].add(chunk_grads[c][v]);
        }
    for (std::size_t v = 0; v < V; ++v) {
        result.per_agent_loss[v] /= static_cast<double>(B);
        result.grads[v].scale(2.0 / static_cast<double>(B));
        result.mean_loss += result.per_agent_loss[v] / static_cast<double>(V);
    }
    return result;
}

// --- policy kernel ---

namespace {

// Per-record, per-agent loss and gradient accumulation for the exact discrete
// expectation sum_a pi(a|s) (delta log pi(a|s) - Q(s,a)).
double policy_sample(const JointRecord& rec, std::size_t v, const AgentNets& agent, double delta,
                     ForwardTrace& trace, GradBuffer& grads, double& entropy_acc) {
    net_forward(agent.policy, rec.obs[v], trace);
    const std::vector<double>& logits = trace.act.back();
    const std::vector<double> probs = masked_softmax(logits, rec.mask[v]);
    const std::vector<double> qvals = net_forward(agent.q, rec.obs[v]);

    double loss = 0.0;
    for (std::size_t a = 0; a < probs.size(); ++a) {
        if (!rec.mask[v][a] || probs[a] <= 0.0) continue;
        loss += probs[a] * (delta * std::log(probs[a]) - qvals[a]);
    }
    entropy_acc += policy_entropy(probs);

    // d/dz_a of the per-state loss: pi_a (delta log pi_a - Q_a - loss).
    std::vector<double> upstream(probs.size(), 0.0);
    for (std::size_t a = 0; a < probs.size(); ++a) {
        if (!rec.mask[v][a] || probs[a] <= 0.0) continue;
        upstream[a] = probs[a] * (delta * std::log(probs[a]) - qvals[a] - loss);
    }
    net_backward(agent.policy, trace, upstream, grads);
    return loss;
}

}  // namespace

PolicyResult policy_loss_and_grads_serial(const TrajectoryStore& store,
                                          const std::vector<std::size_t>& batch,
                                          const std::vector<AgentNets>& agents, double delta) {
    const std::size_t V = agents.size();
    PolicyResult result;
    result.per_agent_loss.assign(V, 0.0);
    result.grads = zero_grads_like_policy(agents);
    ForwardTrace trace;
    double entropy = 0.0;
    for (std::size_t i : batch) {
        const JointRecord& rec = store.at(i);
        for (std::size_t v = 0; v < V; ++v)
            result.per_agent_loss[v] +=
                policy_sample(rec, v, agents[v], delta, trace, result.grads[v], entropy);
    }
    const double B = static_cast<double>(batch.size());
    for (std::size_t v = 0; v < V; ++v) {
        result.per_agent_loss[v] /= B;
        result.grads[v].scale(1.0 / B);
        result.mean_loss += result.per_agent_loss[v] / static_cast<double>(V);
    }
    result.mean_entropy = entropy / (B * static_cast<double>(V));
    return result;
}

PolicyResult policy_loss_and_grads(const TrajectoryStore& store,
                                   const std::vector<std::size_t>& batch,
                                   const std::vector<AgentNets>& agents, double delta,
                                   bool parallel) {
    const std::size_t V = agents.size();
    const std::size_t B = batch.size();
    const std::size_t n_chunks = (B + kChunk - 1) / kChunk;
    std::vector<std::vector<double>> chunk_loss(n_chunks, std::vector<double>(V, 0.0));
    std::vector<double> chunk_entropy(n_chunks, 0.0);
    std::vector<std::vector<GradBuffer>> chunk_grads(n_chunks);

#pragma omp parallel for schedule(static) if (parallel)
    for (long c = 0; c < static_cast<long>(n_chunks); ++c) {
        auto& grads = chunk_grads[c];
        grads = zero_grads_like_policy(agents);
        ForwardTrace trace;
        const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
        const std::size_t hi = std::min(lo + kChunk, B);
        for (std::size_t i = lo; i < hi; ++i) {
            const JointRecord& rec = store.at(batch[i]);
            for (std::size_t v = 0; v < V; ++v)
                chunk_loss[c][v] +=
                    policy_sample(rec, v, agents[v], delta, trace, grads[v], chunk_entropy[c]);
        }
    }

    PolicyResult result;
    result.per_agent_loss.assign(V, 0.0);
    result.grads = zero_grads_like_policy(agents);
    double entropy = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        entropy += chunk_entropy[c];
        for (std::size_t v = 0; v < V; ++v) {
            result.per_agent_loss[v] += chunk_loss[c][v];
            result.grads[v].add(chunk_grads[c][v]);
        }
    }
    const double Bd = static_cast<double>(B);
    for (std::size_t v = 0; v < V; ++v) {
        result.per_agent_loss[v] /= Bd;
        result.grads[v].scale(1.0 / Bd);
        result.mean_loss += result.per_agent_loss[v] / static_cast<double>(V);
    }
    result.mean_entropy = entropy / (Bd * static_cast<double>(V));
    return result;
}

// --- trainer ---

Trainer::Trainer(TrainSetup setup)
    : setup_(std::move(setup)), store_(static_cast<std::size_t>(setup_.hyper.store_capacity)) {
    setup_.hyper.validate();
    const int V = static_cast<int>(setup_.topo.servers.size());
    if (V < 1) throw ConfigError("trainer: topology has no servers");

    encoder_.num_rbs = setup_.env_cfg.num_rbs;
    encoder_.max_cov = 0;
    for (const auto& cov : setup_.topo.coverage)
        encoder_.max_cov = std::max(encoder_.max_cov, static_cast<int>(cov.size()));
    encoder_.max_triples = setup_.gen.triples_max;

    if (!setup_.dataset_path.empty()) {
        dataset_graphs_ = read_dataset_file(setup_.dataset_path);
        if (dataset_graphs_.empty()) throw ConfigError("trainer: dataset has no scene graphs");
        for (const SceneGraph& g : dataset_graphs_)
            encoder_.max_triples =
                std::max(encoder_.max_triples, static_cast<int>(g.triples.size()));
    }

    if (setup_.fixed_scenario) {
        auto cs = rng::stream(setup_.world_seed, "channels", std::uint64_t{0});
        fixed_channels_ = sample_channels(setup_.topo, setup_.env_cfg.num_rbs,
                                          setup_.env_cfg.phy.min_distance_m, cs);
        const int U = static_cast<int>(setup_.topo.users.size());
        fixed_graphs_.clear();
        for (int k = 0; k < U; ++k) {
            if (!dataset_graphs_.empty()) {
                fixed_graphs_.push_back(dataset_graphs_[k % dataset_graphs_.size()]);
            } else {
                auto gs = rng::stream(setup_.world_seed, "image", std::uint64_t{0},
                                      static_cast<std::uint64_t>(k));
                fixed_graphs_.push_back(
                    generate_scene_graph(setup_.gen, "fixed-u" + std::to_string(k), gs));
            }
        }
        fixed_noise_seed_ = rng::derive(setup_.world_seed, "image-noise", std::uint64_t{0});
    }

    agents_ = init_agents(V, encoder_, setup_.hyper, setup_.seed);
}

Env Trainer::make_env() const { return Env(setup_.env_cfg, setup_.topo, setup_.model); }

namespace {

void reset_episode(Env& env, const TrainSetup& setup, const std::vector<SceneGraph>& dataset,
                   const ChannelRealization& fixed_ch, const std::vector<SceneGraph>& fixed_graphs,
                   std::uint64_t fixed_noise_seed, std::uint64_t world_seed,
                   std::uint64_t episode) {
    if (setup.fixed_scenario) {
        env.reset_with(fixed_ch, fixed_graphs, fixed_noise_seed);
        return;
    }
    if (!dataset.empty()) {
        auto cs = rng::stream(world_seed, "channels", episode);
        ChannelRealization ch =
            sample_channels(env.topology(), setup.env_cfg.num_rbs,
                            setup.env_cfg.phy.min_distance_m, cs);
        const int U = env.num_users();
        std::vector<SceneGraph> graphs;
        graphs.reserve(U);
        for (int k = 0; k < U; ++k)
            graphs.push_back(
                dataset[(episode * static_cast<std::uint64_t>(U) + k) % dataset.size()]);
        env.reset_with(std::move(ch), std::move(graphs),
                       rng::derive(world_seed, "image-noise", episode));
        return;
    }
    env.reset(setup.gen, world_seed, episode);
}

}  // namespace

void Trainer::reset_env_for_episode(Env& env, std::uint64_t episode_index) const {
    reset_episode(env, setup_, dataset_graphs_, fixed_channels_, fixed_graphs_, fixed_noise_seed_,
                  setup_.world_seed, episode_index);
}

int Trainer::select_action(int agent, const Vec& obs, const std::vector<std::uint8_t>& mask,
                           Behavior behavior, double epsilon, rng::Stream& stream) const {
    switch (behavior) {
        case Behavior::policy_sample:
            return sample_action(net_forward(agents_[agent].policy, obs), mask, stream);
        case Behavior::epsilon_greedy:
            return epsilon_greedy_action(net_forward(agents_[agent].q, obs), mask, epsilon,
                                         stream);
        case Behavior::greedy:
            if (setup_.algo == Algo::vderl)
                return argmax_admissible(net_forward(agents_[agent].policy, obs), mask);
            if (setup_.algo == Algo::random_policy) break;
            return argmax_admissible(net_forward(agents_[agent].q, obs), mask);
        case Behavior::random:
            break;
    }
    return uniform_admissible_action(mask, stream);
}

Trainer::EpisodeData Trainer::collect_episode(Env& env, std::uint64_t episode_index,
                                              Behavior behavior, long iteration,
                                              const std::string& stream_tag) const {
    const int V = env.num_servers();
    auto action_stream =
        rng::stream(setup_.seed, stream_tag, static_cast<std::uint64_t>(iteration), episode_index);
    const double epsilon = setup_.hyper.epsilon_at(iteration);

    EpisodeData data;
    std::vector<Vec> obs(V);
    std::vector<std::vector<std::uint8_t>> masks(V);
    for (int v = 0; v < V; ++v) {
        obs[v] = encoder_.encode(env, v);
        masks[v] = encoder_.padded_mask(env, v);
    }
    while (!env.done()) {
        std::vector<int> padded(V), env_actions(V);
        for (int v = 0; v < V; ++v) {
            padded[v] = select_action(v, obs[v], masks[v], behavior, epsilon, action_stream);
            env_actions[v] = encoder_.to_env_action(env, v, padded[v]);
        }
        const StepOutcome out = env.step(env_actions);

        JointRecord rec;
        rec.obs = obs;
        rec.mask = masks;
        rec.action = padded;
        rec.server_reward = out.server_rewards;
        rec.total_reward = out.total_reward;
        rec.terminal = env.done();
        rec.next_obs.resize(V);
        rec.next_mask.resize(V);
        for (int v = 0; v < V; ++v) {
            rec.next_obs[v] = encoder_.encode(env, v);
            rec.next_mask[v] = encoder_.padded_mask(env, v);
        }
        obs = rec.next_obs;
        masks = rec.next_mask;
        data.records.push_back(std::move(rec));
    }
    data.summary = env.summary();
    return data;
}

void Trainer::sync_targets() {
    for (AgentNets& a : agents_) a.target_q = a.q;
}

void Trainer::guard_finite(double value, const std::string& what) const {
    if (!std::isfinite(value))
        throw RuntimeFailure("divergence: " + what + " became non-finite at iteration " +
                             std::to_string(iteration_));
}

IterationMetrics Trainer::run_iteration() {
    const long it = iteration_;
    IterationMetrics metrics;
    metrics.iteration = it;

    Behavior behavior = Behavior::random;
    if (setup_.algo == Algo::vderl) behavior = Behavior::policy_sample;
    if (setup_.algo == Algo::vdn_dqn || setup_.algo == Algo::iql)
        behavior = Behavior::epsilon_greedy;

    const int E = setup_.hyper.episodes_per_iteration;
    std::vector<EpisodeData> episodes(E);
    const bool par = setup_.parallel > 1;
#pragma omp parallel for schedule(static) if (par)
    for (int e = 0; e < E; ++e) {
        Env env = make_env();
        const std::uint64_t episode_index =
            static_cast<std::uint64_t>(it) * static_cast<std::uint64_t>(E) +
            static_cast<std::uint64_t>(e);
        reset_env_for_episode(env, episode_index);
        episodes[e] = collect_episode(env, episode_index, behavior, it, "actions");
    }
    for (EpisodeData& ep : episodes) {
        metrics.mean_episode_reward += ep.summary.total_reward / static_cast<double>(E);
        for (JointRecord& rec : ep.records) store_.push(std::move(rec));
    }

    if (setup_.algo != Algo::random_policy) {
        double td_loss_sum = 0.0;
        for (int g = 0; g < setup_.hyper.q_steps_per_iteration; ++g) {
            auto bstream = rng::stream(setup_.seed, "batch", static_cast<std::uint64_t>(it),
                                       static_cast<std::uint64_t>(g));
            const auto batch = store_.sample(setup_.hyper.batch_size, bstream);
            std::vector<GradBuffer> grads;
            double loss;
            if (setup_.algo == Algo::iql) {
                IqlResult r = iql_loss_and_grads(store_, batch, agents_, par);
                loss = r.mean_loss;
                grads = std::move(r.grads);
            } else {
                TdResult r = td_loss_and_grads(store_, batch, agents_, par);
                loss = r.loss;
                grads = std::move(r.grads);
            }
            guard_finite(loss, "Q loss");
            td_loss_sum += loss;
            for (std::size_t v = 0; v < agents_.size(); ++v) {
                if (setup_.hyper.adam)
                    adam_update(agents_[v].q, grads[v], agents_[v].q_opt, setup_.hyper.lr_q);
                else
                    sgd_update(agents_[v].q, grads[v], setup_.hyper.lr_q);
            }
        }
        metrics.td_loss = td_loss_sum / std::max(1, setup_.hyper.q_steps_per_iteration);

        if (setup_.algo == Algo::vderl) metrics = vderl_policy_phase(metrics);

        if (setup_.hyper.target_sync_interval > 0 &&
            (it + 1) % setup_.hyper.target_sync_interval == 0)
            sync_targets();
    }

    ++iteration_;
    return metrics;
}

namespace {

// One gradient step of the policy phase. Q values, target distributions and
// phase-start KLs are fixed for the whole phase, so they come in precomputed,
// indexed by (batch position, agent). The objective is the exact discrete
// expectation of Eq-17 form plus a hinge barrier that activates for any
// monitored state drifting above its phase-start KL; the barrier keeps the
// accepted update from pushing any state away from softmax(Q/delta).
struct PhaseStep {
    double loss = 0.0;     // barrier-free objective, reported and tracked
    double entropy = 0.0;  // mean over (state, agent)
    double worst_gap = -std::numeric_limits<double>::infinity();
    std::vector<GradBuffer> grads;
};

PhaseStep policy_phase_grads(const TrajectoryStore& store, const std::vector<std::size_t>& batch,
                             const std::vector<AgentNets>& agents, double delta,
                             const std::vector<std::vector<double>>& qvals,
                             const std::vector<std::vector<double>>& log_targets,
                             const std::vector<double>& kl_before, double lambda, bool parallel) {
    const std::size_t V = agents.size();
    const std::size_t B = batch.size();
    const std::size_t n_chunks = (B + kChunk - 1) / kChunk;
    std::vector<double> chunk_loss(n_chunks, 0.0);
    std::vector<double> chunk_entropy(n_chunks, 0.0);
    std::vector<double> chunk_gap(n_chunks, -std::numeric_limits<double>::infinity());
    std::vector<std::vector<GradBuffer>> chunk_grads(n_chunks);

#pragma omp parallel for schedule(static) if (parallel)
    for (long c = 0; c < static_cast<long>(n_chunks); ++c) {
        auto& grads = chunk_grads[c];
        grads = zero_grads_like_policy(agents);
        ForwardTrace trace;
        std::vector<double> upstream;
        const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
        const std::size_t hi = std::min(lo + kChunk, B);
        for (std::size_t b = lo; b < hi; ++b) {
            const JointRecord& rec = store.at(batch[b]);
            for (std::size_t v = 0; v < V; ++v) {
                const std::size_t t = b * V + v;
                net_forward(agents[v].policy, rec.obs[v], trace);
                const std::vector<double> probs = masked_softmax(trace.act.back(), rec.mask[v]);

                double loss = 0.0, kl = 0.0;
                for (std::size_t a = 0; a < probs.size(); ++a) {
                    if (!rec.mask[v][a] || probs[a] <= 0.0) continue;
                    const double logp = std::log(probs[a]);
                    loss += probs[a] * (delta * logp - qvals[t][a]);
                    kl += probs[a] * (logp - log_targets[t][a]);
                }
                kl = std::max(0.0, kl);
                chunk_loss[c] += loss;
                chunk_entropy[c] += policy_entropy(probs);
                chunk_gap[c] = std::max(chunk_gap[c], kl - kl_before[t]);

                const bool barrier = lambda > 0.0 && kl > kl_before[t];
                upstream.assign(probs.size(), 0.0);
                for (std::size_t a = 0; a < probs.size(); ++a) {
                    if (!rec.mask[v][a] || probs[a] <= 0.0) continue;
                    const double logp = std::log(probs[a]);
                    double u = delta * logp - qvals[t][a] - loss;
                    if (barrier) u += lambda * (logp - log_targets[t][a] - kl);
                    upstream[a] = probs[a] * u;
                }
                net_backward(agents[v].policy, trace, upstream, grads[v]);
            }
        }
    }

    PhaseStep result;
    result.grads = zero_grads_like_policy(agents);
    for (std::size_t c = 0; c < n_chunks; ++c) {
        result.loss += chunk_loss[c];
        result.entropy += chunk_entropy[c];
        result.worst_gap = std::max(result.worst_gap, chunk_gap[c]);
        for (std::size_t v = 0; v < V; ++v) result.grads[v].add(chunk_grads[c][v]);
    }
    const double scale = static_cast<double>(B) * static_cast<double>(V);
    result.loss /= static_cast<double>(B) * static_cast<double>(V);
    result.entropy /= scale;
    for (auto& g : result.grads) g.scale(1.0 / static_cast<double>(B));
    return result;
}

}  // namespace

IterationMetrics Trainer::vderl_policy_phase(IterationMetrics metrics) {
    const long it = iteration_;
    const double delta = setup_.hyper.delta_at(it);
    const bool par = setup_.parallel > 1;
    auto pstream = rng::stream(setup_.seed, "policy-batch", static_cast<std::uint64_t>(it));
    const auto batch = store_.sample(setup_.hyper.batch_size, pstream);
    const std::size_t V = agents_.size();

    // Q is fixed for the whole phase: precompute action values, the target
    // distributions softmax(Q/delta), and the phase-start KL per state.
    std::vector<std::vector<double>> qvals, log_targets;
    std::vector<double> kl_before;
    qvals.reserve(batch.size() * V);
    log_targets.reserve(batch.size() * V);
    kl_before.reserve(batch.size() * V);
    for (std::size_t i : batch) {
        const JointRecord& rec = store_.at(i);
        for (std::size_t v = 0; v < V; ++v) {
            std::vector<double> q = net_forward(agents_[v].q, rec.obs[v]);
            std::vector<double> scaled = q;
            for (double& x : scaled) x /= delta;
            const std::vector<double> target = masked_softmax(scaled, rec.mask[v]);
            std::vector<double> log_target(target.size(), -1e300);
            for (std::size_t a = 0; a < target.size(); ++a)
                if (target[a] > 0.0) log_target[a] = std::log(target[a]);
            const auto probs =
                masked_softmax(net_forward(agents_[v].policy, rec.obs[v]), rec.mask[v]);
            kl_before.push_back(masked_kl(probs, target, rec.mask[v]));
            qvals.push_back(std::move(q));
            log_targets.push_back(std::move(log_target));
        }
    }

    constexpr double kGapTol = 1e-6;
    std::vector<DenseNet> start_policy;
    for (const AgentNets& a : agents_) start_policy.push_back(a.policy);
    std::vector<AdamState> start_opt;
    for (const AgentNets& a : agents_) start_opt.push_back(a.policy_opt);

    // Each phase is a fresh optimization problem; stale moments from the
    // previous phase's targets only slow the fit down.
    for (AgentNets& a : agents_) a.policy_opt = AdamState::zeros_like(a.policy);

    std::vector<DenseNet> best_policy = start_policy;
    double best_loss = std::numeric_limits<double>::infinity();
    double best_gap = 0.0;
    double loss_at_start = 0.0;
    bool improved = false;
    int steps = 0;

    auto eval_step = [&](double lambda) {
        return policy_phase_grads(store_, batch, agents_, delta, qvals, log_targets, kl_before,
                                  lambda, par);
    };
    auto consider = [&](const PhaseStep& r) {
        if (r.worst_gap <= kGapTol && r.loss < best_loss) {
            best_loss = r.loss;
            best_gap = std::max(0.0, r.worst_gap);
            for (std::size_t v = 0; v < V; ++v) best_policy[v] = agents_[v].policy;
            improved = true;
        }
    };

    // Budget scales with how far the policy lags the new targets: a phase
    // starting at equilibrium only needs a short probe before the identity
    // update is accepted as the best feasible one.
    double klb_max = 0.0;
    for (double k : kl_before) klb_max = std::max(klb_max, k);
    const int base_budget = setup_.hyper.policy_max_inner_steps;
    const int budget = klb_max > 0.01 ? base_budget : std::max(20, base_budget / 6);
    constexpr double kBarrier = 16.0;

    double prev_loss = std::numeric_limits<double>::infinity();
    for (int s = 0; s < budget; ++s) {
        const PhaseStep r = eval_step(kBarrier);
        guard_finite(r.loss, "policy loss");
        if (s == 0) {
            loss_at_start = r.loss;
            best_loss = r.loss;
        }
        consider(r);
        const bool converged = std::fabs(prev_loss - r.loss) < setup_.hyper.policy_inner_tol;
        if (converged && s > 0) break;
        for (std::size_t v = 0; v < V; ++v) {
            if (setup_.hyper.adam)
                adam_update(agents_[v].policy, r.grads[v], agents_[v].policy_opt,
                            setup_.hyper.lr_policy);
            else
                sgd_update(agents_[v].policy, r.grads[v], setup_.hyper.lr_policy);
        }
        prev_loss = r.loss;
        ++steps;
    }

    if (improved) {
        for (std::size_t v = 0; v < V; ++v) agents_[v].policy = best_policy[v];
        metrics.kl_gap_max = best_gap;
    } else {
        // Nothing met the per-state guarantee; keep the phase-start policy
        // (the inequality then holds with equality).
        for (std::size_t v = 0; v < V; ++v) {
            agents_[v].policy = start_policy[v];
            agents_[v].policy_opt = start_opt[v];
        }
        metrics.kl_gap_max = 0.0;
        metrics.policy_update_reverted = true;
        best_loss = loss_at_start;
    }
    if (std::getenv("SEMCOM_PHASE_DEBUG")) {
        std::fprintf(stderr, "phase it=%ld steps=%d L0=%.6g Lbest=%.6g accepted=%d\n", it, steps,
                     loss_at_start, best_loss, improved ? 1 : 0);
    }

    const PhaseStep final_r = eval_step(0.0);
    metrics.policy_loss = final_r.loss;
    metrics.mean_entropy = final_r.entropy;
    metrics.policy_inner_steps = steps;
    return metrics;
}

EvalMetrics Trainer::evaluate(int episodes) const {
    if (episodes < 1) throw ConfigError("evaluation needs at least one episode");
    const std::uint64_t eval_world =
        rng::derive(setup_.world_seed, "eval-world", static_cast<std::uint64_t>(iteration_));
    const Behavior behavior =
        setup_.algo == Algo::random_policy ? Behavior::random : Behavior::greedy;

    std::vector<EpisodeSummary> summaries(episodes);
    const bool par = setup_.parallel > 1;
#pragma omp parallel for schedule(static) if (par)
    for (int e = 0; e < episodes; ++e) {
        Env env = make_env();
        reset_episode(env, setup_, dataset_graphs_, fixed_channels_, fixed_graphs_,
                      fixed_noise_seed_, eval_world, static_cast<std::uint64_t>(e));
        EpisodeData data = collect_episode(env, static_cast<std::uint64_t>(e), behavior,
                                           iteration_, "eval-actions");
        summaries[e] = std::move(data.summary);
    }

    EvalMetrics m;
    m.iteration = iteration_;
    m.episodes = episodes;

    std::vector<double> episode_latency;
    std::vector<double> iss_samples;
    long served = 0;
    for (const EpisodeSummary& s : summaries) {
        m.mean_total_reward += s.total_reward / static_cast<double>(episodes);
        if (auto lat = objective_average_latency(s.users)) episode_latency.push_back(*lat);
        for (const UserOutcome& u : s.users)
            if (u.served) {
                iss_samples.push_back(u.iss_value);
                ++served;
            }
    }
    if (!episode_latency.empty()) {
        double mean = 0.0;
        for (double lat : episode_latency) mean += lat;
        mean /= static_cast<double>(episode_latency.size());
        double var = 0.0;
        for (double lat : episode_latency) var += (lat - mean) * (lat - mean);
        m.latency_mean_s = mean;
        m.latency_std_s = episode_latency.size() > 1
                              ? std::sqrt(var / static_cast<double>(episode_latency.size() - 1))
                              : 0.0;
    }
    m.reliability =
        iss_samples.empty() ? 0.0 : empirical_reliability(iss_samples, setup_.env_cfg.xi);
    m.multi_rb_prob = multi_rb_probability(summaries);
    m.served_fraction = static_cast<double>(served) /
                        (static_cast<double>(episodes) * setup_.topo.users.size());
    return m;
}

std::vector<int> Trainer::greedy_joint_action(const Env& env) const {
    const int V = env.num_servers();
    std::vector<int> actions(V);
    auto dummy = rng::stream(setup_.seed, "greedy-probe", std::uint64_t{0});
    for (int v = 0; v < V; ++v) {
        const Vec obs = encoder_.encode(env, v);
        const auto mask = encoder_.padded_mask(env, v);
        actions[v] = select_action(v, obs, mask, Behavior::greedy, 0.0, dummy);
    }
    return actions;
}

// --- checkpointing ---

namespace {
constexpr const char* kCheckpointFormat = "semcom-checkpoint";
constexpr int kCheckpointVersion = 1;

nlohmann::json net_to_json(const DenseNet& net) {
    return nlohmann::json{
        {"dims", net.layer_dims}, {"w", net.weights}, {"b", net.biases}};
}

DenseNet net_from_json(const nlohmann::json& j) {
    DenseNet net;
    net.layer_dims = j.at("dims").get<std::vector<int>>();
    net.weights = j.at("w").get<std::vector<std::vector<double>>>();
    net.biases = j.at("b").get<std::vector<std::vector<double>>>();
    return net;
}

nlohmann::json adam_to_json(const AdamState& s) {
    return nlohmann::json{{"step", s.step},
                          {"mw", s.m.weights},
                          {"mb", s.m.biases},
                          {"vw", s.v.weights},
                          {"vb", s.v.biases}};
}

AdamState adam_from_json(const nlohmann::json& j) {
    AdamState s;
    s.step = j.at("step").get<long>();
    s.m.weights = j.at("mw").get<std::vector<std::vector<double>>>();
    s.m.biases = j.at("mb").get<std::vector<std::vector<double>>>();
    s.v.weights = j.at("vw").get<std::vector<std::vector<double>>>();
    s.v.biases = j.at("vb").get<std::vector<std::vector<double>>>();
    return s;
}

nlohmann::json topo_to_json(const Topology& topo) {
    nlohmann::json servers = nlohmann::json::array();
    for (const Point& p : topo.servers) servers.push_back({p.x, p.y});
    nlohmann::json users = nlohmann::json::array();
    for (const Point& p : topo.users) users.push_back({p.x, p.y});
    return nlohmann::json{{"servers", servers},
                          {"users", users},
                          {"coverage_radius_m", topo.coverage_radius_m},
                          {"coverage", topo.coverage}};
}

Topology topo_from_json(const nlohmann::json& j) {
    Topology topo;
    for (const auto& p : j.at("servers"))
        topo.servers.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    for (const auto& p : j.at("users"))
        topo.users.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    topo.coverage_radius_m = j.at("coverage_radius_m").get<double>();
    topo.coverage = j.at("coverage").get<std::vector<std::vector<int>>>();
    return topo;
}

nlohmann::json token_vocab(const std::vector<std::string>& v) { return nlohmann::json(v); }

nlohmann::json setup_to_json(const TrainSetup& s) {
    nlohmann::json j;
    j["env"] = {{"num_rbs", s.env_cfg.num_rbs},
                {"xi", s.env_cfg.xi},
                {"selection_xi", s.env_cfg.selection_xi},
                {"eta", s.env_cfg.eta},
                {"rho", s.env_cfg.rho},
                {"reward_time_scale", s.env_cfg.reward_time_scale},
                {"strict_conflict_reward", s.env_cfg.strict_conflict_reward},
                {"tx_power_w", s.env_cfg.phy.tx_power_w},
                {"rb_bandwidth_hz", s.env_cfg.phy.rb_bandwidth_hz},
                {"noise_psd_w_per_hz", s.env_cfg.phy.noise_psd_w_per_hz},
                {"bits_per_letter", s.env_cfg.phy.bits_per_letter},
                {"min_distance_m", s.env_cfg.phy.min_distance_m}};
    j["topology"] = topo_to_json(s.topo);
    j["embedding"] = {{"dimension", s.model.dimension()},
                      {"token_seed", s.model.token_seed()},
                      {"image_noise_std", s.model.image_noise_std()}};
    j["generator"] = {{"triples_min", s.gen.triples_min},
                      {"triples_max", s.gen.triples_max},
                      {"vocab_objects", token_vocab(s.gen.vocab_objects)},
                      {"vocab_relations", token_vocab(s.gen.vocab_relations)},
                      {"law_kind",
                       s.gen.detection_prob_law.kind == DetectionProbLaw::Kind::beta ? "beta"
                                                                                     : "uniform"},
                      {"law_a", s.gen.detection_prob_law.a},
                      {"law_b", s.gen.detection_prob_law.b}};
    j["hyper"] = {{"lr_q", s.hyper.lr_q},
                  {"lr_policy", s.hyper.lr_policy},
                  {"delta", s.hyper.delta},
                  {"delta_final", s.hyper.delta_final},
                  {"delta_decay_iters", s.hyper.delta_decay_iters},
                  {"batch_size", s.hyper.batch_size},
                  {"target_sync_interval", s.hyper.target_sync_interval},
                  {"episodes_per_iteration", s.hyper.episodes_per_iteration},
                  {"q_steps_per_iteration", s.hyper.q_steps_per_iteration},
                  {"policy_max_inner_steps", s.hyper.policy_max_inner_steps},
                  {"policy_inner_tol", s.hyper.policy_inner_tol},
                  {"store_capacity", s.hyper.store_capacity},
                  {"hidden_dims", s.hyper.hidden_dims},
                  {"adam", s.hyper.adam},
                  {"epsilon_start", s.hyper.epsilon_start},
                  {"epsilon_final", s.hyper.epsilon_final},
                  {"epsilon_decay_iters", s.hyper.epsilon_decay_iters}};
    j["algorithm"] = to_string(s.algo);
    j["seed"] = s.seed;
    j["world_seed"] = s.world_seed;
    j["fixed_scenario"] = s.fixed_scenario;
    j["dataset_path"] = s.dataset_path;
    j["parallel"] = s.parallel;
    return j;
}

TrainSetup setup_from_json(const nlohmann::json& j) {
    TrainSetup s;
    const auto& e = j.at("env");
    s.env_cfg.num_rbs = e.at("num_rbs").get<int>();
    s.env_cfg.xi = e.at("xi").get<double>();
    s.env_cfg.selection_xi = e.at("selection_xi").get<double>();
    s.env_cfg.eta = e.at("eta").get<double>();
    s.env_cfg.rho = e.at("rho").get<double>();
    s.env_cfg.reward_time_scale = e.at("reward_time_scale").get<double>();
    s.env_cfg.strict_conflict_reward = e.at("strict_conflict_reward").get<bool>();
    s.env_cfg.phy.tx_power_w = e.at("tx_power_w").get<double>();
    s.env_cfg.phy.rb_bandwidth_hz = e.at("rb_bandwidth_hz").get<double>();
    s.env_cfg.phy.noise_psd_w_per_hz = e.at("noise_psd_w_per_hz").get<double>();
    s.env_cfg.phy.bits_per_letter = e.at("bits_per_letter").get<int>();
    s.env_cfg.phy.min_distance_m = e.at("min_distance_m").get<double>();
    s.topo = topo_from_json(j.at("topology"));
    const auto& em = j.at("embedding");
    s.model = EmbeddingModel(em.at("dimension").get<int>(), em.at("token_seed").get<std::uint64_t>(),
                             em.at("image_noise_std").get<double>());
    const auto& g = j.at("generator");
    s.gen.triples_min = g.at("triples_min").get<int>();
    s.gen.triples_max = g.at("triples_max").get<int>();
    s.gen.vocab_objects = g.at("vocab_objects").get<std::vector<std::string>>();
    s.gen.vocab_relations = g.at("vocab_relations").get<std::vector<std::string>>();
    s.gen.detection_prob_law.kind = g.at("law_kind").get<std::string>() == "beta"
                                        ? DetectionProbLaw::Kind::beta
                                        : DetectionProbLaw::Kind::uniform;
    s.gen.detection_prob_law.a = g.at("law_a").get<double>();
    s.gen.detection_prob_law.b = g.at("law_b").get<double>();
    const auto& h = j.at("hyper");
    s.hyper.lr_q = h.at("lr_q").get<double>();
    s.hyper.lr_policy = h.at("lr_policy").get<double>();
    s.hyper.delta = h.at("delta").get<double>();
    s.hyper.delta_final = h.at("delta_final").get<double>();
    s.hyper.delta_decay_iters = h.at("delta_decay_iters").get<long>();
    s.hyper.batch_size = h.at("batch_size").get<int>();
    s.hyper.target_sync_interval = h.at("target_sync_interval").get<int>();
    s.hyper.episodes_per_iteration = h.at("episodes_per_iteration").get<int>();
    s.hyper.q_steps_per_iteration = h.at("q_steps_per_iteration").get<int>();
    s.hyper.policy_max_inner_steps = h.at("policy_max_inner_steps").get<int>();
    s.hyper.policy_inner_tol = h.at("policy_inner_tol").get<double>();
    s.hyper.store_capacity = h.at("store_capacity").get<int>();
    s.hyper.hidden_dims = h.at("hidden_dims").get<std::vector<int>>();
    s.hyper.adam = h.at("adam").get<bool>();
    s.hyper.epsilon_start = h.at("epsilon_start").get<double>();
    s.hyper.epsilon_final = h.at("epsilon_final").get<double>();
    s.hyper.epsilon_decay_iters = h.at("epsilon_decay_iters").get<long>();
    s.algo = algo_from_string(j.at("algorithm").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.world_seed = j.at("world_seed").get<std::uint64_t>();
    s.fixed_scenario = j.at("fixed_scenario").get<bool>();
    s.dataset_path = j.at("dataset_path").get<std::string>();
    s.parallel = j.at("parallel").get<int>();
    return s;
}

nlohmann::json record_to_json(const JointRecord& r) {
    return nlohmann::json{{"o", r.obs},     {"no", r.next_obs},       {"m", r.mask},
                          {"nm", r.next_mask}, {"a", r.action},       {"sr", r.server_reward},
                          {"r", r.total_reward}, {"t", r.terminal}};
}

JointRecord record_from_json(const nlohmann::json& j) {
    JointRecord r;
    r.obs = j.at("o").get<std::vector<Vec>>();
    r.next_obs = j.at("no").get<std::vector<Vec>>();
    r.mask = j.at("m").get<std::vector<std::vector<std::uint8_t>>>();
    r.next_mask = j.at("nm").get<std::vector<std::vector<std::uint8_t>>>();
    r.action = j.at("a").get<std::vector<int>>();
    r.server_reward = j.at("sr").get<std::vector<double>>();
    r.total_reward = j.at("r").get<double>();
    r.terminal = j.at("t").get<bool>();
    return r;
}

}  // namespace

// All derived RNG streams are keyed by (seed, tag, iteration, ...), so the
// checkpoint's seed and iteration counter are the complete RNG state.
void Trainer::save_checkpoint_file(const std::string& path) const {
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["setup"] = setup_to_json(setup_);
    j["iteration"] = iteration_;
    nlohmann::json agents = nlohmann::json::array();
    for (const AgentNets& a : agents_)
        agents.push_back(nlohmann::json{{"policy", net_to_json(a.policy)},
                                        {"q", net_to_json(a.q)},
                                        {"target_q", net_to_json(a.target_q)},
                                        {"policy_opt", adam_to_json(a.policy_opt)},
                                        {"q_opt", adam_to_json(a.q_opt)}});
    j["agents"] = std::move(agents);
    nlohmann::json records = nlohmann::json::array();
    for (std::size_t i = 0; i < store_.size(); ++i) records.push_back(record_to_json(store_.at(i)));
    j["store"] = {{"records", std::move(records)}, {"cursor", store_.cursor()}};

    std::ofstream out(path);
    if (!out) throw ConfigError("checkpoint: cannot open for write: " + path);
    out << j.dump() << '\n';
}

Trainer Trainer::from_checkpoint_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("checkpoint: cannot open: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint: parse error: ") + e.what());
    }
    if (j.value("format", "") != kCheckpointFormat)
        throw ConfigError("checkpoint: unrecognized format tag");
    if (j.value("version", -1) != kCheckpointVersion)
        throw ConfigError("checkpoint: unsupported version");

    Trainer t(setup_from_json(j.at("setup")));
    t.iteration_ = j.at("iteration").get<long>();
    const auto& agents = j.at("agents");
    if (agents.size() != t.agents_.size())
        throw ConfigError("checkpoint: agent count mismatch with topology");
    for (std::size_t v = 0; v < t.agents_.size(); ++v) {
        AgentNets a;
        a.policy = net_from_json(agents[v].at("policy"));
        a.q = net_from_json(agents[v].at("q"));
        a.target_q = net_from_json(agents[v].at("target_q"));
        a.policy_opt = adam_from_json(agents[v].at("policy_opt"));
        a.q_opt = adam_from_json(agents[v].at("q_opt"));
        if (a.q.input_dim() != t.encoder_.obs_dim() ||
            a.q.output_dim() != t.encoder_.action_dim())
            throw ConfigError("checkpoint: network shape mismatch with configuration");
        t.agents_[v] = std::move(a);
    }
    std::vector<JointRecord> records;
    for (const auto& rj : j.at("store").at("records")) records.push_back(record_from_json(rj));
    t.store_.restore(std::move(records), j.at("store").at("cursor").get<std::size_t>());
    return t;
}

}  // namespace semcom
