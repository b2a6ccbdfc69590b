#pragma once

// Offline pre-training on expert data followed by online fine-tuning with
// batch-level advantage weighting and DTW early termination.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "awet/config.hpp"
#include "awet/demos.hpp"
#include "awet/dtw.hpp"
#include "awet/envs.hpp"
#include "awet/nnet.hpp"
#include "awet/rng.hpp"

namespace awet {

struct AgentNets {
    nnet::MlpSpec actor_spec;   // obs -> act, tanh scaled by the action half-range
    nnet::MlpSpec critic_spec;  // obs (+) act -> 1
    nnet::ParameterSet actor, critic1, critic2;
    nnet::ParameterSet actor_target, critic1_target, critic2_target;
    nnet::AdamState actor_opt, critic1_opt, critic2_opt;

    /// Random online nets; targets are copies. Requires symmetric action bounds.
    static AgentNets create(const envs::EnvSpec& env, const AwetConfig& config, Engine& init_rng);

    /// theta' <- theta, phi'_i <- phi_i
    void sync_targets();
    /// Polyak step on all three targets.
    void update_targets(double rho);
};

/// Rows obs then act, one column per sample.
nnet::Matrix critic_input(const nnet::Matrix& s, const nnet::Matrix& a);

/// Per-column minimum of the two critics at (s, a).
nnet::Vector min_q(const AgentNets& nets, const nnet::Matrix& s, const nnet::Matrix& a);

struct OfflineCriticTerms {
    std::array<double, 2> mse{};    // mean (Q_i - Q_E)^2
    std::array<double, 2> total{};  // mse + lambda1 * L2
};

struct OfflineActorTerms {
    double l_q = 0.0;   // mean of min-critic Q at the policy action
    double l_bc = 0.0;  // mean squared distance to the expert action
    double l2 = 0.0;
    double total = 0.0;  // -(1 - C_l) L_Q + C_l L_BC + lambda2 L2
};

/// One gradient step per critic against Monte-Carlo targets.
OfflineCriticTerms offline_critic_step(AgentNets& nets, const demos::Batch& expert, const AwetConfig& config);
/// One actor step; critics are read-only.
OfflineActorTerms offline_actor_step(AgentNets& nets, const demos::Batch& expert, const AwetConfig& config);

/// config.offline_steps critic steps. Throws MissingAnnotation when the
/// buffer's batches lack Monte-Carlo returns.
std::vector<OfflineCriticTerms> offline_train_critics(AgentNets& nets, const demos::ExpertBuffer& expert,
                                                      const AwetConfig& config, Engine& sampling_rng);
std::vector<OfflineActorTerms> offline_train_actor(AgentNets& nets, const demos::ExpertBuffer& expert,
                                                   const AwetConfig& config, Engine& sampling_rng);

/// A_A = Qa / (Qa + Qe) from batch means.
struct Advantage {
    double value = 0.5;
    double q_bar_a = 0.0;
    double q_bar_e = 0.0;
    bool degenerate = false;  // zero denominator; value fell back to 0.5
    bool clamped = false;     // raw ratio fell outside [0, 1]
};

Advantage advantage_from_means(double q_bar_a, double q_bar_e);
Advantage agent_advantage(const AgentNets& nets, const demos::Batch& agent, const demos::Batch& expert,
                          AdvantageCritic mode = AdvantageCritic::elementwise_min);

/// clip(loss, -c, c), or the identity when disabled.
double clip_loss(double loss, double c_clip, bool enabled);

/// y = r + gamma (1 - d) min_j Q'_j(s', a'), a' = clip(mu'(s') + clip(eps, -c, c)).
/// Smoothing noise is drawn column by column, action dimension fastest.
nnet::Vector td_targets(const AgentNets& nets, const demos::Batch& agent, const envs::EnvSpec& env,
                        const AwetConfig& config, Engine& smoothing_rng);

struct CriticTerms {
    double l_ba = 0.0;          // TD loss on the agent batch
    double l_ba_clipped = 0.0;  // after clip
    double l_be = 0.0;          // Monte-Carlo loss on the expert batch
    double total = 0.0;
};

struct ActorTerms {
    double l_qa = 0.0;
    double l_qe = 0.0;
    double l_bc = 0.0;
    double total = 0.0;  // -(1 - C_l) L_QE + C_l L_BC - L_QA
};

/// Minimizes A_A clip(L_BA) + (1 - A_A) L_BE for each critic given targets y.
/// With config.use_expert_data off, `expert` is ignored and the weight on
/// L_BA is 1.
std::array<CriticTerms, 2> critic_update_online(AgentNets& nets, const demos::Batch& agent,
                                                const demos::Batch* expert, const nnet::Vector& targets,
                                                double a_a, const AwetConfig& config);

/// Actor step on the online objective followed by the polyak target update.
ActorTerms actor_update_online(AgentNets& nets, const demos::Batch& agent, const demos::Batch* expert,
                               const AwetConfig& config);

/// Loss values without touching parameters; used for reporting and audits.
std::array<CriticTerms, 2> critic_losses_online(const AgentNets& nets, const demos::Batch& agent,
                                                const demos::Batch* expert, const nnet::Vector& targets,
                                                double a_a, const AwetConfig& config);
ActorTerms actor_losses_online(const AgentNets& nets, const demos::Batch& agent, const demos::Batch* expert,
                               const AwetConfig& config);

struct LossReport {
    std::uint64_t update = 0;
    std::uint64_t episode = 0;
    Advantage advantage;
    std::array<CriticTerms, 2> critic{};
    std::optional<ActorTerms> actor;
};

struct EpisodeRecord {
    std::uint64_t episode = 0;
    std::size_t steps = 0;
    bool gated = false;  // gate evaluated this episode
    dtw::GateDecision decision = dtw::GateDecision::continue_rollout;
    double gate_distance = 0.0;
    double episode_return = 0.0;
    std::size_t updates = 0;
};

struct EvalResult {
    std::size_t episodes = 0;
    std::size_t successes = 0;
    double mean_return = 0.0;
    double success_rate() const {
        return episodes == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(episodes);
    }
};

/// Deterministic policy (no noise) on one episode per seed, stepped in lockstep.
EvalResult evaluate_policy(const AgentNets& nets, const envs::EnvSpec& env, std::span<const std::uint64_t> seeds);

struct EvalRecord {
    std::uint64_t episode = 0;  // online episodes completed
    EvalResult result;
    std::uint64_t discards = 0;
    double a_a_mean = 0.0;
    std::uint64_t updates = 0;
};

struct OnlineHooks {
    std::function<void(const EpisodeRecord&)> on_episode;
    /// Every executed transition of an episode, kept or discarded, before
    /// the kept ones enter D_A.
    std::function<void(const EpisodeRecord&, std::span<const Transition>)> on_rollout;
    std::function<void(const LossReport&)> on_update;
    std::function<void(const EvalRecord&)> on_eval;
    /// Returning true after an evaluation ends the stage early.
    std::function<bool(const EvalRecord&)> stop;
};

struct EvalSchedule {
    std::size_t every = 20;  // 0 disables periodic evaluation
    std::vector<std::uint64_t> seeds;
};

/// Independent named streams derived from one run seed.
struct RunStreams {
    Engine init, explore, smoothing, sampling, env, eval;
    explicit RunStreams(std::uint64_t seed);
    static std::vector<std::string> names();
};

struct OnlineResult {
    demos::AgentBuffer agent_buffer{1};
    std::uint64_t episodes = 0;
    std::uint64_t discards = 0;
    std::uint64_t updates = 0;
    std::uint64_t actor_updates = 0;
    std::uint64_t degenerate_advantages = 0;
    double a_a_mean = 0.0;
};

/// Runs config.online_episodes episodes. `expert` and `monitor` may be null
/// when neither expert losses nor early termination is enabled.
OnlineResult run_online_stage(AgentNets& nets, const demos::ExpertBuffer* expert, const envs::EnvSpec& env,
                              const dtw::TerminationMonitor* monitor, const AwetConfig& config, RunStreams& streams,
                              const EvalSchedule& schedule, const OnlineHooks& hooks = {});

}  // namespace awet
