#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "awet/dtw.hpp"

namespace awet {

enum class BaseAlg { td3, ddpg };

/// How the advantage weight picks critic values.
enum class AdvantageCritic {
    elementwise_min,  // per-sample min over the two critics, then batch means
    argmin_critic,    // the single critic with the lower overall batch mean
};

std::string to_string(BaseAlg a);
BaseAlg parse_base_alg(const std::string& s);
std::string to_string(AdvantageCritic a);
AdvantageCritic parse_advantage_critic(const std::string& s);
std::string to_string(dtw::ComparisonMode m);
dtw::ComparisonMode parse_comparison_mode(const std::string& s);

struct AwetConfig {
    double gamma = 0.98;
    double lr = 1e-3;
    double c_l = 0.5;       // behavioral-cloning mixing weight
    double c_clip = 0.5;    // bound on the agent-batch TD loss
    double lambda1 = 1e-4;  // critic L2 (offline only)
    double lambda2 = 1e-4;  // actor L2 (offline only)
    double rho = 0.995;     // target retention
    // Noise scales are fractions of the action half-range.
    double sigma = 0.1;
    double sigma_tilde = 0.2;
    double noise_clip = 0.5;
    std::size_t policy_delay = 2;
    std::size_t offline_steps = 1000;
    std::size_t online_episodes = 2000;
    std::size_t batch_e = 100;
    std::size_t batch_a = 100;
    std::vector<std::size_t> hidden = {400, 300};
    std::size_t agent_capacity = 1'000'000;
    BaseAlg base_alg = BaseAlg::td3;

    bool use_advantage_weight = true;
    bool use_early_termination = true;
    bool use_loss_clip = true;
    // Off: online updates ignore D_E entirely (A_A fixed at 1, no L_QE term).
    bool use_expert_data = true;
    // Off: skip the offline stage (from-scratch baselines).
    bool pretrain = true;
    bool normalize_rewards = false;
    // Divisor applied to agent rewards before storage; the harness sets it to
    // the expert normalizer when normalize_rewards is on.
    double reward_scale = 1.0;
    AdvantageCritic advantage_critic = AdvantageCritic::elementwise_min;
    dtw::ComparisonMode et_mode = dtw::ComparisonMode::prefix_match;

    /// Throws InvalidInput on out-of-range values.
    void validate() const;
};

/// Settings that depend on the base algorithm: TD3 keeps target smoothing and
/// the configured policy delay; DDPG drops smoothing and updates the actor
/// after every critic step. Both keep the twin critics.
struct TrainerBehavior {
    double smoothing_std = 0.0;  // fraction of half-range
    double smoothing_clip = 0.0;
    std::size_t policy_delay = 1;
};

TrainerBehavior base_alg_variant(const AwetConfig& config);

}  // namespace awet
