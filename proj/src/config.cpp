#include "awet/config.hpp"

#include <cmath>

#include "awet/error.hpp"

namespace awet {

std::string to_string(BaseAlg a) { return a == BaseAlg::td3 ? "td3" : "ddpg"; }

BaseAlg parse_base_alg(const std::string& s) {
    if (s == "td3") return BaseAlg::td3;
    if (s == "ddpg") return BaseAlg::ddpg;
    throw InvalidInput("unknown base algorithm '" + s + "'");
}

std::string to_string(AdvantageCritic a) {
    return a == AdvantageCritic::elementwise_min ? "elementwise_min" : "argmin_critic";
}

AdvantageCritic parse_advantage_critic(const std::string& s) {
    if (s == "elementwise_min") return AdvantageCritic::elementwise_min;
    if (s == "argmin_critic") return AdvantageCritic::argmin_critic;
    throw InvalidInput("unknown advantage critic mode '" + s + "'");
}

std::string to_string(dtw::ComparisonMode m) {
    return m == dtw::ComparisonMode::prefix_match ? "prefix_match" : "full_expert";
}

dtw::ComparisonMode parse_comparison_mode(const std::string& s) {
    if (s == "prefix_match") return dtw::ComparisonMode::prefix_match;
    if (s == "full_expert") return dtw::ComparisonMode::full_expert;
    throw InvalidInput("unknown early-termination mode '" + s + "'");
}

void AwetConfig::validate() const {
    auto fail = [](const std::string& what) { throw InvalidInput("AwetConfig: " + what); };
    if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma must lie in [0, 1)");
    if (!(lr > 0.0)) fail("lr must be > 0");
    if (!(c_l >= 0.0 && c_l <= 1.0)) fail("c_l must lie in [0, 1]");
    if (!(c_clip > 0.0)) fail("c_clip must be > 0");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail("lambda1 and lambda2 must be >= 0");
    if (!(rho >= 0.0 && rho <= 1.0)) fail("rho must lie in [0, 1]");
    if (!(sigma >= 0.0) || !(sigma_tilde >= 0.0) || !(noise_clip >= 0.0)) fail("noise scales must be >= 0");
    if (policy_delay < 1) fail("policy_delay must be >= 1");
    if (batch_e < 1 || batch_a < 1) fail("batch sizes must be >= 1");
    if (agent_capacity < 1) fail("agent_capacity must be >= 1");
    if (!(reward_scale > 0.0) || !std::isfinite(reward_scale)) fail("reward_scale must be > 0");
    for (auto h : hidden)
        if (h < 1) fail("hidden layer sizes must be >= 1");
}

TrainerBehavior base_alg_variant(const AwetConfig& config) {
    TrainerBehavior b;
    switch (config.base_alg) {
        case BaseAlg::td3:
            b.smoothing_std = config.sigma_tilde;
            b.smoothing_clip = config.noise_clip;
            b.policy_delay = config.policy_delay;
            break;
        case BaseAlg::ddpg:
            b.smoothing_std = 0.0;
            b.smoothing_clip = 0.0;
            b.policy_delay = 1;
            break;
    }
    return b;
}

}  // namespace awet
