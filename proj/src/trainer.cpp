#include "awet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "awet/error.hpp"

namespace awet {

using nnet::Matrix;
using nnet::Vector;

AgentNets AgentNets::create(const envs::EnvSpec& env, const AwetConfig& config, Engine& init_rng) {
    env.validate();
    config.validate();
    for (std::size_t i = 0; i < env.act_dim; ++i)
        if (env.action_low[i] != -env.action_high[i])
            throw InvalidInput("action bounds of " + env.name + " are not symmetric");

    AgentNets nets;
    std::vector<std::size_t> actor_sizes{env.obs_dim};
    actor_sizes.insert(actor_sizes.end(), config.hidden.begin(), config.hidden.end());
    actor_sizes.push_back(env.act_dim);
    nets.actor_spec = nnet::MlpSpec::make(actor_sizes, nnet::Activation::tanh, env.half_range());

    std::vector<std::size_t> critic_sizes{env.obs_dim + env.act_dim};
    critic_sizes.insert(critic_sizes.end(), config.hidden.begin(), config.hidden.end());
    critic_sizes.push_back(1);
    nets.critic_spec = nnet::MlpSpec::make(critic_sizes, nnet::Activation::identity);

    nets.actor = nnet::ParameterSet(nets.actor_spec);
    nets.critic1 = nnet::ParameterSet(nets.critic_spec);
    nets.critic2 = nnet::ParameterSet(nets.critic_spec);
    nnet::init_uniform(nets.actor, init_rng);
    nnet::init_uniform(nets.critic1, init_rng);
    nnet::init_uniform(nets.critic2, init_rng);
    nets.sync_targets();

    nets.actor_opt = nnet::AdamState(nets.actor.size(), config.lr);
    nets.critic1_opt = nnet::AdamState(nets.critic1.size(), config.lr);
    nets.critic2_opt = nnet::AdamState(nets.critic2.size(), config.lr);
    return nets;
}

void AgentNets::sync_targets() {
    actor_target = actor;
    critic1_target = critic1;
    critic2_target = critic2;
}

void AgentNets::update_targets(double rho) {
    nnet::polyak_update(critic1_target, critic1, rho);
    nnet::polyak_update(critic2_target, critic2, rho);
    nnet::polyak_update(actor_target, actor, rho);
}

Matrix critic_input(const Matrix& s, const Matrix& a) {
    if (s.cols() != a.cols()) throw InvalidInput("state and action batches differ in size");
    Matrix x(s.rows() + a.rows(), s.cols());
    x.topRows(s.rows()) = s;
    x.bottomRows(a.rows()) = a;
    return x;
}

Vector min_q(const AgentNets& nets, const Matrix& s, const Matrix& a) {
    const Matrix x = critic_input(s, a);
    const Matrix q1 = nnet::forward_batch(nets.critic_spec, nets.critic1, x);
    const Matrix q2 = nnet::forward_batch(nets.critic_spec, nets.critic2, x);
    return q1.row(0).cwiseMin(q2.row(0)).transpose();
}

namespace {

nnet::ParameterSet& critic_params(AgentNets& nets, int i) { return i == 0 ? nets.critic1 : nets.critic2; }
const nnet::ParameterSet& critic_params(const AgentNets& nets, int i) { return i == 0 ? nets.critic1 : nets.critic2; }
nnet::AdamState& critic_opt(AgentNets& nets, int i) { return i == 0 ? nets.critic1_opt : nets.critic2_opt; }

void require_q(const demos::Batch& b) {
    if (b.q_mc.size() != b.s.cols()) throw MissingAnnotation("expert batch carries no Monte-Carlo returns");
    if (!b.q_mc.allFinite()) throw MissingAnnotation("expert batch has unannotated transitions");
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NumericOverflow(std::string("non-finite ") + what, 0);
}

// Shared actor pass: policy actions on the stacked states, both critics taped
// on the result, and the min-critic routing mask.
struct ActorPass {
    nnet::GradientTape actor_tape;
    nnet::GradientTape tape1, tape2;
    Vector qmin;
    std::vector<bool> first;  // critic 1 attains the min (ties go to critic 1)
};

ActorPass actor_pass(const AgentNets& nets, const Matrix& s) {
    ActorPass p;
    p.actor_tape = nnet::record(nets.actor_spec, nets.actor, s);
    const Matrix x = critic_input(s, p.actor_tape.output());
    p.tape1 = nnet::record(nets.critic_spec, nets.critic1, x);
    p.tape2 = nnet::record(nets.critic_spec, nets.critic2, x);
    const auto n = s.cols();
    p.qmin.resize(n);
    p.first.resize(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < n; ++c) {
        const double q1 = p.tape1.output()(0, c), q2 = p.tape2.output()(0, c);
        p.first[static_cast<std::size_t>(c)] = q1 <= q2;
        p.qmin(c) = std::min(q1, q2);
    }
    return p;
}

// dL/d(action) through the min critic, given dL/d(qmin) per column.
Matrix action_gradient(const AgentNets& nets, const ActorPass& p, const Vector& dq) {
    const auto n = dq.size();
    Matrix g1 = Matrix::Zero(1, n), g2 = Matrix::Zero(1, n);
    for (Eigen::Index c = 0; c < n; ++c) (p.first[static_cast<std::size_t>(c)] ? g1 : g2)(0, c) = dq(c);
    const Matrix dx1 = nnet::backward_input(nets.critic_spec, nets.critic1, p.tape1, g1);
    const Matrix dx2 = nnet::backward_input(nets.critic_spec, nets.critic2, p.tape2, g2);
    const auto act = static_cast<Eigen::Index>(nets.actor_spec.output_dim());
    return dx1.bottomRows(act) + dx2.bottomRows(act);
}

}  // namespace

OfflineCriticTerms offline_critic_step(AgentNets& nets, const demos::Batch& expert, const AwetConfig& config) {
    require_q(expert);
    const Matrix x = critic_input(expert.s, expert.a);
    const double n = static_cast<double>(expert.size());
    OfflineCriticTerms out;
    for (int i = 0; i < 2; ++i) {
        auto& params = critic_params(nets, i);
        const auto tape = nnet::record(nets.critic_spec, params, x);
        const Matrix diff = tape.output() - expert.q_mc.transpose();
        out.mse[i] = diff.squaredNorm() / n;
        out.total[i] = out.mse[i] + config.lambda1 * nnet::l2_penalty(params);
        check_finite(out.total[i], "offline critic loss");
        auto grads = nnet::backward(nets.critic_spec, params, tape, (2.0 / n) * diff);
        nnet::add_l2_gradient(grads, params, config.lambda1);
        nnet::adam_step(params, grads, critic_opt(nets, i));
    }
    return out;
}

OfflineActorTerms offline_actor_step(AgentNets& nets, const demos::Batch& expert, const AwetConfig& config) {
    const double n = static_cast<double>(expert.size());
    const ActorPass p = actor_pass(nets, expert.s);
    const Matrix err = p.actor_tape.output() - expert.a;

    OfflineActorTerms out;
    out.l_q = p.qmin.mean();
    out.l_bc = err.squaredNorm() / n;
    out.l2 = nnet::l2_penalty(nets.actor);
    out.total = -(1.0 - config.c_l) * out.l_q + config.c_l * out.l_bc + config.lambda2 * out.l2;
    check_finite(out.total, "offline actor loss");

    const Vector dq = Vector::Constant(expert.s.cols(), -(1.0 - config.c_l) / n);
    Matrix da = action_gradient(nets, p, dq);
    da += (2.0 * config.c_l / n) * err;
    auto grads = nnet::backward(nets.actor_spec, nets.actor, p.actor_tape, da);
    nnet::add_l2_gradient(grads, nets.actor, config.lambda2);
    nnet::adam_step(nets.actor, grads, nets.actor_opt);
    return out;
}

std::vector<OfflineCriticTerms> offline_train_critics(AgentNets& nets, const demos::ExpertBuffer& expert,
                                                      const AwetConfig& config, Engine& sampling_rng) {
    std::vector<OfflineCriticTerms> log;
    log.reserve(config.offline_steps);
    for (std::size_t k = 0; k < config.offline_steps; ++k)
        log.push_back(offline_critic_step(nets, expert.sample(config.batch_e, sampling_rng), config));
    return log;
}

std::vector<OfflineActorTerms> offline_train_actor(AgentNets& nets, const demos::ExpertBuffer& expert,
                                                   const AwetConfig& config, Engine& sampling_rng) {
    std::vector<OfflineActorTerms> log;
    log.reserve(config.offline_steps);
    for (std::size_t k = 0; k < config.offline_steps; ++k)
        log.push_back(offline_actor_step(nets, expert.sample(config.batch_e, sampling_rng), config));
    return log;
}

Advantage advantage_from_means(double q_bar_a, double q_bar_e) {
    Advantage adv;
    adv.q_bar_a = q_bar_a;
    adv.q_bar_e = q_bar_e;
    const double denom = q_bar_a + q_bar_e;
    if (denom == 0.0) {
        adv.value = 0.5;
        adv.degenerate = true;
        return adv;
    }
    const double raw = q_bar_a / denom;
    if (!std::isfinite(raw)) throw NumericOverflow("non-finite agent advantage", 0);
    adv.value = std::clamp(raw, 0.0, 1.0);
    adv.clamped = adv.value != raw;
    return adv;
}

Advantage agent_advantage(const AgentNets& nets, const demos::Batch& agent, const demos::Batch& expert,
                          AdvantageCritic mode) {
    if (agent.size() == 0 || expert.size() == 0) throw EmptyBuffer("advantage needs non-empty batches");
    if (mode == AdvantageCritic::elementwise_min)
        return advantage_from_means(min_q(nets, agent.s, agent.a).mean(), min_q(nets, expert.s, expert.a).mean());

    const Matrix xa = critic_input(agent.s, agent.a), xe = critic_input(expert.s, expert.a);
    double qa[2], qe[2];
    for (int i = 0; i < 2; ++i) {
        qa[i] = nnet::forward_batch(nets.critic_spec, critic_params(nets, i), xa).mean();
        qe[i] = nnet::forward_batch(nets.critic_spec, critic_params(nets, i), xe).mean();
    }
    const int k = (qa[1] + qe[1] < qa[0] + qe[0]) ? 1 : 0;
    return advantage_from_means(qa[k], qe[k]);
}

double clip_loss(double loss, double c_clip, bool enabled) {
    return enabled ? std::clamp(loss, -c_clip, c_clip) : loss;
}

Vector td_targets(const AgentNets& nets, const demos::Batch& agent, const envs::EnvSpec& env,
                  const AwetConfig& config, Engine& smoothing_rng) {
    const TrainerBehavior behavior = base_alg_variant(config);
    const auto half = env.half_range();
    Matrix a_next = nnet::forward_batch(nets.actor_spec, nets.actor_target, agent.s_next);
    if (behavior.smoothing_std > 0.0) {
        std::normal_distribution<double> unit(0.0, 1.0);
        for (Eigen::Index c = 0; c < a_next.cols(); ++c)
            for (Eigen::Index r = 0; r < a_next.rows(); ++r) {
                const double h = half[static_cast<std::size_t>(r)];
                const double lim = behavior.smoothing_clip * h;
                a_next(r, c) += std::clamp(behavior.smoothing_std * h * unit(smoothing_rng), -lim, lim);
            }
    }
    for (Eigen::Index r = 0; r < a_next.rows(); ++r) {
        const auto i = static_cast<std::size_t>(r);
        a_next.row(r) = a_next.row(r).cwiseMax(env.action_low[i]).cwiseMin(env.action_high[i]);
    }
    const Matrix x = critic_input(agent.s_next, a_next);
    const Matrix q1 = nnet::forward_batch(nets.critic_spec, nets.critic1_target, x);
    const Matrix q2 = nnet::forward_batch(nets.critic_spec, nets.critic2_target, x);
    const Vector qmin = q1.row(0).cwiseMin(q2.row(0)).transpose();
    return agent.r + config.gamma * (Vector::Ones(agent.r.size()) - agent.d).cwiseProduct(qmin);
}

namespace {

std::array<CriticTerms, 2> critic_online(AgentNets* mut, const AgentNets& nets, const demos::Batch& agent,
                                         const demos::Batch* expert, const Vector& targets, double a_a,
                                         const AwetConfig& config) {
    if (targets.size() != agent.s.cols()) throw InvalidInput("target count does not match the agent batch");
    if (!(a_a >= 0.0 && a_a <= 1.0)) throw InvalidInput("advantage weight must lie in [0, 1]");
    const bool use_e = config.use_expert_data && expert != nullptr;
    if (use_e) require_q(*expert);
    const double w_a = use_e ? a_a : 1.0;
    const double w_e = use_e ? 1.0 - a_a : 0.0;
    const Eigen::Index na = agent.s.cols();
    const Eigen::Index ne = use_e ? expert->s.cols() : 0;

    Matrix x = critic_input(agent.s, agent.a);
    if (use_e) {
        Matrix xe = critic_input(expert->s, expert->a);
        Matrix both(x.rows(), na + ne);
        both.leftCols(na) = x;
        both.rightCols(ne) = xe;
        x = std::move(both);
    }

    std::array<CriticTerms, 2> out;
    for (int i = 0; i < 2; ++i) {
        const auto& params = critic_params(nets, i);
        const auto tape = nnet::record(nets.critic_spec, params, x);
        const auto& q = tape.output();
        const Matrix da = q.leftCols(na) - targets.transpose();
        CriticTerms& t = out[static_cast<std::size_t>(i)];
        t.l_ba = da.squaredNorm() / static_cast<double>(na);
        t.l_ba_clipped = clip_loss(t.l_ba, config.c_clip, config.use_loss_clip);
        Matrix de;
        if (use_e) {
            de = q.rightCols(ne) - expert->q_mc.transpose();
            t.l_be = de.squaredNorm() / static_cast<double>(ne);
        }
        t.total = use_e ? w_a * t.l_ba_clipped + w_e * t.l_be : t.l_ba_clipped;
        check_finite(t.total, "online critic loss");
        if (mut == nullptr) continue;

        const bool pass = !config.use_loss_clip || t.l_ba <= config.c_clip;
        Matrix grad(1, na + ne);
        grad.leftCols(na) = (w_a * (pass ? 1.0 : 0.0) * 2.0 / static_cast<double>(na)) * da;
        if (use_e) grad.rightCols(ne) = (w_e * 2.0 / static_cast<double>(ne)) * de;
        auto& mparams = critic_params(*mut, i);
        const auto grads = nnet::backward(nets.critic_spec, mparams, tape, grad);
        nnet::adam_step(mparams, grads, critic_opt(*mut, i));
    }
    return out;
}

ActorTerms actor_online(AgentNets* mut, const AgentNets& nets, const demos::Batch& agent,
                        const demos::Batch* expert, const AwetConfig& config) {
    const bool use_e = config.use_expert_data && expert != nullptr;
    const Eigen::Index na = agent.s.cols();
    const Eigen::Index ne = use_e ? expert->s.cols() : 0;
    Matrix s = agent.s;
    if (use_e) {
        Matrix both(s.rows(), na + ne);
        both.leftCols(na) = agent.s;
        both.rightCols(ne) = expert->s;
        s = std::move(both);
    }
    const ActorPass p = actor_pass(nets, s);

    ActorTerms t;
    t.l_qa = p.qmin.head(na).mean();
    Matrix err;
    if (use_e) {
        t.l_qe = p.qmin.tail(ne).mean();
        err = p.actor_tape.output().rightCols(ne) - expert->a;
        t.l_bc = err.squaredNorm() / static_cast<double>(ne);
        t.total = -(1.0 - config.c_l) * t.l_qe + config.c_l * t.l_bc - t.l_qa;
    } else {
        t.total = -t.l_qa;
    }
    check_finite(t.total, "online actor loss");
    if (mut == nullptr) return t;

    Vector dq(na + ne);
    dq.head(na).setConstant(-1.0 / static_cast<double>(na));
    if (use_e) dq.tail(ne).setConstant(-(1.0 - config.c_l) / static_cast<double>(ne));
    Matrix da = action_gradient(nets, p, dq);
    if (use_e) da.rightCols(ne) += (2.0 * config.c_l / static_cast<double>(ne)) * err;
    const auto grads = nnet::backward(nets.actor_spec, mut->actor, p.actor_tape, da);
    nnet::adam_step(mut->actor, grads, mut->actor_opt);
    mut->update_targets(config.rho);
    return t;
}

}  // namespace

std::array<CriticTerms, 2> critic_update_online(AgentNets& nets, const demos::Batch& agent,
                                                const demos::Batch* expert, const Vector& targets, double a_a,
                                                const AwetConfig& config) {
    return critic_online(&nets, nets, agent, expert, targets, a_a, config);
}

ActorTerms actor_update_online(AgentNets& nets, const demos::Batch& agent, const demos::Batch* expert,
                               const AwetConfig& config) {
    return actor_online(&nets, nets, agent, expert, config);
}

std::array<CriticTerms, 2> critic_losses_online(const AgentNets& nets, const demos::Batch& agent,
                                                const demos::Batch* expert, const Vector& targets, double a_a,
                                                const AwetConfig& config) {
    return critic_online(nullptr, nets, agent, expert, targets, a_a, config);
}

ActorTerms actor_losses_online(const AgentNets& nets, const demos::Batch& agent, const demos::Batch* expert,
                               const AwetConfig& config) {
    return actor_online(nullptr, nets, agent, expert, config);
}

EvalResult evaluate_policy(const AgentNets& nets, const envs::EnvSpec& env, std::span<const std::uint64_t> seeds) {
    EvalResult res;
    res.episodes = seeds.size();
    if (seeds.empty()) return res;
    const auto n = static_cast<Eigen::Index>(seeds.size());
    const auto od = static_cast<Eigen::Index>(env.obs_dim);
    std::vector<envs::EnvState> states;
    states.reserve(seeds.size());
    Matrix obs(od, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        auto r = envs::reset(env, seeds[static_cast<std::size_t>(j)]);
        states.push_back(std::move(r.state));
        obs.col(j) = Eigen::Map<const Vector>(r.obs.data(), od);
    }
    std::vector<double> returns(seeds.size(), 0.0);
    for (std::size_t t = 0; t < env.max_steps; ++t) {
        const Matrix act = nnet::forward_batch(nets.actor_spec, nets.actor, obs);
        for (Eigen::Index j = 0; j < n; ++j) {
            const auto sj = static_cast<std::size_t>(j);
            auto r = envs::step(env, states[sj], std::span<const double>(act.col(j).data(), env.act_dim));
            returns[sj] += r.reward;
            states[sj] = std::move(r.state);
            obs.col(j) = Eigen::Map<const Vector>(r.next_obs.data(), od);
        }
    }
    double total = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        total += returns[static_cast<std::size_t>(j)];
        if (envs::success_from_obs(env, std::span<const double>(obs.col(j).data(), env.obs_dim))) ++res.successes;
    }
    res.mean_return = total / static_cast<double>(n);
    return res;
}

RunStreams::RunStreams(std::uint64_t seed)
    : init(make_stream(seed, "init")),
      explore(make_stream(seed, "explore")),
      smoothing(make_stream(seed, "smoothing")),
      sampling(make_stream(seed, "sampling")),
      env(make_stream(seed, "env")),
      eval(make_stream(seed, "eval")) {}

std::vector<std::string> RunStreams::names() { return {"init", "explore", "smoothing", "sampling", "env", "eval"}; }

namespace {

int reward_sign(double r) { return r > 0.0 ? 1 : (r < 0.0 ? -1 : 0); }

}  // namespace

OnlineResult run_online_stage(AgentNets& nets, const demos::ExpertBuffer* expert, const envs::EnvSpec& env,
                              const dtw::TerminationMonitor* monitor, const AwetConfig& config, RunStreams& streams,
                              const EvalSchedule& schedule, const OnlineHooks& hooks) {
    config.validate();
    env.validate();
    const TrainerBehavior behavior = base_alg_variant(config);
    const bool use_e = config.use_expert_data;
    if (use_e && (expert == nullptr || expert->empty())) throw EmptyBuffer("online stage needs expert data");
    if (config.use_early_termination && monitor == nullptr)
        throw InvalidInput("early termination enabled without a termination monitor");

    int sign = 0;
    if (expert != nullptr) sign = demos::validate_reward_signs(expert->trajectories(), {}).sign;

    OnlineResult res;
    res.agent_buffer = demos::AgentBuffer(config.agent_capacity);
    const auto half = env.half_range();
    std::normal_distribution<double> unit(0.0, 1.0);
    double a_a_sum = 0.0;

    for (std::size_t ep = 0; ep < config.online_episodes; ++ep) {
        auto start = envs::reset(env, streams.env());
        envs::EnvState state = std::move(start.state);
        std::vector<double> obs = std::move(start.obs);
        std::vector<Transition> episode;
        episode.reserve(env.max_steps);

        EpisodeRecord rec;
        rec.episode = ep;
        bool discard = false;
        for (std::size_t t = 0; t < env.max_steps; ++t) {
            auto action = nnet::forward(nets.actor_spec, nets.actor, obs);
            if (config.sigma > 0.0)
                for (std::size_t i = 0; i < action.size(); ++i) action[i] += config.sigma * half[i] * unit(streams.explore);
            action = env.clip_action(action);
            auto r = envs::step(env, state, action);
            rec.episode_return += r.reward;
            const double stored_r = r.reward / config.reward_scale;
            const int sg = reward_sign(stored_r);
            if (sg != 0) {
                if (sign == 0) sign = sg;
                else if (sg != sign)
                    throw SignViolation("agent reward " + std::to_string(stored_r) + " at episode " +
                                        std::to_string(ep) + " step " + std::to_string(t) +
                                        " has the opposite sign of the expert rewards");
            }
            episode.push_back(Transition{obs, action, stored_r, r.next_obs, r.done, std::nullopt});
            obs = std::move(r.next_obs);
            state = std::move(r.state);

            if (config.use_early_termination && t + 1 == monitor->gate_step()) {
                const auto g = monitor->gate(dtw::observation_features(episode));
                rec.gated = true;
                rec.decision = g.decision;
                rec.gate_distance = g.min_distance;
                if (g.decision == dtw::GateDecision::terminate_and_discard) {
                    discard = true;
                    break;
                }
            }
        }
        rec.steps = episode.size();
        if (hooks.on_rollout) hooks.on_rollout(rec, episode);
        if (discard) {
            ++res.discards;
        } else {
            for (auto& tr : episode) res.agent_buffer.push(std::move(tr));
        }

        if (!res.agent_buffer.empty()) {
            for (std::size_t j = 0; j < rec.steps; ++j) {
                const auto ba = res.agent_buffer.sample(config.batch_a, streams.sampling);
                std::optional<demos::Batch> be;
                if (use_e) be = expert->sample(config.batch_e, streams.sampling);
                const Vector y = td_targets(nets, ba, env, config, streams.smoothing);

                LossReport report;
                report.update = res.updates;
                report.episode = ep;
                if (!use_e) {
                    report.advantage.value = 1.0;
                } else if (config.use_advantage_weight) {
                    report.advantage = agent_advantage(nets, ba, *be, config.advantage_critic);
                } else {
                    report.advantage.value = 0.5;
                }
                if (report.advantage.degenerate) ++res.degenerate_advantages;
                a_a_sum += report.advantage.value;

                const demos::Batch* bep = be ? &*be : nullptr;
                report.critic = critic_update_online(nets, ba, bep, y, report.advantage.value, config);
                if (res.updates % behavior.policy_delay == 0) {
                    report.actor = actor_update_online(nets, ba, bep, config);
                    ++res.actor_updates;
                }
                ++res.updates;
                ++rec.updates;
                if (hooks.on_update) hooks.on_update(report);
            }
        }
        res.episodes = ep + 1;
        res.a_a_mean = res.updates == 0 ? 0.0 : a_a_sum / static_cast<double>(res.updates);
        if (hooks.on_episode) hooks.on_episode(rec);

        const bool last = ep + 1 == config.online_episodes;
        if (schedule.every > 0 && ((ep + 1) % schedule.every == 0 || last)) {
            EvalRecord er;
            er.episode = ep + 1;
            er.result = evaluate_policy(nets, env, schedule.seeds);
            er.discards = res.discards;
            er.a_a_mean = res.a_a_mean;
            er.updates = res.updates;
            if (hooks.on_eval) hooks.on_eval(er);
            if (hooks.stop && hooks.stop(er)) break;
        }
    }
    return res;
}

}  // namespace awet
