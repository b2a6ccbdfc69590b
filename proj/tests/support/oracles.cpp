#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace awet::oracle {

std::vector<double> mlp(const nnet::MlpSpec& spec, const nnet::ParameterSet& params, const std::vector<double>& x0) {
    const auto flat = params.flat();
    std::vector<double> x = x0;
    std::size_t off = 0;
    const std::size_t layers = spec.layer_sizes.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
        std::vector<double> y(out);
        for (std::size_t o = 0; o < out; ++o) {
            double acc = 0.0;
            for (std::size_t i = 0; i < in; ++i) acc += flat[off + o * in + i] * x[i];
            y[o] = acc + flat[off + in * out + o];
        }
        off += (in + 1) * out;
        for (std::size_t o = 0; o < out; ++o) {
            if (l + 1 < layers) {
                y[o] = y[o] > 0.0 ? y[o] : 0.0;
            } else {
                if (spec.output_activation == nnet::Activation::tanh) y[o] = std::tanh(y[o]);
                if (spec.output_activation == nnet::Activation::relu) y[o] = std::max(0.0, y[o]);
                y[o] *= spec.output_scale[o];
            }
        }
        x = std::move(y);
    }
    return x;
}

std::vector<double> col(const Eigen::MatrixXd& m, Eigen::Index j) {
    std::vector<double> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, j);
    return v;
}

double q_value(const AgentNets& nets, const nnet::ParameterSet& critic, const std::vector<double>& s,
               const std::vector<double>& a) {
    std::vector<double> x = s;
    x.insert(x.end(), a.begin(), a.end());
    return mlp(nets.critic_spec, critic, x)[0];
}

double l2(const nnet::ParameterSet& params, const nnet::MlpSpec& spec) {
    const auto flat = params.flat();
    double s = 0.0;
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
        for (std::size_t k = 0; k < in * out; ++k) s += flat[off + k] * flat[off + k];
        off += (in + 1) * out;
    }
    return s;
}

namespace {

const nnet::ParameterSet& pick(const AgentNets& nets, int critic) { return critic == 0 ? nets.critic1 : nets.critic2; }

double min_q_at(const AgentNets& nets, const std::vector<double>& s, const std::vector<double>& a) {
    return std::min(q_value(nets, nets.critic1, s, a), q_value(nets, nets.critic2, s, a));
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

}  // namespace

double offline_critic_loss(const AgentNets& nets, int critic, const demos::Batch& expert, double lambda1) {
    const auto& p = pick(nets, critic);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < expert.s.cols(); ++j) {
        const double e = q_value(nets, p, col(expert.s, j), col(expert.a, j)) - expert.q_mc(j);
        sum += e * e;
    }
    return sum / static_cast<double>(expert.s.cols()) + lambda1 * l2(p, nets.critic_spec);
}

double offline_actor_loss(const AgentNets& nets, const demos::Batch& expert, double c_l, double lambda2) {
    double lq = 0.0, bc = 0.0;
    const auto n = static_cast<double>(expert.s.cols());
    for (Eigen::Index j = 0; j < expert.s.cols(); ++j) {
        const auto s = col(expert.s, j);
        const auto mu = mlp(nets.actor_spec, nets.actor, s);
        lq += min_q_at(nets, s, mu);
        bc += sq_dist(mu, col(expert.a, j));
    }
    return -(1.0 - c_l) * (lq / n) + c_l * (bc / n) + lambda2 * l2(nets.actor, nets.actor_spec);
}

double td_loss(const AgentNets& nets, int critic, const demos::Batch& agent, const std::vector<double>& y) {
    const auto& p = pick(nets, critic);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < agent.s.cols(); ++j) {
        const double e = q_value(nets, p, col(agent.s, j), col(agent.a, j)) - y[static_cast<std::size_t>(j)];
        sum += e * e;
    }
    return sum / static_cast<double>(agent.s.cols());
}

double mc_loss(const AgentNets& nets, int critic, const demos::Batch& expert) {
    return offline_critic_loss(nets, critic, expert, 0.0);
}

double critic_total(double l_ba, double l_be, double a_a, double c_clip, bool clip) {
    double c = l_ba;
    if (clip) {
        if (c > c_clip) c = c_clip;
        if (c < -c_clip) c = -c_clip;
    }
    return a_a * c + (1.0 - a_a) * l_be;
}

double online_actor_loss(const AgentNets& nets, const demos::Batch& agent, const demos::Batch& expert, double c_l) {
    double qa = 0.0;
    for (Eigen::Index j = 0; j < agent.s.cols(); ++j) {
        const auto s = col(agent.s, j);
        qa += min_q_at(nets, s, mlp(nets.actor_spec, nets.actor, s));
    }
    qa /= static_cast<double>(agent.s.cols());
    double qe = 0.0, bc = 0.0;
    for (Eigen::Index j = 0; j < expert.s.cols(); ++j) {
        const auto s = col(expert.s, j);
        const auto mu = mlp(nets.actor_spec, nets.actor, s);
        qe += min_q_at(nets, s, mu);
        bc += sq_dist(mu, col(expert.a, j));
    }
    const auto ne = static_cast<double>(expert.s.cols());
    return -(1.0 - c_l) * (qe / ne) + c_l * (bc / ne) - qa;
}

std::vector<double> noiseless_targets(const AgentNets& nets, const demos::Batch& agent,
                                      const envs::EnvSpec& env, double gamma) {
    std::vector<double> y;
    for (Eigen::Index j = 0; j < agent.s.cols(); ++j) {
        const auto s2 = col(agent.s_next, j);
        auto a2 = mlp(nets.actor_spec, nets.actor_target, s2);
        for (std::size_t i = 0; i < a2.size(); ++i) a2[i] = std::clamp(a2[i], env.action_low[i], env.action_high[i]);
        const double q = std::min(q_value(nets, nets.critic1_target, s2, a2), q_value(nets, nets.critic2_target, s2, a2));
        y.push_back(agent.r(j) + gamma * (1.0 - agent.d(j)) * q);
    }
    return y;
}

void reference_td3_update(AgentNets& nets, const demos::Batch& agent, const envs::EnvSpec& env,
                          const AwetConfig& config, Engine& smoothing, bool actor_step) {
    using nnet::Matrix;
    const auto n = agent.s.cols();
    const auto obs = agent.s.rows(), act = agent.a.rows();
    const auto half = env.half_range();

    // target actions with clipped Gaussian smoothing
    Matrix a2 = nnet::forward_batch(nets.actor_spec, nets.actor_target, agent.s_next);
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < act; ++i) {
            const double h = half[static_cast<std::size_t>(i)];
            double eps = config.sigma_tilde * h * g(smoothing);
            eps = std::clamp(eps, -config.noise_clip * h, config.noise_clip * h);
            a2(i, j) = a2(i, j) + eps;
        }
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < act; ++i)
            a2(i, j) = std::min(std::max(a2(i, j), env.action_low[static_cast<std::size_t>(i)]),
                                env.action_high[static_cast<std::size_t>(i)]);
    Matrix x2(obs + act, n);
    x2 << agent.s_next, a2;
    const Matrix tq1 = nnet::forward_batch(nets.critic_spec, nets.critic1_target, x2);
    const Matrix tq2 = nnet::forward_batch(nets.critic_spec, nets.critic2_target, x2);
    Eigen::VectorXd y(n);
    for (Eigen::Index j = 0; j < n; ++j)
        y(j) = agent.r(j) + config.gamma * ((1.0 - agent.d(j)) * std::min(tq1(0, j), tq2(0, j)));

    // critics
    Matrix x(obs + act, n);
    x << agent.s, agent.a;
    nnet::ParameterSet* critics[2] = {&nets.critic1, &nets.critic2};
    nnet::AdamState* opts[2] = {&nets.critic1_opt, &nets.critic2_opt};
    for (int i = 0; i < 2; ++i) {
        const auto tape = nnet::record(nets.critic_spec, *critics[i], x);
        Matrix grad(1, n);
        for (Eigen::Index j = 0; j < n; ++j) grad(0, j) = (2.0 / static_cast<double>(n)) * (tape.output()(0, j) - y(j));
        nnet::adam_step(*critics[i], nnet::backward(nets.critic_spec, *critics[i], tape, grad), *opts[i]);
    }
    if (!actor_step) return;

    // actor: ascend min(Q1, Q2) at mu(s)
    const auto atape = nnet::record(nets.actor_spec, nets.actor, agent.s);
    Matrix xa(obs + act, n);
    xa << agent.s, atape.output();
    const auto t1 = nnet::record(nets.critic_spec, nets.critic1, xa);
    const auto t2 = nnet::record(nets.critic_spec, nets.critic2, xa);
    Matrix g1 = Matrix::Zero(1, n), g2 = Matrix::Zero(1, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (t1.output()(0, j) <= t2.output()(0, j)) g1(0, j) = -1.0 / static_cast<double>(n);
        else g2(0, j) = -1.0 / static_cast<double>(n);
    }
    const Matrix d1 = nnet::backward_input(nets.critic_spec, nets.critic1, t1, g1);
    const Matrix d2 = nnet::backward_input(nets.critic_spec, nets.critic2, t2, g2);
    const Matrix da = d1.bottomRows(act) + d2.bottomRows(act);
    nnet::adam_step(nets.actor, nnet::backward(nets.actor_spec, nets.actor, atape, da), nets.actor_opt);
    nnet::polyak_update(nets.critic1_target, nets.critic1, config.rho);
    nnet::polyak_update(nets.critic2_target, nets.critic2, config.rho);
    nnet::polyak_update(nets.actor_target, nets.actor, config.rho);
}

std::vector<Transition> random_transitions(std::size_t n, std::size_t obs, std::size_t act, Engine& rng,
                                           bool with_q, double reward_sign) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0), mag(0.0, 2.0);
    std::vector<Transition> out(n);
    for (auto& t : out) {
        t.s.resize(obs);
        t.s_next.resize(obs);
        t.a.resize(act);
        for (auto& v : t.s) v = g(rng);
        for (auto& v : t.s_next) v = g(rng);
        for (auto& v : t.a) v = u(rng);
        t.r = reward_sign * mag(rng);
        t.d = u(rng) > 0.6;
        if (with_q) t.q_mc = reward_sign * 10.0 * mag(rng);
    }
    return out;
}

demos::Batch batch_of(const std::vector<Transition>& rows, bool with_q) {
    std::vector<const Transition*> ptr;
    for (const auto& t : rows) ptr.push_back(&t);
    return demos::make_batch(ptr, with_q);
}

}  // namespace awet::oracle
