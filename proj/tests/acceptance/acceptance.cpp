// Acceptance checks 1-12. Each prints one PASS/FAIL line; the exit status is
// nonzero when any selected check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "awet/bench.hpp"
#include "awet/demos.hpp"
#include "awet/dtw.hpp"
#include "awet/envs.hpp"
#include "awet/error.hpp"
#include "awet/nnet.hpp"
#include "awet/trainer.hpp"
#include "awet/wilcoxon.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace awet;
using nnet::Matrix;

#ifndef AWET_CONFIG_DIR
#define AWET_CONFIG_DIR "configs"
#endif

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Context {
    fs::path work;
    fs::path configs;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

bool bit_equal(const nnet::ParameterSet& a, const nnet::ParameterSet& b) {
    const auto x = a.flat(), y = b.flat();
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::bit_cast<std::uint64_t>(x[i]) != std::bit_cast<std::uint64_t>(y[i])) return false;
    return true;
}

Matrix gaussian(Eigen::Index r, Eigen::Index c, Engine& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = g(rng);
    return m;
}

// ---- 1: gradients --------------------------------------------------------

double rel_err(double a, double n) { return std::abs(a - n) / std::max(1e-6, std::abs(a) + std::abs(n)); }

// Loss kinds: 0 MSE to a target, 1 weighted linear functional, 2 actor
// objective through a frozen critic pair: -mean min(Q1,Q2)(s, mu(s)) + BC.
Outcome gradients() {
    const auto t0 = Clock::now();
    Engine rng(20240601);
    std::uniform_int_distribution<std::size_t> width(1, 12), depth(1, 3), batch(1, 7);
    double worst = 0.0;
    std::size_t instances = 0, coords = 0;
    for (int inst = 0; inst < 30; ++inst) {
        const int kind = inst % 3;
        const std::size_t in = width(rng), out = kind == 2 ? 1 + inst % 3 : width(rng);
        std::vector<std::size_t> sizes{in};
        for (std::size_t d = depth(rng); d > 0; --d) sizes.push_back(width(rng) + 1);
        sizes.push_back(out);
        const bool tanh_out = kind == 2 || inst % 2 == 0;
        std::vector<double> scale(out);
        for (auto& s : scale) s = std::uniform_real_distribution<double>(0.5, 2.0)(rng);
        const auto spec = nnet::MlpSpec::make(sizes, tanh_out ? nnet::Activation::tanh : nnet::Activation::identity,
                                              scale);
        nnet::ParameterSet p(spec);
        nnet::init_uniform(p, rng);
        const auto n = static_cast<Eigen::Index>(batch(rng));
        Matrix x = gaussian(static_cast<Eigen::Index>(in), n, rng);
        const Matrix target = gaussian(static_cast<Eigen::Index>(out), n, rng);
        const double c_l = 0.3;

        // critics for kind 2
        std::vector<std::size_t> csz{in + out, 9, 1};
        const auto cspec = nnet::MlpSpec::make(csz);
        nnet::ParameterSet q1(cspec), q2(cspec);
        nnet::init_uniform(q1, rng);
        nnet::init_uniform(q2, rng);

        auto loss = [&](const nnet::ParameterSet& params, const Matrix& input) {
            const Matrix y = nnet::forward_batch(spec, params, input);
            if (kind == 0) return (y - target).squaredNorm() / static_cast<double>(n);
            if (kind == 1) return (y.cwiseProduct(target)).sum() / static_cast<double>(n);
            Matrix xa(in + out, n);
            xa << input, y;
            const Matrix a1 = nnet::forward_batch(cspec, q1, xa), a2 = nnet::forward_batch(cspec, q2, xa);
            const double lq = a1.cwiseMin(a2).mean();
            return -(1.0 - c_l) * lq + c_l * (y - target).squaredNorm() / static_cast<double>(n);
        };

        const auto tape = nnet::record(spec, p, x);
        Matrix dy;
        if (kind == 0) dy = (2.0 / static_cast<double>(n)) * (tape.output() - target);
        if (kind == 1) dy = target / static_cast<double>(n);
        if (kind == 2) {
            Matrix xa(in + out, n);
            xa << x, tape.output();
            const auto t1 = nnet::record(cspec, q1, xa), t2 = nnet::record(cspec, q2, xa);
            Matrix g1 = Matrix::Zero(1, n), g2 = Matrix::Zero(1, n);
            for (Eigen::Index j = 0; j < n; ++j)
                (t1.output()(0, j) <= t2.output()(0, j) ? g1 : g2)(0, j) = -(1.0 - c_l) / static_cast<double>(n);
            const Matrix d = nnet::backward_input(cspec, q1, t1, g1) + nnet::backward_input(cspec, q2, t2, g2);
            dy = d.bottomRows(static_cast<Eigen::Index>(out)) +
                 (2.0 * c_l / static_cast<double>(n)) * (tape.output() - target);
        }
        Matrix dx;
        const auto g = nnet::backward(spec, p, tape, dy, &dx);
        if (kind == 2) {
            // the critics also see the input directly
            Matrix xa(in + out, n);
            xa << x, tape.output();
            const auto t1 = nnet::record(cspec, q1, xa), t2 = nnet::record(cspec, q2, xa);
            Matrix g1 = Matrix::Zero(1, n), g2 = Matrix::Zero(1, n);
            for (Eigen::Index j = 0; j < n; ++j)
                (t1.output()(0, j) <= t2.output()(0, j) ? g1 : g2)(0, j) = -(1.0 - c_l) / static_cast<double>(n);
            const Matrix d = nnet::backward_input(cspec, q1, t1, g1) + nnet::backward_input(cspec, q2, t2, g2);
            dx += d.topRows(static_cast<Eigen::Index>(in));
        }

        const double h = 1e-6;
        auto flat = p.flat();
        for (std::size_t i = 0; i < flat.size(); ++i) {
            const double keep = flat[i];
            flat[i] = keep + h;
            const double up = loss(p, x);
            flat[i] = keep - h;
            const double down = loss(p, x);
            flat[i] = keep;
            worst = std::max(worst, rel_err(g.flat()[i], (up - down) / (2 * h)));
            ++coords;
        }
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double keep = x.data()[i];
            x.data()[i] = keep + h;
            const double up = loss(p, x);
            x.data()[i] = keep - h;
            const double down = loss(p, x);
            x.data()[i] = keep;
            worst = std::max(worst, rel_err(dx.data()[i], (up - down) / (2 * h)));
            ++coords;
        }
        ++instances;
    }
    const double secs = seconds_since(t0);
    return {instances >= 20 && worst <= 1e-4 && secs < 10.0,
            fmt("%zu instances, %zu coordinates, max rel err %.3g (<= 1e-4), %.2f s (< 10 s)", instances, coords,
                worst, secs)};
}

// ---- 2: Monte-Carlo returns ----------------------------------------------

Outcome mc_returns() {
    const auto t0 = Clock::now();
    Engine rng(7);
    std::uniform_real_distribution<double> u(-3.0, 0.0), gam(0.0, 0.999);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
        Trajectory t;
        std::vector<double> r(50);
        for (std::size_t i = 0; i < 50; ++i) {
            r[i] = u(rng);
            t.steps.push_back(Transition{{0.0}, {0.0}, r[i], {0.0}, i == 49, std::nullopt});
        }
        const double g = k == 0 ? 0.98 : gam(rng);
        const auto out = demos::annotate_mc_returns({t}, g);
        for (std::size_t i = 0; i < 50; ++i) {
            double direct = 0.0;
            for (std::size_t j = i; j < 50; ++j) direct += std::pow(g, static_cast<double>(j - i)) * r[j];
            worst = std::max(worst, std::abs(*out[0].steps[i].q_mc - direct));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 1.0,
            fmt("100 trajectories x 50 steps, max |diff| %.3g (<= 1e-12), %.3f s (< 1 s)", worst, secs)};
}

// ---- 3/4: DTW --------------------------------------------------------------

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

// Lists every monotone alignment path explicitly and sums its cost.
double dtw_enumerate(const dtw::FeatureSeq& x, const dtw::FeatureSeq& y) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::size_t, std::size_t>> path{{0, 0}};
    std::function<void()> walk = [&] {
        const auto [i, j] = path.back();
        if (i + 1 == x.size() && j + 1 == y.size()) {
            double c = 0.0;
            for (const auto& [a, b] : path) c += euclid(x[a], y[b]);
            best = std::min(best, c);
            return;
        }
        const std::pair<std::size_t, std::size_t> moves[3] = {{i + 1, j}, {i, j + 1}, {i + 1, j + 1}};
        for (const auto& m : moves)
            if (m.first < x.size() && m.second < y.size()) {
                path.push_back(m);
                walk();
                path.pop_back();
            }
    };
    walk();
    return best;
}

dtw::FeatureSeq random_seq(Engine& rng, std::size_t len, std::size_t dim) {
    std::normal_distribution<double> g(0.0, 1.0);
    dtw::FeatureSeq s(len, std::vector<double>(dim));
    for (auto& v : s)
        for (auto& e : v) e = g(rng);
    return s;
}

Outcome dtw_oracle() {
    const auto t0 = Clock::now();
    Engine rng(3);
    std::uniform_int_distribution<std::size_t> len(1, 6), dim(1, 4), longlen(1, 60);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const auto d = dim(rng);
        const auto x = random_seq(rng, len(rng), d), y = random_seq(rng, len(rng), d);
        worst = std::max(worst, std::abs(dtw::dtw_distance(x, y) - dtw_enumerate(x, y)));
    }
    bool identity = true, symmetric = true;
    for (int k = 0; k < 100; ++k) {
        const auto d = dim(rng);
        const auto x = random_seq(rng, longlen(rng), d), y = random_seq(rng, longlen(rng), d);
        identity = identity && dtw::dtw_distance(x, x) == 0.0;
        symmetric = symmetric && dtw::dtw_distance(x, y) == dtw::dtw_distance(y, x);
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && identity && symmetric && secs < 10.0,
            fmt("200 pairs max |dp - enumeration| %.3g; identity %s; symmetry %s; %.2f s (< 10 s)", worst,
                identity ? "ok" : "broken", symmetric ? "ok" : "broken", secs)};
}

Outcome threshold_structure() {
    Engine rng(4);
    std::vector<dtw::FeatureSeq> corpus;
    for (int i = 0; i < 5; ++i) corpus.push_back(random_seq(rng, 3 + static_cast<std::size_t>(i), 2));
    std::size_t calls = 0;
    std::set<std::pair<const void*, const void*>> pairs;
    const double th = dtw::compute_threshold(corpus, [&](const dtw::FeatureSeq& a, const dtw::FeatureSeq& b) {
        ++calls;
        pairs.insert({std::min<const void*>(&a, &b), std::max<const void*>(&a, &b)});
        return dtw::dtw_distance(a, b);
    });
    double sum = 0.0;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) sum += dtw_enumerate(corpus[i], corpus[j]);
    const double diff = std::abs(th - sum / 10.0);
    return {calls == 10 && pairs.size() == 10 && diff <= 1e-12,
            fmt("M=5: %zu distance evaluations over %zu distinct pairs (== 10), |S_th - mean| %.3g (<= 1e-12)", calls,
                pairs.size(), diff)};
}

// ---- 5: A_A ----------------------------------------------------------------

Outcome advantage_values() {
    const double a = advantage_from_means(2, 2).value;
    const double b = advantage_from_means(3, 1).value;
    const double c = advantage_from_means(-1, -3).value;
    return {a == 0.5 && b == 0.75 && c == 0.25,
            fmt("(2,2)->%.17g (3,1)->%.17g (-1,-3)->%.17g, exact", a, b, c)};
}

// ---- 6: loss assembly --------------------------------------------------------

struct Synthetic {
    envs::EnvSpec env = envs::make_spec(Task::pusher2);
    AwetConfig cfg;
    AgentNets nets;
    std::vector<Transition> rows_a, rows_e;
    demos::Batch agent, expert;

    explicit Synthetic(std::uint64_t seed) {
        cfg.hidden = {16, 12};
        cfg.c_l = 0.35;
        cfg.lambda1 = 3e-3;
        cfg.lambda2 = 2e-3;
        Engine init(seed);
        nets = AgentNets::create(env, cfg, init);
        Engine rng(seed ^ 0x5eed);
        rows_a = oracle::random_transitions(20, env.obs_dim, env.act_dim, rng, false);
        rows_e = oracle::random_transitions(25, env.obs_dim, env.act_dim, rng, true);
        agent = oracle::batch_of(rows_a, false);
        expert = oracle::batch_of(rows_e, true);
    }
};

Outcome loss_assembly() {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Synthetic s(seed);
        // offline critic (MSE + lambda1 L2) and actor (-(1-C_l) L_Q + C_l L_BC + lambda2 L2)
        {
            auto copy = s.nets;
            const auto c = offline_critic_step(copy, s.expert, s.cfg);
            for (int i = 0; i < 2; ++i)
                worst = std::max(worst, std::abs(c.total[static_cast<std::size_t>(i)] -
                                                 oracle::offline_critic_loss(s.nets, i, s.expert, s.cfg.lambda1)));
            auto copy2 = s.nets;
            const auto a = offline_actor_step(copy2, s.expert, s.cfg);
            worst = std::max(worst, std::abs(a.total - oracle::offline_actor_loss(s.nets, s.expert, s.cfg.c_l,
                                                                                   s.cfg.lambda2)));
        }
        // online critic pieces and the weighted clipped sum
        for (bool clip : {true, false}) {
            auto cfg = s.cfg;
            cfg.use_loss_clip = clip;
            cfg.sigma_tilde = 0.0;
            Engine unused(0);
            const auto y = td_targets(s.nets, s.agent, s.env, cfg, unused);
            const auto yo = oracle::noiseless_targets(s.nets, s.agent, s.env, cfg.gamma);
            for (std::size_t j = 0; j < yo.size(); ++j)
                worst = std::max(worst, std::abs(y(static_cast<Eigen::Index>(j)) - yo[j]));
            const double a_a = 0.1 * static_cast<double>(seed) + 0.05;
            const auto t = critic_losses_online(s.nets, s.agent, &s.expert, y, a_a, cfg);
            for (int i = 0; i < 2; ++i) {
                const double lba = oracle::td_loss(s.nets, i, s.agent, yo);
                const double lbe = oracle::mc_loss(s.nets, i, s.expert);
                const auto& ti = t[static_cast<std::size_t>(i)];
                worst = std::max({worst, std::abs(ti.l_ba - lba), std::abs(ti.l_be - lbe),
                                  std::abs(ti.total - oracle::critic_total(lba, lbe, a_a, cfg.c_clip, clip))});
            }
        }
        // online actor
        const auto at = actor_losses_online(s.nets, s.agent, &s.expert, s.cfg);
        worst = std::max(worst, std::abs(at.total - oracle::online_actor_loss(s.nets, s.agent, s.expert, s.cfg.c_l)));
    }
    const bool hand = oracle::critic_total(0.4, 0.2, 0.5, 0.5, true) == 0.5 * 0.4 + 0.5 * 0.2 &&
                      std::abs(oracle::critic_total(0.4, 0.2, 0.5, 0.5, true) - 0.3) <= 1e-15;

    // adversarial batches: huge TD errors must clip to exactly C_clip
    const AwetConfig defaults;
    double max_clipped = 0.0;
    std::size_t saturated = 0;
    Engine rng(99);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k < 200; ++k) {
        Synthetic s(100 + static_cast<std::uint64_t>(k % 7));
        nnet::Vector y(s.agent.s.cols());
        const double scale = std::pow(10.0, k % 9 - 2);
        for (Eigen::Index j = 0; j < y.size(); ++j) y(j) = scale * g(rng);
        const auto t = critic_losses_online(s.nets, s.agent, &s.expert, y, 0.5, defaults);
        for (const auto& ti : t) {
            max_clipped = std::max(max_clipped, std::abs(ti.l_ba_clipped));
            if (ti.l_ba > defaults.c_clip) ++saturated;
        }
    }
    const bool clip_ok = defaults.c_clip == 0.5 && max_clipped <= 0.5 && saturated > 0;
    return {worst <= 1e-10 && hand && clip_ok,
            fmt("max |impl - oracle| %.3g (<= 1e-10) over offline critic/actor, TD, MC, weighted critic and online "
                "actor losses; hand case 0.5*0.4+0.5*0.2 %s; adversarial max |clipped| %.17g (<= C_clip 0.5, %zu "
                "saturated)",
                worst, hand ? "ok" : "wrong", max_clipped, saturated)};
}

// ---- 7: reduction to TD3 ---------------------------------------------------------

Outcome reduction() {
    std::size_t checked = 0, equal = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed)
        for (bool actor : {true, false}) {
            Synthetic s(seed);
            AwetConfig cfg = bench::apply_variant(s.cfg, bench::Variant::td3_scratch);
            AgentNets mine = s.nets, ref = s.nets;
            Engine a(seed * 31), b(seed * 31);
            const auto y = td_targets(mine, s.agent, s.env, cfg, a);
            critic_update_online(mine, s.agent, nullptr, y, 1.0, cfg);
            if (actor) actor_update_online(mine, s.agent, nullptr, cfg);
            oracle::reference_td3_update(ref, s.agent, s.env, cfg, b, actor);
            const bool same = bit_equal(mine.actor, ref.actor) && bit_equal(mine.critic1, ref.critic1) &&
                              bit_equal(mine.critic2, ref.critic2) && bit_equal(mine.actor_target, ref.actor_target) &&
                              bit_equal(mine.critic1_target, ref.critic1_target) &&
                              bit_equal(mine.critic2_target, ref.critic2_target) && a == b &&
                              mine.actor_opt.m == ref.actor_opt.m && mine.critic1_opt.v == ref.critic1_opt.v;
            ++checked;
            equal += same ? 1 : 0;
        }
    return {checked == equal, fmt("%zu of %zu seeded updates bit-identical to the reference TD3 step", equal, checked)};
}

// ---- 8: polyak -------------------------------------------------------------------

Outcome polyak() {
    double worst = 0.0;
    std::size_t steps = 0;
    for (double rho : {0.995, 0.9, 0.5}) {
        Synthetic s(11);
        s.cfg.rho = rho;
        for (auto* p : {&s.nets.actor, &s.nets.critic1, &s.nets.critic2}) {
            Engine rng(5);
            std::normal_distribution<double> g(0.0, 0.3);
            for (double& w : p->flat()) w += g(rng);
        }
        s.nets.actor_opt.lr = 0.0;  // frozen online nets
        const double g0[3] = {nnet::distance(s.nets.actor_target, s.nets.actor),
                              nnet::distance(s.nets.critic1_target, s.nets.critic1),
                              nnet::distance(s.nets.critic2_target, s.nets.critic2)};
        for (int n = 1; n <= 40; ++n) {
            actor_update_online(s.nets, s.agent, &s.expert, s.cfg);
            const double g[3] = {nnet::distance(s.nets.actor_target, s.nets.actor),
                                 nnet::distance(s.nets.critic1_target, s.nets.critic1),
                                 nnet::distance(s.nets.critic2_target, s.nets.critic2)};
            for (int k = 0; k < 3; ++k) worst = std::max(worst, std::abs(g[k] - std::pow(rho, n) * g0[k]));
            ++steps;
        }
    }
    return {worst <= 1e-10, fmt("%zu actor updates at rho in {0.995, 0.9, 0.5}: max |gap - rho^n gap0| %.3g (<= 1e-10)",
                                steps, worst)};
}

// ---- 9: reach_point end to end -------------------------------------------------------

Outcome end_to_end(const Context& ctx) {
    const auto t0 = Clock::now();
    auto base = bench::load_run_config(ctx.configs / "reach_point.ini");
    base.n_seeds = 10;
    base.n_demos = 100;
    base.awet.online_episodes = 300;

    auto awet_cfg = base;
    awet_cfg.tag = "awet";
    awet_cfg.awet = bench::apply_variant(base.awet, bench::Variant::awet);
    awet_cfg.output_dir = (ctx.work / "reach_point" / "awet").string();
    bench::SeedOptions stop_at_goal;
    stop_at_goal.stop = [](const bench::MetricsRecord& r) { return r.success_rate() >= 0.9; };
    const auto a = bench::run_experiment(awet_cfg, stop_at_goal);

    auto td3_cfg = base;
    td3_cfg.tag = "td3_scratch";
    td3_cfg.awet = bench::apply_variant(base.awet, bench::Variant::td3_scratch);
    td3_cfg.output_dir = (ctx.work / "reach_point" / "td3_scratch").string();
    const auto b = bench::run_experiment(td3_cfg);

    std::size_t reached = 0, below = 0;
    std::string per;
    for (std::size_t i = 0; i < 10; ++i) {
        const auto& sa = a.seeds[i];
        const auto& sb = b.seeds[i];
        const double best_a = sa.ok ? sa.best_success() : 0.0;
        const double best_b = sb.ok ? sb.best_success() : 1.0;
        if (sa.ok && best_a >= 0.9) ++reached;
        if (sa.ok && sb.ok && best_b < best_a) ++below;
        per += fmt(" %.2f/%.2f@%llu", best_a, best_b,
                   static_cast<unsigned long long>(sa.ok ? sa.final_record().episode : 0));
    }
    const double secs = seconds_since(t0);
    return {reached >= 8 && below >= 8 && secs <= 900.0,
            fmt("AWET >= 90%% within 300 episodes in %zu/10 seeds (>= 8); TD3 scratch below AWET in %zu/10 (>= 8); "
                "%.0f s (<= 900 s); awet/td3@episode:",
                reached, below, secs) +
                per};
}

// ---- 10: pusher ablation ordering -------------------------------------------------------

Outcome ablation_order(const Context& ctx) {
    const auto t0 = Clock::now();
    auto base = bench::load_run_config(ctx.configs / "pusher2_ablation.ini");
    base.n_seeds = 10;
    base.n_demos = 100;
    base.output_dir = (ctx.work / "pusher2").string();
    const std::vector<bench::AblationCell> cells = {{bench::Variant::awet, 100},
                                                    {bench::Variant::no_aa, 100},
                                                    {bench::Variant::no_et, 100},
                                                    {bench::Variant::no_aa_no_et, 100},
                                                    {bench::Variant::awet, 20}};
    const auto res = bench::ablation_matrix(base, cells);
    std::map<std::string, double> mean;
    std::size_t failed = 0;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        double sum = 0.0;
        for (const auto& s : res.runs[k].seeds) {
            if (!s.ok) ++failed;
            sum += s.ok ? s.final_record().success_rate() : 0.0;
        }
        mean[cells[k].tag()] = sum / static_cast<double>(res.runs[k].seeds.size());
    }
    const double aw = mean["awet_d100"];
    const bool o1 = aw >= mean["no_aa_d100"], o2 = aw >= mean["no_et_d100"], o3 = aw >= mean["no_aa_no_et_d100"];
    const bool o4 = aw >= mean["awet_d20"];
    const double secs = seconds_since(t0);
    return {o1 && o2 && o3 && o4 && failed == 0 && secs <= 5400.0,
            fmt("mean final success AWET %.3f vs no_AA %.3f [%s], no_ET %.3f [%s], no_AA_no_ET %.3f [%s]; 100 demos "
                "%.3f vs 20 demos %.3f [%s]; %zu failed seeds; %.0f s (<= 5400 s)",
                aw, mean["no_aa_d100"], o1 ? "ok" : "violated", mean["no_et_d100"], o2 ? "ok" : "violated",
                mean["no_aa_no_et_d100"], o3 ? "ok" : "violated", aw, mean["awet_d20"], o4 ? "ok" : "violated", failed,
                secs)};
}

// ---- 11: Wilcoxon ------------------------------------------------------------------

Outcome wilcoxon() {
    using bench::WilcoxonMode;
    const std::vector<double> a{0.9, 0.8, 0.85, 0.7, 0.95}, b{0.5, 0.6, 0.4, 0.65, 0.3};
    const auto r = bench::wilcoxon_signed_rank(a, b, WilcoxonMode::exact);
    Engine rng(15);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        std::vector<double> x(15), y(15);
        const double shift = 0.1 * (k % 10);
        for (std::size_t i = 0; i < 15; ++i) {
            x[i] = g(rng) + shift;
            y[i] = g(rng);
        }
        const auto e = bench::wilcoxon_signed_rank(x, y, WilcoxonMode::exact);
        const auto n = bench::wilcoxon_signed_rank(x, y, WilcoxonMode::normal);
        worst = std::max({worst, std::abs(e.p_greater - n.p_greater), std::abs(e.p_less - n.p_less),
                          std::abs(e.p_two_sided - n.p_two_sided)});
    }
    return {r.exact && r.p_greater == 0.03125 && worst <= 0.02,
            fmt("n=5 all positive: exact one-sided p %.17g (== 0.03125); n=15 exact vs normal max |dp| %.4f over 200 "
                "instances (<= 0.02)",
                r.p_greater, worst)};
}

// ---- 12: early-termination bookkeeping ------------------------------------------------------

Outcome et_bookkeeping() {
    const auto env = envs::make_spec(Task::reach_point);
    AwetConfig cfg;
    cfg.hidden = {32, 32};
    cfg.online_episodes = 20;
    cfg.offline_steps = 50;
    const auto trajs = demos::annotate_mc_returns(demos::generate_demos(env, 10, 21), cfg.gamma);
    demos::ExpertBuffer expert(trajs);
    std::vector<dtw::FeatureSeq> corpus;
    for (const auto& t : trajs) corpus.push_back(dtw::observation_features(t));
    const auto expert_digest = expert.digest();

    // every rollout rejected: expert corpus moved far away, threshold 0
    auto far = corpus;
    for (auto& seq : far)
        for (auto& v : seq)
            for (auto& x : v) x += 50.0;
    dtw::TerminationMonitor reject_all(far, env.max_steps, 0.0, dtw::ComparisonMode::prefix_match);
    RunStreams st(1);
    auto nets = AgentNets::create(env, cfg, st.init);
    std::uint64_t gated = 0;
    OnlineHooks h1;
    h1.on_episode = [&](const EpisodeRecord& r) { gated += r.decision == dtw::GateDecision::terminate_and_discard; };
    const auto all = run_online_stage(nets, &expert, env, &reject_all, cfg, st, {0, {}}, h1);
    const bool none_ok = all.updates == 0 && all.discards == all.episodes && all.episodes == cfg.online_episodes &&
                         gated == all.episodes && all.agent_buffer.empty();

    // mixed run: threshold at the median gate distance of an unrestricted probe
    std::vector<double> probe;
    {
        dtw::TerminationMonitor open(corpus, env.max_steps, 1e300, dtw::ComparisonMode::prefix_match);
        RunStreams ps(2);
        auto pn = AgentNets::create(env, cfg, ps.init);
        OnlineHooks h;
        h.on_episode = [&](const EpisodeRecord& r) { probe.push_back(r.gate_distance); };
        run_online_stage(pn, &expert, env, &open, cfg, ps, {0, {}}, h);
    }
    std::sort(probe.begin(), probe.end());
    dtw::TerminationMonitor mixed(corpus, env.max_steps, probe[probe.size() / 2], dtw::ComparisonMode::prefix_match);
    RunStreams ms(2);
    auto mn = AgentNets::create(env, cfg, ms.init);
    std::vector<Transition> kept;
    std::set<std::uint64_t> rejected;
    std::uint64_t discards = 0;
    OnlineHooks h2;
    h2.on_rollout = [&](const EpisodeRecord& r, std::span<const Transition> steps) {
        if (r.decision == dtw::GateDecision::terminate_and_discard) {
            ++discards;
            for (const auto& t : steps) rejected.insert(demos::digest(std::span<const Transition>(&t, 1)));
        } else {
            kept.insert(kept.end(), steps.begin(), steps.end());
        }
    };
    const auto res = run_online_stage(mn, &expert, env, &mixed, cfg, ms, {0, {}}, h2);
    std::size_t leaked = 0;
    for (const auto& t : res.agent_buffer.contents())
        leaked += rejected.count(demos::digest(std::span<const Transition>(&t, 1)));
    const bool digest_ok = res.agent_buffer.digest() == demos::digest(kept);
    const bool mixed_ok = discards > 0 && discards < res.episodes && res.discards == discards && leaked == 0 &&
                          digest_ok && expert.digest() == expert_digest;
    return {none_ok && mixed_ok,
            fmt("reject-all: %llu updates, %llu discards / %llu episodes; mixed: %llu discards / %llu episodes, D_A "
                "digest %s, %zu discarded transitions in D_A, D_E digest %s",
                static_cast<unsigned long long>(all.updates), static_cast<unsigned long long>(all.discards),
                static_cast<unsigned long long>(all.episodes), static_cast<unsigned long long>(discards),
                static_cast<unsigned long long>(res.episodes), digest_ok ? "matches kept rollouts" : "MISMATCH", leaked,
                expert.digest() == expert_digest ? "unchanged" : "CHANGED")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AWET acceptance checks"};
    std::vector<int> only;
    Context ctx;
    std::string work = "acceptance_runs", configs = AWET_CONFIG_DIR;
    app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 12));
    app.add_option("--work", work, "directory for experiment outputs")->capture_default_str();
    app.add_option("--configs", configs, "directory holding reach_point.ini and pusher2_ablation.ini")
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);
    ctx.work = work;
    ctx.configs = configs;

    const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
        {"gradient correctness", gradients},
        {"Monte-Carlo return oracle", mc_returns},
        {"DTW oracle", dtw_oracle},
        {"threshold structure", threshold_structure},
        {"agent advantage values", advantage_values},
        {"loss assembly", loss_assembly},
        {"reduction to TD3", reduction},
        {"polyak contraction", polyak},
        {"end-to-end reach_point", [&] { return end_to_end(ctx); }},
        {"pusher ablation ordering", [&] { return ablation_order(ctx); }},
        {"Wilcoxon signed-rank", wilcoxon},
        {"early-termination bookkeeping", et_bookkeeping},
    };
    bool all = true;
    for (std::size_t i = 0; i < checks.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = checks[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, checks[i].first, o.detail.c_str());
        std::fflush(stdout);
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
