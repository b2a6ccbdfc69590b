#include "awet/demos.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "awet/error.hpp"

namespace awet::demos {

std::vector<Trajectory> generate_demos(const envs::EnvSpec& spec, std::size_t n_episodes, std::uint64_t seed) {
    std::vector<Trajectory> out;
    if (n_episodes == 0) return out;
    out.reserve(n_episodes);
    Engine seeds{stream_seed(seed, "demo-episodes")};
    const std::size_t max_attempts = 10 * n_episodes;
    for (std::size_t attempt = 0; attempt < max_attempts && out.size() < n_episodes; ++attempt) {
        const std::uint64_t ep_seed = seeds();
        auto [state, obs] = envs::reset(spec, ep_seed);
        Trajectory traj;
        traj.seed = ep_seed;
        traj.task = spec.task;
        traj.source = Source::expert;
        traj.steps.reserve(spec.max_steps);
        for (std::size_t t = 0; t < spec.max_steps; ++t) {
            auto action = envs::expert_action(spec, state);
            auto res = envs::step(spec, state, action);
            traj.steps.push_back(Transition{obs, action, res.reward, res.next_obs, res.done, std::nullopt});
            obs = std::move(res.next_obs);
            state = std::move(res.state);
        }
        if (envs::is_success(spec, traj)) out.push_back(std::move(traj));
    }
    if (out.size() < n_episodes)
        throw GenerationFailure("expert reached only " + std::to_string(out.size()) + " of " +
                                std::to_string(n_episodes) + " successes in " + std::to_string(max_attempts) +
                                " attempts on " + spec.name);
    return out;
}

std::vector<Trajectory> annotate_mc_returns(std::vector<Trajectory> trajectories, double gamma) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in [0, 1)");
    for (auto& traj : trajectories) {
        double q = 0.0;
        for (std::size_t t = traj.steps.size(); t-- > 0;) {
            q = traj.steps[t].r + gamma * q;
            traj.steps[t].q_mc = q;
        }
    }
    return trajectories;
}

double normalize_rewards(std::vector<Trajectory>& trajectories) {
    double max_abs = 0.0;
    for (const auto& traj : trajectories)
        for (const auto& t : traj.steps) max_abs = std::max(max_abs, std::abs(t.r));
    if (max_abs == 0.0) return 1.0;
    for (auto& traj : trajectories)
        for (auto& t : traj.steps) {
            t.r /= max_abs;
            if (t.q_mc) *t.q_mc /= max_abs;
        }
    return max_abs;
}

SignReport check_reward_signs(std::span<const Trajectory> expert, std::span<const Transition> agent) {
    std::vector<std::string> pos, neg;
    for (std::size_t e = 0; e < expert.size(); ++e)
        for (std::size_t t = 0; t < expert[e].steps.size(); ++t) {
            const double r = expert[e].steps[t].r;
            const std::string where = "expert episode " + std::to_string(e) + " step " + std::to_string(t);
            if (r > 0.0) pos.push_back(where);
            if (r < 0.0) neg.push_back(where);
        }
    for (std::size_t i = 0; i < agent.size(); ++i) {
        const std::string where = "agent transition " + std::to_string(i);
        if (agent[i].r > 0.0) pos.push_back(where);
        if (agent[i].r < 0.0) neg.push_back(where);
    }
    SignReport report;
    if (!pos.empty() && !neg.empty()) {
        report.ok = false;
        // The minority sign is reported as the offender.
        report.offending = pos.size() <= neg.size() ? std::move(pos) : std::move(neg);
    } else {
        report.sign = !neg.empty() ? -1 : (!pos.empty() ? 1 : 0);
    }
    return report;
}

SignReport validate_reward_signs(std::span<const Trajectory> expert, std::span<const Transition> agent) {
    auto report = check_reward_signs(expert, agent);
    if (!report.ok) {
        std::string msg = "rewards have mixed signs; offending: ";
        for (std::size_t i = 0; i < report.offending.size() && i < 5; ++i)
            msg += (i ? ", " : "") + report.offending[i];
        if (report.offending.size() > 5) msg += " (+" + std::to_string(report.offending.size() - 5) + " more)";
        throw SignViolation(msg);
    }
    return report;
}

Batch make_batch(std::span<const Transition* const> rows, bool with_q) {
    Batch b;
    if (rows.empty()) return b;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto obs = static_cast<Eigen::Index>(rows.front()->s.size());
    const auto act = static_cast<Eigen::Index>(rows.front()->a.size());
    b.s.resize(obs, n);
    b.a.resize(act, n);
    b.s_next.resize(obs, n);
    b.r.resize(n);
    b.d.resize(n);
    if (with_q) b.q_mc.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Transition& t = *rows[static_cast<std::size_t>(j)];
        b.s.col(j) = Eigen::Map<const Eigen::VectorXd>(t.s.data(), obs);
        b.a.col(j) = Eigen::Map<const Eigen::VectorXd>(t.a.data(), act);
        b.s_next.col(j) = Eigen::Map<const Eigen::VectorXd>(t.s_next.data(), obs);
        b.r(j) = t.r;
        b.d(j) = t.d ? 1.0 : 0.0;
        if (with_q) {
            if (!t.q_mc) throw MissingAnnotation("sampled transition lacks a Monte-Carlo return");
            b.q_mc(j) = *t.q_mc;
        }
    }
    return b;
}

std::vector<std::size_t> sample_indices(std::size_t population, std::size_t batch_size, Engine& rng) {
    if (population == 0) throw EmptyBuffer("cannot sample from an empty buffer");
    std::uniform_int_distribution<std::size_t> pick(0, population - 1);
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

ExpertBuffer::ExpertBuffer(std::vector<Trajectory> annotated) : trajectories_(std::move(annotated)) {
    for (std::size_t e = 0; e < trajectories_.size(); ++e)
        for (std::size_t t = 0; t < trajectories_[e].steps.size(); ++t) {
            if (!trajectories_[e].steps[t].q_mc)
                throw MissingAnnotation("expert episode " + std::to_string(e) + " step " + std::to_string(t) +
                                        " has no Monte-Carlo return");
            transitions_.push_back(trajectories_[e].steps[t]);
        }
}

Batch ExpertBuffer::sample(std::size_t batch_size, Engine& rng) const {
    if (transitions_.empty()) throw EmptyBuffer("expert buffer is empty");
    const auto idx = sample_indices(transitions_.size(), batch_size, rng);
    std::vector<const Transition*> rows(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) rows[i] = &transitions_[idx[i]];
    return make_batch(rows, true);
}

std::uint64_t ExpertBuffer::digest() const { return demos::digest(transitions_); }

AgentBuffer::AgentBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidInput("agent buffer capacity must be positive");
}

void AgentBuffer::push(Transition t) {
    if (store_.size() == capacity_) store_.pop_front();
    store_.push_back(std::move(t));
}

Batch AgentBuffer::sample(std::size_t batch_size, Engine& rng) const {
    if (store_.empty()) throw EmptyBuffer("agent buffer is empty");
    const auto idx = sample_indices(store_.size(), batch_size, rng);
    std::vector<const Transition*> rows(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) rows[i] = &store_[idx[i]];
    return make_batch(rows, false);
}

std::uint64_t AgentBuffer::digest() const {
    std::vector<Transition> flat(store_.begin(), store_.end());
    return demos::digest(flat);
}

std::uint64_t digest(std::span<const Transition> transitions) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffu;
            h *= 0x100000001b3ULL;
        }
    };
    auto mix_d = [&](double v) { mix(std::bit_cast<std::uint64_t>(v)); };
    for (const auto& t : transitions) {
        mix(t.s.size());
        for (double v : t.s) mix_d(v);
        mix(t.a.size());
        for (double v : t.a) mix_d(v);
        mix_d(t.r);
        for (double v : t.s_next) mix_d(v);
        mix(t.d ? 1 : 0);
        mix(t.q_mc ? 1 : 0);
        if (t.q_mc) mix_d(*t.q_mc);
    }
    return h;
}

namespace {

void put(std::ostream& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

double parse_double(const std::string& tok, std::size_t line_no) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw IoError("dataset line " + std::to_string(line_no) + ": bad number '" + tok + "'");
    return v;
}

std::string header_field(const std::string& header, const std::string& key) {
    const std::string needle = " " + key + "=";
    const auto pos = header.find(needle);
    if (pos == std::string::npos) throw IoError("dataset header lacks '" + key + "='");
    const auto start = pos + needle.size();
    const auto end = header.find(' ', start);
    return header.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

}  // namespace

void save_dataset(std::ostream& out, const Dataset& data) {
    const std::size_t steps = data.trajectories.empty() ? 0 : data.trajectories.front().steps.size();
    out << "#awet-demos v1 task=" << to_string(data.task) << " obs=" << data.obs_dim << " act=" << data.act_dim
        << " gamma=";
    put(out, data.gamma);
    out << " episodes=" << data.trajectories.size() << " steps=" << steps << "\n";
    for (std::size_t e = 0; e < data.trajectories.size(); ++e) {
        const auto& traj = data.trajectories[e];
        if (traj.steps.size() != steps) throw InvalidInput("dataset episodes must share one length");
        for (std::size_t t = 0; t < traj.steps.size(); ++t) {
            const auto& tr = traj.steps[t];
            if (tr.s.size() != data.obs_dim || tr.s_next.size() != data.obs_dim || tr.a.size() != data.act_dim)
                throw InvalidInput("transition dimensions do not match dataset header");
            out << e << ' ' << t;
            for (double v : tr.s) {
                out << ' ';
                put(out, v);
            }
            for (double v : tr.a) {
                out << ' ';
                put(out, v);
            }
            out << ' ';
            put(out, tr.r);
            for (double v : tr.s_next) {
                out << ' ';
                put(out, v);
            }
            out << ' ' << (tr.d ? 1 : 0) << ' ';
            if (tr.q_mc)
                put(out, *tr.q_mc);
            else
                out << "nan";
            out << '\n';
        }
    }
    if (!out) throw IoError("failed writing dataset");
}

void save_dataset(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    save_dataset(out, data);
}

Dataset load_dataset(std::istream& in, const envs::EnvSpec* expect) {
    std::string header;
    if (!std::getline(in, header) || header.rfind("#awet-demos v1", 0) != 0)
        throw IoError("missing '#awet-demos v1' header");
    Dataset data;
    data.task = parse_task(header_field(header, "task"));
    data.obs_dim = std::stoul(header_field(header, "obs"));
    data.act_dim = std::stoul(header_field(header, "act"));
    data.gamma = parse_double(header_field(header, "gamma"), 1);
    const std::size_t episodes = std::stoul(header_field(header, "episodes"));
    const std::size_t steps = std::stoul(header_field(header, "steps"));
    if (expect) {
        if (expect->task != data.task) throw InvalidInput("dataset task " + to_string(data.task) + " != " + expect->name);
        if (expect->obs_dim != data.obs_dim || expect->act_dim != data.act_dim)
            throw InvalidInput("dataset dimensions obs=" + std::to_string(data.obs_dim) +
                               " act=" + std::to_string(data.act_dim) + " do not match task " + expect->name);
    }
    const std::size_t n = data.obs_dim, m = data.act_dim;
    const std::size_t fields = 2 + n + m + 1 + n + 1 + 1;
    data.trajectories.resize(episodes);
    for (auto& traj : data.trajectories) {
        traj.task = data.task;
        traj.source = Source::expert;
    }

    std::string line;
    std::size_t line_no = 1;
    std::size_t count = 0;
    std::vector<std::string> tok;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        tok.clear();
        std::istringstream ls(line);
        for (std::string w; ls >> w;) tok.push_back(std::move(w));
        if (tok.size() != fields)
            throw InvalidInput("dataset line " + std::to_string(line_no) + " has " + std::to_string(tok.size()) +
                               " fields, expected " + std::to_string(fields));
        const std::size_t ep = std::stoul(tok[0]);
        const std::size_t st = std::stoul(tok[1]);
        if (ep >= episodes || st != data.trajectories[ep].steps.size())
            throw IoError("dataset line " + std::to_string(line_no) + " is out of order");
        Transition t;
        std::size_t k = 2;
        for (std::size_t i = 0; i < n; ++i) t.s.push_back(parse_double(tok[k++], line_no));
        for (std::size_t i = 0; i < m; ++i) t.a.push_back(parse_double(tok[k++], line_no));
        t.r = parse_double(tok[k++], line_no);
        for (std::size_t i = 0; i < n; ++i) t.s_next.push_back(parse_double(tok[k++], line_no));
        t.d = tok[k++] == "1";
        const double q = parse_double(tok[k++], line_no);
        if (!std::isnan(q)) t.q_mc = q;
        data.trajectories[ep].steps.push_back(std::move(t));
        ++count;
    }
    if (count != episodes * steps)
        throw IoError("dataset has " + std::to_string(count) + " transitions, header promises " +
                      std::to_string(episodes * steps));
    return data;
}

Dataset load_dataset(const std::string& path, const envs::EnvSpec* expect) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return load_dataset(in, expect);
}

}  // namespace awet::demos
