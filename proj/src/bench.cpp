#include "awet/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "awet/demos.hpp"
#include "awet/dtw.hpp"
#include "awet/envs.hpp"
#include "awet/error.hpp"

namespace fs = std::filesystem;

namespace awet::bench {

using awet::to_string;

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
        if (s == "nan") return std::nan("");
        throw InvalidInput("'" + key + "' expects a number, got '" + s + "'");
    }
    return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw InvalidInput("'" + key + "' expects a non-negative integer, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw InvalidInput("'" + key + "' expects true or false, got '" + s + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t") + 1);
        if (!tok.empty()) out.push_back(static_cast<std::size_t>(parse_uint(key, tok)));
    }
    return out;
}

std::string sizes_str(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define AWET_SIZE(sec, name, expr)                                                                          \
    Field{sec, name, [](RunConfig& c, const std::string& v) { expr = static_cast<std::size_t>(parse_uint(name, v)); }, \
          [](const RunConfig& c) { return std::to_string(expr); }}
#define AWET_REAL(sec, name, expr)                                                              \
    Field{sec, name, [](RunConfig& c, const std::string& v) { expr = parse_double(name, v); }, \
          [](const RunConfig& c) { return num(expr); }}
#define AWET_BOOL(sec, name, expr)                                                            \
    Field{sec, name, [](RunConfig& c, const std::string& v) { expr = parse_bool(name, v); }, \
          [](const RunConfig& c) { return bool_str(expr); }}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        Field{"run", "task", [](RunConfig& c, const std::string& v) { c.task = parse_task(v); },
              [](const RunConfig& c) { return to_string(c.task); }},
        AWET_SIZE("run", "n_demos", c.n_demos),
        AWET_SIZE("run", "n_seeds", c.n_seeds),
        Field{"run", "base_seed", [](RunConfig& c, const std::string& v) { c.base_seed = parse_uint("base_seed", v); },
              [](const RunConfig& c) { return std::to_string(c.base_seed); }},
        AWET_SIZE("run", "eval_every", c.eval_every),
        AWET_SIZE("run", "eval_episodes", c.eval_episodes),
        AWET_SIZE("run", "max_steps", c.max_steps),
        Field{"run", "output_dir", [](RunConfig& c, const std::string& v) { c.output_dir = v; },
              [](const RunConfig& c) { return c.output_dir; }},
        Field{"run", "tag", [](RunConfig& c, const std::string& v) { c.tag = v; },
              [](const RunConfig& c) { return c.tag; }},
        Field{"run", "demos_file", [](RunConfig& c, const std::string& v) { c.demos_file = v; },
              [](const RunConfig& c) { return c.demos_file; }},
        AWET_BOOL("run", "loss_stream", c.loss_stream),
        AWET_SIZE("run", "jobs", c.jobs),

        AWET_REAL("awet", "gamma", c.awet.gamma),
        AWET_REAL("awet", "lr", c.awet.lr),
        AWET_REAL("awet", "c_l", c.awet.c_l),
        AWET_REAL("awet", "c_clip", c.awet.c_clip),
        AWET_REAL("awet", "lambda1", c.awet.lambda1),
        AWET_REAL("awet", "lambda2", c.awet.lambda2),
        AWET_REAL("awet", "rho", c.awet.rho),
        AWET_REAL("awet", "sigma", c.awet.sigma),
        AWET_REAL("awet", "sigma_tilde", c.awet.sigma_tilde),
        AWET_REAL("awet", "noise_clip", c.awet.noise_clip),
        AWET_SIZE("awet", "policy_delay", c.awet.policy_delay),
        AWET_SIZE("awet", "offline_steps", c.awet.offline_steps),
        AWET_SIZE("awet", "online_episodes", c.awet.online_episodes),
        AWET_SIZE("awet", "batch_e", c.awet.batch_e),
        AWET_SIZE("awet", "batch_a", c.awet.batch_a),
        Field{"awet", "hidden", [](RunConfig& c, const std::string& v) { c.awet.hidden = parse_sizes("hidden", v); },
              [](const RunConfig& c) { return sizes_str(c.awet.hidden); }},
        AWET_SIZE("awet", "agent_capacity", c.awet.agent_capacity),
        Field{"awet", "base_alg", [](RunConfig& c, const std::string& v) { c.awet.base_alg = parse_base_alg(v); },
              [](const RunConfig& c) { return to_string(c.awet.base_alg); }},
        AWET_BOOL("awet", "use_advantage_weight", c.awet.use_advantage_weight),
        AWET_BOOL("awet", "use_early_termination", c.awet.use_early_termination),
        AWET_BOOL("awet", "use_loss_clip", c.awet.use_loss_clip),
        AWET_BOOL("awet", "use_expert_data", c.awet.use_expert_data),
        AWET_BOOL("awet", "pretrain", c.awet.pretrain),
        AWET_BOOL("awet", "normalize_rewards", c.awet.normalize_rewards),
        Field{"awet", "advantage_critic",
              [](RunConfig& c, const std::string& v) { c.awet.advantage_critic = parse_advantage_critic(v); },
              [](const RunConfig& c) { return to_string(c.awet.advantage_critic); }},
        Field{"awet", "et_mode", [](RunConfig& c, const std::string& v) { c.awet.et_mode = parse_comparison_mode(v); },
              [](const RunConfig& c) { return to_string(c.awet.et_mode); }},
    };
    return table;
}

#undef AWET_SIZE
#undef AWET_REAL
#undef AWET_BOOL

bool skipped_section(const std::string& name) {
    return name.rfind("manifest", 0) == 0 || name.rfind("streams", 0) == 0;
}

}  // namespace

void RunConfig::validate() const {
    awet.validate();
    if (n_seeds < 1) throw InvalidInput("n_seeds must be >= 1");
    if (eval_episodes < 1) throw InvalidInput("eval_episodes must be >= 1");
    if (eval_every < 1) throw InvalidInput("eval_every must be >= 1");
    if (max_steps < 2) throw InvalidInput("max_steps must be >= 2");
    if (jobs < 1) throw InvalidInput("jobs must be >= 1");
    if (tag.empty() || tag.find_first_of(" \t/\\,") != std::string::npos)
        throw InvalidInput("tag must be a non-empty word without separators, got '" + tag + "'");
    if ((awet.pretrain || awet.use_expert_data || awet.use_early_termination) && n_demos == 0)
        throw InvalidInput("n_demos must be >= 1 when expert data is used");
    if (awet.use_early_termination && n_demos < 2)
        throw InsufficientCorpus("early termination needs at least two demonstrations");
}

RunConfig parse_run_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw InvalidInput(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (skipped_section(section)) continue;
        if (section != "run" && section != "awet") throw InvalidInput("config: unknown section [" + section + "]");
        for (const auto& [key, value] : body) {
            const std::string name = key == "c" ? "noise_clip" : key;
            auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) {
                return section == f.section && name == f.key;
            });
            if (it == fields().end()) throw InvalidInput("config: unknown key '" + key + "' in [" + section + "]");
            it->set(cfg, value.get_value<std::string>());
        }
    }
    cfg.validate();
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    return parse_run_config(in);
}

void write_run_config(std::ostream& out, const RunConfig& config) {
    const char* current = "";
    for (const auto& f : fields()) {
        if (std::string(current) != f.section) {
            out << (current[0] ? "\n" : "") << "[" << f.section << "]\n";
            current = f.section;
        }
        out << f.key << " = " << f.get(config) << "\n";
    }
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::awet: return "awet";
        case Variant::no_aa: return "no_aa";
        case Variant::no_et: return "no_et";
        case Variant::no_aa_no_et: return "no_aa_no_et";
        case Variant::no_clip: return "no_clip";
        case Variant::td3_scratch: return "td3_scratch";
    }
    return "unknown";
}

Variant parse_variant(const std::string& s) {
    for (auto v : {Variant::awet, Variant::no_aa, Variant::no_et, Variant::no_aa_no_et, Variant::no_clip,
                   Variant::td3_scratch})
        if (to_string(v) == s) return v;
    throw InvalidInput("unknown variant '" + s + "'");
}

AwetConfig apply_variant(AwetConfig base, Variant v) {
    switch (v) {
        case Variant::awet: break;
        case Variant::no_aa: base.use_advantage_weight = false; break;
        case Variant::no_et: base.use_early_termination = false; break;
        case Variant::no_aa_no_et:
            base.use_advantage_weight = false;
            base.use_early_termination = false;
            break;
        case Variant::no_clip: base.use_loss_clip = false; break;
        case Variant::td3_scratch:
            base.pretrain = false;
            base.use_expert_data = false;
            base.use_early_termination = false;
            base.use_advantage_weight = false;
            base.use_loss_clip = false;
            base.c_l = 0.0;
            base.base_alg = BaseAlg::td3;
            break;
    }
    return base;
}

std::uint64_t cell_seed(const RunConfig& config, std::size_t seed_index) {
    return stream_seed(config.base_seed, "cell/" + config.tag + "/demos=" + std::to_string(config.n_demos) +
                                             "/seed=" + std::to_string(seed_index));
}

double SeedResult::best_success() const {
    double best = 0.0;
    for (const auto& r : curve) best = std::max(best, r.success_rate());
    return best;
}

namespace {

fs::path seed_file(const RunConfig& c, const char* stem, std::size_t i) {
    return fs::path(c.output_dir) / (std::string(stem) + "_seed" + std::to_string(i) + ".csv");
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p.string());
    return out;
}

MetricsRecord to_record(const EvalRecord& e, double wall) {
    MetricsRecord r;
    r.episode = e.episode;
    r.eval_return = e.result.mean_return;
    r.successes = e.result.successes;
    r.eval_episodes = e.result.episodes;
    r.discards = e.discards;
    r.a_a_mean = e.a_a_mean;
    r.updates = e.updates;
    r.wall_seconds = wall;
    return r;
}

void write_update_row(std::ostream& out, const LossReport& r) {
    out << r.update << ',' << r.episode << ',' << num(r.advantage.value) << ',' << num(r.advantage.q_bar_a) << ','
        << num(r.advantage.q_bar_e) << ',' << (r.advantage.degenerate ? 1 : 0);
    for (const auto& c : r.critic)
        out << ',' << num(c.l_ba) << ',' << num(c.l_ba_clipped) << ',' << num(c.l_be) << ',' << num(c.total);
    if (r.actor)
        out << ',' << num(r.actor->l_qa) << ',' << num(r.actor->l_qe) << ',' << num(r.actor->l_bc) << ','
            << num(r.actor->total);
    else
        out << ",,,,";
    out << '\n';
}

const char* decision_str(const EpisodeRecord& e) {
    if (!e.gated) return "none";
    return e.decision == dtw::GateDecision::continue_rollout ? "continue" : "discard";
}

}  // namespace

void write_metrics(std::ostream& out, const RunConfig& config, const SeedResult& seed) {
    out << "# awet metrics task=" << to_string(config.task) << " tag=" << config.tag
        << " seed_index=" << seed.index << " seed=" << seed.seed << "\n";
    out << "# eval_success = successes / eval_episodes over deterministic-policy episodes; eval_return is the mean "
           "undiscounted return\n";
    out << "episode,eval_return,eval_success,successes,eval_episodes,discards,a_a_mean,updates\n";
    for (const auto& r : seed.curve)
        out << r.episode << ',' << num(r.eval_return) << ',' << num(r.success_rate()) << ',' << r.successes << ','
            << r.eval_episodes << ',' << r.discards << ',' << num(r.a_a_mean) << ',' << r.updates << '\n';
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(tok);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

std::vector<MetricsRecord> read_metrics(std::istream& in) {
    std::vector<MetricsRecord> out;
    std::string line;
    bool header = false;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "episode,eval_return,eval_success,successes,eval_episodes,discards,a_a_mean,updates")
                throw InvalidInput("metrics file: unexpected header '" + line + "'");
            header = true;
            continue;
        }
        const auto f = split_csv(line);
        if (f.size() != 8) throw InvalidInput("metrics file: line " + std::to_string(lineno) + " has " +
                                              std::to_string(f.size()) + " fields, expected 8");
        MetricsRecord r;
        r.episode = parse_uint("episode", f[0]);
        r.eval_return = parse_double("eval_return", f[1]);
        r.successes = static_cast<std::size_t>(parse_uint("successes", f[3]));
        r.eval_episodes = static_cast<std::size_t>(parse_uint("eval_episodes", f[4]));
        r.discards = parse_uint("discards", f[5]);
        r.a_a_mean = parse_double("a_a_mean", f[6]);
        r.updates = parse_uint("updates", f[7]);
        out.push_back(r);
    }
    if (!header) throw InvalidInput("metrics file has no header row");
    return out;
}

std::vector<MetricsRecord> read_metrics(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return read_metrics(in);
}

SeedResult run_seed(const RunConfig& config, std::size_t seed_index, const SeedOptions& options) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    SeedResult res;
    res.index = seed_index;
    res.seed = cell_seed(config, seed_index);
    res.streams.emplace_back("demos", stream_seed(res.seed, "demos"));
    for (const auto& n : RunStreams::names()) res.streams.emplace_back(n, stream_seed(res.seed, n));

    const auto env = envs::make_spec(config.task, config.max_steps);
    AwetConfig cfg = config.awet;
    RunStreams streams(res.seed);

    std::vector<Trajectory> trajs;
    const bool need_demos = cfg.pretrain || cfg.use_expert_data || cfg.use_early_termination;
    if (need_demos && config.n_demos > 0) {
        if (!config.demos_file.empty()) {
            auto data = demos::load_dataset(config.demos_file, &env);
            if (data.trajectories.size() < config.n_demos)
                throw InvalidInput("dataset " + config.demos_file + " holds " +
                                   std::to_string(data.trajectories.size()) + " episodes, need " +
                                   std::to_string(config.n_demos));
            data.trajectories.resize(config.n_demos);
            trajs = std::move(data.trajectories);
        } else {
            trajs = demos::generate_demos(env, config.n_demos, stream_seed(res.seed, "demos"));
        }
        if (cfg.normalize_rewards) cfg.reward_scale = demos::normalize_rewards(trajs);
        trajs = demos::annotate_mc_returns(std::move(trajs), cfg.gamma);
        demos::validate_reward_signs(trajs, {});
    }
    std::optional<demos::ExpertBuffer> expert;
    if (!trajs.empty()) {
        expert.emplace(trajs);
        res.dataset_digest = expert->digest();
    }

    AgentNets nets = AgentNets::create(env, cfg, streams.init);
    if (cfg.pretrain) {
        offline_train_critics(nets, *expert, cfg, streams.sampling);
        offline_train_actor(nets, *expert, cfg, streams.sampling);
    }
    nets.sync_targets();

    std::optional<dtw::TerminationMonitor> monitor;
    if (cfg.use_early_termination) {
        std::vector<dtw::FeatureSeq> corpus;
        corpus.reserve(trajs.size());
        for (const auto& t : trajs) corpus.push_back(dtw::observation_features(t));
        monitor.emplace(std::move(corpus), env.max_steps, cfg.et_mode);
        res.threshold = monitor->threshold();
    }

    EvalSchedule schedule;
    schedule.every = config.eval_every;
    for (std::size_t i = 0; i < config.eval_episodes; ++i) schedule.seeds.push_back(streams.eval());

    EvalRecord post;
    post.result = evaluate_policy(nets, env, schedule.seeds);
    res.post_offline = to_record(post, elapsed());

    std::optional<std::ofstream> updates_out, episodes_out;
    if (options.write_files) {
        fs::create_directories(config.output_dir);
        episodes_out.emplace(open_out(seed_file(config, "episodes", seed_index)));
        *episodes_out << "# awet episodes tag=" << config.tag << " seed_index=" << seed_index
                      << " threshold=" << num(res.threshold) << "\n"
                      << "episode,steps,gate,gate_distance,episode_return,updates\n";
        if (config.loss_stream) {
            updates_out.emplace(open_out(seed_file(config, "updates", seed_index)));
            *updates_out << "# awet loss stream tag=" << config.tag << " seed_index=" << seed_index << "\n"
                         << "update,episode,a_a,q_bar_a,q_bar_e,degenerate,"
                            "l_ba_1,l_ba_clipped_1,l_be_1,total_1,l_ba_2,l_ba_clipped_2,l_be_2,total_2,"
                            "l_qa,l_qe,l_bc,actor_total\n";
        }
    }

    OnlineHooks hooks;
    if (updates_out) hooks.on_update = [&](const LossReport& r) { write_update_row(*updates_out, r); };
    if (episodes_out)
        hooks.on_episode = [&](const EpisodeRecord& e) {
            *episodes_out << e.episode << ',' << e.steps << ',' << decision_str(e) << ','
                          << (e.gated ? num(e.gate_distance) : std::string()) << ',' << num(e.episode_return) << ','
                          << e.updates << '\n';
        };
    hooks.on_eval = [&](const EvalRecord& e) { res.curve.push_back(to_record(e, elapsed())); };
    if (options.stop) hooks.stop = [&](const EvalRecord&) { return options.stop(res.curve.back()); };

    run_online_stage(nets, expert ? &*expert : nullptr, env, monitor ? &*monitor : nullptr, cfg, streams, schedule,
                     hooks);
    res.ok = true;

    if (options.write_files) {
        auto m = open_out(seed_file(config, "metrics", seed_index));
        write_metrics(m, config, res);
        auto t = open_out(seed_file(config, "timing", seed_index));
        t << "# wall-clock seconds since seed start; not deterministic\nepisode,wall_seconds\n";
        t << "0," << num(res.post_offline.wall_seconds) << '\n';
        for (const auto& r : res.curve) t << r.episode << ',' << num(r.wall_seconds) << '\n';
    }
    return res;
}

namespace {

struct Stat {
    double mean = 0.0, std = 0.0;
    std::size_t n = 0;
};

Stat stat(const std::vector<double>& v) {
    Stat s;
    s.n = v.size();
    if (v.empty()) {
        s.mean = s.std = std::nan("");
        return s;
    }
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size()));
    return s;
}

void write_manifest(const RunSummary& sum) {
    const auto& c = sum.config;
    auto out = open_out(fs::path(c.output_dir) / "manifest.ini");
    out << "; awet run manifest; load it with `awet train --config` to rerun\n";
    write_run_config(out, c);
    out << "\n[manifest]\nseeds = " << c.n_seeds << "\n";
    for (const auto& s : sum.seeds) {
        out << "\n[streams_seed" << s.index << "]\nrun_seed = " << s.seed << "\n";
        for (const auto& [name, id] : s.streams) out << name << " = " << id << "\n";
        out << "dataset_digest = " << s.dataset_digest << "\n";
    }
}

void write_summary(const RunSummary& sum) {
    const auto& c = sum.config;
    auto out = open_out(fs::path(c.output_dir) / "summary.csv");
    std::vector<double> post, fin, ret, best;
    for (const auto& s : sum.seeds)
        if (s.ok) {
            post.push_back(s.post_offline.success_rate());
            fin.push_back(s.final_record().success_rate());
            ret.push_back(s.final_record().eval_return);
            best.push_back(s.best_success());
        }
    out << "# awet summary task=" << to_string(c.task) << " tag=" << c.tag << " seeds=" << c.n_seeds
        << " online_episodes=" << c.awet.online_episodes << " eval_episodes=" << c.eval_episodes << "\n";
    out << "# mean +/- population std over " << fin.size() << " completed seeds\n";
    auto line = [&](const char* name, const std::vector<double>& v) {
        const auto s = stat(v);
        out << "# " << name << " " << num(s.mean) << " +/- " << num(s.std) << "\n";
    };
    line("post_offline_success", post);
    line("final_success", fin);
    line("final_return", ret);
    line("best_success", best);
    for (const auto& s : sum.seeds)
        if (!s.ok) out << "# seed " << s.index << " failed: " << s.error << "\n";
    out << "seed_index,seed,status,post_offline_success,post_offline_return,final_episode,final_success,"
           "final_return,best_success,discards,a_a_mean,updates\n";
    for (const auto& s : sum.seeds) {
        out << s.index << ',' << s.seed << ',' << (s.ok ? "ok" : "failed") << ',';
        if (!s.ok) {
            out << "nan,nan,nan,nan,nan,nan,nan,nan,nan\n";
            continue;
        }
        const auto& f = s.final_record();
        out << num(s.post_offline.success_rate()) << ',' << num(s.post_offline.eval_return) << ',' << f.episode << ','
            << num(f.success_rate()) << ',' << num(f.eval_return) << ',' << num(s.best_success()) << ','
            << f.discards << ',' << num(f.a_a_mean) << ',' << f.updates << '\n';
    }
}

}  // namespace

RunSummary run_experiment(const RunConfig& config, const SeedOptions& options) {
    config.validate();
    RunSummary sum;
    sum.config = config;
    sum.seeds.resize(config.n_seeds);
    if (options.write_files) fs::create_directories(config.output_dir);

    auto one = [&](std::size_t i) {
        try {
            sum.seeds[i] = run_seed(config, i, options);
        } catch (const Error& e) {
            SeedResult& s = sum.seeds[i];
            s = SeedResult{};
            s.index = i;
            s.seed = cell_seed(config, i);
            s.streams.emplace_back("demos", stream_seed(s.seed, "demos"));
            for (const auto& n : RunStreams::names()) s.streams.emplace_back(n, stream_seed(s.seed, n));
            s.ok = false;
            s.error = e.what();
        }
    };
    const std::size_t workers = std::min(config.jobs, config.n_seeds);
    if (workers <= 1) {
        for (std::size_t i = 0; i < config.n_seeds; ++i) one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next++) < config.n_seeds;) one(i);
            });
        for (auto& t : pool) t.join();
    }
    if (options.write_files) {
        write_manifest(sum);
        write_summary(sum);
    }
    return sum;
}

std::string AblationCell::tag() const { return to_string(variant) + "_d" + std::to_string(n_demos); }

std::vector<AblationCell> default_ablation_cells(const RunConfig& base) {
    std::vector<AblationCell> cells;
    for (auto v : {Variant::awet, Variant::no_aa, Variant::no_et, Variant::no_aa_no_et, Variant::no_clip})
        cells.push_back({v, base.n_demos});
    for (std::size_t d : {20, 40, 60, 80, 100})
        if (d != base.n_demos) cells.push_back({Variant::awet, d});
    return cells;
}

AblationResult ablation_matrix(const RunConfig& base, const std::vector<AblationCell>& cells,
                               const SeedOptions& options) {
    base.validate();
    AblationResult res;
    res.cells = cells;
    for (const auto& cell : cells) {
        RunConfig c = base;
        c.awet = apply_variant(base.awet, cell.variant);
        c.n_demos = cell.n_demos;
        c.tag = cell.tag();
        c.output_dir = (fs::path(base.output_dir) / c.tag).string();
        res.runs.push_back(run_experiment(c, options));
    }
    if (options.write_files) {
        fs::create_directories(base.output_dir);
        auto out = open_out(fs::path(base.output_dir) / "ablation.csv");
        write_ablation_table(out, res);
    }
    return res;
}

void write_ablation_table(std::ostream& out, const AblationResult& result) {
    out << "# awet ablation matrix; final = last online evaluation; std is the population std over seeds\n";
    for (std::size_t k = 0; k < result.runs.size(); ++k) {
        std::vector<double> fin;
        for (const auto& s : result.runs[k].seeds)
            if (s.ok) fin.push_back(s.final_record().success_rate());
        const auto st = stat(fin);
        out << "# " << result.cells[k].tag() << " final_success " << num(st.mean) << " +/- " << num(st.std) << "\n";
    }
    out << "variant,n_demos,seed_index,status,final_success,final_return,best_success,discards,a_a_mean\n";
    for (std::size_t k = 0; k < result.runs.size(); ++k)
        for (const auto& s : result.runs[k].seeds) {
            out << to_string(result.cells[k].variant) << ',' << result.cells[k].n_demos << ',' << s.index << ','
                << (s.ok ? "ok" : "failed");
            if (s.ok) {
                const auto& f = s.final_record();
                out << ',' << num(f.success_rate()) << ',' << num(f.eval_return) << ',' << num(s.best_success())
                    << ',' << f.discards << ',' << num(f.a_a_mean) << '\n';
            } else {
                out << ",nan,nan,nan,nan,nan\n";
            }
        }
}

std::vector<fs::path> find_metrics_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("metrics_seed", 0) == 0 && e.path().extension() == ".csv")
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::string metrics_tag(const fs::path& p) {
    std::ifstream in(p);
    std::string first;
    std::getline(in, first);
    const auto pos = first.find(" tag=");
    if (pos != std::string::npos) {
        const auto start = pos + 5;
        return first.substr(start, first.find(' ', start) - start);
    }
    return p.parent_path().filename().string();
}

}  // namespace

std::vector<CurvePoint> emit_curves(const std::vector<fs::path>& metrics_files) {
    if (metrics_files.empty()) throw InvalidInput("no metrics files to aggregate");
    std::map<std::string, std::vector<std::pair<fs::path, std::vector<MetricsRecord>>>> groups;
    for (const auto& p : metrics_files) groups[metrics_tag(p)].emplace_back(p, read_metrics(p));

    std::vector<CurvePoint> out;
    for (const auto& [variant, runs] : groups) {
        const auto& ref = runs.front().second;
        for (const auto& [path, recs] : runs) {
            bool same = recs.size() == ref.size();
            for (std::size_t i = 0; same && i < recs.size(); ++i) same = recs[i].episode == ref[i].episode;
            if (!same)
                throw AlignmentError("eval grid of " + path.string() + " differs from " +
                                     runs.front().first.string() + " in variant " + variant);
        }
        for (std::size_t i = 0; i < ref.size(); ++i) {
            std::vector<double> ret, succ, disc, aa;
            for (const auto& [path, recs] : runs) {
                ret.push_back(recs[i].eval_return);
                succ.push_back(recs[i].success_rate());
                disc.push_back(static_cast<double>(recs[i].discards));
                aa.push_back(recs[i].a_a_mean);
            }
            CurvePoint cp;
            cp.variant = variant;
            cp.episode = ref[i].episode;
            cp.n = runs.size();
            const auto r = stat(ret), s = stat(succ);
            cp.return_mean = r.mean;
            cp.return_std = r.std;
            cp.success_mean = s.mean;
            cp.success_std = s.std;
            cp.discards_mean = stat(disc).mean;
            cp.a_a_mean = stat(aa).mean;
            out.push_back(cp);
        }
    }
    return out;
}

void write_curves(std::ostream& out, const std::vector<CurvePoint>& curves) {
    out << "# awet learning curves; mean and population std across seeds per eval point\n";
    out << "variant,episode,n_seeds,return_mean,return_std,success_mean,success_std,discards_mean,a_a_mean\n";
    for (const auto& c : curves)
        out << c.variant << ',' << c.episode << ',' << c.n << ',' << num(c.return_mean) << ',' << num(c.return_std)
            << ',' << num(c.success_mean) << ',' << num(c.success_std) << ',' << num(c.discards_mean) << ','
            << num(c.a_a_mean) << '\n';
}

std::vector<double> read_column(const fs::path& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<double> out;
    std::string line;
    std::optional<std::size_t> col;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_csv(line);
        if (first) {
            first = false;
            double probe = 0.0;
            auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), probe);
            const bool numeric = ec == std::errc() && ptr == f[0].data() + f[0].size();
            if (!numeric) {
                const auto it = std::find(f.begin(), f.end(), column);
                if (it == f.end()) throw InvalidInput(path.string() + " has no column '" + column + "'");
                col = static_cast<std::size_t>(it - f.begin());
                continue;
            }
            if (f.size() != 1) throw InvalidInput(path.string() + " has several columns but no header");
            col = 0;
        }
        if (*col >= f.size()) throw InvalidInput(path.string() + ": short row '" + line + "'");
        out.push_back(parse_double(column, f[*col]));
    }
    if (out.empty()) throw InvalidInput(path.string() + " holds no samples");
    return out;
}

}  // namespace awet::bench
