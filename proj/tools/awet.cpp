#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "awet/bench.hpp"
#include "awet/demos.hpp"
#include "awet/envs.hpp"
#include "awet/error.hpp"
#include "awet/wilcoxon.hpp"

namespace fs = std::filesystem;
using namespace awet;

namespace {

void print_summary(const bench::RunSummary& sum) {
    std::size_t ok = 0;
    double fin = 0.0;
    for (const auto& s : sum.seeds) {
        if (!s.ok) {
            std::cerr << "seed " << s.index << " failed: " << s.error << "\n";
            continue;
        }
        ++ok;
        fin += s.final_record().success_rate();
        std::printf("%-16s seed %zu  post-offline %.3f  final %.3f  best %.3f  discards %llu\n",
                    sum.config.tag.c_str(), s.index, s.post_offline.success_rate(), s.final_record().success_rate(),
                    s.best_success(), static_cast<unsigned long long>(s.final_record().discards));
    }
    if (ok > 0) std::printf("%-16s mean final success %.3f over %zu seeds\n", sum.config.tag.c_str(), fin / ok, ok);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AWET: offline pre-training plus advantage-weighted online fine-tuning with DTW early termination"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("demo-gen", "generate successful expert demonstrations");
    std::string gen_task, gen_out;
    std::size_t gen_n = 100;
    std::uint64_t gen_seed = 0;
    double gen_gamma = 0.98;
    std::size_t gen_steps = 50;
    gen->add_option("--task", gen_task, "pendulum | reacher2 | pusher2 | reach_point")->required();
    gen->add_option("--n", gen_n, "number of successful episodes")->required();
    gen->add_option("--seed", gen_seed, "generator seed")->required();
    gen->add_option("--out", gen_out, "dataset file")->required();
    gen->add_option("--gamma", gen_gamma, "discount used for the q_mc column")->capture_default_str();
    gen->add_option("--max-steps", gen_steps, "episode length")->capture_default_str();

    auto* train = app.add_subcommand("train", "run seeds of one configuration");
    std::string train_cfg, train_ablate, train_out;
    std::size_t train_seeds = 0;
    train->add_option("--config", train_cfg, "config file ([run] and [awet] sections)")->required();
    train->add_option("--ablate", train_ablate, "no_aa | no_et | no_aa_no_et | no_clip | td3_scratch");
    train->add_option("--seeds", train_seeds, "number of seeds (overrides n_seeds)");
    train->add_option("--out", train_out, "output directory (overrides output_dir)");

    auto* ablate = app.add_subcommand("ablate", "ablation matrix and demo-count sweep");
    std::string abl_task, abl_out, abl_cfg;
    std::size_t abl_seeds = 0;
    ablate->add_option("--task", abl_task, "task name")->required();
    ablate->add_option("--out", abl_out, "output directory")->required();
    ablate->add_option("--config", abl_cfg, "base config; defaults otherwise");
    ablate->add_option("--seeds", abl_seeds, "seeds per cell (overrides n_seeds)");

    auto* stats = app.add_subcommand("stats", "paired Wilcoxon signed-rank test");
    std::string st_a, st_b, st_col = "final_success", st_mode = "auto";
    stats->add_option("--a", st_a, "first sample file")->required();
    stats->add_option("--b", st_b, "second sample file")->required();
    stats->add_option("--column", st_col, "column to read from CSV files with a header")->capture_default_str();
    stats->add_option("--mode", st_mode, "auto | exact | normal")->capture_default_str();

    auto* curves = app.add_subcommand("curves", "aggregate metrics files into learning curves");
    std::string cv_in, cv_out;
    curves->add_option("--in", cv_in, "directory searched for metrics_seed*.csv")->required();
    curves->add_option("--out", cv_out, "curve file")->required();

    auto* info = app.add_subcommand("env-info", "print task constants and dimensions");
    std::string info_task;
    info->add_option("--task", info_task, "task name")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto env = envs::make_spec(parse_task(gen_task), gen_steps);
            demos::Dataset data;
            data.task = env.task;
            data.obs_dim = env.obs_dim;
            data.act_dim = env.act_dim;
            data.gamma = gen_gamma;
            data.trajectories = demos::annotate_mc_returns(demos::generate_demos(env, gen_n, gen_seed), gen_gamma);
            demos::save_dataset(gen_out, data);
            std::printf("wrote %zu episodes to %s\n", data.trajectories.size(), gen_out.c_str());
        } else if (*train) {
            auto cfg = bench::load_run_config(train_cfg);
            if (train_seeds > 0) cfg.n_seeds = train_seeds;
            if (!train_out.empty()) cfg.output_dir = train_out;
            if (!train_ablate.empty()) {
                const auto v = bench::parse_variant(train_ablate);
                cfg.awet = bench::apply_variant(cfg.awet, v);
                cfg.tag = bench::to_string(v);
            }
            cfg.validate();
            const auto sum = bench::run_experiment(cfg);
            print_summary(sum);
            for (const auto& s : sum.seeds)
                if (!s.ok) return 1;
        } else if (*ablate) {
            bench::RunConfig base = abl_cfg.empty() ? bench::RunConfig{} : bench::load_run_config(abl_cfg);
            base.task = parse_task(abl_task);
            base.output_dir = abl_out;
            if (abl_seeds > 0) base.n_seeds = abl_seeds;
            if (abl_cfg.empty()) base.loss_stream = false;
            base.validate();
            const auto res = bench::ablation_matrix(base, bench::default_ablation_cells(base));
            for (const auto& run : res.runs) print_summary(run);
            std::printf("table: %s\n", (fs::path(abl_out) / "ablation.csv").string().c_str());
        } else if (*stats) {
            const auto a = bench::read_column(st_a, st_col);
            const auto b = bench::read_column(st_b, st_col);
            bench::WilcoxonMode mode = bench::WilcoxonMode::automatic;
            if (st_mode == "exact") mode = bench::WilcoxonMode::exact;
            else if (st_mode == "normal") mode = bench::WilcoxonMode::normal;
            else if (st_mode != "auto") throw InvalidInput("unknown mode '" + st_mode + "'");
            const auto r = bench::wilcoxon_signed_rank(a, b, mode);
            std::printf("n=%zu dropped=%zu W+=%g W-=%g mode=%s\n", r.n, r.dropped, r.w_plus, r.w_minus,
                        r.exact ? "exact" : "normal");
            if (!r.exact) std::printf("z=%.6g\n", r.z);
            std::printf("p_greater=%.6g p_less=%.6g p_two_sided=%.6g\n", r.p_greater, r.p_less, r.p_two_sided);
        } else if (*curves) {
            const auto pts = bench::emit_curves(bench::find_metrics_files(cv_in));
            std::ofstream out(cv_out);
            if (!out) throw IoError("cannot write " + cv_out);
            bench::write_curves(out, pts);
            std::printf("wrote %zu curve rows to %s\n", pts.size(), cv_out.c_str());
        } else if (*info) {
            const auto env = envs::make_spec(parse_task(info_task));
            std::printf("task %s obs_dim %zu act_dim %zu max_steps %zu\n", env.name.c_str(), env.obs_dim, env.act_dim,
                        env.max_steps);
            std::cout << envs::describe_constants(env.task);
        }
    } catch (const Error& e) {
        std::cerr << "awet: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "awet: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
