#pragma once

// Experiment harness: run configuration files, seeded runs with metrics
// emission, ablation matrices and learning-curve aggregation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "awet/config.hpp"
#include "awet/trainer.hpp"
#include "awet/trajectory.hpp"

namespace awet::bench {

struct RunConfig {
    Task task = Task::reach_point;
    AwetConfig awet;
    std::size_t n_demos = 100;
    std::size_t n_seeds = 1;
    std::uint64_t base_seed = 0;
    std::size_t eval_every = 20;
    std::size_t eval_episodes = 100;
    std::size_t max_steps = 50;
    std::string output_dir = "runs";
    std::string tag = "awet";       // ablation variant label
    std::string demos_file;         // optional pre-generated dataset; empty = generate per seed
    bool loss_stream = true;        // write updates_seed<i>.csv
    std::size_t jobs = 1;

    void validate() const;
};

/// key = value sections [run] and [awet]. Sections named manifest* and
/// streams* are skipped so a run manifest loads as a config.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::filesystem::path& path);
void write_run_config(std::ostream& out, const RunConfig& config);

enum class Variant { awet, no_aa, no_et, no_aa_no_et, no_clip, td3_scratch };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
/// The switch settings that define a variant, applied on top of `base`.
AwetConfig apply_variant(AwetConfig base, Variant v);

/// Run seed of seed index i in a cell; the cell tag and demo count are part of
/// the derivation so no two cells share a stream.
std::uint64_t cell_seed(const RunConfig& config, std::size_t seed_index);

struct MetricsRecord {
    std::uint64_t episode = 0;
    double eval_return = 0.0;
    std::size_t successes = 0;
    std::size_t eval_episodes = 0;
    std::uint64_t discards = 0;
    double a_a_mean = 0.0;
    std::uint64_t updates = 0;
    double wall_seconds = 0.0;

    double success_rate() const {
        return eval_episodes == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(eval_episodes);
    }
};

struct SeedResult {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    MetricsRecord post_offline;
    std::vector<MetricsRecord> curve;  // online eval points
    std::uint64_t dataset_digest = 0;
    double threshold = 0.0;  // S_th, 0 when early termination is off
    std::vector<std::pair<std::string, std::uint64_t>> streams;

    /// Last online eval point, or the post-offline one when there is none.
    const MetricsRecord& final_record() const { return curve.empty() ? post_offline : curve.back(); }
    double best_success() const;
};

struct SeedOptions {
    bool write_files = true;
    /// Checked after each online evaluation; true ends the seed early.
    std::function<bool(const MetricsRecord&)> stop;
};

/// generate or load demos -> annotate -> offline stage -> online stage for one
/// seed. Module errors propagate.
SeedResult run_seed(const RunConfig& config, std::size_t seed_index, const SeedOptions& options = {});

struct RunSummary {
    RunConfig config;
    std::vector<SeedResult> seeds;
};

/// All seeds (module errors are recorded per seed); writes manifest.ini,
/// per-seed metrics/episodes/timing/updates files and summary.csv.
RunSummary run_experiment(const RunConfig& config, const SeedOptions& options = {});

struct AblationCell {
    Variant variant = Variant::awet;
    std::size_t n_demos = 100;
    std::string tag() const;
};

/// Variants at the base demo count plus the AWET demo sweep.
std::vector<AblationCell> default_ablation_cells(const RunConfig& base);

struct AblationResult {
    std::vector<AblationCell> cells;
    std::vector<RunSummary> runs;
};

/// Each cell runs in <out>/<tag>; ablation.csv lists one row per cell and seed.
AblationResult ablation_matrix(const RunConfig& base, const std::vector<AblationCell>& cells,
                               const SeedOptions& options = {});

void write_ablation_table(std::ostream& out, const AblationResult& result);

/// Metrics file: header comments, then episode,eval_return,eval_success,
/// successes,eval_episodes,discards,a_a_mean,updates.
void write_metrics(std::ostream& out, const RunConfig& config, const SeedResult& seed);
std::vector<MetricsRecord> read_metrics(std::istream& in);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path);

struct CurvePoint {
    std::string variant;
    std::uint64_t episode = 0;
    std::size_t n = 0;
    double return_mean = 0.0, return_std = 0.0;
    double success_mean = 0.0, success_std = 0.0;
    double discards_mean = 0.0;
    double a_a_mean = 0.0;
};

/// Groups metrics files by variant (the directory holding them) and averages
/// across seeds; population std. Throws AlignmentError on mismatched grids.
std::vector<CurvePoint> emit_curves(const std::vector<std::filesystem::path>& metrics_files);
/// Every metrics_seed*.csv under dir.
std::vector<std::filesystem::path> find_metrics_files(const std::filesystem::path& dir);
void write_curves(std::ostream& out, const std::vector<CurvePoint>& curves);

/// A numeric column from a CSV file; '#' lines are skipped and a header row
/// selects `column`. A file with a single bare column needs no header.
std::vector<double> read_column(const std::filesystem::path& path, const std::string& column);

}  // namespace awet::bench
