#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "awet/trajectory.hpp"

namespace awet::dtw {

/// One feature vector per timestep.
using FeatureSeq = std::vector<std::vector<double>>;

/// Classic DTW: unit-weight moves {down, right, diagonal}, Euclidean local
/// cost, accumulated cost at the terminal cell (no path-length normalization).
/// Throws InvalidInput on empty sequences or mismatched vector dimensions.
double dtw_distance(const FeatureSeq& x, const FeatureSeq& y);

using DistanceFn = std::function<double(const FeatureSeq&, const FeatureSeq&)>;

/// Mean DTW distance over the (M^2 - M) / 2 distinct unordered pairs.
/// Throws InsufficientCorpus when M < 2.
double compute_threshold(std::span<const FeatureSeq> corpus, const DistanceFn& distance = dtw_distance);

/// Observations s_t of each transition, in order.
FeatureSeq observation_features(std::span<const Transition> steps);
FeatureSeq observation_features(const Trajectory& trajectory);

enum class ComparisonMode { full_expert, prefix_match };
enum class GateDecision { continue_rollout, terminate_and_discard };

struct GateResult {
    GateDecision decision = GateDecision::continue_rollout;
    double min_distance = 0.0;
};

/// Expert corpus plus the early-termination threshold. Immutable once built.
class TerminationMonitor {
public:
    /// Computes the threshold from the corpus.
    TerminationMonitor(std::vector<FeatureSeq> corpus, std::size_t max_steps,
                       ComparisonMode mode = ComparisonMode::prefix_match);
    /// Uses a caller-supplied threshold.
    TerminationMonitor(std::vector<FeatureSeq> corpus, std::size_t max_steps, double threshold,
                       ComparisonMode mode);

    double threshold() const { return threshold_; }
    /// ceil(max_steps / 2): the step count at which the gate fires.
    std::size_t gate_step() const { return gate_step_; }
    ComparisonMode mode() const { return mode_; }
    const std::vector<FeatureSeq>& corpus() const { return corpus_; }

    /// Terminates iff min over the corpus of DTW(partial, expert) > threshold.
    /// In prefix_match mode each expert sequence is cut to partial.size().
    GateResult gate(const FeatureSeq& partial) const;

private:
    std::vector<FeatureSeq> corpus_;
    std::size_t gate_step_;
    ComparisonMode mode_;
    double threshold_;
};

}  // namespace awet::dtw
