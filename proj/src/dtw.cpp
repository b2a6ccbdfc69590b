#include "awet/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "awet/error.hpp"

namespace awet::dtw {

namespace {

using SeqView = std::span<const std::vector<double>>;

double dtw_view(SeqView x, SeqView y) {
    if (x.empty() || y.empty()) throw InvalidInput("dtw_distance: sequences must be non-empty");
    const std::size_t dim = x.front().size();
    for (const auto& v : x)
        if (v.size() != dim) throw InvalidInput("dtw_distance: ragged first sequence");
    for (const auto& v : y)
        if (v.size() != dim) throw InvalidInput("dtw_distance: vector dimensions differ between sequences");

    auto cost = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double d = x[i][k] - y[j][k];
            s += d * d;
        }
        return std::sqrt(s);
    };

    const std::size_t m = y.size();
    std::vector<double> prev(m), curr(m);
    prev[0] = cost(0, 0);
    for (std::size_t j = 1; j < m; ++j) prev[j] = prev[j - 1] + cost(0, j);
    for (std::size_t i = 1; i < x.size(); ++i) {
        curr[0] = prev[0] + cost(i, 0);
        for (std::size_t j = 1; j < m; ++j) curr[j] = cost(i, j) + std::min({prev[j], curr[j - 1], prev[j - 1]});
        std::swap(prev, curr);
    }
    return prev[m - 1];
}

}  // namespace

double dtw_distance(const FeatureSeq& x, const FeatureSeq& y) { return dtw_view(x, y); }

double compute_threshold(std::span<const FeatureSeq> corpus, const DistanceFn& distance) {
    const std::size_t M = corpus.size();
    if (M < 2) throw InsufficientCorpus("threshold needs at least two expert trajectories, got " + std::to_string(M));
    // DTW(t, t) = 0 and DTW is symmetric, so only i < j pairs are evaluated.
    double sum = 0.0;
    for (std::size_t i = 1; i < M; ++i)
        for (std::size_t j = 0; j < i; ++j) sum += distance(corpus[i], corpus[j]);
    const double pairs = static_cast<double>(M * M - M) / 2.0;
    return sum / pairs;
}

FeatureSeq observation_features(std::span<const Transition> steps) {
    FeatureSeq seq;
    seq.reserve(steps.size());
    for (const auto& t : steps) seq.push_back(t.s);
    return seq;
}

FeatureSeq observation_features(const Trajectory& trajectory) { return observation_features(trajectory.steps); }

TerminationMonitor::TerminationMonitor(std::vector<FeatureSeq> corpus, std::size_t max_steps, ComparisonMode mode)
    : corpus_(std::move(corpus)), gate_step_((max_steps + 1) / 2), mode_(mode) {
    if (max_steps < 2) throw InvalidInput("termination monitor needs max_steps >= 2");
    threshold_ = compute_threshold(corpus_);
}

TerminationMonitor::TerminationMonitor(std::vector<FeatureSeq> corpus, std::size_t max_steps, double threshold,
                                       ComparisonMode mode)
    : corpus_(std::move(corpus)), gate_step_((max_steps + 1) / 2), mode_(mode), threshold_(threshold) {
    if (max_steps < 2) throw InvalidInput("termination monitor needs max_steps >= 2");
    if (corpus_.size() < 2) throw InsufficientCorpus("termination monitor needs at least two expert trajectories");
    if (!(threshold_ >= 0.0)) throw InvalidInput("threshold must be >= 0");
}

GateResult TerminationMonitor::gate(const FeatureSeq& partial) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& expert : corpus_) {
        SeqView reference(expert);
        if (mode_ == ComparisonMode::prefix_match && expert.size() > partial.size())
            reference = reference.first(partial.size());
        best = std::min(best, dtw_view(partial, reference));
    }
    GateResult out;
    out.min_distance = best;
    out.decision = best > threshold_ ? GateDecision::terminate_and_discard : GateDecision::continue_rollout;
    return out;
}

}  // namespace awet::dtw
