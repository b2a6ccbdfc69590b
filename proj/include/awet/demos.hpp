#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "awet/envs.hpp"
#include "awet/rng.hpp"
#include "awet/trajectory.hpp"

namespace awet::demos {

/// Rolls the scripted expert from fresh seeds until `n_episodes` successful
/// episodes are collected. Throws GenerationFailure after 10 * n attempts.
std::vector<Trajectory> generate_demos(const envs::EnvSpec& spec, std::size_t n_episodes, std::uint64_t seed);

/// Discounted return-to-go per step: q_t = r_t + gamma * q_{t+1}, where r_t is
/// the reward stored on transition t.
std::vector<Trajectory> annotate_mc_returns(std::vector<Trajectory> trajectories, double gamma);

/// Divides every reward (and q_mc) by max |r|; returns the divisor (1 when all
/// rewards are zero).
double normalize_rewards(std::vector<Trajectory>& trajectories);

struct SignReport {
    bool ok = true;
    int sign = 0;  // -1 all non-positive, +1 all non-negative, 0 all zero
    std::vector<std::string> offending;
};

/// Checks that every reward across both sources shares one sign (zeros are
/// compatible with either).
SignReport check_reward_signs(std::span<const Trajectory> expert, std::span<const Transition> agent);
/// As above but throws SignViolation listing offending transitions.
SignReport validate_reward_signs(std::span<const Trajectory> expert, std::span<const Transition> agent);

/// Column-major batch, one column per sampled transition.
struct Batch {
    Eigen::MatrixXd s;
    Eigen::MatrixXd a;
    Eigen::VectorXd r;
    Eigen::MatrixXd s_next;
    Eigen::VectorXd d;
    Eigen::VectorXd q_mc;  // empty for agent batches

    std::size_t size() const { return static_cast<std::size_t>(s.cols()); }
};

Batch make_batch(std::span<const Transition* const> rows, bool with_q);

/// Uniform sampling with replacement.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t batch_size, Engine& rng);

/// D_E: immutable once constructed; every transition carries q_mc.
class ExpertBuffer {
public:
    /// Throws MissingAnnotation when any transition lacks q_mc.
    explicit ExpertBuffer(std::vector<Trajectory> annotated);

    std::size_t size() const { return transitions_.size(); }
    bool empty() const { return transitions_.empty(); }
    const std::vector<Trajectory>& trajectories() const { return trajectories_; }
    const Transition& at(std::size_t i) const { return transitions_.at(i); }

    /// Throws EmptyBuffer when empty.
    Batch sample(std::size_t batch_size, Engine& rng) const;

    /// FNV-1a over every stored numeric field.
    std::uint64_t digest() const;

private:
    std::vector<Trajectory> trajectories_;
    std::vector<Transition> transitions_;  // flattened copy of trajectories_
};

/// D_A: bounded FIFO ring; the oldest transition is evicted when full.
class AgentBuffer {
public:
    explicit AgentBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return store_.size(); }
    bool empty() const { return store_.empty(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& at(std::size_t i) const { return store_.at(i); }
    const std::deque<Transition>& contents() const { return store_; }

    /// Throws EmptyBuffer when empty.
    Batch sample(std::size_t batch_size, Engine& rng) const;

    std::uint64_t digest() const;

private:
    std::size_t capacity_;
    std::deque<Transition> store_;
};

std::uint64_t digest(std::span<const Transition> transitions);

struct Dataset {
    Task task = Task::reach_point;
    std::size_t obs_dim = 0;
    std::size_t act_dim = 0;
    double gamma = 0.0;
    std::vector<Trajectory> trajectories;
};

// Text format:
//   #awet-demos v1 task=<name> obs=<n> act=<m> gamma=<g> episodes=<M> steps=<T>
//   ep_index step s[0..n) a[0..m) r s'[0..n) d q_mc
// with %.17g decimals; q_mc is "nan" when unannotated.
void save_dataset(std::ostream& out, const Dataset& data);
void save_dataset(const std::string& path, const Dataset& data);
/// When `expect` is given, rejects files whose task or dimensions differ.
Dataset load_dataset(std::istream& in, const envs::EnvSpec* expect = nullptr);
Dataset load_dataset(const std::string& path, const envs::EnvSpec* expect = nullptr);

}  // namespace awet::demos
