#pragma once

// Closed-form continuous-control tasks with fixed horizons, non-positive dense
// rewards and scripted experts. All dynamics use explicit Euler steps and every
// reward is evaluated on the post-step state.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "awet/trajectory.hpp"

namespace awet::envs {

// Task constants. `describe_constants` prints these as `key = value` lines.

struct PendulumConstants {
    static constexpr double gravity = 10.0;
    static constexpr double mass = 1.0;
    static constexpr double length = 1.0;
    static constexpr double dt = 0.05;
    static constexpr double max_torque = 3.0;
    static constexpr double max_speed = 8.0;
    static constexpr double angle_cost = 1.0;
    static constexpr double velocity_cost = 0.1;
    static constexpr double torque_cost = 0.001;
    static constexpr double success_angle = 0.15;
    static constexpr double success_speed = 1.0;
    static constexpr double reset_speed = 1.0;
};

struct Reacher2Constants {
    static constexpr double link1 = 0.5;
    static constexpr double link2 = 0.5;
    static constexpr double dt = 0.05;
    static constexpr double torque_gain = 10.0;  // rad/s^2 per unit action
    static constexpr double damping = 2.0;       // 1/s
    static constexpr double goal_radius_min = 0.25;
    static constexpr double goal_radius_max = 0.9;
    static constexpr double reset_elbow_min = 0.3;
    static constexpr double reset_elbow_max = 2.0;
    static constexpr double control_cost = 0.01;
    static constexpr double success_distance = 0.05;
};

struct Pusher2Constants {
    static constexpr double dt = 0.05;
    static constexpr double speed = 1.0;  // effector velocity per unit action
    static constexpr double contact_radius = 0.1;
    static constexpr double object_x_min = 0.3;
    static constexpr double object_x_max = 0.5;
    static constexpr double object_y_min = -0.2;
    static constexpr double object_y_max = 0.2;
    static constexpr double push_distance_min = 0.15;
    static constexpr double push_distance_max = 0.3;
    static constexpr double push_angle_max = 1.5707963267948966;  // |goal bearing from object|
    static constexpr double effector_cost = 0.5;
    static constexpr double control_cost = 0.01;
    static constexpr double success_distance = 0.05;
};

struct ReachPointConstants {
    static constexpr double dt = 0.05;
    static constexpr double speed = 1.0;
    static constexpr double goal_min = -1.0;
    static constexpr double goal_max = 1.0;
    static constexpr double control_cost = 0.01;
    static constexpr double success_distance = 0.05;
    static constexpr double expert_gain = 10.0;
};

std::string describe_constants(Task task);

struct EnvSpec {
    Task task = Task::reach_point;
    std::string name;
    std::size_t obs_dim = 0;
    std::size_t act_dim = 0;
    std::vector<double> action_low;
    std::vector<double> action_high;
    std::size_t max_steps = 50;

    void validate() const;
    /// (high - low) / 2 per action dimension.
    std::vector<double> half_range() const;
    std::vector<double> clip_action(std::span<const double> action) const;
};

EnvSpec make_spec(Task task, std::size_t max_steps = 50);

struct EnvState {
    Task task = Task::reach_point;
    // pendulum:    theta (0 = upright), theta_dot
    // reacher2:    q1, q2, q1_dot, q2_dot, gx, gy
    // pusher2:     px, py, ox, oy, gx, gy
    // reach_point: px, py, gx, gy
    std::vector<double> x;
    std::size_t step = 0;

    bool operator==(const EnvState&) const = default;
};

struct ResetResult {
    EnvState state;
    std::vector<double> obs;
};

struct StepResult {
    EnvState state;
    std::vector<double> next_obs;
    double reward = 0.0;
    bool done = false;
    bool success = false;
};

ResetResult reset(const EnvSpec& spec, std::uint64_t seed);
/// Clips the action to the box before integrating. Throws InvalidInput on a
/// dimension mismatch or when called past the horizon.
StepResult step(const EnvSpec& spec, const EnvState& state, std::span<const double> action);
std::vector<double> observe(const EnvSpec& spec, const EnvState& state);

std::vector<double> expert_action(const EnvSpec& spec, const EnvState& state);

/// Terminal predicate evaluated on an observation (distance <= threshold).
bool success_from_obs(const EnvSpec& spec, std::span<const double> obs);
/// Predicate on the final observation of a complete trajectory.
bool is_success(const EnvSpec& spec, const Trajectory& trajectory);

/// Wraps an angle into [-pi, pi).
double wrap_angle(double a);

// Forward kinematics of the reacher fingertip.
std::pair<double, double> reacher_tip(double q1, double q2);

}  // namespace awet::envs
