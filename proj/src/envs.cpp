#include "awet/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "awet/error.hpp"
#include "awet/rng.hpp"

namespace awet {

std::string to_string(Task task) {
    switch (task) {
        case Task::pendulum: return "pendulum";
        case Task::reacher2: return "reacher2";
        case Task::pusher2: return "pusher2";
        case Task::reach_point: return "reach_point";
    }
    return "unknown";
}

Task parse_task(const std::string& name) {
    for (Task t : {Task::pendulum, Task::reacher2, Task::pusher2, Task::reach_point})
        if (to_string(t) == name) return t;
    throw InvalidInput("unknown task '" + name + "'");
}

}  // namespace awet

namespace awet::envs {

namespace {

using std::numbers::pi;

double norm2(double x, double y) { return std::sqrt(x * x + y * y); }

double sq_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

std::size_t state_dim(Task task) {
    switch (task) {
        case Task::pendulum: return 2;
        case Task::reacher2: return 6;
        case Task::pusher2: return 6;
        case Task::reach_point: return 4;
    }
    return 0;
}

}  // namespace

double wrap_angle(double a) {
    a = std::fmod(a + pi, 2.0 * pi);
    if (a < 0.0) a += 2.0 * pi;
    return a - pi;
}

std::pair<double, double> reacher_tip(double q1, double q2) {
    using C = Reacher2Constants;
    return {C::link1 * std::cos(q1) + C::link2 * std::cos(q1 + q2),
            C::link1 * std::sin(q1) + C::link2 * std::sin(q1 + q2)};
}

std::string describe_constants(Task task) {
    std::ostringstream os;
    os.precision(17);
    os << "[" << to_string(task) << "]\n";
    auto kv = [&](const char* k, double v) { os << k << " = " << v << "\n"; };
    switch (task) {
        case Task::pendulum: {
            using C = PendulumConstants;
            kv("gravity", C::gravity);
            kv("mass", C::mass);
            kv("length", C::length);
            kv("dt", C::dt);
            kv("max_torque", C::max_torque);
            kv("max_speed", C::max_speed);
            kv("angle_cost", C::angle_cost);
            kv("velocity_cost", C::velocity_cost);
            kv("torque_cost", C::torque_cost);
            kv("success_angle", C::success_angle);
            kv("success_speed", C::success_speed);
            kv("reset_speed", C::reset_speed);
            break;
        }
        case Task::reacher2: {
            using C = Reacher2Constants;
            kv("link1", C::link1);
            kv("link2", C::link2);
            kv("dt", C::dt);
            kv("torque_gain", C::torque_gain);
            kv("damping", C::damping);
            kv("goal_radius_min", C::goal_radius_min);
            kv("goal_radius_max", C::goal_radius_max);
            kv("reset_elbow_min", C::reset_elbow_min);
            kv("reset_elbow_max", C::reset_elbow_max);
            kv("control_cost", C::control_cost);
            kv("success_distance", C::success_distance);
            break;
        }
        case Task::pusher2: {
            using C = Pusher2Constants;
            kv("dt", C::dt);
            kv("speed", C::speed);
            kv("contact_radius", C::contact_radius);
            kv("object_x_min", C::object_x_min);
            kv("object_x_max", C::object_x_max);
            kv("object_y_min", C::object_y_min);
            kv("object_y_max", C::object_y_max);
            kv("push_distance_min", C::push_distance_min);
            kv("push_distance_max", C::push_distance_max);
            kv("push_angle_max", C::push_angle_max);
            kv("effector_cost", C::effector_cost);
            kv("control_cost", C::control_cost);
            kv("success_distance", C::success_distance);
            break;
        }
        case Task::reach_point: {
            using C = ReachPointConstants;
            kv("dt", C::dt);
            kv("speed", C::speed);
            kv("goal_min", C::goal_min);
            kv("goal_max", C::goal_max);
            kv("control_cost", C::control_cost);
            kv("success_distance", C::success_distance);
            kv("expert_gain", C::expert_gain);
            break;
        }
    }
    return os.str();
}

void EnvSpec::validate() const {
    if (action_low.size() != act_dim || action_high.size() != act_dim)
        throw InvalidInput("action bounds do not match act_dim");
    for (std::size_t i = 0; i < act_dim; ++i)
        if (!(action_low[i] < action_high[i])) throw InvalidInput("action_low must be < action_high");
    if (max_steps < 2) throw InvalidInput("max_steps must be >= 2");
}

std::vector<double> EnvSpec::half_range() const {
    std::vector<double> h(act_dim);
    for (std::size_t i = 0; i < act_dim; ++i) h[i] = 0.5 * (action_high[i] - action_low[i]);
    return h;
}

std::vector<double> EnvSpec::clip_action(std::span<const double> action) const {
    if (action.size() != act_dim)
        throw InvalidInput("action has length " + std::to_string(action.size()) + ", expected " +
                           std::to_string(act_dim));
    std::vector<double> out(act_dim);
    for (std::size_t i = 0; i < act_dim; ++i) out[i] = std::clamp(action[i], action_low[i], action_high[i]);
    return out;
}

EnvSpec make_spec(Task task, std::size_t max_steps) {
    EnvSpec spec;
    spec.task = task;
    spec.name = to_string(task);
    spec.max_steps = max_steps;
    switch (task) {
        case Task::pendulum:
            spec.obs_dim = 3;
            spec.act_dim = 1;
            spec.action_low = {-PendulumConstants::max_torque};
            spec.action_high = {PendulumConstants::max_torque};
            break;
        case Task::reacher2:
            spec.obs_dim = 10;
            spec.act_dim = 2;
            spec.action_low = {-1.0, -1.0};
            spec.action_high = {1.0, 1.0};
            break;
        case Task::pusher2:
            spec.obs_dim = 6;
            spec.act_dim = 2;
            spec.action_low = {-1.0, -1.0};
            spec.action_high = {1.0, 1.0};
            break;
        case Task::reach_point:
            spec.obs_dim = 4;
            spec.act_dim = 2;
            spec.action_low = {-1.0, -1.0};
            spec.action_high = {1.0, 1.0};
            break;
    }
    spec.validate();
    return spec;
}

std::vector<double> observe(const EnvSpec& spec, const EnvState& state) {
    const auto& x = state.x;
    if (state.task != spec.task || x.size() != state_dim(spec.task))
        throw InvalidInput("environment state does not belong to task " + spec.name);
    switch (spec.task) {
        case Task::pendulum: return {std::cos(x[0]), std::sin(x[0]), x[1]};
        case Task::reacher2: {
            const auto [tx, ty] = reacher_tip(x[0], x[1]);
            return {std::cos(x[0]), std::sin(x[0]), std::cos(x[1]), std::sin(x[1]), x[2], x[3],
                    x[4],           x[5],           tx - x[4],      ty - x[5]};
        }
        case Task::pusher2:
        case Task::reach_point: return x;
    }
    return {};
}

ResetResult reset(const EnvSpec& spec, std::uint64_t seed) {
    Engine rng{mix64(seed)};
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
    EnvState st;
    st.task = spec.task;
    switch (spec.task) {
        case Task::pendulum:
            st.x = {uniform(-pi, pi), uniform(-PendulumConstants::reset_speed, PendulumConstants::reset_speed)};
            break;
        case Task::reacher2: {
            using C = Reacher2Constants;
            const double q1 = uniform(-pi, pi);
            double q2 = uniform(C::reset_elbow_min, C::reset_elbow_max);
            if (unit(rng) < 0.5) q2 = -q2;
            const double r = uniform(C::goal_radius_min, C::goal_radius_max);
            const double phi = uniform(-pi, pi);
            st.x = {q1, q2, 0.0, 0.0, r * std::cos(phi), r * std::sin(phi)};
            break;
        }
        case Task::pusher2: {
            using C = Pusher2Constants;
            const double ox = uniform(C::object_x_min, C::object_x_max);
            const double oy = uniform(C::object_y_min, C::object_y_max);
            const double d = uniform(C::push_distance_min, C::push_distance_max);
            const double phi = uniform(-C::push_angle_max, C::push_angle_max);
            st.x = {0.0, 0.0, ox, oy, ox + d * std::cos(phi), oy + d * std::sin(phi)};
            break;
        }
        case Task::reach_point: {
            using C = ReachPointConstants;
            st.x = {0.0, 0.0, uniform(C::goal_min, C::goal_max), uniform(C::goal_min, C::goal_max)};
            break;
        }
    }
    return {st, observe(spec, st)};
}

StepResult step(const EnvSpec& spec, const EnvState& state, std::span<const double> action) {
    if (state.step >= spec.max_steps) throw InvalidInput("step called on a finished episode");
    const std::vector<double> u = spec.clip_action(action);
    StepResult out;
    out.state = state;
    auto& x = out.state.x;
    if (state.task != spec.task || x.size() != state_dim(spec.task))
        throw InvalidInput("environment state does not belong to task " + spec.name);

    switch (spec.task) {
        case Task::pendulum: {
            using C = PendulumConstants;
            const double th = x[0];
            const double thdot = x[1];
            const double acc = 3.0 * C::gravity / (2.0 * C::length) * std::sin(th) +
                               3.0 / (C::mass * C::length * C::length) * u[0];
            x[0] = wrap_angle(th + C::dt * thdot);
            x[1] = std::clamp(thdot + C::dt * acc, -C::max_speed, C::max_speed);
            out.reward = -(C::angle_cost * x[0] * x[0] + C::velocity_cost * x[1] * x[1] +
                           C::torque_cost * u[0] * u[0]);
            break;
        }
        case Task::reacher2: {
            using C = Reacher2Constants;
            const double q1 = x[0], q2 = x[1], w1 = x[2], w2 = x[3];
            x[0] = wrap_angle(q1 + C::dt * w1);
            x[1] = wrap_angle(q2 + C::dt * w2);
            x[2] = w1 + C::dt * (C::torque_gain * u[0] - C::damping * w1);
            x[3] = w2 + C::dt * (C::torque_gain * u[1] - C::damping * w2);
            const auto [tx, ty] = reacher_tip(x[0], x[1]);
            out.reward = -(norm2(tx - x[4], ty - x[5]) + C::control_cost * sq_norm(u));
            break;
        }
        case Task::pusher2: {
            using C = Pusher2Constants;
            const double px = x[0] + C::dt * C::speed * u[0];
            const double py = x[1] + C::dt * C::speed * u[1];
            double ox = x[2], oy = x[3];
            const double dx = ox - px, dy = oy - py;
            const double dist = norm2(dx, dy);
            if (dist < C::contact_radius) {
                // Stick contact: the object is shoved out to the contact circle
                // along the effector-to-object ray.
                double ux, uy;
                if (dist > 0.0) {
                    ux = dx / dist;
                    uy = dy / dist;
                } else {
                    const double n = norm2(u[0], u[1]);
                    ux = n > 0.0 ? u[0] / n : 1.0;
                    uy = n > 0.0 ? u[1] / n : 0.0;
                }
                ox = px + C::contact_radius * ux;
                oy = py + C::contact_radius * uy;
            }
            x[0] = px;
            x[1] = py;
            x[2] = ox;
            x[3] = oy;
            out.reward = -(norm2(ox - x[4], oy - x[5]) + C::effector_cost * norm2(ox - px, oy - py) +
                           C::control_cost * sq_norm(u));
            break;
        }
        case Task::reach_point: {
            using C = ReachPointConstants;
            x[0] += C::dt * C::speed * u[0];
            x[1] += C::dt * C::speed * u[1];
            out.reward = -(norm2(x[0] - x[2], x[1] - x[3]) + C::control_cost * sq_norm(u));
            break;
        }
    }
    // -0.0 would survive as a negative zero in text output; normalize.
    if (out.reward == 0.0) out.reward = 0.0;
    out.state.step = state.step + 1;
    out.next_obs = observe(spec, out.state);
    out.done = out.state.step == spec.max_steps;
    out.success = success_from_obs(spec, out.next_obs);
    return out;
}

bool success_from_obs(const EnvSpec& spec, std::span<const double> obs) {
    if (obs.size() != spec.obs_dim) throw InvalidInput("observation dimension mismatch");
    switch (spec.task) {
        case Task::pendulum: {
            using C = PendulumConstants;
            const double angle = std::atan2(obs[1], obs[0]);
            return std::abs(angle) <= C::success_angle && std::abs(obs[2]) <= C::success_speed;
        }
        case Task::reacher2:
            return norm2(obs[8], obs[9]) <= Reacher2Constants::success_distance;
        case Task::pusher2:
            return norm2(obs[2] - obs[4], obs[3] - obs[5]) <= Pusher2Constants::success_distance;
        case Task::reach_point:
            return norm2(obs[0] - obs[2], obs[1] - obs[3]) <= ReachPointConstants::success_distance;
    }
    return false;
}

bool is_success(const EnvSpec& spec, const Trajectory& trajectory) {
    if (trajectory.steps.empty()) return false;
    return success_from_obs(spec, trajectory.steps.back().s_next);
}

namespace {

std::vector<double> pendulum_expert(const EnvSpec& spec, const EnvState& st) {
    using C = PendulumConstants;
    const double a = 3.0 * C::gravity / (2.0 * C::length);
    const double b = 3.0 / (C::mass * C::length * C::length);
    const double th = wrap_angle(st.x[0]);
    const double w = st.x[1];
    // Zero at upright rest, -2a hanging at rest.
    const double energy = 0.5 * w * w + a * (std::cos(th) - 1.0);
    double u;
    if (std::abs(th) < 0.5 && std::abs(energy) < 0.3 * a) {
        const double wn = 6.0;
        u = -((a + wn * wn) * th + 2.0 * wn * w) / b;
    } else {
        const double dir = w >= 0.0 ? 1.0 : -1.0;
        u = (energy < 0.0 ? 1.0 : -1.0) * dir * C::max_torque;
    }
    return spec.clip_action(std::vector<double>{u});
}

std::vector<double> reacher_expert(const EnvSpec& spec, const EnvState& st) {
    using C = Reacher2Constants;
    const double q1 = st.x[0], q2 = st.x[1], w1 = st.x[2], w2 = st.x[3];
    const double s1 = std::sin(q1), c1 = std::cos(q1);
    const double s12 = std::sin(q1 + q2), c12 = std::cos(q1 + q2);
    const double j11 = -C::link1 * s1 - C::link2 * s12, j12 = -C::link2 * s12;
    const double j21 = C::link1 * c1 + C::link2 * c12, j22 = C::link2 * c12;
    const auto [tx, ty] = reacher_tip(q1, q2);
    const double vx = j11 * w1 + j12 * w2;
    const double vy = j21 * w1 + j22 * w2;
    const double kp = 20.0, kd = 4.0, kq = 0.05;
    const double fx = kp * (st.x[4] - tx) - kd * vx;
    const double fy = kp * (st.x[5] - ty) - kd * vy;
    const double t1 = j11 * fx + j21 * fy - kq * w1;
    const double t2 = j12 * fx + j22 * fy - kq * w2;
    return spec.clip_action(std::vector<double>{t1, t2});
}

std::vector<double> pusher_expert(const EnvSpec& spec, const EnvState& st) {
    using C = Pusher2Constants;
    const double px = st.x[0], py = st.x[1], ox = st.x[2], oy = st.x[3], gx = st.x[4], gy = st.x[5];
    const double gain = 0.5 / C::dt;
    const double d_og = norm2(gx - ox, gy - oy);
    if (d_og <= 0.01) return std::vector<double>(2, 0.0);
    const double dirx = (gx - ox) / d_og, diry = (gy - oy) / d_og;
    const double d_po = norm2(ox - px, oy - py);
    const double align = d_po > 0.0 ? ((ox - px) * dirx + (oy - py) * diry) / d_po : -1.0;

    double tx, ty;
    if (align > 0.97 && d_po < C::contact_radius + 0.04) {
        // Push: steer the contact point so the object lands on the goal, with a
        // lateral correction that re-centres the effector behind the object.
        const double lat = (px - ox) * (-diry) + (py - oy) * dirx;
        tx = gx - C::contact_radius * dirx - 2.0 * lat * (-diry);
        ty = gy - C::contact_radius * diry - 2.0 * lat * dirx;
    } else {
        const double standoff = C::contact_radius + 0.02;
        const double bx = ox - standoff * dirx, by = oy - standoff * diry;
        // Route around the object when the straight path would touch it.
        const double sx = bx - px, sy = by - py;
        const double len2 = sx * sx + sy * sy;
        double tproj = len2 > 0.0 ? ((ox - px) * sx + (oy - py) * sy) / len2 : 0.0;
        tproj = std::clamp(tproj, 0.0, 1.0);
        const double cx = px + tproj * sx, cy = py + tproj * sy;
        if (norm2(ox - cx, oy - cy) < C::contact_radius + 0.01 && tproj < 0.999) {
            // Side waypoint on the same side as the effector.
            const double side = ((px - ox) * (-diry) + (py - oy) * dirx) >= 0.0 ? 1.0 : -1.0;
            const double r = C::contact_radius + 0.06;
            tx = ox + side * r * (-diry) - 0.5 * r * dirx;
            ty = oy + side * r * dirx - 0.5 * r * diry;
        } else {
            tx = bx;
            ty = by;
        }
    }
    return spec.clip_action(std::vector<double>{gain * (tx - px), gain * (ty - py)});
}

std::vector<double> reach_expert(const EnvSpec& spec, const EnvState& st) {
    using C = ReachPointConstants;
    return spec.clip_action(
        std::vector<double>{C::expert_gain * (st.x[2] - st.x[0]), C::expert_gain * (st.x[3] - st.x[1])});
}

}  // namespace

std::vector<double> expert_action(const EnvSpec& spec, const EnvState& state) {
    if (state.task != spec.task || state.x.size() != state_dim(spec.task))
        throw InvalidInput("environment state does not belong to task " + spec.name);
    switch (spec.task) {
        case Task::pendulum: return pendulum_expert(spec, state);
        case Task::reacher2: return reacher_expert(spec, state);
        case Task::pusher2: return pusher_expert(spec, state);
        case Task::reach_point: return reach_expert(spec, state);
    }
    return {};
}

}  // namespace awet::envs
