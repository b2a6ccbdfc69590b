#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace awet {

enum class Task { pendulum, reacher2, pusher2, reach_point };

std::string to_string(Task task);
/// Throws InvalidInput for unknown names.
Task parse_task(const std::string& name);

/// One environment step: (s, a, r, s', d), plus the Monte-Carlo return once the
/// episode has been annotated.
struct Transition {
    std::vector<double> s;
    std::vector<double> a;
    double r = 0.0;
    std::vector<double> s_next;
    bool d = false;
    std::optional<double> q_mc;

    bool operator==(const Transition&) const = default;
};

enum class Source { expert, agent };

struct Trajectory {
    std::vector<Transition> steps;
    std::uint64_t seed = 0;
    Task task = Task::reach_point;
    Source source = Source::expert;

    std::size_t size() const { return steps.size(); }
    bool operator==(const Trajectory&) const = default;
};

}  // namespace awet
