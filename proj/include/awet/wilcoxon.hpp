#pragma once

#include <cstddef>
#include <span>

namespace awet::bench {

enum class WilcoxonMode {
    automatic,  // exact up to kExactLimit non-zero pairs, normal above
    exact,
    normal,
};

inline constexpr std::size_t kExactLimit = 20;

struct WilcoxonResult {
    std::size_t n = 0;        // pairs left after dropping zero differences
    std::size_t dropped = 0;  // zero differences
    double w_plus = 0.0;      // rank sum of positive differences (a > b)
    double w_minus = 0.0;
    bool exact = false;
    double z = 0.0;  // normal mode only, for the a > b direction
    double p_greater = 1.0;  // H1: a tends to exceed b
    double p_less = 1.0;     // H1: a tends to fall below b
    double p_two_sided = 1.0;
};

/// Paired signed-rank test on differences a[i] - b[i]. Ties in |d| get
/// mid-ranks. The normal mode uses the tie-corrected variance and a 0.5
/// continuity correction. Throws UndefinedTest when every difference is zero.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    WilcoxonMode mode = WilcoxonMode::automatic);

}  // namespace awet::bench
