#include "awet/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "awet/error.hpp"

namespace awet::bench {

namespace {

// Mid-ranks of |d|, doubled so tied ranks stay integral.
std::vector<long> doubled_ranks(const std::vector<double>& mag, std::vector<std::size_t>& tie_sizes) {
    const std::size_t n = mag.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return mag[i] < mag[j]; });
    std::vector<long> r2(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && mag[order[j + 1]] == mag[order[i]]) ++j;
        // ranks i+1 .. j+1, doubled mean = (i+1) + (j+1)
        const long twice_mid = static_cast<long>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k) r2[order[k]] = twice_mid;
        tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
    return r2;
}

double normal_upper(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b, WilcoxonMode mode) {
    if (a.size() != b.size())
        throw InvalidInput("paired samples differ in length: " + std::to_string(a.size()) + " vs " +
                           std::to_string(b.size()));
    WilcoxonResult res;
    std::vector<double> diff;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (!std::isfinite(d)) throw InvalidInput("non-finite paired difference at index " + std::to_string(i));
        if (d == 0.0) {
            ++res.dropped;
            continue;
        }
        diff.push_back(d);
    }
    res.n = diff.size();
    if (res.n == 0) throw UndefinedTest("all paired differences are zero");

    std::vector<double> mag(res.n);
    for (std::size_t i = 0; i < res.n; ++i) mag[i] = std::abs(diff[i]);
    std::vector<std::size_t> ties;
    const auto r2 = doubled_ranks(mag, ties);

    long w2_plus = 0, total2 = 0;
    for (std::size_t i = 0; i < res.n; ++i) {
        total2 += r2[i];
        if (diff[i] > 0.0) w2_plus += r2[i];
    }
    res.w_plus = static_cast<double>(w2_plus) / 2.0;
    res.w_minus = static_cast<double>(total2 - w2_plus) / 2.0;

    res.exact = mode == WilcoxonMode::exact || (mode == WilcoxonMode::automatic && res.n <= kExactLimit);
    if (res.exact) {
        // Distribution of the doubled positive rank sum over all 2^n sign
        // assignments, counted with a subset-sum table.
        std::vector<double> count(static_cast<std::size_t>(total2) + 1, 0.0);
        count[0] = 1.0;
        long reach = 0;
        for (long r : r2) {
            for (long s = reach; s >= 0; --s)
                if (count[static_cast<std::size_t>(s)] != 0.0) count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
            reach += r;
        }
        const double all = std::ldexp(1.0, static_cast<int>(res.n));
        double ge = 0.0, le = 0.0;
        for (long s = 0; s <= total2; ++s) {
            const double c = count[static_cast<std::size_t>(s)];
            if (s >= w2_plus) ge += c;
            if (s <= w2_plus) le += c;
        }
        res.p_greater = ge / all;
        res.p_less = le / all;
    } else {
        const double n = static_cast<double>(res.n);
        const double mean = n * (n + 1.0) / 4.0;
        double tie_term = 0.0;
        for (auto t : ties) {
            const double td = static_cast<double>(t);
            tie_term += td * td * td - td;
        }
        const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
        const double sd = std::sqrt(var);
        res.z = (res.w_plus - mean) / sd;
        res.p_greater = normal_upper((res.w_plus - mean - 0.5) / sd);
        res.p_less = normal_upper((mean - res.w_plus - 0.5) / sd);
    }
    res.p_two_sided = std::min(1.0, 2.0 * std::min(res.p_greater, res.p_less));
    return res;
}

}  // namespace awet::bench
