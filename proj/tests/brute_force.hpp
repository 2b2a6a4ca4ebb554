// Straight-line reimplementation of penalized selection, without count
// caches or mixed-radix projections, used as an oracle for the library.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "fieldsel/field.hpp"

namespace fieldsel::testing {

struct BruteChoice {
    std::uint32_t mask = 0;
    double total = 0.0;
};

// Fit of one candidate from decoded rows: L2 uses -sum c^2/ctx / (a n),
// Kullback -sum c ln(c/ctx) / n, per-cell terms summed in ascending order.
inline double brute_fit(const std::vector<std::vector<int>>& rows, int a, int target, std::uint32_t mask, bool l2) {
    std::map<std::vector<int>, std::uint64_t> joint;
    std::map<std::vector<int>, std::uint64_t> context;
    const int m = static_cast<int>(rows.front().size());
    for (const auto& r : rows) {
        std::vector<int> key;
        std::vector<int> ctx;
        for (int s = 0; s < m; ++s) {
            if (!((mask >> s) & 1U)) continue;
            key.push_back(r[static_cast<std::size_t>(s)]);
            if (s != target) ctx.push_back(r[static_cast<std::size_t>(s)]);
        }
        ++joint[key];
        ++context[ctx];
    }
    std::vector<double> terms;
    for (const auto& [key, c] : joint) {
        std::vector<int> ctx;
        int pos = 0;
        for (int s = 0; s < m; ++s) {
            if (!((mask >> s) & 1U)) continue;
            if (s != target) ctx.push_back(key[static_cast<std::size_t>(pos)]);
            ++pos;
        }
        const std::uint64_t d = context.at(ctx);
        terms.push_back(l2 ? static_cast<double>(c * c) / static_cast<double>(d)
                           : static_cast<double>(c) * std::log(static_cast<double>(c) / static_cast<double>(d)));
    }
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) total += t;
    const double n = static_cast<double>(rows.size());
    return l2 ? -total / (a * n) : -total / n;
}

// Argmin over every V containing the target with |V| <= s of
// fit + constant a^v / n, ties to smaller |V| then smaller mask.
inline BruteChoice brute_select(const std::vector<std::vector<int>>& rows, int a, int target, int s, bool l2,
                                double constant) {
    const int m = static_cast<int>(rows.front().size());
    const double n = static_cast<double>(rows.size());
    BruteChoice best;
    bool have = false;
    for (std::uint32_t mask = 0; mask < (1U << m); ++mask) {
        if (!((mask >> target) & 1U) || std::popcount(mask) > s) continue;
        const int v = std::popcount(mask);
        const double total = brute_fit(rows, a, target, mask, l2) + constant * std::pow(a, v) / n;
        const bool better = !have || total < best.total ||
                            (total == best.total && (v < std::popcount(best.mask) ||
                                                     (v == std::popcount(best.mask) && mask < best.mask)));
        if (better) {
            best = {mask, total};
            have = true;
        }
    }
    return best;
}

inline std::vector<std::vector<int>> decoded_rows(const SampleBatch& batch) {
    std::vector<std::vector<int>> rows;
    const Codec cd = batch.codec();
    for (Code c : batch.rows) {
        std::vector<int> r;
        for (int s = 0; s < cd.site_count(); ++s) r.push_back(cd.digit(c, s));
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace fieldsel::testing
