#include "fieldsel/combinatorics.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "fieldsel/errors.hpp"

namespace fieldsel {

std::string_view to_string(NsConvention convention) {
    return convention == NsConvention::WithTarget ? "with_target" : "all_subsets";
}

NsConvention parse_ns_convention(std::string_view text) {
    if (text == "with_target") return NsConvention::WithTarget;
    if (text == "all_subsets") return NsConvention::AllSubsets;
    throw ValidationError("unknown N_s convention '" + std::string(text) + "'");
}

std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t out = 1;
    for (int j = 1; j <= k; ++j) out = out * static_cast<std::uint64_t>(n - k + j) / static_cast<std::uint64_t>(j);
    return out;
}

std::uint64_t count_ns(int site_count, int s, NsConvention convention) {
    std::uint64_t total = 0;
    if (convention == NsConvention::WithTarget) {
        for (int k = 0; k <= s - 1; ++k) total += binomial(site_count - 1, k);
    } else {
        for (int k = 0; k <= s; ++k) total += binomial(site_count, k);
    }
    return total;
}

void for_each_subset(int site_count, int target, int s, NsConvention convention,
                     const std::function<void(SiteSubset)>& visit) {
    if (site_count > kMaxSites) throw CapacityError("too many sites to enumerate subsets");
    const std::uint32_t limit = std::uint32_t{1} << site_count;
    std::vector<SiteSubset> family;
    for (std::uint32_t mask = 0; mask < limit; ++mask) {
        const SiteSubset v(mask);
        if (v.size() > s) continue;
        if (convention == NsConvention::WithTarget && !v.contains(target)) continue;
        family.push_back(v);
    }
    std::sort(family.begin(), family.end(), canonical_less);
    for (SiteSubset v : family) visit(v);
}

} // namespace fieldsel
