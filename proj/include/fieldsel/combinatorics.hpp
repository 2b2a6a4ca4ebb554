#pragma once

#include <cstdint>
#include <functional>
#include <string_view>

#include "fieldsel/field.hpp"

namespace fieldsel {

// How the candidate count N_s is taken. WithTarget counts the neighbourhoods
// V = N ∪ {i} with |V| <= s, i.e. sum_{k<s} C(M-1, k). AllSubsets counts every
// V ⊆ V_M with |V| <= s, i.e. sum_{k<=s} C(M, k).
enum class NsConvention { WithTarget, AllSubsets };

std::string_view to_string(NsConvention convention);
NsConvention parse_ns_convention(std::string_view text);

std::uint64_t binomial(int n, int k);
std::uint64_t count_ns(int site_count, int s, NsConvention convention);

// Calls visit(V) for every subset in the family described by (s, convention),
// in canonical order (cardinality, then mask).
void for_each_subset(int site_count, int target, int s, NsConvention convention,
                     const std::function<void(SiteSubset)>& visit);

} // namespace fieldsel
