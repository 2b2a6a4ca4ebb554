// Risks of conditional-probability estimators against an exact model.
//
// All expectations are exact sums over the model's configuration table. The
// L2 norm of a function f on X(V) (V containing the target i) is
//
//   ||f||_Q^2 = sum_{x in X(V)} Q(x(V\{i})) f(x)^2 / a,
//
// which coincides with the integral over X(S) against dQ(x(S\{i}))/a for any f
// that only depends on x(V).
#pragma once

#include <cstdint>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fieldsel/combinatorics.hpp"
#include "fieldsel/field.hpp"

namespace fieldsel {

enum class LossKind { L2, Kullback };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

struct RiskReport {
    LossKind loss_kind = LossKind::L2;
    double total = 0.0;
    double variance_term = 0.0;
    double bias_term = 0.0;
    SiteSubset subset;
    std::uint64_t n = 0;

    // False when the estimator vanishes somewhere the truth has mass (Kullback only).
    bool finite() const;
};

struct ProofDiagnostics {
    double p1 = 0.0;
    double p2 = 0.0;
    double l_v = 0.0;
    double p_minus = 0.0;
    bool omega_prob_holds = false;
};

// Weighted squared norm: sum_x weight[x] f[x]^2 / a.
double l2_norm_sq(std::span<const double> f, std::span<const double> context_weight, int alphabet_size);
// ||f||_Q^2 for f over X(V); Q supplies the context marginal on V\{i}.
double l2_norm_sq(std::span<const double> f, const Measure& q, int target, SiteSubset subset);

// sum_x q[x] ln(1/f[x]); +inf when f vanishes where q is positive. Cells
// with q[x] = 0 contribute nothing.
double log_loss(std::span<const double> q, std::span<const double> f);

// Exact truth tables for one (model, target) pair, shared across estimators
// and subsets. Per-subset tables are built on first use; thread-safe.
class RiskEvaluator {
public:
    struct SubsetTruth {
        SiteSubset subset;
        std::vector<Code> projection;     // full code -> local code
        std::vector<double> joint;        // P(x(V))
        std::vector<double> conditional;  // P_{i|V}
        std::vector<double> context;      // P(x(V\{i})) laid out over X(V)
        double l2_bias = 0.0;
        double kullback_bias = 0.0;
    };

    RiskEvaluator(const GibbsModel& model, int target);

    const GibbsModel& model() const { return *model_; }
    int target() const { return target_; }
    const SubsetTruth& truth(SiteSubset subset) const;

    RiskReport l2(const Measure& estimate, SiteSubset subset) const;
    RiskReport kullback(const Measure& estimate, SiteSubset subset) const;
    RiskReport risk(LossKind kind, const Measure& estimate, SiteSubset subset) const;

    // Same as above for an already-tabulated estimator conditional over X(V).
    RiskReport l2(std::span<const double> estimate_conditional, SiteSubset subset, std::uint64_t n) const;
    RiskReport kullback(std::span<const double> estimate_conditional, SiteSubset subset, std::uint64_t n) const;

private:
    SubsetTruth build_truth(SiteSubset subset) const;

    const GibbsModel* model_;
    int target_;
    std::vector<double> full_conditional_;  // P_{i|S} per full code
    std::vector<double> full_context_;      // P(x(S\{i})) per full code
    mutable std::shared_mutex mutex_;
    mutable std::unordered_map<std::uint32_t, std::unique_ptr<SubsetTruth>> cache_;
};

RiskReport l2_risk_decomposition(const GibbsModel& model, const Measure& estimate, int target, SiteSubset subset);
RiskReport kullback_risk_decomposition(const GibbsModel& model, const Measure& estimate, int target,
                                       SiteSubset subset);

// p1(V), p2(V), L(V), the smallest positive P(x(V)), and whether the
// deviation event |P(x(V')) - P^(x(V'))| <= sqrt(2 P ln(2 a^s N_s delta)/n) +
// ln(2 a^s N_s delta)/(3n) holds for every V' of the (s, convention) family
// and every x.
ProofDiagnostics proof_diagnostics(const GibbsModel& model, const Measure& estimate, int target, SiteSubset subset,
                                   double delta, int s, NsConvention convention = NsConvention::WithTarget);

// Only the typicality event, without the per-V quantities.
bool omega_prob_holds(const GibbsModel& model, const Measure& estimate, int target, double delta, int s,
                      NsConvention convention = NsConvention::WithTarget);

} // namespace fieldsel
