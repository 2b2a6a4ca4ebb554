// Candidate neighbourhood collections, penalized criteria and selection.
//
// Candidates always contain the target site: V = N ∪ {i} with N ⊆ V_M\{i}.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fieldsel/combinatorics.hpp"
#include "fieldsel/empirical.hpp"
#include "fieldsel/field.hpp"
#include "fieldsel/risk.hpp"

namespace fieldsel {

enum class FilterKind { None, EmpiricalLambda, TrueLambda, EmpiricalLambdaPStar, TrueLambdaPStar };

std::string_view to_string(FilterKind kind);
FilterKind parse_filter_kind(std::string_view text);

inline constexpr double kDefaultLambda = 100.0;
inline const double kDefaultDelta = std::exp(2.0);

struct ModelCollection {
    int target = 0;
    int site_count = 0;
    int s = 0;
    std::vector<SiteSubset> candidates;
    // Unfiltered candidate count, used inside the filter thresholds.
    std::uint64_t ns = 0;
    NsConvention ns_convention = NsConvention::WithTarget;

    FilterKind filter_kind = FilterKind::None;
    double lambda = 0.0;
    double delta = 0.0;
    std::optional<double> p_star;
    // Mass threshold Λ ln(2 a^s N_s δ) / n applied by the filter.
    double threshold = 0.0;
    std::vector<SiteSubset> removed;
    // Λ < 100 or δ <= 1: the collection is usable but outside the theorems' hypotheses.
    bool hypotheses_violated = false;

    bool empty() const { return candidates.empty(); }
    std::size_t size() const { return candidates.size(); }
};

ModelCollection enumerate_models(const SiteSet& sites, int target, int s,
                                 NsConvention convention = NsConvention::WithTarget);
ModelCollection enumerate_models(int site_count, int target, int s,
                                 NsConvention convention = NsConvention::WithTarget);

struct FilterParams {
    FilterKind kind = FilterKind::EmpiricalLambda;
    double lambda = kDefaultLambda;
    double delta = kDefaultDelta;
    // Defaults to 1 / ln n for the p* kinds.
    std::optional<double> p_star;
};

// Empirical collections (kinds EmpiricalLambda / EmpiricalLambdaPStar): a
// cell x is exempt from the checks when its mass is zero under `support`, or
// under `em` itself when no support model is given. True collections need
// the model and use the sample size for the threshold.
ModelCollection filter_collection(const ModelCollection& coll, const EmpiricalMeasure& em, const FilterParams& params,
                                  const GibbsModel* support = nullptr);
ModelCollection filter_collection(const ModelCollection& coll, const GibbsModel& model, std::uint64_t n,
                                  const FilterParams& params);

enum class PenaltyForm { APowVOverN, ExplicitTable };

struct PenaltySpec {
    LossKind loss_kind = LossKind::L2;
    // Multiplier of a^v / n for APowVOverN; unused for ExplicitTable.
    double constant = 0.0;
    PenaltyForm form = PenaltyForm::APowVOverN;
    std::unordered_map<std::uint32_t, double> table;

    // 6K/a · a^v/n.
    static PenaltySpec l2_theory(double k, int alphabet_size);
    // 9K · a^v/n.
    static PenaltySpec kullback_theory(double k);
    static PenaltySpec power(LossKind loss, double constant);
    static PenaltySpec explicit_table(LossKind loss, std::unordered_map<std::uint32_t, double> values);

    double value(SiteSubset subset, int alphabet_size, std::uint64_t n) const;
};

// -||P^_{i|V}||^2_{P^}.
double l2_fit(const EmpiricalMeasure& em, int target, SiteSubset subset);
// -sum_x P^(x(V)) ln P^_{i|V}(x); cells with no observations contribute 0.
double kl_fit(const EmpiricalMeasure& em, int target, SiteSubset subset);
double empirical_fit(LossKind kind, const EmpiricalMeasure& em, int target, SiteSubset subset);

double l2_criterion(const EmpiricalMeasure& em, int target, SiteSubset subset, const PenaltySpec& pen);
double kl_criterion(const EmpiricalMeasure& em, int target, SiteSubset subset, const PenaltySpec& pen);

struct CandidateScore {
    SiteSubset subset;
    double fit = 0.0;
    double penalty = 0.0;
    double total = 0.0;
};

struct SelectionResult {
    SiteSubset chosen;
    double chosen_value = 0.0;
    // One entry per candidate, in collection order.
    std::vector<CandidateScore> scores;
    // More than one candidate attained the minimum.
    bool tie_break_applied = false;
};

// Fit values of every candidate, in collection order.
std::vector<double> compute_fits(const ModelCollection& coll, const EmpiricalMeasure& em, LossKind kind);
// Same fits from the marginal tables of any measure, e.g. an exact model
// standing in for the sample.
std::vector<double> compute_measure_fits(const ModelCollection& coll, const Measure& q, LossKind kind);

// Minimizer of fit + penalty; ties go to the smaller cardinality, then the
// smaller mask. Reduction is sequential so the result does not depend on
// how the inputs were produced.
SelectionResult select_from(const ModelCollection& coll, std::span<const double> fits,
                            std::span<const double> penalties);
SelectionResult select(const ModelCollection& coll, const EmpiricalMeasure& em, const PenaltySpec& pen);

struct OracleResult {
    SiteSubset chosen;
    double risk = 0.0;
    // True risk of every candidate, in collection order.
    std::vector<double> risks;
};

// Argmin of the true risk of P^_{i|V} over the collection, same tie-break as select.
OracleResult oracle_search(const RiskEvaluator& evaluator, const Measure& estimate, const ModelCollection& coll,
                           LossKind kind);
SiteSubset oracle(const GibbsModel& model, const Measure& estimate, const ModelCollection& coll, LossKind kind);

// Selection report CSV: mask,sites,v,criterion,penalty,total,filtered_out,chosen.
// Removed candidates appear with filtered_out = 1 and empty scores.
void write_selection_report(std::ostream& out, const ModelCollection& coll, const SelectionResult& result,
                            const SiteSet& sites);

} // namespace fieldsel
