#include "fieldsel/risk.hpp"

#include <cmath>
#include <limits>
#include <mutex>
#include <string>

#include "fieldsel/errors.hpp"

namespace fieldsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// w * ln(num/den) with the measure-zero convention: zero weight contributes
// nothing whatever the ratio; positive weight with den = 0 is +inf.
double weighted_log_ratio(double w, double num, double den) {
    if (w == 0.0) return 0.0;
    if (den == 0.0) return kInf;
    if (num == 0.0) return -kInf;
    return w * std::log(num / den);
}

} // namespace

std::string_view to_string(LossKind kind) { return kind == LossKind::L2 ? "l2" : "kl"; }

LossKind parse_loss_kind(std::string_view text) {
    if (text == "l2") return LossKind::L2;
    if (text == "kl" || text == "kullback") return LossKind::Kullback;
    throw ValidationError("unknown loss '" + std::string(text) + "' (expected l2 or kl)");
}

bool RiskReport::finite() const {
    return std::isfinite(total) && std::isfinite(variance_term) && std::isfinite(bias_term);
}

double l2_norm_sq(std::span<const double> f, std::span<const double> context_weight, int alphabet_size) {
    if (f.size() != context_weight.size()) throw ValidationError("function and weight tables differ in size");
    double total = 0.0;
    for (std::size_t x = 0; x < f.size(); ++x) total += context_weight[x] * f[x] * f[x];
    return total / static_cast<double>(alphabet_size);
}

double l2_norm_sq(std::span<const double> f, const Measure& q, int target, SiteSubset subset) {
    const auto weight = context_mass_table(q, target, subset);
    return l2_norm_sq(f, weight, q.alphabet_size());
}

double log_loss(std::span<const double> q, std::span<const double> f) {
    if (q.size() != f.size()) throw ValidationError("measure and function tables differ in size");
    double total = 0.0;
    for (std::size_t x = 0; x < q.size(); ++x) {
        if (q[x] == 0.0) continue;
        if (f[x] <= 0.0) return kInf;
        total -= q[x] * std::log(f[x]);
    }
    return total;
}

RiskEvaluator::RiskEvaluator(const GibbsModel& model, int target) : model_(&model), target_(target) {
    const Codec& cd = model.codec();
    if (target < 0 || target >= cd.site_count()) throw ValidationError("target site out of range");
    const SiteSubset full = SiteSubset::full(cd.site_count());
    full_conditional_ = model.conditional_table(target, full);
    full_context_ = context_mass_table(model, target, full);
}

RiskEvaluator::SubsetTruth RiskEvaluator::build_truth(SiteSubset subset) const {
    const GibbsModel& model = *model_;
    const Codec& cd = model.codec();
    if (!subset.contains(target_)) throw ValidationError("candidate subset must contain the target site");
    if (!SiteSubset::full(cd.site_count()).includes(subset)) throw ValidationError("subset outside the field");

    SubsetTruth t;
    t.subset = subset;
    t.projection = cd.projection_map(subset);
    t.joint = model.marginal_table(subset);
    t.conditional = model.conditional_table(target_, subset);
    t.context = context_mass_table(model, target_, subset);

    const auto probs = model.probabilities();
    const double a = static_cast<double>(cd.alphabet_size());
    double l2 = 0.0;
    double kl = 0.0;
    for (Code c = 0; c < probs.size(); ++c) {
        const double d = t.conditional[t.projection[c]] - full_conditional_[c];
        l2 += full_context_[c] * d * d;
        kl += weighted_log_ratio(probs[c], full_conditional_[c], t.conditional[t.projection[c]]);
    }
    t.l2_bias = l2 / a;
    t.kullback_bias = kl;
    return t;
}

const RiskEvaluator::SubsetTruth& RiskEvaluator::truth(SiteSubset subset) const {
    {
        std::shared_lock lock(mutex_);
        auto it = cache_.find(subset.mask());
        if (it != cache_.end()) return *it->second;
    }
    auto built = std::make_unique<SubsetTruth>(build_truth(subset));
    std::unique_lock lock(mutex_);
    auto [it, inserted] = cache_.emplace(subset.mask(), std::move(built));
    return *it->second;
}

RiskReport RiskEvaluator::l2(std::span<const double> est, SiteSubset subset, std::uint64_t n) const {
    const SubsetTruth& t = truth(subset);
    if (est.size() != t.joint.size()) throw ValidationError("estimator table has wrong size");
    const double a = static_cast<double>(model_->alphabet().size());

    double variance = 0.0;
    for (std::size_t x = 0; x < est.size(); ++x) {
        const double d = est[x] - t.conditional[x];
        variance += t.context[x] * d * d;
    }
    double total = 0.0;
    for (Code c = 0; c < full_context_.size(); ++c) {
        const double d = est[t.projection[c]] - full_conditional_[c];
        total += full_context_[c] * d * d;
    }
    return RiskReport{LossKind::L2, total / a, variance / a, t.l2_bias, subset, n};
}

RiskReport RiskEvaluator::kullback(std::span<const double> est, SiteSubset subset, std::uint64_t n) const {
    const SubsetTruth& t = truth(subset);
    if (est.size() != t.joint.size()) throw ValidationError("estimator table has wrong size");

    double variance = 0.0;
    for (std::size_t x = 0; x < est.size(); ++x) variance += weighted_log_ratio(t.joint[x], t.conditional[x], est[x]);

    // L_P(P^_{i|V}) - L_P(P_{i|S}), both evaluated over the full table.
    const auto probs = model_->probabilities();
    std::vector<double> lifted(probs.size());
    for (Code c = 0; c < probs.size(); ++c) lifted[c] = est[t.projection[c]];
    const double loss_est = log_loss(probs, lifted);
    const double loss_truth = log_loss(probs, full_conditional_);
    const double total = std::isinf(loss_est) ? kInf : loss_est - loss_truth;
    return RiskReport{LossKind::Kullback, total, variance, t.kullback_bias, subset, n};
}

RiskReport RiskEvaluator::l2(const Measure& estimate, SiteSubset subset) const {
    return l2(estimate.conditional_table(target_, subset), subset, estimate.sample_size());
}

RiskReport RiskEvaluator::kullback(const Measure& estimate, SiteSubset subset) const {
    return kullback(estimate.conditional_table(target_, subset), subset, estimate.sample_size());
}

RiskReport RiskEvaluator::risk(LossKind kind, const Measure& estimate, SiteSubset subset) const {
    return kind == LossKind::L2 ? l2(estimate, subset) : kullback(estimate, subset);
}

RiskReport l2_risk_decomposition(const GibbsModel& model, const Measure& estimate, int target, SiteSubset subset) {
    return RiskEvaluator(model, target).l2(estimate, subset);
}

RiskReport kullback_risk_decomposition(const GibbsModel& model, const Measure& estimate, int target,
                                       SiteSubset subset) {
    return RiskEvaluator(model, target).kullback(estimate, subset);
}

bool omega_prob_holds(const GibbsModel& model, const Measure& estimate, int target, double delta, int s,
                      NsConvention convention) {
    const Codec& cd = model.codec();
    const std::uint64_t n = estimate.sample_size();
    if (n == 0) return true;  // exact measure: no deviation at all
    const double a = static_cast<double>(cd.alphabet_size());
    const double ns = static_cast<double>(count_ns(cd.site_count(), s, convention));
    const double log_term = std::log(2.0 * std::pow(a, s) * ns * delta);
    const double nd = static_cast<double>(n);
    bool holds = true;
    for_each_subset(cd.site_count(), target, s, convention, [&](SiteSubset v) {
        if (!holds) return;
        const auto truth = model.marginal_table(v);
        const auto emp = estimate.marginal_table(v);
        for (std::size_t x = 0; x < truth.size(); ++x) {
            const double bound = std::sqrt(2.0 * truth[x] * log_term / nd) + log_term / (3.0 * nd);
            if (std::abs(truth[x] - emp[x]) > bound) {
                holds = false;
                return;
            }
        }
    });
    return holds;
}

ProofDiagnostics proof_diagnostics(const GibbsModel& model, const Measure& estimate, int target, SiteSubset subset,
                                   double delta, int s, NsConvention convention) {
    if (!subset.contains(target)) throw ValidationError("subset must contain the target site");
    if (estimate.codec().site_count() != model.codec().site_count() ||
        estimate.codec().alphabet_size() != model.codec().alphabet_size()) {
        throw ValidationError("model and estimate live on different fields");
    }
    const auto p_joint = model.marginal_table(subset);
    const auto p_cond = model.conditional_table(target, subset);
    const auto q_joint = estimate.marginal_table(subset);
    const auto q_cond = estimate.conditional_table(target, subset);

    ProofDiagnostics d;
    d.p_minus = 1.0;
    for (std::size_t x = 0; x < p_joint.size(); ++x) {
        d.p1 += weighted_log_ratio(p_joint[x], p_cond[x], q_cond[x]);
        d.p2 += weighted_log_ratio(q_joint[x], q_cond[x], p_cond[x]);
        const double w = q_joint[x] - p_joint[x];
        if (w != 0.0) d.l_v += p_cond[x] > 0.0 ? -w * std::log(p_cond[x]) : (w > 0.0 ? kInf : -kInf);
        if (p_joint[x] > 0.0) d.p_minus = std::min(d.p_minus, p_joint[x]);
    }
    d.omega_prob_holds = omega_prob_holds(model, estimate, target, delta, s, convention);
    return d;
}

} // namespace fieldsel
