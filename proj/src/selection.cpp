#include "fieldsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "fieldsel/csv.hpp"
#include "fieldsel/errors.hpp"

namespace fieldsel {

std::string_view to_string(FilterKind kind) {
    switch (kind) {
    case FilterKind::None: return "none";
    case FilterKind::EmpiricalLambda: return "empirical_lambda";
    case FilterKind::TrueLambda: return "true_lambda";
    case FilterKind::EmpiricalLambdaPStar: return "empirical_lambda_pstar";
    case FilterKind::TrueLambdaPStar: return "true_lambda_pstar";
    }
    return "none";
}

FilterKind parse_filter_kind(std::string_view text) {
    for (auto k : {FilterKind::None, FilterKind::EmpiricalLambda, FilterKind::TrueLambda,
                   FilterKind::EmpiricalLambdaPStar, FilterKind::TrueLambdaPStar}) {
        if (text == to_string(k)) return k;
    }
    throw ValidationError("unknown filter kind '" + std::string(text) + "'");
}

ModelCollection enumerate_models(const SiteSet& sites, int target, int s, NsConvention convention) {
    return enumerate_models(sites.size(), target, s, convention);
}

ModelCollection enumerate_models(int site_count, int target, int s, NsConvention convention) {
    if (s < 1) throw ValidationError("maximal cardinality s must be at least 1");
    if (s > site_count) throw ValidationError("maximal cardinality s exceeds the number of sites");
    if (target < 0 || target >= site_count) throw ValidationError("target site out of range");
    ModelCollection coll;
    coll.target = target;
    coll.site_count = site_count;
    coll.s = s;
    coll.ns_convention = convention;
    coll.ns = count_ns(site_count, s, convention);
    for_each_subset(site_count, target, s, NsConvention::WithTarget,
                    [&](SiteSubset v) { coll.candidates.push_back(v); });
    return coll;
}

namespace {

double mass_threshold(const ModelCollection& coll, int alphabet_size, std::uint64_t n, double lambda, double delta) {
    const double log_term =
        std::log(2.0 * std::pow(static_cast<double>(alphabet_size), coll.s) * static_cast<double>(coll.ns) * delta);
    return lambda * log_term / static_cast<double>(n);
}

double default_p_star(std::uint64_t n) {
    // 1 / ln n, capped at 1 for tiny samples where ln n <= 1.
    const double ln_n = std::log(static_cast<double>(n));
    return ln_n > 1.0 ? 1.0 / ln_n : 1.0;
}

bool uses_p_star(FilterKind kind) {
    return kind == FilterKind::EmpiricalLambdaPStar || kind == FilterKind::TrueLambdaPStar;
}

ModelCollection prepare(const ModelCollection& coll, const FilterParams& params, int alphabet_size, std::uint64_t n) {
    if (n == 0) throw ValidationError("filtering needs a positive sample size");
    ModelCollection out = coll;
    out.candidates.clear();
    out.removed = coll.removed;
    out.filter_kind = params.kind;
    out.lambda = params.lambda;
    out.delta = params.delta;
    out.hypotheses_violated = params.lambda < 100.0 || params.delta <= 1.0;
    if (uses_p_star(params.kind)) out.p_star = params.p_star.value_or(default_p_star(n));
    if (params.kind != FilterKind::None) {
        if (!(params.delta > 0.0)) throw ValidationError("delta must be positive");
        out.threshold = mass_threshold(coll, alphabet_size, n, params.lambda, params.delta);
    }
    return out;
}

// Every cell with positive exemption mass must reach the threshold; with a
// p* level, every cell with positive exemption conditional must reach p*.
bool passes(std::span<const double> mass, std::span<const double> exempt_mass, double threshold,
            std::span<const double> cond, std::span<const double> exempt_cond, std::optional<double> p_star) {
    for (std::size_t x = 0; x < mass.size(); ++x) {
        if (exempt_mass[x] != 0.0 && mass[x] < threshold) return false;
    }
    if (p_star) {
        for (std::size_t x = 0; x < cond.size(); ++x) {
            if (exempt_cond[x] != 0.0 && cond[x] < *p_star) return false;
        }
    }
    return true;
}

} // namespace

ModelCollection filter_collection(const ModelCollection& coll, const EmpiricalMeasure& em, const FilterParams& params,
                                  const GibbsModel* support) {
    if (params.kind == FilterKind::TrueLambda || params.kind == FilterKind::TrueLambdaPStar) {
        throw ValidationError("true-mass collections need the model; use the model overload");
    }
    if (em.site_count() != coll.site_count) throw ValidationError("measure and collection differ in site count");
    if (support && (support->site_count() != em.site_count() || support->alphabet_size() != em.alphabet_size())) {
        throw ValidationError("support model and measure live on different fields");
    }
    ModelCollection out = prepare(coll, params, em.alphabet_size(), em.n());
    if (params.kind == FilterKind::None) {
        out.candidates = coll.candidates;
        return out;
    }
    for (SiteSubset v : coll.candidates) {
        const auto mass = em.marginal_table(v);
        const auto exempt_mass = support ? support->marginal_table(v) : mass;
        std::vector<double> cond;
        std::vector<double> exempt_cond;
        if (out.p_star) {
            cond = em.conditional_table(coll.target, v);
            exempt_cond = support ? support->conditional_table(coll.target, v) : cond;
        }
        if (passes(mass, exempt_mass, out.threshold, cond, exempt_cond, out.p_star)) {
            out.candidates.push_back(v);
        } else {
            out.removed.push_back(v);
        }
    }
    return out;
}

ModelCollection filter_collection(const ModelCollection& coll, const GibbsModel& model, std::uint64_t n,
                                  const FilterParams& params) {
    if (params.kind == FilterKind::EmpiricalLambda || params.kind == FilterKind::EmpiricalLambdaPStar) {
        throw ValidationError("empirical collections need a sample; use the measure overload");
    }
    if (model.site_count() != coll.site_count) throw ValidationError("model and collection differ in site count");
    ModelCollection out = prepare(coll, params, model.alphabet_size(), n);
    if (params.kind == FilterKind::None) {
        out.candidates = coll.candidates;
        return out;
    }
    for (SiteSubset v : coll.candidates) {
        const auto mass = model.marginal_table(v);
        std::vector<double> cond;
        if (out.p_star) cond = model.conditional_table(coll.target, v);
        if (passes(mass, mass, out.threshold, cond, cond, out.p_star)) {
            out.candidates.push_back(v);
        } else {
            out.removed.push_back(v);
        }
    }
    return out;
}

PenaltySpec PenaltySpec::l2_theory(double k, int alphabet_size) {
    return power(LossKind::L2, 6.0 * k / static_cast<double>(alphabet_size));
}

PenaltySpec PenaltySpec::kullback_theory(double k) { return power(LossKind::Kullback, 9.0 * k); }

PenaltySpec PenaltySpec::power(LossKind loss, double constant) {
    if (!(constant >= 0.0) || !std::isfinite(constant)) throw ValidationError("penalty constant must be finite and >= 0");
    PenaltySpec p;
    p.loss_kind = loss;
    p.constant = constant;
    p.form = PenaltyForm::APowVOverN;
    return p;
}

PenaltySpec PenaltySpec::explicit_table(LossKind loss, std::unordered_map<std::uint32_t, double> values) {
    PenaltySpec p;
    p.loss_kind = loss;
    p.form = PenaltyForm::ExplicitTable;
    p.table = std::move(values);
    return p;
}

double PenaltySpec::value(SiteSubset subset, int alphabet_size, std::uint64_t n) const {
    if (form == PenaltyForm::ExplicitTable) {
        auto it = table.find(subset.mask());
        if (it == table.end()) throw ValidationError("penalty table does not cover a candidate");
        return it->second;
    }
    if (n == 0) throw ValidationError("penalty a^v/n needs a positive sample size");
    return constant * std::pow(static_cast<double>(alphabet_size), subset.size()) / static_cast<double>(n);
}

namespace {

// Per-cell fit terms are summed in sorted order, so candidates whose count
// tables differ only by a relabelling of cells get bit-identical fits and tie
// exactly.
double sorted_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) total += t;
    return total;
}

template <class Term>
double fit_sum(const EmpiricalMeasure& em, int target, SiteSubset subset, Term term) {
    if (!subset.contains(target)) throw ValidationError("subset must contain the target site");
    const Codec& cd = em.codec();
    const int rank = subset.rank_of(target);
    const auto joint = em.counts(subset);
    const auto context = em.counts(subset.without(target));
    std::vector<double> terms;
    for (Code x = 0; x < joint->size(); ++x) {
        const auto c = (*joint)[x];
        if (c != 0) terms.push_back(term(c, (*context)[cd.drop_digit(x, rank)]));
    }
    return sorted_sum(terms);
}

} // namespace

double l2_fit(const EmpiricalMeasure& em, int target, SiteSubset subset) {
    const double total = fit_sum(em, target, subset, [](std::uint64_t c, std::uint64_t ctx) {
        return static_cast<double>(c * c) / static_cast<double>(ctx);
    });
    return -total / (static_cast<double>(em.alphabet_size()) * static_cast<double>(em.n()));
}

double kl_fit(const EmpiricalMeasure& em, int target, SiteSubset subset) {
    const double total = fit_sum(em, target, subset, [](std::uint64_t c, std::uint64_t ctx) {
        return static_cast<double>(c) * std::log(static_cast<double>(c) / static_cast<double>(ctx));
    });
    return -total / static_cast<double>(em.n());
}

double empirical_fit(LossKind kind, const EmpiricalMeasure& em, int target, SiteSubset subset) {
    return kind == LossKind::L2 ? l2_fit(em, target, subset) : kl_fit(em, target, subset);
}

double l2_criterion(const EmpiricalMeasure& em, int target, SiteSubset subset, const PenaltySpec& pen) {
    return l2_fit(em, target, subset) + pen.value(subset, em.alphabet_size(), em.n());
}

double kl_criterion(const EmpiricalMeasure& em, int target, SiteSubset subset, const PenaltySpec& pen) {
    return kl_fit(em, target, subset) + pen.value(subset, em.alphabet_size(), em.n());
}

std::vector<double> compute_fits(const ModelCollection& coll, const EmpiricalMeasure& em, LossKind kind) {
    std::vector<double> fits;
    fits.reserve(coll.size());
    for (SiteSubset v : coll.candidates) fits.push_back(empirical_fit(kind, em, coll.target, v));
    return fits;
}

std::vector<double> compute_measure_fits(const ModelCollection& coll, const Measure& q, LossKind kind) {
    const Codec& cd = q.codec();
    std::vector<double> fits;
    fits.reserve(coll.size());
    for (SiteSubset v : coll.candidates) {
        const int rank = v.rank_of(coll.target);
        const auto joint = q.marginal_table(v);
        const auto context = q.marginal_table(v.without(coll.target));
        double total = 0.0;
        for (Code x = 0; x < joint.size(); ++x) {
            if (joint[x] == 0.0) continue;
            const double ctx = context[cd.drop_digit(x, rank)];
            total += kind == LossKind::L2 ? joint[x] * joint[x] / ctx : joint[x] * std::log(joint[x] / ctx);
        }
        fits.push_back(kind == LossKind::L2 ? -total / static_cast<double>(cd.alphabet_size()) : -total);
    }
    return fits;
}

SelectionResult select_from(const ModelCollection& coll, std::span<const double> fits,
                            std::span<const double> penalties) {
    if (coll.empty()) throw EmptyCollectionError("candidate collection is empty");
    if (fits.size() != coll.size() || penalties.size() != coll.size()) {
        throw ValidationError("fit/penalty tables do not match the collection");
    }
    SelectionResult result;
    result.scores.reserve(coll.size());
    std::size_t best = 0;
    for (std::size_t k = 0; k < coll.size(); ++k) {
        const double total = fits[k] + penalties[k];
        result.scores.push_back({coll.candidates[k], fits[k], penalties[k], total});
        if (k == 0) continue;
        const double incumbent = result.scores[best].total;
        if (total < incumbent || (total == incumbent && canonical_less(coll.candidates[k], coll.candidates[best]))) {
            best = k;
        }
    }
    result.chosen = coll.candidates[best];
    result.chosen_value = result.scores[best].total;
    const auto ties = std::count_if(result.scores.begin(), result.scores.end(),
                                    [&](const CandidateScore& s) { return s.total == result.chosen_value; });
    result.tie_break_applied = ties > 1;
    return result;
}

SelectionResult select(const ModelCollection& coll, const EmpiricalMeasure& em, const PenaltySpec& pen) {
    if (coll.empty()) throw EmptyCollectionError("candidate collection is empty");
    const auto fits = compute_fits(coll, em, pen.loss_kind);
    std::vector<double> penalties;
    penalties.reserve(coll.size());
    for (SiteSubset v : coll.candidates) penalties.push_back(pen.value(v, em.alphabet_size(), em.n()));
    return select_from(coll, fits, penalties);
}

OracleResult oracle_search(const RiskEvaluator& evaluator, const Measure& estimate, const ModelCollection& coll,
                           LossKind kind) {
    if (coll.empty()) throw EmptyCollectionError("candidate collection is empty");
    OracleResult out;
    out.risks.reserve(coll.size());
    std::size_t best = 0;
    for (std::size_t k = 0; k < coll.size(); ++k) {
        out.risks.push_back(evaluator.risk(kind, estimate, coll.candidates[k]).total);
        if (k == 0) continue;
        const double r = out.risks[k];
        if (r < out.risks[best] || (r == out.risks[best] && canonical_less(coll.candidates[k], coll.candidates[best]))) {
            best = k;
        }
    }
    out.chosen = coll.candidates[best];
    out.risk = out.risks[best];
    return out;
}

SiteSubset oracle(const GibbsModel& model, const Measure& estimate, const ModelCollection& coll, LossKind kind) {
    RiskEvaluator evaluator(model, coll.target);
    return oracle_search(evaluator, estimate, coll, kind).chosen;
}

namespace {

std::string format_real(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string site_list(SiteSubset v, const SiteSet& sites) {
    std::string out;
    for (int s : v.sites()) {
        if (!out.empty()) out += ' ';
        out += sites.name(s);
    }
    return out;
}

} // namespace

void write_selection_report(std::ostream& out, const ModelCollection& coll, const SelectionResult& result,
                            const SiteSet& sites) {
    csv::write_row(out, {"mask", "sites", "v", "criterion", "penalty", "total", "filtered_out", "chosen"});
    std::vector<std::pair<SiteSubset, const CandidateScore*>> rows;
    for (const auto& s : result.scores) rows.emplace_back(s.subset, &s);
    for (SiteSubset v : coll.removed) rows.emplace_back(v, nullptr);
    std::sort(rows.begin(), rows.end(), [](const auto& l, const auto& r) { return canonical_less(l.first, r.first); });
    for (const auto& [v, score] : rows) {
        std::vector<std::string> fields{std::to_string(v.mask()), site_list(v, sites), std::to_string(v.size())};
        if (score) {
            fields.push_back(format_real(score->fit));
            fields.push_back(format_real(score->penalty));
            fields.push_back(format_real(score->total));
            fields.push_back("0");
        } else {
            fields.insert(fields.end(), {"", "", "", "1"});
        }
        fields.push_back(score && v == result.chosen ? "1" : "0");
        csv::write_row(out, fields);
    }
}

} // namespace fieldsel
