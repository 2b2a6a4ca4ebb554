#include "fieldsel/slope.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "fieldsel/csv.hpp"
#include "fieldsel/errors.hpp"

namespace fieldsel {

std::string_view to_string(ComplexityKind kind) {
    switch (kind) {
    case ComplexityKind::APowVOverN: return "a_pow_v_over_n";
    case ComplexityKind::APowVMinus1OverN: return "a_pow_v_minus1_over_n";
    case ComplexityKind::L2Variance: return "l2_variance";
    case ComplexityKind::KlP2: return "kl_p2";
    }
    return "a_pow_v_over_n";
}

ComplexityKind parse_complexity_kind(std::string_view text) {
    for (auto k : {ComplexityKind::APowVOverN, ComplexityKind::APowVMinus1OverN, ComplexityKind::L2Variance,
                   ComplexityKind::KlP2}) {
        if (text == to_string(k)) return k;
    }
    throw ValidationError("unknown complexity kind '" + std::string(text) + "'");
}

bool needs_model(ComplexityKind kind) {
    return kind == ComplexityKind::L2Variance || kind == ComplexityKind::KlP2;
}

std::string_view to_string(JumpRule rule) { return rule == JumpRule::Absolute ? "absolute" : "relative"; }

JumpRule parse_jump_rule(std::string_view text) {
    if (text == "absolute") return JumpRule::Absolute;
    if (text == "relative") return JumpRule::Relative;
    throw ValidationError("unknown jump rule '" + std::string(text) + "'");
}

std::vector<double> complexity_values(const ModelCollection& coll, const EmpiricalMeasure& em, ComplexityKind kind,
                                      const GibbsModel* model) {
    if (needs_model(kind) && model == nullptr) {
        throw ValidationError("complexity '" + std::string(to_string(kind)) + "' needs the ground-truth model");
    }
    const double a = static_cast<double>(em.alphabet_size());
    const double n = static_cast<double>(em.n());
    std::vector<double> out;
    out.reserve(coll.size());
    for (SiteSubset v : coll.candidates) {
        switch (kind) {
        case ComplexityKind::APowVOverN: out.push_back(std::pow(a, v.size()) / n); break;
        case ComplexityKind::APowVMinus1OverN: out.push_back(std::pow(a, v.size() - 1) / n); break;
        case ComplexityKind::L2Variance: {
            auto diff = model->conditional_table(coll.target, v);
            const auto est = em.conditional_table(coll.target, v);
            for (std::size_t x = 0; x < diff.size(); ++x) diff[x] -= est[x];
            out.push_back(l2_norm_sq(diff, em, coll.target, v));
            break;
        }
        case ComplexityKind::KlP2: {
            const auto truth = model->conditional_table(coll.target, v);
            const auto est = em.conditional_table(coll.target, v);
            const auto mass = em.marginal_table(v);
            double p2 = 0.0;
            for (std::size_t x = 0; x < mass.size(); ++x) {
                if (mass[x] == 0.0) continue;
                if (truth[x] == 0.0) {
                    p2 = std::numeric_limits<double>::infinity();
                    break;
                }
                p2 += mass[x] * std::log(est[x] / truth[x]);
            }
            out.push_back(p2);
            break;
        }
        }
    }
    return out;
}

namespace {

void check_grid(std::span<const double> k_grid) {
    if (k_grid.empty()) throw ValidationError("penalty grid is empty");
    for (std::size_t j = 0; j < k_grid.size(); ++j) {
        if (!std::isfinite(k_grid[j]) || k_grid[j] < 0.0) throw ValidationError("penalty grid values must be finite and >= 0");
        if (j > 0 && !(k_grid[j] > k_grid[j - 1])) throw ValidationError("penalty grid must be strictly increasing");
    }
}

SelectionResult select_at(const ModelCollection& coll, const PenaltyPath& path, double k) {
    std::vector<double> penalties(path.complexities.size());
    for (std::size_t c = 0; c < penalties.size(); ++c) penalties[c] = k * path.complexities[c];
    return select_from(coll, path.fits, penalties);
}

std::size_t index_of(const ModelCollection& coll, SiteSubset v) {
    for (std::size_t c = 0; c < coll.size(); ++c) {
        if (coll.candidates[c] == v) return c;
    }
    return 0;
}

} // namespace

PenaltyPath penalty_path(const ModelCollection& coll, std::vector<double> fits, std::vector<double> complexities,
                         std::span<const double> k_grid, LossKind loss, ComplexityKind kind) {
    if (coll.empty()) throw EmptyCollectionError("candidate collection is empty");
    check_grid(k_grid);
    if (fits.size() != coll.size() || complexities.size() != coll.size()) {
        throw ValidationError("fit/complexity tables do not match the collection");
    }
    PenaltyPath path;
    path.loss_kind = loss;
    path.complexity_kind = kind;
    path.k_grid.assign(k_grid.begin(), k_grid.end());
    path.fits = std::move(fits);
    path.complexities = std::move(complexities);
    path.points.reserve(k_grid.size());
    for (double k : k_grid) {
        const SelectionResult r = select_at(coll, path, k);
        path.points.push_back({k, r.chosen, path.complexities[index_of(coll, r.chosen)], r.chosen_value});
    }
    return path;
}

PenaltyPath penalty_path(const ModelCollection& coll, const EmpiricalMeasure& em, LossKind loss, ComplexityKind kind,
                         std::span<const double> k_grid, const GibbsModel* model) {
    if (coll.empty()) throw EmptyCollectionError("candidate collection is empty");
    return penalty_path(coll, compute_fits(coll, em, loss), complexity_values(coll, em, kind, model), k_grid, loss,
                        kind);
}

Jump detect_kmin(std::span<const double> k_grid, std::span<const double> complexities, JumpRule rule) {
    if (k_grid.size() != complexities.size()) throw ValidationError("grid and complexities differ in length");
    if (k_grid.size() < 3) throw ValidationError("jump detection needs at least 3 grid points");
    Jump best;
    double best_score = 0.0;
    for (std::size_t j = 0; j + 1 < complexities.size(); ++j) {
        const double drop = complexities[j] - complexities[j + 1];
        if (!(drop > 0.0)) continue;
        const double score = rule == JumpRule::Absolute ? drop : drop / complexities[j];
        if (score > best_score) {
            best_score = score;
            best = Jump{k_grid[j + 1], drop, j + 1};
        }
    }
    if (best_score == 0.0) throw NoJumpError("complexity never drops along the penalty path");
    return best;
}

Jump detect_kmin(const PenaltyPath& path, JumpRule rule) {
    std::vector<double> complexities;
    complexities.reserve(path.points.size());
    for (const auto& p : path.points) complexities.push_back(p.complexity);
    return detect_kmin(path.k_grid, complexities, rule);
}

CalibrationResult calibrate_path(const ModelCollection& coll, PenaltyPath path, const CalibrationOptions& options) {
    CalibrationResult out;
    out.rule = options.rule;
    try {
        const Jump jump = detect_kmin(path, options.rule);
        out.k_min = jump.k_min;
        out.jump_size = jump.jump_size;
        out.chosen = select_at(coll, path, 2.0 * jump.k_min).chosen;
    } catch (const NoJumpError&) {
        if (!options.allow_flat) throw;
        out.flat = true;
        out.k_min = std::numeric_limits<double>::quiet_NaN();
        out.chosen = path.points.back().chosen;
    }
    out.path = std::move(path);
    return out;
}

CalibrationResult calibrate(const ModelCollection& coll, const EmpiricalMeasure& em, LossKind loss,
                            ComplexityKind kind, std::span<const double> k_grid, const CalibrationOptions& options) {
    return calibrate_path(coll, penalty_path(coll, em, loss, kind, k_grid, options.model), options);
}

std::vector<double> uniform_grid(double hi, std::size_t count) {
    if (count == 0 || !(hi > 0.0)) throw ValidationError("grid needs a positive upper end and point count");
    std::vector<double> grid(count);
    for (std::size_t j = 0; j < count; ++j) grid[j] = hi * static_cast<double>(j + 1) / static_cast<double>(count);
    return grid;
}

std::vector<double> default_k_grid() { return uniform_grid(8.0, 160); }

void write_path_report(std::ostream& out, const PenaltyPath& path) {
    csv::write_row(out, {"K", "chosen_mask", "v", "complexity", "criterion"});
    for (const auto& p : path.points) {
        std::ostringstream k, c, crit;
        k.precision(17);
        c.precision(17);
        crit.precision(17);
        k << p.k;
        c << p.complexity;
        crit << p.criterion;
        csv::write_row(out, {k.str(), std::to_string(p.chosen.mask()), std::to_string(p.chosen.size()), c.str(),
                             crit.str()});
    }
}

} // namespace fieldsel
