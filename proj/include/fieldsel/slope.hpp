// Slope-heuristic calibration of the penalty constant.
//
// For each K on a grid the criterion fit(V) + K * Delta_V is minimized; the
// complexity Delta of the selected model drops sharply at the minimal constant
// K_min, and the final model is the one selected at exactly 2 * K_min.
#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "fieldsel/empirical.hpp"
#include "fieldsel/field.hpp"
#include "fieldsel/risk.hpp"
#include "fieldsel/selection.hpp"

namespace fieldsel {

enum class ComplexityKind {
    APowVOverN,        // a^v / n
    APowVMinus1OverN,  // a^(v-1) / n
    L2Variance,        // ||P_{i|V} - P^_{i|V}||^2_{P^}; needs the model
    KlP2,              // p2(V); needs the model
};

std::string_view to_string(ComplexityKind kind);
ComplexityKind parse_complexity_kind(std::string_view text);
bool needs_model(ComplexityKind kind);

enum class JumpRule { Absolute, Relative };

std::string_view to_string(JumpRule rule);
JumpRule parse_jump_rule(std::string_view text);

// Delta_V for every candidate, in collection order.
std::vector<double> complexity_values(const ModelCollection& coll, const EmpiricalMeasure& em, ComplexityKind kind,
                                      const GibbsModel* model = nullptr);

struct PathPoint {
    double k = 0.0;
    SiteSubset chosen;
    double complexity = 0.0;
    // fit + K * Delta of the chosen model.
    double criterion = 0.0;
};

struct PenaltyPath {
    LossKind loss_kind = LossKind::L2;
    ComplexityKind complexity_kind = ComplexityKind::APowVOverN;
    std::vector<double> k_grid;
    std::vector<PathPoint> points;
    // Per-candidate inputs, reused for the final reselection.
    std::vector<double> fits;
    std::vector<double> complexities;
};

PenaltyPath penalty_path(const ModelCollection& coll, const EmpiricalMeasure& em, LossKind loss, ComplexityKind kind,
                         std::span<const double> k_grid, const GibbsModel* model = nullptr);
// Same sweep over caller-supplied fits and complexities.
PenaltyPath penalty_path(const ModelCollection& coll, std::vector<double> fits, std::vector<double> complexities,
                         std::span<const double> k_grid, LossKind loss = LossKind::L2,
                         ComplexityKind kind = ComplexityKind::APowVOverN);

struct Jump {
    double k_min = 0.0;
    double jump_size = 0.0;
    // Index in the grid of k_min, the first point after the drop.
    std::size_t index = 0;
};

// Largest drop between consecutive grid points (absolute, or relative to the
// pre-drop complexity); k_min is the grid point right after it. Throws
// NoJumpError when no drop is positive.
Jump detect_kmin(const PenaltyPath& path, JumpRule rule = JumpRule::Absolute);
Jump detect_kmin(std::span<const double> k_grid, std::span<const double> complexities,
                 JumpRule rule = JumpRule::Absolute);

struct CalibrationOptions {
    JumpRule rule = JumpRule::Absolute;
    // Return the last path selection instead of throwing on a flat path.
    bool allow_flat = false;
    const GibbsModel* model = nullptr;
};

struct CalibrationResult {
    double k_min = 0.0;
    double jump_size = 0.0;
    SiteSubset chosen;
    bool flat = false;
    JumpRule rule = JumpRule::Absolute;
    PenaltyPath path;
};

CalibrationResult calibrate_path(const ModelCollection& coll, PenaltyPath path, const CalibrationOptions& options = {});
CalibrationResult calibrate(const ModelCollection& coll, const EmpiricalMeasure& em, LossKind loss,
                            ComplexityKind kind, std::span<const double> k_grid,
                            const CalibrationOptions& options = {});

// `count` points k_j = hi * j / count, j = 1..count.
std::vector<double> uniform_grid(double hi, std::size_t count);
// 160 points on (0, 8].
std::vector<double> default_k_grid();

// Path report CSV: K,chosen_mask,v,complexity,criterion.
void write_path_report(std::ostream& out, const PenaltyPath& path);

} // namespace fieldsel
