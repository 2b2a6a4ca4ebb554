// Experiment configuration files.
//
// INI-style text: `[section]` headers, `key = value` lines, `#` comments.
// Every key belongs to a section and unknown sections or keys are errors.
//
//   [model]
//   file         = path            relative to the config file; omit for the
//                                  built-in 3x3 nearest-neighbour model
//   target       = 0,0             site name
//   neighborhood = 0,1 1,0 ...     V for the variance experiment (default:
//                                  the target's interaction neighbours)
//   [run]
//   n_grid   = 100:5000:100        start:stop:step, or a list of sizes
//   replicas = 100
//   seed     = 20110101
//   workers  = 1
//   output   = out                 relative to the config file
//   [selection]
//   s             = 9              default: all sites
//   ns_convention = with_target | all_subsets
//   filter        = none | empirical_lambda | empirical_lambda_pstar |
//                   true_lambda | true_lambda_pstar
//   lambda        = 100
//   delta         = 7.38905609893065
//   p_star        = 0.1            default 1 / ln n
//   K             = 2              theoretical constant
//   loss          = l2 | kl
//   [slope]
//   n          = 500
//   replicas   = 1
//   complexity = l2_variance | kl_p2 | a_pow_v_over_n | a_pow_v_minus1_over_n
//   k_max      = 8
//   k_points   = 160
//   jump_rule  = absolute | relative
//   [risk_ratio]
//   complexity = a_pow_v_minus1_over_n
//   k_max      = 8
//   k_points   = 400
//   jump_rule  = absolute
#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "fieldsel/combinatorics.hpp"
#include "fieldsel/risk.hpp"
#include "fieldsel/selection.hpp"
#include "fieldsel/slope.hpp"

namespace fieldsel {

struct PathSettings {
    ComplexityKind complexity = ComplexityKind::APowVMinus1OverN;
    double k_max = 8.0;
    std::size_t k_points = 400;
    JumpRule jump_rule = JumpRule::Absolute;

    std::vector<double> grid() const { return uniform_grid(k_max, k_points); }
};

struct ExperimentConfig {
    // Resolved model path; empty selects the built-in model.
    std::string model_path;
    std::string target = "0,0";
    std::vector<std::string> neighborhood;

    std::vector<std::uint64_t> n_grid;
    std::uint64_t replicas = 100;
    std::uint64_t seed = 20110101;
    unsigned workers = 1;
    std::string output_dir = "out";

    std::optional<int> s;
    NsConvention ns_convention = NsConvention::WithTarget;
    FilterKind filter = FilterKind::None;
    double lambda = kDefaultLambda;
    double delta = kDefaultDelta;
    std::optional<double> p_star;
    double theory_k = 2.0;
    LossKind loss = LossKind::L2;

    std::uint64_t slope_n = 500;
    std::uint64_t slope_replicas = 1;
    PathSettings slope{ComplexityKind::L2Variance, 8.0, 160, JumpRule::Absolute};

    PathSettings risk_ratio{};

    ExperimentConfig();
};

// Relative paths are resolved against `base_dir`.
ExperimentConfig parse_config(std::istream& in, const std::string& source, const std::string& base_dir);
ExperimentConfig load_config(const std::string& path);

// Effective configuration in the file grammar; parse_config of this text
// reproduces the configuration. Worker count and output directory are left
// out since they do not affect results.
std::string canonical_text(const ExperimentConfig& cfg);
// FNV-1a of canonical_text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

} // namespace fieldsel
