// Seeded, parallel reproductions of the Ising simulation study.
//
// Every replica draws its sample from stream derive_stream(seed, experiment,
// n, replica), and rows are stored by task index, so tables do not depend on
// the worker count or on scheduling.
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fieldsel/config.hpp"
#include "fieldsel/field.hpp"
#include "fieldsel/result_table.hpp"
#include "fieldsel/risk.hpp"
#include "fieldsel/selection.hpp"

namespace fieldsel {

inline constexpr int kSchemaVersion = 1;

// Runs task(0..count-1) on up to `workers` threads. If tasks throw, the
// exception of the lowest failing index is rethrown after all threads join.
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task);

struct ExperimentContext {
    GibbsModel model;
    int target = 0;
    // V of the variance experiment, target included.
    SiteSubset neighborhood;
    std::string model_source;
    std::string model_hash;
};

// Loads the model (built-in when no file is configured) and resolves the
// target and neighbourhood names.
ExperimentContext load_context(const ExperimentConfig& cfg);

// Unfiltered candidates of the configured cardinality bound.
ModelCollection base_collection(const ExperimentConfig& cfg, const ExperimentContext& ctx);
// Applies the configured filter for one sample.
ModelCollection filtered_collection(const ModelCollection& base, const ExperimentConfig& cfg,
                                    const ExperimentContext& ctx, const EmpiricalMeasure& em);

struct ExperimentResult {
    std::string experiment;
    std::vector<ResultTable> tables;
    std::vector<std::string> warnings;

    const ResultTable& table(const std::string& name) const;
};

// Tables variance_replicas, variance_summary and variance_fit.
ExperimentResult run_variance_experiment(const ExperimentConfig& cfg, const ExperimentContext& ctx);
// Tables slope_path and slope_summary, over cfg.slope_replicas samples of size cfg.slope_n.
ExperimentResult run_slope_figure(const ExperimentConfig& cfg, const ExperimentContext& ctx);
// Tables risk_ratio_replicas and risk_ratio_summary.
ExperimentResult run_risk_ratio(const ExperimentConfig& cfg, const ExperimentContext& ctx);

struct RiskRatioOutcome {
    SiteSubset oracle;
    double oracle_risk = 0.0;
    double sh_k_min = 0.0;
    bool sh_flat = false;
    SiteSubset sh;
    double sh_risk = 0.0;
    SiteSubset theory;
    double theory_risk = 0.0;

    double sh_ratio() const;
    double theory_ratio() const;
};

// risk / oracle risk, with 0/0 read as 1.
double risk_ratio(double risk, double oracle_risk);

// One replica of the risk-ratio study for an arbitrary estimate. `n` sets
// the a^v/n scale of the penalties; `fits` are the estimate's criterion fits.
RiskRatioOutcome evaluate_risk_ratio(const RiskEvaluator& evaluator, const ModelCollection& coll,
                                     const Measure& estimate, std::span<const double> fits, std::uint64_t n,
                                     const ExperimentConfig& cfg);

// Metadata for an experiment run under `cfg`.
RunMetadata make_metadata(const std::string& experiment, const ExperimentConfig& cfg, const ExperimentContext& ctx);

struct EmitSummary {
    std::vector<std::string> paths;
    std::vector<std::string> warnings;
};

// Writes every table, its metadata sidecar and the plot script to `dir`.
EmitSummary emit_experiment(const ExperimentResult& result, const std::string& dir, const RunMetadata& meta);

} // namespace fieldsel
