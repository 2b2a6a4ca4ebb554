#include "fieldsel/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "fieldsel/empirical.hpp"
#include "fieldsel/errors.hpp"
#include "fieldsel/model_file.hpp"
#include "fieldsel/rng.hpp"
#include "fieldsel/slope.hpp"

namespace fieldsel {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Column integer(const char* name) { return {name, ColumnType::Integer}; }
Column real(const char* name) { return {name, ColumnType::Real}; }

Cell icell(std::uint64_t v) { return static_cast<std::int64_t>(v); }

struct Task {
    std::uint64_t n;
    std::uint64_t replica;
};

std::vector<Task> grid_tasks(const std::vector<std::uint64_t>& n_grid, std::uint64_t replicas) {
    std::vector<Task> tasks;
    tasks.reserve(n_grid.size() * replicas);
    for (auto n : n_grid) {
        for (std::uint64_t r = 0; r < replicas; ++r) tasks.push_back({n, r});
    }
    return tasks;
}

EmpiricalMeasure draw(const ExperimentContext& ctx, const ExperimentConfig& cfg, const char* experiment, Task t) {
    const auto stream = derive_stream(cfg.seed, experiment, t.n, t.replica);
    return fit(sample(ctx.model, t.n, cfg.seed, stream));
}

struct LineFit {
    double slope = kNaN;
    double intercept = kNaN;
    double level = kNaN;
    double x_min = kNaN;
    double x_max = kNaN;
    bool defined = false;
};

// Least squares over the finite points.
LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (std::isfinite(y[k])) pts.emplace_back(x[k], y[k]);
    }
    LineFit f;
    if (pts.empty()) return f;
    double mx = 0.0, my = 0.0;
    f.x_min = pts.front().first;
    f.x_max = pts.front().first;
    for (auto [px, py] : pts) {
        mx += px;
        my += py;
        f.x_min = std::min(f.x_min, px);
        f.x_max = std::max(f.x_max, px);
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    f.level = my;
    double sxx = 0.0, sxy = 0.0;
    for (auto [px, py] : pts) {
        sxx += (px - mx) * (px - mx);
        sxy += (px - mx) * (py - my);
    }
    if (sxx > 0.0) {
        f.slope = sxy / sxx;
        f.intercept = my - f.slope * mx;
        f.defined = true;
    }
    return f;
}

std::vector<double> penalty_complexities(const ModelCollection& coll, const Measure& estimate, std::uint64_t n,
                                         ComplexityKind kind, const GibbsModel& model) {
    if (needs_model(kind)) {
        const auto* em = dynamic_cast<const EmpiricalMeasure*>(&estimate);
        if (!em) throw ValidationError("complexity '" + std::string(to_string(kind)) + "' needs a sample");
        return complexity_values(coll, *em, kind, &model);
    }
    if (n == 0) throw ValidationError("penalty scale needs a positive sample size");
    const double a = static_cast<double>(estimate.alphabet_size());
    const int shift = kind == ComplexityKind::APowVMinus1OverN ? 1 : 0;
    std::vector<double> out;
    out.reserve(coll.size());
    for (SiteSubset v : coll.candidates) out.push_back(std::pow(a, v.size() - shift) / static_cast<double>(n));
    return out;
}

std::size_t index_in(const ModelCollection& coll, SiteSubset v) {
    for (std::size_t k = 0; k < coll.size(); ++k) {
        if (coll.candidates[k] == v) return k;
    }
    throw ValidationError("subset is not a candidate");
}

} // namespace

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& task) {
    if (count == 0) return;
    const std::size_t threads = std::max<std::size_t>(1, std::min<std::size_t>(workers, count));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < count; k = next++) {
            try {
                task(k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

ExperimentContext load_context(const ExperimentConfig& cfg) {
    std::string text;
    std::string source;
    if (cfg.model_path.empty()) {
        text = default_ising_3x3_text();
        source = "builtin:ising3x3";
    } else {
        std::ifstream in(cfg.model_path);
        if (!in) throw IoError("cannot open model file '" + cfg.model_path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
        source = cfg.model_path;
    }
    std::istringstream in(text);
    ExperimentContext ctx{parse_model(in, source), 0, {}, source, hex64(fnv1a(text))};
    const SiteSet& sites = ctx.model.sites();
    if (!sites.contains(cfg.target)) throw ValidationError("target site '" + cfg.target + "' is not in the model");
    ctx.target = sites.index_of(cfg.target);
    if (cfg.neighborhood.empty()) {
        ctx.neighborhood = ctx.model.interaction_neighbors(ctx.target).with(ctx.target);
    } else {
        SiteSubset v = SiteSubset().with(ctx.target);
        for (const auto& name : cfg.neighborhood) {
            if (!sites.contains(name)) throw ValidationError("neighborhood site '" + name + "' is not in the model");
            v = v.with(sites.index_of(name));
        }
        ctx.neighborhood = v;
    }
    return ctx;
}

ModelCollection base_collection(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
    const int m = ctx.model.site_count();
    return enumerate_models(m, ctx.target, cfg.s.value_or(m), cfg.ns_convention);
}

ModelCollection filtered_collection(const ModelCollection& base, const ExperimentConfig& cfg,
                                    const ExperimentContext& ctx, const EmpiricalMeasure& em) {
    if (cfg.filter == FilterKind::None) return base;
    const FilterParams params{cfg.filter, cfg.lambda, cfg.delta, cfg.p_star};
    ModelCollection out = cfg.filter == FilterKind::TrueLambda || cfg.filter == FilterKind::TrueLambdaPStar
                              ? filter_collection(base, ctx.model, em.n(), params)
                              : filter_collection(base, em, params);
    if (out.empty()) {
        throw EmptyCollectionError("filter '" + std::string(to_string(cfg.filter)) + "' removed every candidate at n = " +
                                   std::to_string(em.n()) + " (threshold " + std::to_string(out.threshold) + ")");
    }
    return out;
}

const ResultTable& ExperimentResult::table(const std::string& name) const {
    for (const auto& t : tables) {
        if (t.name == name) return t;
    }
    throw ValidationError("experiment '" + experiment + "' has no table '" + name + "'");
}

ExperimentResult run_variance_experiment(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
    const auto tasks = grid_tasks(cfg.n_grid, cfg.replicas);
    const RiskEvaluator evaluator(ctx.model, ctx.target);
    struct Row {
        double l2 = 0.0;
        double kl = 0.0;
    };
    std::vector<Row> rows(tasks.size());
    parallel_for(tasks.size(), cfg.workers, [&](std::size_t k) {
        const auto em = draw(ctx, cfg, "variance", tasks[k]);
        const double n = static_cast<double>(tasks[k].n);
        rows[k].l2 = n * evaluator.l2(em, ctx.neighborhood).variance_term;
        rows[k].kl = n * evaluator.kullback(em, ctx.neighborhood).variance_term;
    });

    ExperimentResult result;
    result.experiment = "variance";
    ResultTable replicas("variance_replicas", {integer("n"), integer("replica"), integer("mask"),
                                               real("l2_variance_n"), real("kl_variance_n")});
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        replicas.add_row({icell(tasks[k].n), icell(tasks[k].replica), icell(ctx.neighborhood.mask()), rows[k].l2,
                          rows[k].kl});
    }

    ResultTable summary("variance_summary", {integer("n"), integer("replicas"), real("mean_l2_variance_n"),
                                             real("mean_kl_variance_n"), integer("kl_infinite")});
    std::vector<double> xs, l2_means, kl_means;
    std::uint64_t kl_infinite_total = 0;
    for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
        double l2 = 0.0, kl = 0.0;
        std::uint64_t finite = 0, infinite = 0;
        for (std::uint64_t r = 0; r < cfg.replicas; ++r) {
            const Row& row = rows[g * cfg.replicas + r];
            l2 += row.l2;
            if (std::isfinite(row.kl)) {
                kl += row.kl;
                ++finite;
            } else {
                ++infinite;
            }
        }
        const double l2_mean = l2 / static_cast<double>(cfg.replicas);
        const double kl_mean = finite ? kl / static_cast<double>(finite) : kNaN;
        summary.add_row({icell(cfg.n_grid[g]), icell(cfg.replicas), l2_mean, kl_mean, icell(infinite)});
        xs.push_back(static_cast<double>(cfg.n_grid[g]));
        l2_means.push_back(l2_mean);
        kl_means.push_back(kl_mean);
        kl_infinite_total += infinite;
    }
    if (kl_infinite_total > 0) {
        result.warnings.push_back(std::to_string(kl_infinite_total) +
                                  " replicas had an infinite Kullback variance term; means use the finite ones");
    }

    ResultTable fits("variance_fit", {{"loss", ColumnType::Text}, real("slope"), real("intercept"), real("mean_level"),
                                      real("n_min"), real("n_max"), real("band_ratio"), integer("defined")});
    for (auto [loss, ys] : {std::pair<const char*, const std::vector<double>*>{"l2", &l2_means}, {"kl", &kl_means}}) {
        const LineFit f = least_squares(xs, *ys);
        const double band = f.defined ? std::abs(f.slope) * (f.x_max - f.x_min) / f.level : kNaN;
        fits.add_row({std::string(loss), f.slope, f.intercept, f.level, f.x_min, f.x_max, band,
                      icell(f.defined ? 1 : 0)});
        if (!f.defined) result.warnings.push_back(std::string("regression slope undefined for ") + loss);
    }
    result.tables = {std::move(replicas), std::move(summary), std::move(fits)};
    return result;
}

ExperimentResult run_slope_figure(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
    const ModelCollection base = base_collection(cfg, ctx);
    const RiskEvaluator evaluator(ctx.model, ctx.target);
    const auto grid = cfg.slope.grid();
    struct Row {
        PenaltyPath path;
        std::size_t candidates = 0;
        bool no_jump = false;
        Jump jump;
        SiteSubset chosen;
        SiteSubset oracle;
        double max_complexity = 0.0;
    };
    std::vector<Row> rows(cfg.slope_replicas);
    parallel_for(rows.size(), cfg.workers, [&](std::size_t r) {
        const auto em = draw(ctx, cfg, "slope", {cfg.slope_n, r});
        const ModelCollection coll = filtered_collection(base, cfg, ctx, em);
        Row& row = rows[r];
        row.candidates = coll.size();
        row.path = penalty_path(coll, em, cfg.loss, cfg.slope.complexity, grid, &ctx.model);
        row.max_complexity = -kInf;
        for (double c : row.path.complexities) row.max_complexity = std::max(row.max_complexity, c);
        const CalibrationResult cal = calibrate_path(coll, row.path, {cfg.slope.jump_rule, true, &ctx.model});
        row.no_jump = cal.flat;
        row.jump = {cal.k_min, cal.jump_size, 0};
        row.chosen = cal.chosen;
        row.oracle = oracle_search(evaluator, em, coll, cfg.loss).chosen;
    });

    ExperimentResult result;
    result.experiment = "slope";
    ResultTable path("slope_path", {integer("replica"), real("K"), integer("chosen_mask"), integer("v"),
                                    real("complexity"), real("criterion")});
    ResultTable summary("slope_summary",
                        {integer("replica"), integer("n"), integer("candidates"), real("k_min"), real("jump_size"),
                         integer("no_jump"), integer("chosen_mask"), integer("chosen_v"), integer("oracle_mask"),
                         integer("oracle_v"), integer("oracle_match"), real("max_complexity")});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Row& row = rows[r];
        for (const auto& p : row.path.points) {
            path.add_row({icell(r), p.k, icell(p.chosen.mask()), icell(static_cast<std::uint64_t>(p.chosen.size())),
                          p.complexity, p.criterion});
        }
        summary.add_row({icell(r), icell(cfg.slope_n), icell(row.candidates), row.jump.k_min,
                         row.no_jump ? kNaN : row.jump.jump_size, icell(row.no_jump ? 1 : 0),
                         icell(row.chosen.mask()), icell(static_cast<std::uint64_t>(row.chosen.size())),
                         icell(row.oracle.mask()), icell(static_cast<std::uint64_t>(row.oracle.size())),
                         icell(row.chosen == row.oracle ? 1 : 0), row.max_complexity});
        if (row.no_jump) result.warnings.push_back("replica " + std::to_string(r) + ": flat penalty path, no jump");
    }
    result.tables = {std::move(path), std::move(summary)};
    return result;
}

double risk_ratio(double risk, double oracle_risk) {
    if (oracle_risk == 0.0) return risk == 0.0 ? 1.0 : kInf;
    return risk / oracle_risk;
}

double RiskRatioOutcome::sh_ratio() const { return risk_ratio(sh_risk, oracle_risk); }
double RiskRatioOutcome::theory_ratio() const { return risk_ratio(theory_risk, oracle_risk); }

RiskRatioOutcome evaluate_risk_ratio(const RiskEvaluator& evaluator, const ModelCollection& coll,
                                     const Measure& estimate, std::span<const double> fits, std::uint64_t n,
                                     const ExperimentConfig& cfg) {
    RiskRatioOutcome out;
    const OracleResult orc = oracle_search(evaluator, estimate, coll, cfg.loss);
    out.oracle = orc.chosen;
    out.oracle_risk = orc.risk;

    const auto complexities = penalty_complexities(coll, estimate, n, cfg.risk_ratio.complexity, evaluator.model());
    PenaltyPath path = penalty_path(coll, std::vector<double>(fits.begin(), fits.end()), complexities,
                                    cfg.risk_ratio.grid(), cfg.loss, cfg.risk_ratio.complexity);
    const CalibrationResult cal = calibrate_path(coll, std::move(path), {cfg.risk_ratio.jump_rule, true, nullptr});
    out.sh_k_min = cal.k_min;
    out.sh_flat = cal.flat;
    out.sh = cal.chosen;
    out.sh_risk = orc.risks[index_in(coll, cal.chosen)];

    const int a = estimate.alphabet_size();
    const PenaltySpec theory = cfg.loss == LossKind::L2 ? PenaltySpec::l2_theory(cfg.theory_k, a)
                                                        : PenaltySpec::kullback_theory(cfg.theory_k);
    std::vector<double> penalties;
    penalties.reserve(coll.size());
    for (SiteSubset v : coll.candidates) penalties.push_back(theory.value(v, a, n));
    out.theory = select_from(coll, fits, penalties).chosen;
    out.theory_risk = orc.risks[index_in(coll, out.theory)];
    return out;
}

ExperimentResult run_risk_ratio(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
    const ModelCollection base = base_collection(cfg, ctx);
    const RiskEvaluator evaluator(ctx.model, ctx.target);
    const auto tasks = grid_tasks(cfg.n_grid, cfg.replicas);
    std::vector<RiskRatioOutcome> outcomes(tasks.size());
    std::vector<std::size_t> sizes(tasks.size());
    parallel_for(tasks.size(), cfg.workers, [&](std::size_t k) {
        const auto em = draw(ctx, cfg, "risk-ratio", tasks[k]);
        const ModelCollection coll = filtered_collection(base, cfg, ctx, em);
        sizes[k] = coll.size();
        outcomes[k] = evaluate_risk_ratio(evaluator, coll, em, compute_fits(coll, em, cfg.loss), em.n(), cfg);
    });

    ExperimentResult result;
    result.experiment = "risk-ratio";
    ResultTable replicas("risk_ratio_replicas",
                         {integer("n"), integer("replica"), integer("candidates"), integer("oracle_mask"),
                          integer("oracle_v"), real("oracle_risk"), real("sh_k_min"), integer("sh_flat"),
                          integer("sh_mask"), integer("sh_v"), real("sh_risk"), real("sh_ratio"),
                          integer("theory_mask"), integer("theory_v"), real("theory_risk"), real("theory_ratio")});
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        const auto& o = outcomes[k];
        replicas.add_row({icell(tasks[k].n), icell(tasks[k].replica), icell(sizes[k]), icell(o.oracle.mask()),
                          icell(static_cast<std::uint64_t>(o.oracle.size())), o.oracle_risk, o.sh_k_min,
                          icell(o.sh_flat ? 1 : 0), icell(o.sh.mask()), icell(static_cast<std::uint64_t>(o.sh.size())),
                          o.sh_risk, o.sh_ratio(), icell(o.theory.mask()),
                          icell(static_cast<std::uint64_t>(o.theory.size())), o.theory_risk, o.theory_ratio()});
    }

    ResultTable summary("risk_ratio_summary", {integer("n"), integer("replicas"), real("mean_sh_ratio"),
                                               real("mean_theory_ratio"), integer("sh_infinite"),
                                               integer("theory_infinite"), integer("sh_flat")});
    for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
        double sh = 0.0, th = 0.0;
        std::uint64_t sh_fin = 0, th_fin = 0, flat = 0;
        for (std::uint64_t r = 0; r < cfg.replicas; ++r) {
            const auto& o = outcomes[g * cfg.replicas + r];
            const double a = o.sh_ratio();
            const double b = o.theory_ratio();
            if (std::isfinite(a)) {
                sh += a;
                ++sh_fin;
            }
            if (std::isfinite(b)) {
                th += b;
                ++th_fin;
            }
            flat += o.sh_flat ? 1 : 0;
        }
        summary.add_row({icell(cfg.n_grid[g]), icell(cfg.replicas), sh_fin ? sh / static_cast<double>(sh_fin) : kNaN,
                         th_fin ? th / static_cast<double>(th_fin) : kNaN, icell(cfg.replicas - sh_fin),
                         icell(cfg.replicas - th_fin), icell(flat)});
        if (sh_fin < cfg.replicas || th_fin < cfg.replicas) {
            result.warnings.push_back("n = " + std::to_string(cfg.n_grid[g]) +
                                      ": infinite risk ratios excluded from the means");
        }
    }
    result.tables = {std::move(replicas), std::move(summary)};
    return result;
}

RunMetadata make_metadata(const std::string& experiment, const ExperimentConfig& cfg, const ExperimentContext& ctx) {
    RunMetadata meta;
    meta.experiment = experiment;
    meta.schema_version = kSchemaVersion;
    meta.config_hash = config_hash(cfg);
    meta.config_text = canonical_text(cfg);
    meta.seed = cfg.seed;
    meta.model_source = ctx.model_source;
    meta.model_hash = ctx.model_hash;
    meta.code_version = code_version();
    meta.created_utc = utc_timestamp();
    return meta;
}

EmitSummary emit_experiment(const ExperimentResult& result, const std::string& dir, const RunMetadata& meta) {
    EmitSummary out;
    out.warnings = result.warnings;
    for (const auto& table : result.tables) {
        const EmitResult r = emit_outputs(table, dir, meta);
        out.paths.push_back(r.csv_path);
        out.paths.push_back(r.metadata_path);
        out.warnings.insert(out.warnings.end(), r.warnings.begin(), r.warnings.end());
    }
    out.paths.push_back(write_plot_script(result.experiment, dir));
    return out;
}

} // namespace fieldsel
