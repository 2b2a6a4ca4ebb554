// fieldsel: experiment runner and small utilities.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fieldsel/bench.hpp"
#include "fieldsel/config.hpp"
#include "fieldsel/empirical.hpp"
#include "fieldsel/errors.hpp"
#include "fieldsel/model_file.hpp"
#include "fieldsel/selection.hpp"

namespace {

using namespace fieldsel;

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct RunOptions {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::optional<std::string> loss;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
    cmd->add_option("--config", o.config, "Experiment config file (defaults apply when omitted)");
    cmd->add_option("--out", o.out, "Output directory (overrides [run] output)");
    cmd->add_option("--seed", o.seed, "Base seed (overrides [run] seed)");
    cmd->add_option("--workers", o.workers, "Worker threads (overrides [run] workers)")->check(CLI::PositiveNumber);
    cmd->add_option("--loss", o.loss, "Loss: l2 or kl (overrides [selection] loss)")
        ->check(CLI::IsMember({"l2", "kl"}));
}

int run_experiment(const std::string& verb, const RunOptions& o) {
    ExperimentConfig cfg;
    ExperimentContext ctx;
    try {
        if (!o.config.empty()) cfg = load_config(o.config);
        if (o.out) cfg.output_dir = *o.out;
        if (o.seed) cfg.seed = *o.seed;
        if (o.workers) cfg.workers = *o.workers;
        if (o.loss) cfg.loss = parse_loss_kind(*o.loss);
        ctx = load_context(cfg);
        base_collection(cfg, ctx);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    try {
        ExperimentResult result;
        if (verb == "variance") result = run_variance_experiment(cfg, ctx);
        else if (verb == "slope") result = run_slope_figure(cfg, ctx);
        else result = run_risk_ratio(cfg, ctx);
        const EmitSummary summary = emit_experiment(result, cfg.output_dir, make_metadata(verb, cfg, ctx));
        for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
        for (const auto& p : summary.paths) std::cout << p << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}

GibbsModel model_or_default(const std::string& path) {
    if (!path.empty()) return load_model(path);
    std::istringstream in(default_ising_3x3_text());
    return parse_model(in, "builtin:ising3x3");
}

struct SampleOptions {
    std::string model;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::string out;
};

int run_sample(const SampleOptions& o) {
    GibbsModel model;
    try {
        model = model_or_default(o.model);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    try {
        const SampleBatch batch = sample(model, o.n, o.seed, o.stream);
        if (o.out.empty() || o.out == "-") {
            write_samples_csv(std::cout, batch);
        } else {
            std::ofstream out(o.out, std::ios::binary);
            if (!out) throw IoError("cannot open '" + o.out + "' for writing");
            write_samples_csv(out, batch);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}

struct SelectOptions {
    std::string model;
    std::string samples;
    std::string target = "0,0";
    std::optional<int> s;
    std::string loss = "l2";
    double k = 2.0;
    std::optional<double> constant;
    std::string filter = "none";
    double lambda = kDefaultLambda;
    double delta = kDefaultDelta;
    std::optional<double> p_star;
    std::string out;
};

int run_select(const SelectOptions& o) {
    GibbsModel model;
    SampleBatch batch;
    ModelCollection coll;
    PenaltySpec pen;
    FilterParams params;
    try {
        model = model_or_default(o.model);
        std::ifstream in(o.samples);
        if (!in) throw IoError("cannot open samples file '" + o.samples + "'");
        batch = read_samples_csv(in, model.sites(), model.alphabet(), o.samples);
        if (!model.sites().contains(o.target)) throw ValidationError("unknown target site '" + o.target + "'");
        const int target = model.sites().index_of(o.target);
        coll = enumerate_models(model.site_count(), target, o.s.value_or(model.site_count()));
        const LossKind loss = parse_loss_kind(o.loss);
        if (o.constant) pen = PenaltySpec::power(loss, *o.constant);
        else pen = loss == LossKind::L2 ? PenaltySpec::l2_theory(o.k, model.alphabet_size())
                                        : PenaltySpec::kullback_theory(o.k);
        params = FilterParams{parse_filter_kind(o.filter), o.lambda, o.delta, o.p_star};
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    }
    try {
        const EmpiricalMeasure em = fit(batch);
        if (params.kind == FilterKind::TrueLambda || params.kind == FilterKind::TrueLambdaPStar) {
            coll = filter_collection(coll, model, em.n(), params);
        } else if (params.kind != FilterKind::None) {
            coll = filter_collection(coll, em, params);
        }
        if (coll.hypotheses_violated) std::cerr << "warning: lambda < 100 or delta <= 1\n";
        const SelectionResult result = select(coll, em, pen);
        std::ostringstream report;
        write_selection_report(report, coll, result, model.sites());
        if (o.out.empty() || o.out == "-") {
            std::cout << report.str();
        } else {
            std::ofstream out(o.out, std::ios::binary);
            if (!out) throw IoError("cannot open '" + o.out + "' for writing");
            out << report.str();
        }
        std::cerr << "selected:";
        for (int site : result.chosen.sites()) std::cerr << ' ' << model.sites().name(site);
        std::cerr << (result.tie_break_applied ? " (tie broken)" : "") << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neighbourhood selection for one-point conditional probabilities of discrete random fields"};
    app.require_subcommand(1);

    RunOptions variance_opts, slope_opts, ratio_opts;
    auto* variance = app.add_subcommand("variance", "Normalized variance terms across sample sizes");
    add_run_options(variance, variance_opts);
    auto* slope = app.add_subcommand("slope", "Penalty path and minimal-constant detection");
    add_run_options(slope, slope_opts);
    auto* ratio = app.add_subcommand("risk-ratio", "Risk ratios of calibrated and theoretical penalties");
    add_run_options(ratio, ratio_opts);

    SampleOptions sample_opts;
    auto* sample_cmd = app.add_subcommand("sample", "Draw an i.i.d. sample as CSV");
    sample_cmd->add_option("--model", sample_opts.model, "Model file (default: built-in 3x3 model)");
    sample_cmd->add_option("-n,--n", sample_opts.n, "Sample size")->required();
    sample_cmd->add_option("--seed", sample_opts.seed, "Seed");
    sample_cmd->add_option("--stream", sample_opts.stream, "Stream id");
    sample_cmd->add_option("--out", sample_opts.out, "Output file (default: stdout)");

    SelectOptions select_opts;
    auto* select_cmd = app.add_subcommand("select", "Penalized selection on a sample file");
    select_cmd->add_option("--model", select_opts.model, "Model file (default: built-in 3x3 model)");
    select_cmd->add_option("--samples", select_opts.samples, "Sample CSV")->required();
    select_cmd->add_option("--target", select_opts.target, "Target site name");
    select_cmd->add_option("--s", select_opts.s, "Maximal cardinality");
    select_cmd->add_option("--loss", select_opts.loss, "l2 or kl")->check(CLI::IsMember({"l2", "kl"}));
    select_cmd->add_option("--K", select_opts.k, "Theoretical constant K");
    select_cmd->add_option("--constant", select_opts.constant, "Explicit multiplier of a^v/n");
    select_cmd->add_option("--filter", select_opts.filter, "Collection filter");
    select_cmd->add_option("--lambda", select_opts.lambda, "Filter Lambda");
    select_cmd->add_option("--delta", select_opts.delta, "Filter delta");
    select_cmd->add_option("--p-star", select_opts.p_star, "Filter p*");
    select_cmd->add_option("--out", select_opts.out, "Report file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    if (*variance) return run_experiment("variance", variance_opts);
    if (*slope) return run_experiment("slope", slope_opts);
    if (*ratio) return run_experiment("risk-ratio", ratio_opts);
    if (*sample_cmd) return run_sample(sample_opts);
    return run_select(select_opts);
}
