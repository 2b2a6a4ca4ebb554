// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "brute_force.hpp"
#include "fieldsel/bench.hpp"
#include "fieldsel/empirical.hpp"
#include "fieldsel/risk.hpp"
#include "fieldsel/rng.hpp"
#include "fieldsel/selection.hpp"
#include "test_support.hpp"

using namespace fieldsel;
using namespace fieldsel::testing;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 1234;

unsigned workers() { return std::max(1U, std::thread::hardware_concurrency()); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

class Suite {
public:
    void run(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = budget_s <= 0.0 || secs < budget_s;
        const bool pass = o.pass && in_time;
        if (!in_time) o.detail += "; over the " + fmt("%.0f", budget_s) + " s budget";
        std::printf("%s  %d  %-34s %s (%.2f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failures_ += pass ? 0 : 1;
    }
    int failures() const { return failures_; }

private:
    int failures_ = 0;
};

Outcome closed_form() {
    const GibbsModel m = ising3x3();
    const Codec cd = m.codec();
    const SiteSubset all = SiteSubset::full(9);
    double worst = 0.0;
    for (Code c = 0; c < cd.table_size(); ++c) {
        const Configuration x = cd.decode(c);
        worst = std::max(worst, std::abs(exact_conditional(m, kCenter, all, x) -
                                         ising_closed_form_conditional(m, kCenter, x)));
    }
    return {worst <= 1e-12, "max abs error " + fmt("%.3g", worst) + " over 512 configurations"};
}

Outcome decompositions() {
    std::mt19937_64 rng(kSeed);
    const std::vector<GibbsModel> models{uniform3x3(), ising3x3(), ising3x3(1.0)};
    double worst = 0.0;
    int triples = 0, infinite = 0;
    bool consistent = true;
    auto check = [&](const GibbsModel& m, const EmpiricalMeasure& em, SiteSubset v) {
        const int target = kCenter;
        for (const RiskReport& r :
             {l2_risk_decomposition(m, em, target, v), kullback_risk_decomposition(m, em, target, v)}) {
            if (std::isfinite(r.total)) {
                worst = std::max(worst, std::abs(r.total - r.bias_term - r.variance_term));
            } else {
                // An infinite total must come from the variance term alone.
                consistent = consistent && std::isinf(r.variance_term) && std::isfinite(r.bias_term);
                ++infinite;
            }
        }
        ++triples;
    };
    for (std::size_t k = 0; k < 240; ++k) {
        const GibbsModel& m = models[k % models.size()];
        const std::uint64_t n = k % 8 == 0 ? 1 : 1 + rng() % 3000;
        const EmpiricalMeasure em = fit(sample(m, n, rng(), 0));
        check(m, em, random_subset_with(9, kCenter, rng));
    }
    return {triples >= 200 && consistent && worst <= 1e-10,
            std::to_string(triples) + " triples, max |total - bias - variance| " + fmt("%.3g", worst) + ", " +
                std::to_string(infinite) + " infinite Kullback totals"};
}

Outcome variance_scaling() {
    ExperimentConfig cfg;
    cfg.n_grid.clear();
    for (std::uint64_t n = 100; n <= 5000; n += 100) cfg.n_grid.push_back(n);
    cfg.replicas = 100;
    cfg.seed = kSeed;
    cfg.workers = workers();
    const ExperimentResult r = run_variance_experiment(cfg, load_context(cfg));
    const ResultTable& fits = r.table("variance_fit");
    double l2 = 0.0, kl = 0.0;
    for (std::size_t k = 0; k < fits.rows.size(); ++k) {
        const double band = fits.real(k, "band_ratio");
        (std::get<std::string>(fits.rows[k][0]) == "l2" ? l2 : kl) = band;
    }
    return {l2 <= 0.25 && kl <= 0.25,
            "|beta|(n_max - n_min)/level: L2 " + fmt("%.4f", l2) + ", Kullback " + fmt("%.4f", kl) + " (limit 0.25)"};
}

struct SlopeCounts {
    int maximal = 0;
    int oracle = 0;
};

SlopeCounts slope_runs() {
    ExperimentConfig cfg;
    cfg.seed = kSeed;
    cfg.slope_n = 500;
    cfg.slope_replicas = 100;
    cfg.slope.complexity = ComplexityKind::L2Variance;
    cfg.workers = workers();
    const ExperimentResult r = run_slope_figure(cfg, load_context(cfg));
    const ResultTable& path = r.table("slope_path");
    const ResultTable& summary = r.table("slope_summary");
    SlopeCounts out;
    for (std::size_t rep = 0; rep < summary.rows.size(); ++rep) {
        const double max_cx = summary.real(rep, "max_complexity");
        bool maximal = true;
        for (std::size_t p = 0; p < path.rows.size(); ++p) {
            if (static_cast<std::size_t>(path.integer(p, "replica")) != rep || path.real(p, "K") >= 0.9) continue;
            maximal = maximal && path.real(p, "complexity") == max_cx;
        }
        const double k_min = summary.real(rep, "k_min");
        if (maximal && k_min >= 0.7 && k_min <= 1.5) ++out.maximal;
        out.oracle += static_cast<int>(summary.integer(rep, "oracle_match"));
    }
    return out;
}

Outcome risk_ratio_bands() {
    ExperimentConfig cfg;
    cfg.n_grid = {2000, 10000};
    cfg.replicas = 100;
    cfg.seed = kSeed;
    cfg.workers = workers();
    const ExperimentResult r = run_risk_ratio(cfg, load_context(cfg));
    const ResultTable& s = r.table("risk_ratio_summary");
    const double sh_small = s.real(0, "mean_sh_ratio");
    const double sh_large = s.real(1, "mean_sh_ratio");
    const double th_large = s.real(1, "mean_theory_ratio");
    const bool finite = s.integer(0, "sh_infinite") == 0 && s.integer(1, "sh_infinite") == 0 &&
                        s.integer(1, "theory_infinite") == 0;
    return {finite && sh_small <= 1.5 && sh_large <= 1.2 && sh_large <= th_large,
            "slope heuristic " + fmt("%.4f", sh_small) + " at n=2000 (limit 1.5), " + fmt("%.4f", sh_large) +
                " at n=10000 (limit 1.2); theoretical constant " + fmt("%.4f", th_large) + " at n=10000"};
}

Outcome typicality() {
    const GibbsModel m = ising3x3();
    constexpr int kReplicas = 1000;
    std::vector<char> holds(kReplicas, 0);
    parallel_for(kReplicas, workers(), [&](std::size_t r) {
        const EmpiricalMeasure em = fit(sample(m, 2000, kSeed, derive_stream(kSeed, "typicality", 2000, r)));
        holds[r] = omega_prob_holds(m, em, kCenter, 10.0, 9) ? 1 : 0;
    });
    const int count = static_cast<int>(std::count(holds.begin(), holds.end(), 1));
    return {count >= 900, std::to_string(count) + "/1000 replicas (need 900)"};
}

Outcome brute_force() {
    std::mt19937_64 rng(kSeed);
    // Fixed four-site grid: chain, cycle, a random pairwise model and a three-symbol clique model.
    const SiteSet four(names(4));
    std::vector<GibbsModel> models{
        build_ising(four, {{0, 1, 0.5}, {1, 2, 0.5}, {2, 3, 0.5}}),
        build_ising(four, {{0, 1, 1.0}, {1, 2, -1.0}, {2, 3, 1.0}, {3, 0, -1.0}}),
        random_ising(4, rng, 0.7, 1.0),
        random_gibbs(4, 3, rng, 1.0),
    };
    int mismatches = 0;
    constexpr int kBatches = 500;
    for (int b = 0; b < kBatches; ++b) {
        const GibbsModel& m = models[static_cast<std::size_t>(b) % models.size()];
        const int target = static_cast<int>(rng() % 4);
        const int s = 1 + static_cast<int>(rng() % 4);
        const std::size_t n = 1 + rng() % 500;
        const SampleBatch batch = sample(m, n, rng(), 0);
        const EmpiricalMeasure em = fit(batch);
        const auto rows = decoded_rows(batch);
        const ModelCollection coll = enumerate_models(4, target, s);
        for (bool l2 : {true, false}) {
            const double constant = 0.05 * static_cast<double>(rng() % 60);
            const BruteChoice want = brute_select(rows, m.alphabet_size(), target, s, l2, constant);
            const SelectionResult got = select(coll, em, PenaltySpec::power(l2 ? LossKind::L2 : LossKind::Kullback, constant));
            mismatches += got.chosen.mask() != want.mask || got.chosen_value != want.total;
        }
    }
    return {mismatches == 0, std::to_string(mismatches) + " mismatches over " + std::to_string(kBatches) +
                                 " batches (both losses), " + std::to_string(models.size()) + " models"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Outcome determinism() {
    const fs::path conf = fs::path(FIELDSEL_SOURCE_DIR) / "configs" / "determinism.conf";
    ExperimentConfig cfg = load_config(conf.string());
    const ExperimentContext ctx = load_context(cfg);
    const fs::path root = fs::temp_directory_path() / "fieldsel_acceptance_determinism";
    fs::remove_all(root);
    for (unsigned w : {1U, 8U}) {
        cfg.workers = w;
        emit_experiment(run_risk_ratio(cfg, ctx), (root / ("w" + std::to_string(w))).string(),
                        make_metadata("risk-ratio", cfg, ctx));
    }
    bool same = true;
    for (const char* t : {"risk_ratio_replicas.csv", "risk_ratio_summary.csv"}) {
        same = same && slurp(root / "w1" / t) == slurp(root / "w8" / t);
    }
    fs::remove_all(root);
    return {same, same ? "CSV bodies identical for 1 and 8 workers" : "CSV bodies differ"};
}

} // namespace

int main() {
    Suite suite;
    suite.run(1, "conditional closed form", 1.0, closed_form);
    suite.run(2, "decomposition identities", 10.0, decompositions);
    suite.run(3, "variance scaling", 300.0, variance_scaling);

    // Criteria 4 and 5 share one batch of 100 slope runs.
    SlopeCounts slope;
    suite.run(4, "slope heuristic jump", 600.0, [&] {
        slope = slope_runs();
        return Outcome{slope.maximal >= 90, std::to_string(slope.maximal) + "/100 runs (need 90)"};
    });
    suite.run(5, "oracle match at twice k_min", 0.0, [&] {
        return Outcome{slope.oracle >= 70, std::to_string(slope.oracle) + "/100 runs (need 70)"};
    });
    suite.run(6, "risk ratio convergence", 1800.0, risk_ratio_bands);
    suite.run(7, "typicality frequency", 300.0, typicality);
    suite.run(8, "selection brute-force equivalence", 60.0, brute_force);
    suite.run(9, "determinism across workers", 0.0, determinism);

    std::printf("%d of 9 criteria failed\n", suite.failures());
    return suite.failures() == 0 ? 0 : 1;
}
