#include <doctest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fieldsel/errors.hpp"
#include "fieldsel/field.hpp"
#include "fieldsel/rng.hpp"
#include "test_support.hpp"

using namespace fieldsel;
using namespace fieldsel::testing;

namespace {

Configuration restricted(const Codec& cd, Code full, SiteSubset v) {
    Configuration x = Configuration::unset(cd.site_count());
    for (int s : v.sites()) x.values[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(cd.digit(full, s));
    return x;
}

// Sum of joint probabilities over all completions, by brute force.
double brute_marginal(const GibbsModel& m, SiteSubset v, Code full) {
    const Codec& cd = m.codec();
    double total = 0.0;
    for (Code c = 0; c < cd.table_size(); ++c) {
        bool match = true;
        for (int s : v.sites()) match = match && cd.digit(c, s) == cd.digit(full, s);
        if (match) total += m.probabilities()[c];
    }
    return total;
}

} // namespace

TEST_CASE("codec round trip and projections") {
    const Codec cd(3, 4);
    CHECK(cd.table_size() == 81);
    for (Code c = 0; c < cd.table_size(); ++c) {
        const Configuration x = cd.decode(c);
        CHECK(cd.encode(x) == c);
        const SiteSubset v = SiteSubset::of({1, 3});
        const Code local = cd.project(c, v);
        CHECK(local == static_cast<Code>(x.values[1] + 3 * x.values[3]));
        CHECK(cd.encode_local(x, v) == local);
        CHECK(cd.drop_digit(local, 0) == x.values[3]);
        CHECK(cd.drop_digit(local, 1) == x.values[1]);
    }
    // Site 0 is the fastest digit.
    CHECK(cd.encode(Configuration{{1, 0, 0, 0}}) == 1);
    CHECK(cd.encode(Configuration{{0, 0, 0, 1}}) == 27);
}

TEST_CASE("site subsets") {
    const SiteSubset v = SiteSubset::of({0, 2, 5});
    CHECK(v.size() == 3);
    CHECK(v.contains(2));
    CHECK_FALSE(v.contains(1));
    CHECK(v.rank_of(5) == 2);
    CHECK(v.without(2) == SiteSubset::of({0, 5}));
    CHECK(SiteSubset::full(4).includes(SiteSubset::of({1, 3})));
    CHECK(canonical_less(SiteSubset(0b1000), SiteSubset(0b0011)));
    CHECK(canonical_less(SiteSubset(0b0101), SiteSubset(0b0110)));
}

TEST_CASE("site sets and alphabets") {
    const SiteSet g = SiteSet::grid(3, 3, true);
    CHECK(g.size() == 9);
    CHECK(g.name(0) == "-1,-1");
    CHECK(g.index_of("0,0") == 4);
    CHECK_THROWS_AS(SiteSet({"a", "a"}), ValidationError);
    CHECK_THROWS_AS(Alphabet({1}), ValidationError);
    CHECK_THROWS_AS(Alphabet({1, 1}), ValidationError);
    CHECK(Alphabet::spins().index_of(1) == 1);
}

TEST_CASE("build_ising examples") {
    SUBCASE("zero coupling is uniform") {
        const GibbsModel m = uniform3x3();
        for (double p : m.probabilities()) CHECK(p == doctest::Approx(1.0 / 512).epsilon(1e-14));
    }
    SUBCASE("single free site") {
        const GibbsModel m = build_ising(SiteSet({"a"}), std::vector<Coupling>{}, {0.0});
        CHECK(m.probabilities()[0] == doctest::Approx(0.5));
        CHECK(m.probabilities()[1] == doctest::Approx(0.5));
    }
    SUBCASE("two sites, J = 0.2") {
        const GibbsModel m = two_site(0.2);
        // Hand normalization of the four-configuration partition function.
        const double z = 2.0 * std::exp(0.2) + 2.0 * std::exp(-0.2);
        const double same = std::exp(0.2) / z;
        const double diff = std::exp(-0.2) / z;
        // codes: 0 = (-,-), 1 = (+,-), 2 = (-,+), 3 = (+,+)
        CHECK(std::abs(m.probabilities()[3] - same) < 1e-15);
        CHECK(std::abs(m.probabilities()[0] - same) < 1e-15);
        CHECK(std::abs(m.probabilities()[1] - diff) < 1e-15);
        // Frozen from the hand normalization; the rounded reference 0.29933 / 0.20067 is truncated.
        CHECK(std::abs(m.probabilities()[3] - 0.29934383005622) < 1e-13);
        CHECK(std::abs(m.probabilities()[1] - 0.20065616994378) < 1e-13);
        CHECK(std::abs(m.probabilities()[3] - 0.29933) < 2e-5);
        CHECK(m.log_partition() == doctest::Approx(std::log(z)).epsilon(1e-14));
    }
}

TEST_CASE("build_ising errors") {
    std::vector<std::string> many;
    for (int k = 0; k < 21; ++k) many.push_back("s" + std::to_string(k));
    CHECK_THROWS_AS(build_ising(SiteSet(many), {}), CapacityError);
    CHECK_THROWS_AS(build_ising(SiteSet({"a", "b"}), {{0, 0, 0.1}}), ValidationError);
    CHECK_THROWS_AS(build_ising(SiteSet({"a", "b"}), {{0, 1, NAN}}), ValidationError);
    CHECK_THROWS_AS(build_ising(SiteSet({"a", "b"}), {{0, 1, INFINITY}}), ValidationError);
    CHECK_THROWS_AS(build_ising(SiteSet({"a", "b"}), {{0, 1, 0.1}, {1, 0, 0.2}}), ValidationError);
    CHECK_THROWS_AS(build_ising(SiteSet({"a", "b"}), {{0, 2, 0.1}}), ValidationError);
    CHECK_THROWS_AS(build_ising(SiteSet({"a", "b"}), std::vector<Coupling>{}, {0.1}), ValidationError);
    // 3^13 > 2^20 configurations.
    std::vector<std::string> thirteen(many.begin(), many.begin() + 13);
    CHECK_THROWS_AS(build_ising(SiteSet(thirteen), Alphabet({0, 1, 2}), {}), CapacityError);
}

TEST_CASE("build_gibbs validates energies") {
    const SiteSet s({"a", "b"});
    CHECK_THROWS_AS(build_gibbs(s, Alphabet::spins(), {{{0, 1}, {0, 0, 0}}}), ValidationError);
    CHECK_THROWS_AS(build_gibbs(s, Alphabet::spins(), {{{0, 1}, {0, 0, 0, INFINITY}}}), ValidationError);
    CHECK_THROWS_AS(build_gibbs(s, Alphabet::spins(), {{{0, 0}, {0, 0, 0, 0}}}), ValidationError);
    CHECK_THROWS_AS(build_gibbs(s, Alphabet::spins(), {{{0, 1}, {-INFINITY, -INFINITY, -INFINITY, -INFINITY}}}),
                    ValidationError);
    const GibbsModel m = build_gibbs(s, Alphabet::spins(), {{{0, 1}, {-INFINITY, 0, 0, 0}}});
    CHECK(m.probabilities()[0] == 0.0);
    CHECK(m.probabilities()[1] == doctest::Approx(1.0 / 3));
}

TEST_CASE("joint_probability") {
    const GibbsModel u = uniform3x3();
    const Codec& cd = u.codec();
    CHECK(joint_probability(u, cd.decode(77)) == doctest::Approx(1.0 / 512));
    const GibbsModel m = two_site(0.2);
    CHECK(std::abs(joint_probability(m, Configuration{{1, 1}}) - 0.29934383005622) < 1e-13);
    Configuration partial = Configuration::unset(9);
    partial.values[0] = 1;
    CHECK_THROWS_AS(joint_probability(u, partial), ValidationError);
    CHECK_THROWS_AS(joint_probability(u, Configuration{{0, 1}}), ValidationError);
    const GibbsModel j = ising3x3();
    const double total = std::accumulate(j.probabilities().begin(), j.probabilities().end(), 0.0);
    CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("marginal_probability") {
    const GibbsModel m = ising3x3();
    const Codec& cd = m.codec();
    const SiteSubset full = SiteSubset::full(9);
    CHECK(marginal_probability(m, full, cd.decode(300)) == doctest::Approx(joint_probability(m, cd.decode(300))));
    CHECK(marginal_probability(m, SiteSubset(), Configuration::unset(9)) == doctest::Approx(1.0));
    const GibbsModel u = uniform3x3();
    const SiteSubset three = SiteSubset::of({0, 4, 8});
    for (Code c = 0; c < 512; c += 37) {
        CHECK(marginal_probability(u, three, restricted(cd, c, three)) == doctest::Approx(0.125).epsilon(1e-13));
    }
    // x must be defined on exactly the sites of V.
    CHECK_THROWS_AS(marginal_probability(m, three, restricted(cd, 5, SiteSubset::of({0, 4}))), ValidationError);
    CHECK_THROWS_AS(marginal_probability(m, SiteSubset(1U << 9), Configuration::unset(9)), ValidationError);
    for (Code c = 0; c < 512; c += 11) {
        const SiteSubset v = SiteSubset::of({1, 2, 6});
        CHECK(std::abs(marginal_probability(m, v, restricted(cd, c, v)) - brute_marginal(m, v, c)) < 1e-15);
    }
}

TEST_CASE("exact_conditional") {
    SUBCASE("zero-mass context gives 1/a") {
        // Site b never takes the first symbol.
        const GibbsModel m =
            build_gibbs(SiteSet({"a", "b"}), Alphabet::spins(), {{{0, 1}, {-INFINITY, -INFINITY, 0.3, 0.0}}});
        CHECK(exact_conditional(m, 0, SiteSubset::of({0, 1}), Configuration{{0, 0}}) == 0.5);
        CHECK(exact_conditional(m, 0, SiteSubset::of({0, 1}), Configuration{{1, 0}}) == 0.5);
        CHECK(exact_conditional(m, 0, SiteSubset::of({0, 1}), Configuration{{1, 1}}) ==
              doctest::Approx(1.0 / (1.0 + std::exp(0.3))));
    }
    SUBCASE("uniform model") {
        const GibbsModel u = uniform3x3();
        std::mt19937_64 rng(3);
        for (int t = 0; t < 50; ++t) {
            const int i = static_cast<int>(rng() % 9);
            const SiteSubset v = random_subset_with(9, i, rng);
            const Code c = static_cast<Code>(rng() % 512);
            CHECK(exact_conditional(u, i, v, restricted(u.codec(), c, v)) == doctest::Approx(0.5).epsilon(1e-13));
        }
    }
    SUBCASE("target must be in V") {
        const GibbsModel m = ising3x3();
        CHECK_THROWS_AS(exact_conditional(m, 4, SiteSubset::of({0, 1}), restricted(m.codec(), 0, SiteSubset::of({0, 1}))),
                        ValidationError);
    }
    SUBCASE("full conditioning set matches the closed form") {
        const GibbsModel m = ising3x3();
        const SiteSubset full = SiteSubset::full(9);
        double worst = 0.0;
        for (Code c = 0; c < 512; ++c) {
            const Configuration x = m.codec().decode(c);
            worst = std::max(worst, std::abs(exact_conditional(m, kCenter, full, x) -
                                             ising_closed_form_conditional(m, kCenter, x)));
        }
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("ising_closed_form_conditional") {
    const GibbsModel zero = uniform3x3();
    for (Code c = 0; c < 512; c += 13) CHECK(ising_closed_form_conditional(zero, kCenter, zero.codec().decode(c)) == 0.5);

    const GibbsModel m = ising3x3();
    // Neighbours of (0,0) are dense sites 1, 3, 5, 7; symbol index 1 is +1.
    Configuration x{{0, 1, 0, 1, 1, 1, 0, 1, 0}};
    const double expected = 1.0 / (1.0 + std::exp(-1.6));
    CHECK(std::abs(ising_closed_form_conditional(m, kCenter, x) - expected) < 1e-15);
    CHECK(std::abs(expected - 0.832018) < 5e-7);
    x.values[1] = 0;
    x.values[3] = 0;
    CHECK(ising_closed_form_conditional(m, kCenter, x) == doctest::Approx(0.5).epsilon(1e-15));

    const GibbsModel clique = build_gibbs(SiteSet({"a", "b"}), Alphabet::spins(), {{{0, 1}, {0, 0.1, 0.2, 0.3}}});
    CHECK_THROWS_AS(ising_closed_form_conditional(clique, 0, Configuration{{0, 0}}), UnsupportedError);
    const GibbsModel ternary = build_ising(SiteSet({"a", "b"}), Alphabet({-1, 0, 1}), {{0, 1, 0.2}});
    CHECK_THROWS_AS(ising_closed_form_conditional(ternary, 0, Configuration{{0, 0}}), UnsupportedError);
}

TEST_CASE("probability table invariants") {
    std::mt19937_64 rng(11);
    std::vector<GibbsModel> models{ising3x3(), ising3x3(1.0), uniform3x3(), random_ising(7, rng),
                                   random_gibbs(4, 3, rng)};
    for (const auto& m : models) {
        const Codec& cd = m.codec();
        const auto p = m.probabilities();
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-12);
        for (double q : p) CHECK(q >= 0.0);
        const auto cdf = m.cdf();
        CHECK(std::is_sorted(cdf.begin(), cdf.end()));
        CHECK(std::abs(cdf.back() - 1.0) <= 1e-12);

        for (int t = 0; t < 10; ++t) {
            const int i = static_cast<int>(rng() % static_cast<unsigned>(cd.site_count()));
            const SiteSubset v = random_subset_with(cd.site_count(), i, rng);
            // Conditionals sum to one over the target symbol in every context.
            const auto cond = m.conditional_table(i, v);
            const int rank = v.rank_of(i);
            std::vector<double> sums(cd.local_size(v.without(i)), 0.0);
            for (Code x = 0; x < cond.size(); ++x) sums[cd.drop_digit(x, rank)] += cond[x];
            for (double s : sums) CHECK(std::abs(s - 1.0) <= 1e-12);

            // Summing out the sites of V \ V' gives the marginal on V'.
            const SiteSubset sub(v.mask() & static_cast<std::uint32_t>(rng()));
            const auto big = m.marginal_table(v);
            const auto small = m.marginal_table(sub);
            std::vector<double> folded(small.size(), 0.0);
            for (Code x = 0; x < big.size(); ++x) {
                Configuration cfg = Configuration::unset(cd.site_count());
                Code rest = x;
                for (int s : v.sites()) {
                    cfg.values[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(rest % static_cast<Code>(cd.alphabet_size()));
                    rest /= static_cast<Code>(cd.alphabet_size());
                }
                folded[cd.encode_local(cfg, sub)] += big[x];
            }
            for (std::size_t k = 0; k < small.size(); ++k) CHECK(std::abs(folded[k] - small[k]) <= 1e-12);
        }
    }
}

TEST_CASE("zero-mass contexts sum to exactly one") {
    const GibbsModel m =
        build_gibbs(SiteSet({"a", "b", "c"}), Alphabet({0, 1, 2}), {{{1, 2}, {-INFINITY, 0, 0, 0, -INFINITY, 0, 0, 0, 0}}});
    const auto cond = m.conditional_table(0, SiteSubset::of({0, 1, 2}));
    for (Code ctx = 0; ctx < 9; ++ctx) {
        double s = 0.0;
        for (Code b = 0; b < 3; ++b) s += cond[b + 3 * ctx];
        if (ctx == 0 || ctx == 4) CHECK(s == 1.0);
        else CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("closed form equals enumeration on random pairwise binary models") {
    std::mt19937_64 rng(2024);
    for (int m = 2; m <= 12; m += 2) {
        const GibbsModel model = random_ising(m, rng, 0.6, 1.5, true);
        const SiteSubset full = SiteSubset::full(m);
        const int i = static_cast<int>(rng() % static_cast<unsigned>(m));
        const auto table = model.conditional_table(i, full);
        double worst = 0.0;
        for (Code c = 0; c < model.codec().table_size(); ++c) {
            worst = std::max(worst,
                             std::abs(table[c] - ising_closed_form_conditional(model, i, model.codec().decode(c))));
        }
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("interaction neighbours") {
    const GibbsModel m = ising3x3();
    CHECK(m.interaction_neighbors(kCenter) == SiteSubset::of({1, 3, 5, 7}));
    CHECK(m.interaction_neighbors(0) == SiteSubset::of({1, 3}));
    CHECK(uniform3x3().interaction_neighbors(kCenter).empty());
}

TEST_CASE("rng and stream derivation") {
    // Published FNV-1a 64-bit test vectors.
    CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
    CHECK(derive_stream(1, "x", 100, 0) == derive_stream(1, "x", 100, 0));
    CHECK(derive_stream(1, "x", 100, 0) != derive_stream(1, "x", 100, 1));
    CHECK(derive_stream(1, "x", 100, 0) != derive_stream(1, "x", 200, 0));
    CHECK(derive_stream(1, "x", 100, 0) != derive_stream(1, "y", 100, 0));
    CHECK(derive_stream(1, "x", 100, 0) != derive_stream(2, "x", 100, 0));
    auto e = make_engine(5, 9);
    for (int k = 0; k < 1000; ++k) {
        const double u = uniform01(e);
        CHECK((u >= 0.0 && u < 1.0));
    }
}

TEST_CASE("sampling") {
    const GibbsModel u = uniform3x3();
    SUBCASE("deterministic per seed and stream") {
        const SampleBatch a = sample(u, 1000, 42, 7);
        const SampleBatch b = sample(u, 1000, 42, 7);
        const SampleBatch c = sample(u, 1000, 42, 8);
        CHECK(a.rows == b.rows);
        CHECK(a.rows != c.rows);
        CHECK(a.size() == 1000);
        CHECK(a.seed == 42);
        CHECK(a.stream == 7);
    }
    SUBCASE("n = 0 is rejected") { CHECK_THROWS_AS(sample(u, 0, 1, 1), ValidationError); }
    SUBCASE("uniform frequencies within 5 standard errors") {
        const std::size_t n = 100000;
        const SampleBatch b = sample(u, n, 1, 1);
        std::vector<double> counts(512, 0.0);
        for (Code c : b.rows) counts[c] += 1.0;
        const double p = 1.0 / 512;
        const double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
        for (double c : counts) CHECK(std::abs(c / static_cast<double>(n) - p) <= 5 * se);
    }
    SUBCASE("two-site model frequency within 5 standard errors") {
        const GibbsModel m = two_site(0.2);
        const std::size_t n = 1000000;
        const SampleBatch b = sample(m, n, 3, 3);
        const double hits = static_cast<double>(std::count(b.rows.begin(), b.rows.end(), Code{3}));
        const double p = 0.29934383005622;
        const double se = std::sqrt(p * (1 - p) / static_cast<double>(n));
        CHECK(std::abs(hits / static_cast<double>(n) - p) <= 5 * se);
    }
    SUBCASE("chi-squared goodness of fit") {
        for (std::uint64_t seed : {101ULL, 202ULL, 303ULL}) {
            for (const GibbsModel& m : {ising3x3(), ising3x3(1.0)}) {
                const std::size_t n = 100000;
                const SampleBatch b = sample(m, n, seed, 0);
                std::vector<double> counts(m.codec().table_size(), 0.0);
                for (Code c : b.rows) counts[c] += 1.0;
                double stat = 0.0;
                std::size_t cells = 0;
                for (Code c = 0; c < counts.size(); ++c) {
                    const double e = static_cast<double>(n) * m.probabilities()[c];
                    if (e <= 0.0) continue;
                    stat += (counts[c] - e) * (counts[c] - e) / e;
                    ++cells;
                }
                const boost::math::chi_squared dist(static_cast<double>(cells - 1));
                const double p_value = boost::math::cdf(boost::math::complement(dist, stat));
                CHECK(p_value > 1e-4);
            }
        }
    }
    SUBCASE("zero-probability configurations are never drawn") {
        const GibbsModel m = build_gibbs(SiteSet({"a", "b"}), Alphabet::spins(), {{{0, 1}, {0, -INFINITY, 0, -INFINITY}}});
        const SampleBatch b = sample(m, 5000, 9, 9);
        for (Code c : b.rows) CHECK((c == 0 || c == 2));
    }
}
