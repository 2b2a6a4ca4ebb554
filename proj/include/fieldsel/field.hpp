// Finite discrete random fields: site sets, configurations, exact Gibbs
// tables and i.i.d. sampling from them.
//
// Configurations are encoded mixed-radix little-endian over the dense site
// order: code(x) = sum_k x[k] * a^k, so site 0 is the fastest digit. A
// configuration restricted to a subset V uses the same rule over the sites of
// V in increasing dense order ("local code").
#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace fieldsel {

using Code = std::uint32_t;

inline constexpr int kMaxSites = 20;
inline constexpr std::uint64_t kMaxTableSize = std::uint64_t{1} << 20;
inline constexpr std::uint8_t kUnset = 0xFF;

class SiteSet {
public:
    SiteSet() = default;
    explicit SiteSet(std::vector<std::string> names);

    // Sites named "r,c" in row-major order. With centered, coordinates run
    // from -(rows-1)/2 to (rows-1)/2 (odd dimensions only).
    static SiteSet grid(int rows, int cols, bool centered);

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
    const std::vector<std::string>& names() const { return names_; }
    int index_of(const std::string& name) const;
    bool contains(const std::string& name) const { return lookup_.count(name) != 0; }

    bool operator==(const SiteSet& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> lookup_;
};

class Alphabet {
public:
    Alphabet() = default;
    explicit Alphabet(std::vector<int> symbols);

    static Alphabet spins() { return Alphabet({-1, 1}); }

    int size() const { return static_cast<int>(symbols_.size()); }
    int symbol(int index) const { return symbols_.at(static_cast<std::size_t>(index)); }
    const std::vector<int>& symbols() const { return symbols_; }
    int index_of(int symbol) const;

    bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

private:
    std::vector<int> symbols_;
};

// Subset of the dense site indices [0, M).
class SiteSubset {
public:
    constexpr SiteSubset() = default;
    constexpr explicit SiteSubset(std::uint32_t mask) : mask_(mask) {}

    static SiteSubset of(std::initializer_list<int> sites);
    static SiteSubset of(std::span<const int> sites);
    static constexpr SiteSubset full(int site_count) {
        return SiteSubset(site_count >= 32 ? ~std::uint32_t{0} : ((std::uint32_t{1} << site_count) - 1));
    }

    constexpr std::uint32_t mask() const { return mask_; }
    constexpr int size() const { return std::popcount(mask_); }
    constexpr bool empty() const { return mask_ == 0; }
    constexpr bool contains(int site) const { return (mask_ >> site) & 1U; }
    constexpr bool includes(SiteSubset other) const { return (other.mask_ & ~mask_) == 0; }
    constexpr SiteSubset with(int site) const { return SiteSubset(mask_ | (std::uint32_t{1} << site)); }
    constexpr SiteSubset without(int site) const { return SiteSubset(mask_ & ~(std::uint32_t{1} << site)); }
    std::vector<int> sites() const;
    // Position of a member site inside the local code.
    int rank_of(int site) const;

    constexpr bool operator==(const SiteSubset&) const = default;

private:
    std::uint32_t mask_ = 0;
};

// Canonical order: cardinality first, then mask value.
inline bool canonical_less(SiteSubset lhs, SiteSubset rhs) {
    if (lhs.size() != rhs.size()) return lhs.size() < rhs.size();
    return lhs.mask() < rhs.mask();
}

// Per-site symbol indices; entries outside the configuration's domain hold kUnset.
struct Configuration {
    std::vector<std::uint8_t> values;

    static Configuration unset(int site_count) {
        return Configuration{std::vector<std::uint8_t>(static_cast<std::size_t>(site_count), kUnset)};
    }
    SiteSubset domain() const;
};

// Mixed-radix arithmetic for a fixed (alphabet size, site count).
class Codec {
public:
    Codec() = default;
    Codec(int alphabet_size, int site_count);

    int alphabet_size() const { return a_; }
    int site_count() const { return m_; }
    std::uint64_t table_size() const { return size_; }
    std::uint64_t local_size(SiteSubset subset) const { return pow_[static_cast<std::size_t>(subset.size())]; }
    std::uint64_t power(int k) const { return pow_[static_cast<std::size_t>(k)]; }

    int digit(Code code, int position) const {
        return static_cast<int>((code / pow_[static_cast<std::size_t>(position)]) % static_cast<Code>(a_));
    }
    Code encode(const Configuration& x) const;
    Configuration decode(Code code) const;
    // Full code -> local code of the subset.
    Code project(Code code, SiteSubset subset) const;
    // Configuration restricted to a subset -> local code; entries of the
    // subset must be set.
    Code encode_local(const Configuration& x, SiteSubset subset) const;
    // Local code of V -> local code of V without the member at `rank`.
    Code drop_digit(Code local, int rank) const {
        const Code lo = local % static_cast<Code>(pow_[static_cast<std::size_t>(rank)]);
        const Code hi = local / static_cast<Code>(pow_[static_cast<std::size_t>(rank) + 1]);
        return lo + hi * static_cast<Code>(pow_[static_cast<std::size_t>(rank)]);
    }
    // Projection of every full code onto the subset.
    std::vector<Code> projection_map(SiteSubset subset) const;

private:
    int a_ = 0;
    int m_ = 0;
    std::uint64_t size_ = 0;
    std::vector<std::uint64_t> pow_;
};

// Anything that can report marginal tables over subsets of a finite field:
// the exact Gibbs table or an empirical measure.
class Measure {
public:
    virtual ~Measure() = default;

    virtual const Codec& codec() const = 0;
    // Number of samples behind the measure; 0 for exact models.
    virtual std::uint64_t sample_size() const { return 0; }
    // Table over X(V) indexed by local code.
    virtual std::vector<double> marginal_table(SiteSubset subset) const = 0;
    // Q_{i|V} over X(V): Q(x(V)) / Q(x(V\{i})), or 1/a when the context has
    // zero mass. `subset` must contain `target`.
    virtual std::vector<double> conditional_table(int target, SiteSubset subset) const;

    int site_count() const { return codec().site_count(); }
    int alphabet_size() const { return codec().alphabet_size(); }
};

// Q(x(V\{i})) laid out over X(V), i.e. the weight each cell of X(V) gets in
// the L2 norm.
std::vector<double> context_mass_table(const Measure& measure, int target, SiteSubset subset);

struct Coupling {
    int first = 0;
    int second = 0;
    double strength = 0.0;
};

// Energy table over the configurations of a clique (local code of the clique
// sites in the order given).
struct CliquePotential {
    std::vector<int> sites;
    std::vector<double> energy;
};

class GibbsModel final : public Measure {
public:
    const Codec& codec() const override { return codec_; }
    std::vector<double> marginal_table(SiteSubset subset) const override;

    const SiteSet& sites() const { return sites_; }
    const Alphabet& alphabet() const { return alphabet_; }
    std::span<const double> probabilities() const { return probs_; }
    std::span<const double> cdf() const { return cdf_; }
    double log_partition() const { return log_z_; }

    bool is_pairwise() const { return cliques_.empty(); }
    bool is_pairwise_binary() const;
    const std::vector<Coupling>& couplings() const { return couplings_; }
    const std::vector<double>& fields() const { return fields_; }
    const std::vector<CliquePotential>& cliques() const { return cliques_; }
    // Sites sharing a nonzero coupling or a clique with `site`.
    SiteSubset interaction_neighbors(int site) const;

private:
    friend GibbsModel build_ising(SiteSet, std::vector<Coupling>, std::vector<double>);
    friend GibbsModel build_ising(SiteSet, Alphabet, std::vector<Coupling>, std::vector<double>);
    friend GibbsModel build_gibbs(SiteSet, Alphabet, std::vector<CliquePotential>);

    void finalize(const std::vector<double>& log_weights);

    SiteSet sites_;
    Alphabet alphabet_;
    Codec codec_;
    std::vector<Coupling> couplings_;
    std::vector<double> fields_;
    std::vector<CliquePotential> cliques_;
    std::vector<double> probs_;
    std::vector<double> cdf_;
    double log_z_ = 0.0;
};

// probs[x] ∝ exp(sum_pairs J_ij s(x_i) s(x_j) + sum_i h_i s(x_i)), where s maps
// symbol indices to symbol values. Empty `fields` means all zero.
GibbsModel build_ising(SiteSet sites, std::vector<Coupling> pairs, std::vector<double> fields = {});
GibbsModel build_ising(SiteSet sites, Alphabet alphabet, std::vector<Coupling> pairs, std::vector<double> fields = {});
// probs[x] ∝ exp(sum_c energy_c(x(c))).
GibbsModel build_gibbs(SiteSet sites, Alphabet alphabet, std::vector<CliquePotential> cliques);

double joint_probability(const GibbsModel& model, const Configuration& x);
double marginal_probability(const GibbsModel& model, SiteSubset subset, const Configuration& x);
double exact_conditional(const GibbsModel& model, int target, SiteSubset subset, const Configuration& x);
double ising_closed_form_conditional(const GibbsModel& model, int target, const Configuration& x);

struct SampleBatch {
    SiteSet sites;
    Alphabet alphabet;
    std::vector<Code> rows;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    std::size_t size() const { return rows.size(); }
    Codec codec() const { return Codec(alphabet.size(), sites.size()); }
    Configuration row(std::size_t k) const { return codec().decode(rows.at(k)); }
};

SampleBatch sample(const GibbsModel& model, std::size_t n, std::uint64_t seed, std::uint64_t stream);

} // namespace fieldsel
