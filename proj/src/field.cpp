#include "fieldsel/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <utility>

#include "fieldsel/errors.hpp"
#include "fieldsel/rng.hpp"

namespace fieldsel {

SiteSet::SiteSet(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t k = 0; k < names_.size(); ++k) {
        if (names_[k].empty()) throw ValidationError("site names must be nonempty");
        if (!lookup_.emplace(names_[k], static_cast<int>(k)).second) {
            throw ValidationError("duplicate site name '" + names_[k] + "'");
        }
    }
}

SiteSet SiteSet::grid(int rows, int cols, bool centered) {
    if (rows < 1 || cols < 1) throw ValidationError("grid dimensions must be positive");
    if (centered && (rows % 2 == 0 || cols % 2 == 0)) {
        throw ValidationError("centered grids need odd dimensions");
    }
    const int r0 = centered ? -(rows - 1) / 2 : 0;
    const int c0 = centered ? -(cols - 1) / 2 : 0;
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            names.push_back(std::to_string(r0 + r) + "," + std::to_string(c0 + c));
        }
    }
    return SiteSet(std::move(names));
}

int SiteSet::index_of(const std::string& name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw ValidationError("unknown site '" + name + "'");
    return it->second;
}

Alphabet::Alphabet(std::vector<int> symbols) : symbols_(std::move(symbols)) {
    if (symbols_.size() < 2) throw ValidationError("alphabet needs at least two symbols");
    std::set<int> seen(symbols_.begin(), symbols_.end());
    if (seen.size() != symbols_.size()) throw ValidationError("alphabet symbols must be distinct");
    if (symbols_.size() > 255) throw CapacityError("alphabet larger than 255 symbols");
}

int Alphabet::index_of(int symbol) const {
    auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
    if (it == symbols_.end()) throw ValidationError("symbol " + std::to_string(symbol) + " not in alphabet");
    return static_cast<int>(it - symbols_.begin());
}

SiteSubset SiteSubset::of(std::initializer_list<int> sites) {
    return of(std::span<const int>(sites.begin(), sites.size()));
}

SiteSubset SiteSubset::of(std::span<const int> sites) {
    std::uint32_t mask = 0;
    for (int s : sites) {
        if (s < 0 || s >= 32) throw ValidationError("site index out of range");
        mask |= std::uint32_t{1} << s;
    }
    return SiteSubset(mask);
}

std::vector<int> SiteSubset::sites() const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(size()));
    for (std::uint32_t m = mask_; m != 0; m &= m - 1) out.push_back(std::countr_zero(m));
    return out;
}

int SiteSubset::rank_of(int site) const {
    if (!contains(site)) throw ValidationError("site not in subset");
    const std::uint32_t below = mask_ & ((std::uint32_t{1} << site) - 1);
    return std::popcount(below);
}

SiteSubset Configuration::domain() const {
    std::uint32_t mask = 0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] != kUnset) mask |= std::uint32_t{1} << k;
    }
    return SiteSubset(mask);
}

Codec::Codec(int alphabet_size, int site_count) : a_(alphabet_size), m_(site_count) {
    if (alphabet_size < 2) throw ValidationError("alphabet size must be at least 2");
    if (site_count < 0) throw ValidationError("site count must be nonnegative");
    if (site_count > kMaxSites) {
        throw CapacityError("field has " + std::to_string(site_count) + " sites; enumeration bound is " +
                            std::to_string(kMaxSites));
    }
    pow_.resize(static_cast<std::size_t>(site_count) + 2);
    pow_[0] = 1;
    for (std::size_t k = 1; k < pow_.size(); ++k) {
        pow_[k] = pow_[k - 1] * static_cast<std::uint64_t>(alphabet_size);
        if (k <= static_cast<std::size_t>(site_count) && pow_[k] > kMaxTableSize) {
            throw CapacityError("configuration table of size " + std::to_string(alphabet_size) + "^" +
                                std::to_string(site_count) + " exceeds the enumeration bound");
        }
    }
    size_ = pow_[static_cast<std::size_t>(site_count)];
}

Code Codec::encode(const Configuration& x) const {
    if (static_cast<int>(x.values.size()) != m_) throw ValidationError("configuration has wrong length");
    Code code = 0;
    for (int k = m_ - 1; k >= 0; --k) {
        const auto v = x.values[static_cast<std::size_t>(k)];
        if (v == kUnset) throw ValidationError("configuration is incomplete");
        if (v >= a_) throw ValidationError("symbol index out of range");
        code = code * static_cast<Code>(a_) + v;
    }
    return code;
}

Configuration Codec::decode(Code code) const {
    Configuration x{std::vector<std::uint8_t>(static_cast<std::size_t>(m_))};
    for (int k = 0; k < m_; ++k) {
        x.values[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(code % static_cast<Code>(a_));
        code /= static_cast<Code>(a_);
    }
    return x;
}

Code Codec::project(Code code, SiteSubset subset) const {
    Code local = 0;
    std::uint64_t scale = 1;
    for (std::uint32_t m = subset.mask(); m != 0; m &= m - 1) {
        local += static_cast<Code>(static_cast<std::uint64_t>(digit(code, std::countr_zero(m))) * scale);
        scale *= static_cast<std::uint64_t>(a_);
    }
    return local;
}

Code Codec::encode_local(const Configuration& x, SiteSubset subset) const {
    if (static_cast<int>(x.values.size()) != m_) throw ValidationError("configuration has wrong length");
    Code local = 0;
    std::uint64_t scale = 1;
    for (int site : subset.sites()) {
        const auto v = x.values[static_cast<std::size_t>(site)];
        if (v == kUnset) throw ValidationError("configuration is undefined on a required site");
        if (v >= a_) throw ValidationError("symbol index out of range");
        local += static_cast<Code>(v * scale);
        scale *= static_cast<std::uint64_t>(a_);
    }
    return local;
}

std::vector<Code> Codec::projection_map(SiteSubset subset) const {
    std::vector<Code> out(size_);
    for (Code c = 0; c < size_; ++c) out[c] = project(c, subset);
    return out;
}

std::vector<double> Measure::conditional_table(int target, SiteSubset subset) const {
    if (!subset.contains(target)) throw ValidationError("conditioning subset must contain the target site");
    const Codec& cd = codec();
    const int rank = subset.rank_of(target);
    const std::vector<double> joint = marginal_table(subset);
    const std::vector<double> context = marginal_table(subset.without(target));
    const double uniform = 1.0 / static_cast<double>(cd.alphabet_size());
    std::vector<double> out(joint.size());
    for (Code x = 0; x < joint.size(); ++x) {
        const double den = context[cd.drop_digit(x, rank)];
        out[x] = den > 0.0 ? joint[x] / den : uniform;
    }
    return out;
}

std::vector<double> context_mass_table(const Measure& measure, int target, SiteSubset subset) {
    if (!subset.contains(target)) throw ValidationError("subset must contain the target site");
    const Codec& cd = measure.codec();
    const int rank = subset.rank_of(target);
    const std::vector<double> context = measure.marginal_table(subset.without(target));
    std::vector<double> out(cd.local_size(subset));
    for (Code x = 0; x < out.size(); ++x) out[x] = context[cd.drop_digit(x, rank)];
    return out;
}

std::vector<double> GibbsModel::marginal_table(SiteSubset subset) const {
    if (!SiteSubset::full(codec_.site_count()).includes(subset)) {
        throw ValidationError("subset references sites outside the field");
    }
    std::vector<double> out(codec_.local_size(subset), 0.0);
    for (Code c = 0; c < probs_.size(); ++c) out[codec_.project(c, subset)] += probs_[c];
    return out;
}

bool GibbsModel::is_pairwise_binary() const {
    if (!cliques_.empty() || alphabet_.size() != 2) return false;
    const auto& s = alphabet_.symbols();
    return std::min(s[0], s[1]) == -1 && std::max(s[0], s[1]) == 1;
}

SiteSubset GibbsModel::interaction_neighbors(int site) const {
    SiteSubset out;
    for (const auto& c : couplings_) {
        if (c.strength == 0.0) continue;
        if (c.first == site) out = out.with(c.second);
        if (c.second == site) out = out.with(c.first);
    }
    for (const auto& clique : cliques_) {
        if (std::find(clique.sites.begin(), clique.sites.end(), site) == clique.sites.end()) continue;
        for (int s : clique.sites) out = out.with(s);
    }
    return out.without(site);
}

void GibbsModel::finalize(const std::vector<double>& log_weights) {
    const double top = *std::max_element(log_weights.begin(), log_weights.end());
    if (!std::isfinite(top)) throw ValidationError("potential assigns zero weight to every configuration");
    double total = 0.0;
    for (double w : log_weights) total += std::exp(w - top);
    log_z_ = top + std::log(total);

    probs_.resize(log_weights.size());
    cdf_.resize(log_weights.size());
    double running = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < log_weights.size(); ++k) {
        probs_[k] = std::exp(log_weights[k] - log_z_);
        running += probs_[k];
        cdf_[k] = running;
        if (probs_[k] > 0.0) last_positive = k;
    }
    // Pin the tail so every u in [0, 1) lands on a positive-mass configuration.
    for (std::size_t k = last_positive; k < cdf_.size(); ++k) cdf_[k] = 1.0;
}

namespace {

void check_site(int site, int site_count) {
    if (site < 0 || site >= site_count) throw ValidationError("site index " + std::to_string(site) + " out of range");
}

} // namespace

GibbsModel build_ising(SiteSet sites, std::vector<Coupling> pairs, std::vector<double> fields) {
    return build_ising(std::move(sites), Alphabet::spins(), std::move(pairs), std::move(fields));
}

GibbsModel build_ising(SiteSet sites, Alphabet alphabet, std::vector<Coupling> pairs, std::vector<double> fields) {
    GibbsModel model;
    const int m = sites.size();
    model.codec_ = Codec(alphabet.size(), m);
    if (!fields.empty() && static_cast<int>(fields.size()) != m) {
        throw ValidationError("external fields must be given for every site or none");
    }
    if (fields.empty()) fields.assign(static_cast<std::size_t>(m), 0.0);
    for (double h : fields) {
        if (!std::isfinite(h)) throw ValidationError("non-finite external field");
    }
    std::set<std::pair<int, int>> seen;
    for (const auto& p : pairs) {
        check_site(p.first, m);
        check_site(p.second, m);
        if (p.first == p.second) throw ValidationError("self-pair (" + sites.name(p.first) + ", " + sites.name(p.first) + ")");
        if (!std::isfinite(p.strength)) throw ValidationError("non-finite coupling");
        if (!seen.emplace(std::min(p.first, p.second), std::max(p.first, p.second)).second) {
            throw ValidationError("duplicate pair (" + sites.name(p.first) + ", " + sites.name(p.second) + ")");
        }
    }

    const Codec& cd = model.codec_;
    std::vector<double> value(static_cast<std::size_t>(alphabet.size()));
    for (int k = 0; k < alphabet.size(); ++k) value[static_cast<std::size_t>(k)] = alphabet.symbol(k);

    std::vector<double> log_weights(cd.table_size());
    for (Code c = 0; c < cd.table_size(); ++c) {
        double e = 0.0;
        for (const auto& p : pairs) {
            e += p.strength * value[static_cast<std::size_t>(cd.digit(c, p.first))] *
                 value[static_cast<std::size_t>(cd.digit(c, p.second))];
        }
        for (int s = 0; s < m; ++s) e += fields[static_cast<std::size_t>(s)] * value[static_cast<std::size_t>(cd.digit(c, s))];
        log_weights[c] = e;
    }
    model.sites_ = std::move(sites);
    model.alphabet_ = std::move(alphabet);
    model.couplings_ = std::move(pairs);
    model.fields_ = std::move(fields);
    model.finalize(log_weights);
    return model;
}

GibbsModel build_gibbs(SiteSet sites, Alphabet alphabet, std::vector<CliquePotential> cliques) {
    GibbsModel model;
    const int m = sites.size();
    model.codec_ = Codec(alphabet.size(), m);
    const Codec& cd = model.codec_;
    for (const auto& clique : cliques) {
        std::set<int> members;
        for (int s : clique.sites) {
            check_site(s, m);
            if (!members.insert(s).second) throw ValidationError("clique lists a site twice");
        }
        if (clique.energy.size() != cd.power(static_cast<int>(clique.sites.size()))) {
            throw ValidationError("clique energy table has wrong size");
        }
        for (double e : clique.energy) {
            if (std::isnan(e) || e == std::numeric_limits<double>::infinity()) {
                throw ValidationError("clique energy must be finite or -inf");
            }
        }
    }
    std::vector<double> log_weights(cd.table_size(), 0.0);
    for (Code c = 0; c < cd.table_size(); ++c) {
        double e = 0.0;
        for (const auto& clique : cliques) {
            Code local = 0;
            for (std::size_t k = clique.sites.size(); k-- > 0;) {
                local = local * static_cast<Code>(cd.alphabet_size()) + static_cast<Code>(cd.digit(c, clique.sites[k]));
            }
            e += clique.energy[local];
        }
        log_weights[c] = e;
    }
    model.sites_ = std::move(sites);
    model.alphabet_ = std::move(alphabet);
    model.fields_.assign(static_cast<std::size_t>(m), 0.0);
    model.cliques_ = std::move(cliques);
    model.finalize(log_weights);
    return model;
}

double joint_probability(const GibbsModel& model, const Configuration& x) {
    return model.probabilities()[model.codec().encode(x)];
}

double marginal_probability(const GibbsModel& model, SiteSubset subset, const Configuration& x) {
    const Codec& cd = model.codec();
    if (!SiteSubset::full(cd.site_count()).includes(subset)) {
        throw ValidationError("subset references sites outside the field");
    }
    if (static_cast<int>(x.values.size()) != cd.site_count() || x.domain() != subset) {
        throw ValidationError("configuration must be defined on exactly the sites of the subset");
    }
    const Code want = cd.encode_local(x, subset);
    const auto probs = model.probabilities();
    double total = 0.0;
    for (Code c = 0; c < probs.size(); ++c) {
        if (cd.project(c, subset) == want) total += probs[c];
    }
    return total;
}

double exact_conditional(const GibbsModel& model, int target, SiteSubset subset, const Configuration& x) {
    if (!subset.contains(target)) throw ValidationError("conditioning subset must contain the target site");
    const double joint = marginal_probability(model, subset, x);
    Configuration context = x;
    context.values.at(static_cast<std::size_t>(target)) = kUnset;
    const double den = marginal_probability(model, subset.without(target), context);
    if (den == 0.0) return 1.0 / static_cast<double>(model.alphabet().size());
    return joint / den;
}

double ising_closed_form_conditional(const GibbsModel& model, int target, const Configuration& x) {
    if (!model.is_pairwise_binary()) {
        throw UnsupportedError("closed-form conditional needs a pairwise model over {-1,+1}");
    }
    const Codec& cd = model.codec();
    check_site(target, cd.site_count());
    const Code code = cd.encode(x);
    auto spin = [&](int site) { return static_cast<double>(model.alphabet().symbol(cd.digit(code, site))); };
    double local_field = model.fields()[static_cast<std::size_t>(target)];
    for (const auto& c : model.couplings()) {
        if (c.first == target) local_field += c.strength * spin(c.second);
        if (c.second == target) local_field += c.strength * spin(c.first);
    }
    return 1.0 / (1.0 + std::exp(-2.0 * spin(target) * local_field));
}

SampleBatch sample(const GibbsModel& model, std::size_t n, std::uint64_t seed, std::uint64_t stream) {
    if (n == 0) throw ValidationError("sample size must be at least 1");
    SampleBatch batch{model.sites(), model.alphabet(), {}, seed, stream};
    batch.rows.resize(n);
    auto engine = make_engine(seed, stream);
    const auto cdf = model.cdf();
    for (auto& row : batch.rows) {
        const double u = uniform01(engine);
        row = static_cast<Code>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    }
    return batch;
}

} // namespace fieldsel
