#include "fieldsel/empirical.hpp"

#include <algorithm>

#include "fieldsel/csv.hpp"
#include "fieldsel/errors.hpp"
#include "text_util.hpp"

namespace fieldsel {

EmpiricalMeasure::EmpiricalMeasure(Codec codec, std::span<const Code> rows)
    : codec_(std::move(codec)), n_(rows.size()), cache_(std::make_unique<Cache>()) {
    if (rows.empty()) throw ValidationError("empirical measure needs at least one observation");
    full_counts_.assign(codec_.table_size(), 0);
    for (Code c : rows) {
        if (c >= codec_.table_size()) throw ValidationError("sample row outside the configuration space");
        ++full_counts_[c];
    }
    for (Code c = 0; c < full_counts_.size(); ++c) {
        if (full_counts_[c] != 0) observed_.push_back(c);
    }
}

EmpiricalMeasure::EmpiricalMeasure(const EmpiricalMeasure& other)
    : codec_(other.codec_),
      n_(other.n_),
      full_counts_(other.full_counts_),
      observed_(other.observed_),
      cache_(std::make_unique<Cache>()) {}

EmpiricalMeasure& EmpiricalMeasure::operator=(const EmpiricalMeasure& other) {
    if (this != &other) *this = EmpiricalMeasure(other);
    return *this;
}

CountTable EmpiricalMeasure::build_counts(SiteSubset subset) const {
    if (!SiteSubset::full(codec_.site_count()).includes(subset)) {
        throw ValidationError("subset references sites outside the field");
    }
    CountTable table(codec_.local_size(subset), 0);
    for (Code c : observed_) table[codec_.project(c, subset)] += full_counts_[c];
    return table;
}

std::shared_ptr<const CountTable> EmpiricalMeasure::counts(SiteSubset subset) const {
    {
        std::shared_lock lock(cache_->mutex);
        auto it = cache_->tables.find(subset.mask());
        if (it != cache_->tables.end()) return it->second;
    }
    auto table = std::make_shared<const CountTable>(build_counts(subset));
    std::unique_lock lock(cache_->mutex);
    auto [it, inserted] = cache_->tables.emplace(subset.mask(), std::move(table));
    return it->second;
}

std::vector<double> EmpiricalMeasure::marginal_table(SiteSubset subset) const {
    const auto table = counts(subset);
    std::vector<double> out(table->size());
    const double n = static_cast<double>(n_);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = static_cast<double>((*table)[k]) / n;
    return out;
}

std::vector<double> EmpiricalMeasure::conditional_table(int target, SiteSubset subset) const {
    if (!subset.contains(target)) throw ValidationError("conditioning subset must contain the target site");
    const int rank = subset.rank_of(target);
    const auto joint = counts(subset);
    const auto context = counts(subset.without(target));
    const double uniform = 1.0 / static_cast<double>(codec_.alphabet_size());
    std::vector<double> out(joint->size());
    for (Code x = 0; x < out.size(); ++x) {
        const std::uint64_t den = (*context)[codec_.drop_digit(x, rank)];
        out[x] = den != 0 ? static_cast<double>((*joint)[x]) / static_cast<double>(den) : uniform;
    }
    return out;
}

EmpiricalMeasure fit(const SampleBatch& batch) {
    if (batch.rows.empty()) throw ValidationError("cannot fit an empty sample batch");
    return EmpiricalMeasure(batch.codec(), batch.rows);
}

double empirical_marginal(const EmpiricalMeasure& em, SiteSubset subset, const Configuration& x) {
    const Code local = em.codec().encode_local(x, subset);
    return static_cast<double>((*em.counts(subset))[local]) / static_cast<double>(em.n());
}

double empirical_conditional(const EmpiricalMeasure& em, int target, SiteSubset subset, const Configuration& x) {
    if (!subset.contains(target)) throw ValidationError("conditioning subset must contain the target site");
    const Code local = em.codec().encode_local(x, subset);
    const std::uint64_t num = (*em.counts(subset))[local];
    const std::uint64_t den = (*em.counts(subset.without(target)))[em.codec().drop_digit(local, subset.rank_of(target))];
    if (den == 0) return 1.0 / static_cast<double>(em.alphabet_size());
    return static_cast<double>(num) / static_cast<double>(den);
}

void write_samples_csv(std::ostream& out, const SampleBatch& batch) {
    csv::write_row(out, batch.sites.names());
    const Codec cd = batch.codec();
    std::vector<std::string> fields(static_cast<std::size_t>(batch.sites.size()));
    for (Code row : batch.rows) {
        for (int s = 0; s < batch.sites.size(); ++s) {
            fields[static_cast<std::size_t>(s)] = std::to_string(batch.alphabet.symbol(cd.digit(row, s)));
        }
        csv::write_row(out, fields);
    }
}

SampleBatch read_samples_csv(std::istream& in, const SiteSet& sites, const Alphabet& alphabet, const std::string& source) {
    std::vector<std::string> fields;
    std::size_t line = 0;
    if (!csv::read_row(in, fields, line, source)) throw ParseError(source, 1, "missing header row");
    const std::size_t m = static_cast<std::size_t>(sites.size());
    if (fields.size() != m) {
        throw ParseError(source, line, "header has " + std::to_string(fields.size()) + " columns, field has " +
                                           std::to_string(m) + " sites");
    }
    std::vector<int> column_site(m, -1);
    std::vector<bool> seen(m, false);
    for (std::size_t k = 0; k < m; ++k) {
        const std::string name(detail::trim(fields[k]));
        if (!sites.contains(name)) throw ParseError(source, line, "unknown site '" + name + "' in header");
        const int s = sites.index_of(name);
        if (seen[static_cast<std::size_t>(s)]) throw ParseError(source, line, "site '" + name + "' listed twice");
        seen[static_cast<std::size_t>(s)] = true;
        column_site[k] = s;
    }

    SampleBatch batch{sites, alphabet, {}, 0, 0};
    const Codec cd = batch.codec();
    Configuration x = Configuration::unset(sites.size());
    while (csv::read_row(in, fields, line, source)) {
        if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;
        if (fields.size() != m) throw ParseError(source, line, "expected " + std::to_string(m) + " columns");
        for (std::size_t k = 0; k < m; ++k) {
            auto v = detail::parse_int(detail::trim(fields[k]));
            if (!v) throw ParseError(source, line, "symbol '" + fields[k] + "' is not an integer");
            int index = 0;
            try {
                index = alphabet.index_of(static_cast<int>(*v));
            } catch (const ValidationError& e) {
                throw ParseError(source, line, e.what());
            }
            x.values[static_cast<std::size_t>(column_site[k])] = static_cast<std::uint8_t>(index);
        }
        batch.rows.push_back(cd.encode(x));
    }
    return batch;
}

} // namespace fieldsel
