// Empirical measure of a sample batch with exact integer counts.
#pragma once

#include <cstdint>
#include <istream>
#include <memory>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <span>
#include <unordered_map>
#include <vector>

#include "fieldsel/field.hpp"

namespace fieldsel {

using CountTable = std::vector<std::uint64_t>;

class EmpiricalMeasure final : public Measure {
public:
    EmpiricalMeasure(Codec codec, std::span<const Code> rows);

    EmpiricalMeasure(const EmpiricalMeasure& other);
    EmpiricalMeasure& operator=(const EmpiricalMeasure& other);
    EmpiricalMeasure(EmpiricalMeasure&&) noexcept = default;
    EmpiricalMeasure& operator=(EmpiricalMeasure&&) noexcept = default;

    const Codec& codec() const override { return codec_; }
    std::uint64_t sample_size() const override { return n_; }
    std::uint64_t n() const { return n_; }

    std::span<const std::uint64_t> full_counts() const { return full_counts_; }
    // Configurations with a positive count, ascending.
    std::span<const Code> observed() const { return observed_; }

    // Counts over X(V) by local code. Tables are built once per subset and
    // shared; safe to call from several threads.
    std::shared_ptr<const CountTable> counts(SiteSubset subset) const;

    std::vector<double> marginal_table(SiteSubset subset) const override;
    // count(x(V)) / count(x(V\{i})), 1/a on unobserved contexts.
    std::vector<double> conditional_table(int target, SiteSubset subset) const override;

private:
    struct Cache {
        std::shared_mutex mutex;
        std::unordered_map<std::uint32_t, std::shared_ptr<const CountTable>> tables;
    };

    CountTable build_counts(SiteSubset subset) const;

    Codec codec_;
    std::uint64_t n_ = 0;
    std::vector<std::uint64_t> full_counts_;
    std::vector<Code> observed_;
    std::unique_ptr<Cache> cache_;
};

EmpiricalMeasure fit(const SampleBatch& batch);

double empirical_marginal(const EmpiricalMeasure& em, SiteSubset subset, const Configuration& x);
double empirical_conditional(const EmpiricalMeasure& em, int target, SiteSubset subset, const Configuration& x);

// Sample files: RFC-4180 CSV, header row of site names in dense order, then
// one row per observation holding symbol values (not indices).
void write_samples_csv(std::ostream& out, const SampleBatch& batch);
// Columns may appear in any order but must name every site exactly once.
SampleBatch read_samples_csv(std::istream& in, const SiteSet& sites, const Alphabet& alphabet,
                             const std::string& source = "<samples>");

} // namespace fieldsel
