#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace repdiv {

/// Read counts of the observed clones of one library. Every entry is at least
/// one read (clones with zero reads are unobserved by definition) and at least
/// two clones are present.
class CloneCounts {
public:
    /// Validates and wraps `counts`. Throws DataError on a zero entry or fewer
    /// than two clones.
    explicit CloneCounts(std::vector<std::uint64_t> counts, std::string replicate_id = {});

    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }
    std::size_t size() const noexcept { return counts_.size(); }
    std::uint64_t total_reads() const noexcept;
    const std::string& replicate_id() const noexcept { return replicate_id_; }

    /// Same counts sorted from the largest clone to the smallest.
    CloneCounts sorted_descending() const;

    friend bool operator==(const CloneCounts&, const CloneCounts&) = default;

private:
    std::vector<std::uint64_t> counts_;
    std::string replicate_id_;
};

/// Gamma(shape, rate) law of clone intensities.
struct GammaPrior {
    double shape = 1.0;
    double rate = 1.0;

    double mean() const noexcept { return shape / rate; }

    /// Throws DomainError unless both parameters are positive and finite.
    void validate() const;

    friend bool operator==(const GammaPrior&, const GammaPrior&) = default;
};

/// Poisson rates of a (padded) clone set. Entries are non-negative with a
/// positive total; a draw can underflow to zero when its Gamma shape is tiny,
/// and such a clone simply carries no mass.
using IntensityVector = std::vector<double>;

enum class Functional { clonality, entropy };

const char* to_string(Functional f) noexcept;

/// Posterior draws of both functionals; entry b of each list comes from the
/// same intensity vector.
struct DiversityDraws {
    std::vector<double> clonality;
    std::vector<double> entropy;

    std::size_t size() const noexcept { return clonality.size(); }
    const std::vector<double>& of(Functional f) const noexcept
    {
        return f == Functional::clonality ? clonality : entropy;
    }
};

/// Sum of squared clone frequencies. Result lies in [1/n, 1].
double clonality(std::span<const double> lambdas);

/// Shannon entropy (natural log) of the clone frequencies. Result lies in [0, ln n].
double entropy(std::span<const double> lambdas);

/// Both functionals from one pass over the intensities.
struct FunctionalPair {
    double clonality;
    double entropy;
};
FunctionalPair evaluate_functionals(std::span<const double> lambdas);

struct CurvePoint {
    double rank_fraction;
    double cumulative_read_fraction;
};

/// Cumulative share of reads held by the k largest clones, k = 1..C.
std::vector<CurvePoint> cumulative_proportions(const CloneCounts& counts);

}  // namespace repdiv
