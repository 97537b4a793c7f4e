#include "repdiv/repertoire.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "repdiv/errors.hpp"
#include "repdiv/numerics.hpp"

namespace repdiv {

CloneCounts::CloneCounts(std::vector<std::uint64_t> counts, std::string replicate_id)
    : counts_(std::move(counts)), replicate_id_(std::move(replicate_id))
{
    for (std::size_t i = 0; i < counts_.size(); ++i)
        if (counts_[i] == 0)
            throw DataError("invalid_counts",
                            "clone " + std::to_string(i) + " has zero reads; only observed "
                            "(positive) counts are allowed");
    if (counts_.size() < 2)
        throw DataError("invalid_counts", "at least two observed clones are required, got " +
                                              std::to_string(counts_.size()));
}

std::uint64_t CloneCounts::total_reads() const noexcept
{
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

CloneCounts CloneCounts::sorted_descending() const
{
    auto sorted = counts_;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    return CloneCounts(std::move(sorted), replicate_id_);
}

void GammaPrior::validate() const
{
    if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate))
        throw DomainError("gamma prior requires positive finite shape and rate");
}

const char* to_string(Functional f) noexcept
{
    return f == Functional::clonality ? "clonality" : "entropy";
}

namespace {

double total_intensity(std::span<const double> lambdas)
{
    if (lambdas.empty()) throw DomainError("diversity functional of an empty intensity vector");
    CompensatedSum total;
    for (double v : lambdas) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw DomainError("intensities must be non-negative and finite");
        total.add(v);
    }
    const double s = total.value();
    if (!(s > 0.0)) throw DomainError("intensity vector has zero total mass");
    return s;
}

}  // namespace

double clonality(std::span<const double> lambdas)
{
    return evaluate_functionals(lambdas).clonality;
}

double entropy(std::span<const double> lambdas)
{
    return evaluate_functionals(lambdas).entropy;
}

FunctionalPair evaluate_functionals(std::span<const double> lambdas)
{
    const double inv_total = 1.0 / total_intensity(lambdas);
    CompensatedSum sq;
    CompensatedSum ent;
    for (double v : lambdas) {
        const double p = v * inv_total;
        if (p == 0.0) continue;
        sq.add(p * p);
        ent.add(-p * std::log(p));
    }
    return {sq.value(), std::max(ent.value(), 0.0)};
}

std::vector<CurvePoint> cumulative_proportions(const CloneCounts& counts)
{
    const CloneCounts sorted = counts.sorted_descending();
    const auto n = static_cast<double>(sorted.size());
    const auto total = static_cast<double>(sorted.total_reads());
    std::vector<CurvePoint> out;
    out.reserve(sorted.size());
    std::uint64_t running = 0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        running += sorted.counts()[k];
        out.push_back({static_cast<double>(k + 1) / n, static_cast<double>(running) / total});
    }
    return out;
}

}  // namespace repdiv
