#pragma once
// Deterministic pairwise-tree reductions. The summation order depends only
// on the element count, so serial runs and any index-preserving parallel
// split produce bit-identical results.

#include <cstddef>
#include <span>

namespace deepsplit {

double pairwise_sum(std::span<const double> values) noexcept;

double pairwise_mean(std::span<const double> values) noexcept;

/// Uncorrected (divisor n) sample standard deviation.
double uncorrected_std(std::span<const double> values) noexcept;

}  // namespace deepsplit
