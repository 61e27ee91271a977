#include "deepsplit/reduce.hpp"

#include <cmath>
#include <vector>

namespace deepsplit {

namespace {
constexpr std::size_t kLeafSize = 8;

double sum_recursive(const double* data, std::size_t n) noexcept {
  if (n <= kLeafSize) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += data[i];
    return acc;
  }
  const std::size_t half = n / 2;
  return sum_recursive(data, half) + sum_recursive(data + half, n - half);
}
}  // namespace

double pairwise_sum(std::span<const double> values) noexcept {
  return sum_recursive(values.data(), values.size());
}

double pairwise_mean(std::span<const double> values) noexcept {
  if (values.empty()) return 0.0;
  return pairwise_sum(values) / static_cast<double>(values.size());
}

double uncorrected_std(std::span<const double> values) noexcept {
  const std::size_t n = values.size();
  if (n == 0) return 0.0;
  const double mean = pairwise_mean(values);
  std::vector<double> sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = values[i] - mean;
    sq[i] = c * c;
  }
  return std::sqrt(pairwise_sum(sq) / static_cast<double>(n));
}

}  // namespace deepsplit
