#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mlpenergy/errors.hpp"

namespace mlpe::stats {

// Lower nearest-rank quantile: element at 0-based index ceil(q*N)-1 of the
// sorted sample. Exactly reproducible, no interpolation.
inline double quantile_nearest_rank(std::vector<double> values, double q) {
  if (values.empty())
    raise(errc::numeric, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::ptrdiff_t>(std::ceil(q * n)) - 1;
  rank = std::clamp<std::ptrdiff_t>(rank, 0, values.size() - 1);
  return values[static_cast<std::size_t>(rank)];
}

inline double mean(std::span<const double> values) {
  if (values.empty())
    raise(errc::numeric, "mean of an empty sample");
  double sum = 0;
  for (double v : values)
    sum += v;
  return sum / static_cast<double>(values.size());
}

// Population variance (divides by N).
inline double variance(std::span<const double> values, double mu) {
  if (values.empty())
    raise(errc::numeric, "variance of an empty sample");
  double sum = 0;
  for (double v : values)
    sum += (v - mu) * (v - mu);
  return sum / static_cast<double>(values.size());
}

} // namespace mlpe::stats
