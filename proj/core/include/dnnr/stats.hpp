#pragma once

#include <span>

namespace dnnr {

/// Descriptive statistics in the pandas `describe()` shape: sample std,
/// linearly interpolated quartiles.
struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

Summary describe(std::span<const double> values);

}  // namespace dnnr
