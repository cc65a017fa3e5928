#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

namespace emuspmv {

class UndefinedCvError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Population standard deviation divided by the mean.
inline double coefficient_of_variation(std::span<const double> values) {
  if (values.empty()) throw UndefinedCvError("coefficient of variation of an empty list");
  double sum = 0.0;
  for (double v : values) {
    if (v < 0) throw std::invalid_argument("coefficient of variation expects non-negative values");
    sum += v;
  }
  const double mean = sum / static_cast<double>(values.size());
  if (!(mean > 0.0)) throw UndefinedCvError("coefficient of variation undefined for zero mean");
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size())) / mean;
}

}  // namespace emuspmv
