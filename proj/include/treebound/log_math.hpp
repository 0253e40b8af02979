#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace treebound {

// log(sum_i exp(x_i)), max-shifted. Empty input gives -inf.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double top = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(top)) return top;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - top);
  return top + std::log(sum);
}

// Streaming accumulator for log-sum-exp; rescales when a larger term arrives.
class LogSumExpAccumulator {
 public:
  void add(double x) {
    if (x == -std::numeric_limits<double>::infinity()) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }

  double value() const {
    if (sum_ == 0.0) return -std::numeric_limits<double>::infinity();
    return max_ + std::log(sum_);
  }

 private:
  double max_ = -std::numeric_limits<double>::infinity();
  double sum_ = 0.0;
};

// Shifts log-values in place so that sum_i exp(x_i) == 1.
inline void log_normalize(std::span<double> xs) {
  const double z = log_sum_exp(xs);
  for (double& x : xs) x -= z;
}

}  // namespace treebound
