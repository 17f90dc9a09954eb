#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace fsdpo {

inline double logsumexp(std::span<const double> xs) {
  double m = xs[0];
  for (double x : xs) m = std::max(m, x);
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - m);
  return m + std::log(sum);
}

// softmax(scale * xs) with max-subtraction.
inline std::vector<double> softmax_scaled(std::span<const double> xs, double scale) {
  std::vector<double> out(xs.size());
  double m = scale * xs[0];
  for (double x : xs) m = std::max(m, scale * x);
  double sum = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out[i] = std::exp(scale * xs[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline std::vector<double> softmax(std::span<const double> xs) { return softmax_scaled(xs, 1.0); }

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log sigma(x) = min(x, 0) - log1p(exp(-|x|)); stable over the whole line.
inline double log_sigmoid(double x) {
  return std::fmin(x, 0.0) - std::log1p(std::exp(-std::fabs(x)));
}

}  // namespace fsdpo
