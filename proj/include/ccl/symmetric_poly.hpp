#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace ccl {

/// Elementary symmetric polynomials sigma_0..sigma_n of `x` by the usual
/// one-pass recurrence.
inline std::vector<double> elementary_symmetric(std::span<const double> x) {
  std::vector<double> e(x.size() + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j >= 1; --j) e[j] += x[i] * e[j - 1];
  }
  return e;
}

inline double sigma(std::span<const double> x, int k) {
  if (k < 0 || k > static_cast<int>(x.size())) return 0.0;
  return elementary_symmetric(x)[static_cast<std::size_t>(k)];
}

/// sigma_k(x | i): sigma_k of `x` with entry i removed.
inline double sigma_without(std::span<const double> x, int k, std::size_t i) {
  std::vector<double> rest;
  rest.reserve(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    if (j != i) rest.push_back(x[j]);
  return sigma(rest, k);
}

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double inf_norm(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace ccl
