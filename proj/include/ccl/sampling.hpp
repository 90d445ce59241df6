#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ccl/cone.hpp"
#include "ccl/error.hpp"

namespace ccl {

/// Seeded generator with platform-independent uniform and normal draws
/// (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct SamplerOptions {
  double sigma = 1.5;           // spread of the Gaussian around (1,...,1)
  double margin_floor = 0.0;    // accepted points satisfy margin > floor
  double boundary_share = 0.0;  // fraction drawn by the boundary-approaching sampler
  std::size_t rejection_budget_factor = 1000;
};

namespace detail {

inline std::vector<double> boundary_approach_point(const ConeSpec& cone, Rng& rng, double floor) {
  const auto n = static_cast<std::size_t>(cone.n);
  std::vector<double> dir(n);
  double norm = 0.0;
  for (auto& d : dir) {
    d = rng.normal();
    norm += d * d;
  }
  norm = std::sqrt(norm);
  for (auto& d : dir) d /= norm;
  std::vector<double> p(n);
  auto inside = [&](double t) {
    for (std::size_t i = 0; i < n; ++i) p[i] = 1.0 + t * dir[i];
    return cone_margin(cone, p) > floor;
  };
  double lo = 0.0, hi = 1.0;
  while (inside(hi) && hi < 1e6) {
    lo = hi;
    hi *= 2.0;
  }
  double t;
  if (hi >= 1e6) {
    t = std::pow(10.0, rng.uniform(-2.0, 6.0));
  } else {
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      (inside(mid) ? lo : hi) = mid;
    }
    t = lo * (1.0 - std::pow(10.0, -rng.uniform(0.0, 8.0)));
  }
  for (std::size_t i = 0; i < n; ++i) p[i] = 1.0 + t * dir[i];
  return p;
}

}  // namespace detail

/// Interior points by rejection from a Gaussian centred at (1,...,1), mixed
/// with points approaching the boundary along random rays.
inline std::vector<std::vector<double>> sample_interior(const ConeSpec& cone, std::size_t count, Rng& rng,
                                                       const SamplerOptions& opt = {}) {
  std::vector<std::vector<double>> out;
  out.reserve(count);
  const auto n = static_cast<std::size_t>(cone.n);
  const std::size_t budget = opt.rejection_budget_factor * std::max<std::size_t>(count, 1);
  std::size_t draws = 0;
  while (out.size() < count) {
    if (++draws > budget)
      throw Error("sampler starvation on " + cone.id() + ": " + std::to_string(out.size()) + " of " +
                  std::to_string(count) + " points after " + std::to_string(budget) + " draws");
    std::vector<double> p;
    if (rng.uniform() < opt.boundary_share) {
      p = detail::boundary_approach_point(cone, rng, opt.margin_floor);
    } else {
      p.resize(n);
      for (auto& v : p) v = 1.0 + opt.sigma * rng.normal();
    }
    if (cone_margin(cone, p) > opt.margin_floor) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace ccl
