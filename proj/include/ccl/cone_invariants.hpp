#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ccl/cone.hpp"
#include "ccl/sampling.hpp"

namespace ccl {

struct ThetaResult {
  double lower = 0.0;     // best feasible ratio found (a certified lower bound)
  double estimate = 0.0;  // lower bound pushed to the constraint boundary
  int kappa = 0;
  std::size_t evaluations = 0;
  std::vector<double> witness;  // signed vector attaining `lower`
};

namespace detail {

inline double theta_ratio(const std::vector<double>& alpha, int kappa) {
  const int n = static_cast<int>(alpha.size());
  double denom = 0.0;
  for (int i = kappa; i < n; ++i) denom += alpha[static_cast<std::size_t>(i)];
  for (int i = 1; i < kappa; ++i) denom -= alpha[static_cast<std::size_t>(i)];
  return alpha[0] / (n * denom);
}

inline std::vector<double> signed_pattern(const std::vector<double>& alpha, int kappa) {
  std::vector<double> v(alpha);
  for (int i = 0; i < kappa; ++i) v[static_cast<std::size_t>(i)] = -v[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace detail

/// Randomized search for the sup defining theta over vectors with kappa
/// leading negative entries. Exact 1/n for the positive orthant (kappa = 0).
inline ThetaResult compute_theta(const ConeSpec& spec, std::size_t budget, std::uint64_t seed) {
  if (budget < 1) throw PreconditionError("theta search budget must be >= 1");
  ThetaResult res;
  const int n = spec.n;
  res.kappa = compute_kappa(spec);
  if (res.kappa == 0) {
    res.lower = res.estimate = 1.0 / n;
    return res;
  }
  const int kappa = res.kappa;
  Rng rng(seed);
  auto feasible = [&](const std::vector<double>& alpha) {
    ++res.evaluations;
    auto v = detail::signed_pattern(alpha, kappa);
    return is_interior(spec, v);
  };

  std::vector<double> best;
  double best_ratio = -1.0;
  const std::size_t explore = std::max<std::size_t>(budget / 2, 1);
  std::vector<double> alpha(static_cast<std::size_t>(n));
  for (std::size_t s = 0; s < explore; ++s) {
    const double shrink = std::pow(10.0, -rng.uniform(0.0, 3.0));
    for (int i = 0; i < n; ++i)
      alpha[static_cast<std::size_t>(i)] = std::exp(1.5 * rng.normal()) * (i < kappa ? shrink : 1.0);
    if (!feasible(alpha)) continue;
    const double r = detail::theta_ratio(alpha, kappa);
    if (r > best_ratio) {
      best_ratio = r;
      best = alpha;
    }
  }
  if (best.empty()) {
    std::string pattern;
    for (int i = 0; i < n; ++i) pattern += i < kappa ? '-' : '+';
    throw Error("theta search found no feasible sample with sign pattern (" + pattern + ") on " + spec.id());
  }

  double step = 0.5;
  for (std::size_t s = explore; s < budget; ++s) {
    std::vector<double> cand(best);
    for (auto& a : cand) a *= std::exp(step * rng.normal());
    if (feasible(cand)) {
      const double r = detail::theta_ratio(cand, kappa);
      if (r > best_ratio) {
        best_ratio = r;
        best = cand;
        step = std::min(1.0, step * 1.2);
        continue;
      }
    }
    step = std::max(1e-6, step * 0.98);
  }
  res.lower = best_ratio;
  res.witness = detail::signed_pattern(best, kappa);

  // The ratio increases with alpha_1; push it to the boundary.
  auto scaled = [&](double t) {
    std::vector<double> a(best);
    a[0] *= t;
    return a;
  };
  double lo = 1.0, hi = 2.0;
  while (hi < 1e6 && is_interior(spec, detail::signed_pattern(scaled(hi), kappa))) {
    lo = hi;
    hi *= 2.0;
  }
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (is_interior(spec, detail::signed_pattern(scaled(mid), kappa)) ? lo : hi) = mid;
  }
  res.estimate = std::max(res.lower, detail::theta_ratio(scaled(lo), kappa));
  return res;
}

struct SubsetSumReport {
  int kappa = 0;
  ConeType type = ConeType::Type1;
  std::size_t samples = 0;
  std::size_t violations = 0;        // (kappa+1)-subset sums that are not positive
  std::size_t type1_violations = 0;  // sum over j != i not positive (type 1 only)
  double worst_subset_sum = 0.0;     // min over samples of the normalized smallest subset sum
  std::vector<double> witness;
};

/// Samples interior points and checks positivity of every (kappa+1)-subset sum,
/// plus the leave-one-out sums for type 1 cones.
inline SubsetSumReport verify_subset_sums(const ConeSpec& spec, std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw PreconditionError("subset-sum check needs at least one sample");
  SubsetSumReport rep;
  rep.kappa = compute_kappa(spec);
  rep.type = cone_type(spec);
  rep.samples = samples;
  rep.worst_subset_sum = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  SamplerOptions opt;
  opt.boundary_share = 0.5;
  const auto pts = sample_interior(spec, samples, rng, opt);
  const auto m = static_cast<std::size_t>(rep.kappa + 1);
  for (const auto& p : pts) {
    std::vector<double> s(p);
    std::sort(s.begin(), s.end());
    const double smallest = std::accumulate(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
    const double norm = inf_norm(p);
    rep.worst_subset_sum = std::min(rep.worst_subset_sum, smallest / norm);
    if (!(smallest > 0.0)) {
      ++rep.violations;
      rep.witness = p;
    }
    if (rep.type == ConeType::Type1) {
      const double total = std::accumulate(p.begin(), p.end(), 0.0);
      if (!(total - s.back() > 0.0)) {
        ++rep.type1_violations;
        rep.witness = p;
      }
    }
  }
  return rep;
}

struct InvariantOptions {
  double varrho_tol = 1e-10;
  double check_tol = 1e-8;
  std::size_t theta_budget = 4000;
  std::size_t rigidity_samples = 2000;
  std::uint64_t seed = 1;
};

struct ConeInvariants {
  std::string cone_id;
  int n = 0;
  int kappa = 0;
  double varrho = 0.0;
  double theta_lower = 0.0;
  double theta_estimate = 0.0;
  ConeType type = ConeType::Type1;
  bool rigidity = false;  // varrho == kappa + 1
  bool checks_passed = true;
  std::vector<std::string> failures;
  double varrho_tol = 0.0;
  double check_tol = 0.0;
  std::size_t theta_budget = 0;
  std::size_t rigidity_samples = 0;
};

/// Aggregates kappa, varrho, theta and type, and asserts the cross inequalities
/// 1 <= varrho <= kappa + 1, varrho >= 1 + n kappa theta >= 1/(1 - kappa theta).
/// When varrho = kappa + 1 it also compares membership with P_{kappa+1}.
inline ConeInvariants invariant_report(const ConeSpec& spec, const InvariantOptions& opt = {}) {
  ConeInvariants inv;
  inv.cone_id = spec.id();
  inv.n = spec.n;
  inv.varrho_tol = opt.varrho_tol;
  inv.check_tol = opt.check_tol;
  inv.theta_budget = opt.theta_budget;
  inv.kappa = compute_kappa(spec);
  inv.varrho = compute_varrho(spec, opt.varrho_tol);
  auto th = compute_theta(spec, opt.theta_budget, opt.seed);
  inv.theta_lower = th.lower;
  inv.theta_estimate = th.estimate;
  inv.type = cone_type(spec);

  auto fail = [&](std::string what) {
    inv.checks_passed = false;
    inv.failures.push_back(std::move(what));
  };
  const double tol = opt.check_tol;
  const int n = spec.n;
  const int k = inv.kappa;
  if (k < 0 || k > n - 1) fail("kappa out of range");
  if (inv.varrho < 1.0 - tol || inv.varrho > n + tol) fail("varrho outside [1, n]");
  if (inv.varrho > k + 1 + tol) fail("varrho exceeds kappa + 1");
  if ((inv.type == ConeType::Type2) != (k == n - 1)) fail("type 2 does not match kappa = n - 1");
  const double kt = k * inv.theta_lower;
  if (inv.varrho < 1.0 + n * kt - tol) fail("varrho < 1 + n kappa theta");
  if (kt >= 1.0 || 1.0 + n * kt < 1.0 / (1.0 - kt) - tol) fail("1 + n kappa theta < 1/(1 - kappa theta)");
  if (inv.theta_lower > inv.theta_estimate) fail("theta lower bound exceeds estimate");

  inv.rigidity = std::abs(inv.varrho - (k + 1)) <= tol;
  if (inv.rigidity) {
    inv.rigidity_samples = opt.rigidity_samples;
    const auto pk = ConeSpec::sum_cone(n, k + 1);
    Rng rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> p(static_cast<std::size_t>(n));
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < opt.rigidity_samples; ++s) {
      for (auto& v : p) v = 0.5 + 2.0 * rng.normal();
      const double m1 = cone_margin(spec, p);
      const double m2 = cone_margin(pk, p);
      if (std::abs(m1) < 1e-6 || std::abs(m2) < 1e-6) continue;
      if ((m1 > 0) != (m2 > 0)) ++mismatches;
    }
    if (mismatches) fail("rigid cone differs from P_{kappa+1} on " + std::to_string(mismatches) + " samples");
  }
  return inv;
}

struct BatteryItem {
  ConeSpec cone;
  bool is_sum_cone = false;  // equal to some P_k as a set
};

/// Reference battery: Garding cones 3 <= n <= 8, P_k cones, half-space
/// families, transforms and projections.
inline std::vector<BatteryItem> builtin_cone_battery() {
  std::vector<BatteryItem> b;
  for (int n = 3; n <= 8; ++n)
    for (int k = 1; k <= n; ++k) b.push_back({ConeSpec::garding(n, k), k == 1 || k == n});
  for (int n : {4, 5, 7})
    for (int k = 2; k < n; ++k) b.push_back({ConeSpec::sum_cone(n, k), true});
  b.push_back({ConeSpec::half_space(4, -2.0), false});
  b.push_back({ConeSpec::half_space(6, -0.5), false});
  b.push_back({ConeSpec::half_space(5, 1.0), true});  // = P_4
  b.push_back({ConeSpec::transform_unchecked(ConeSpec::garding(4, 2), 1.0), false});
  b.push_back({ConeSpec::transform_unchecked(ConeSpec::garding(4, 4), -2.0), false});
  b.push_back({ConeSpec::transform_unchecked(ConeSpec::garding(5, 3), 1.0), false});
  b.push_back({ConeSpec::projection_unchecked(ConeSpec::garding(5, 2), 4), true});  // = Gamma_1(R^4)
  b.push_back({ConeSpec::projection_unchecked(ConeSpec::sum_cone(5, 3), 4), true});
  b.push_back({ConeSpec::projection_unchecked(ConeSpec::garding(6, 3), 5), false});
  return b;
}

}  // namespace ccl
