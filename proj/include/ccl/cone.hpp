#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ccl/error.hpp"
#include "ccl/symmetric_poly.hpp"

namespace ccl {

/// Open symmetric convex cone in R^n containing the positive orthant, given
/// constructively. Values are immutable; composite kinds share their base.
struct ConeSpec {
  enum class Kind { Garding, SumCone, HalfSpace, Transform, Projection };

  Kind kind = Kind::Garding;
  int n = 2;
  int k = 1;          // Garding, SumCone
  double rho = 0.0;   // HalfSpace, Transform
  std::shared_ptr<const ConeSpec> base;  // Transform, Projection

  static ConeSpec garding(int n, int k) {
    check_nk(n, k);
    return ConeSpec{Kind::Garding, n, k, 0.0, nullptr};
  }
  /// P_k: every k-element subset sum is positive.
  static ConeSpec sum_cone(int n, int k) {
    check_nk(n, k);
    return ConeSpec{Kind::SumCone, n, k, 0.0, nullptr};
  }
  /// { lambda : sum(lambda) - rho * lambda_i > 0 for all i }, rho < n.
  static ConeSpec half_space(int n, double rho) {
    if (n < 2) throw PreconditionError("cone dimension must be >= 2");
    if (!(rho < n)) throw PreconditionError("half-space family needs rho < n");
    return ConeSpec{Kind::HalfSpace, n, 0, rho, nullptr};
  }
  /// Raw transform node; `transform_cone` is the checked constructor.
  static ConeSpec transform_unchecked(const ConeSpec& base, double rho) {
    if (rho == 0.0) throw PreconditionError("transform requires rho != 0");
    if (!(rho < base.n)) throw PreconditionError("transform requires rho < n");
    return ConeSpec{Kind::Transform, base.n, 0, rho, std::make_shared<const ConeSpec>(base)};
  }
  static ConeSpec projection_unchecked(const ConeSpec& base, int target_dim) {
    if (target_dim < 1 || target_dim >= base.n)
      throw PreconditionError("projection target dimension must lie in [1, n-1]");
    return ConeSpec{Kind::Projection, target_dim, 0, 0.0, std::make_shared<const ConeSpec>(base)};
  }

  std::string id() const {
    auto num = [](double v) {
      std::string s = std::to_string(v);
      while (!s.empty() && s.back() == '0') s.pop_back();
      if (!s.empty() && s.back() == '.') s.pop_back();
      return s;
    };
    switch (kind) {
      case Kind::Garding: return "garding(n=" + std::to_string(n) + ",k=" + std::to_string(k) + ")";
      case Kind::SumCone: return "pk(n=" + std::to_string(n) + ",k=" + std::to_string(k) + ")";
      case Kind::HalfSpace: return "halfspace(n=" + std::to_string(n) + ",rho=" + num(rho) + ")";
      case Kind::Transform: return "transform(rho=" + num(rho) + "," + base->id() + ")";
      case Kind::Projection: return "projection(dim=" + std::to_string(n) + "," + base->id() + ")";
    }
    return "?";
  }

 private:
  static void check_nk(int n, int k) {
    if (n < 2) throw PreconditionError("cone dimension must be >= 2");
    if (k < 1 || k > n) throw PreconditionError("cone order k must satisfy 1 <= k <= n");
  }
};

enum class Membership { Interior, Boundary, Exterior };

struct MembershipVerdict {
  Membership cls = Membership::Exterior;
  double margin = 0.0;
  bool cap_exhausted = false;  // projection search hit R_max without success
};

inline constexpr int kProjectionDoublings = 60;

namespace detail {

inline double margin_impl(const ConeSpec& c, std::span<const double> lam, double tol, bool* cap);

inline double garding_margin(int k, std::span<const double> lam, double scale) {
  const int n = static_cast<int>(lam.size());
  auto e = elementary_symmetric(lam);
  double m = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= k; ++j) {
    double v = e[static_cast<std::size_t>(j)] / binomial(n, j);
    double root = std::pow(std::abs(v), 1.0 / j);
    m = std::min(m, (v > 0 ? root : (v < 0 ? -root : 0.0)) / scale);
  }
  return m;
}

inline double sum_cone_margin(int k, std::span<const double> lam, double scale) {
  std::vector<double> s(lam.begin(), lam.end());
  std::partial_sort(s.begin(), s.begin() + k, s.end());
  double sum = std::accumulate(s.begin(), s.begin() + k, 0.0);
  return sum / (k * scale);
}

inline double half_space_margin(double rho, std::span<const double> lam, double scale) {
  const double total = std::accumulate(lam.begin(), lam.end(), 0.0);
  double m = std::numeric_limits<double>::infinity();
  for (double v : lam) m = std::min(m, total - rho * v);
  return m / ((static_cast<double>(lam.size()) + std::abs(rho)) * scale);
}

inline std::vector<double> mu_of_lambda(std::span<const double> lam, double rho) {
  const double n = static_cast<double>(lam.size());
  const double total = std::accumulate(lam.begin(), lam.end(), 0.0);
  std::vector<double> mu(lam.size());
  for (std::size_t i = 0; i < lam.size(); ++i) mu[i] = (total - rho * lam[i]) / (n - rho);
  return mu;
}

inline double margin_impl(const ConeSpec& c, std::span<const double> lam, double tol, bool* cap) {
  const double scale = inf_norm(lam);
  if (scale == 0.0) return 0.0;
  switch (c.kind) {
    case ConeSpec::Kind::Garding: return garding_margin(c.k, lam, scale);
    case ConeSpec::Kind::SumCone: return sum_cone_margin(c.k, lam, scale);
    case ConeSpec::Kind::HalfSpace: return half_space_margin(c.rho, lam, scale);
    case ConeSpec::Kind::Transform: {
      auto mu = mu_of_lambda(lam, c.rho);
      const double mscale = inf_norm(mu);
      if (mscale == 0.0) return 0.0;
      return margin_impl(*c.base, mu, tol, cap) * mscale / scale;
    }
    case ConeSpec::Kind::Projection: {
      // Gamma + Gamma_n is contained in Gamma, so membership is monotone in R.
      std::vector<double> full(static_cast<std::size_t>(c.base->n), 0.0);
      std::copy(lam.begin(), lam.end(), full.begin());
      double best = -std::numeric_limits<double>::infinity();
      double r = scale;
      for (int j = 0; j <= kProjectionDoublings; ++j, r *= 2.0) {
        std::fill(full.begin() + static_cast<std::ptrdiff_t>(lam.size()), full.end(), r);
        double m = margin_impl(*c.base, full, tol, nullptr) * inf_norm(full) / scale;
        best = std::max(best, m);
        if (m > tol) return m;
      }
      if (cap) *cap = true;
      return best;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Signed, degree-one homogeneous distance proxy: positive inside, zero on
/// the boundary, normalized by the sup norm of `lambda`.
inline double cone_margin(const ConeSpec& spec, std::span<const double> lambda, double tol = 0.0) {
  if (static_cast<int>(lambda.size()) != spec.n)
    throw PreconditionError("dimension mismatch: vector of length " + std::to_string(lambda.size()) +
                            " tested against cone in R^" + std::to_string(spec.n));
  return detail::margin_impl(spec, lambda, tol, nullptr);
}

inline MembershipVerdict cone_membership(const ConeSpec& spec, std::span<const double> lambda, double tol) {
  if (static_cast<int>(lambda.size()) != spec.n)
    throw PreconditionError("dimension mismatch: vector of length " + std::to_string(lambda.size()) +
                            " tested against cone in R^" + std::to_string(spec.n));
  if (!(tol > 0.0)) throw PreconditionError("membership tolerance must be positive");
  MembershipVerdict v;
  v.margin = detail::margin_impl(spec, lambda, tol, &v.cap_exhausted);
  if (std::abs(v.margin) <= tol)
    v.cls = Membership::Boundary;
  else
    v.cls = v.margin > 0 ? Membership::Interior : Membership::Exterior;
  return v;
}

inline bool is_interior(const ConeSpec& spec, std::span<const double> lambda, double tol = 0.0) {
  return cone_margin(spec, lambda, tol) > tol;
}

/// Maps lambda in the transformed cone to the base-cone vector mu.
inline std::vector<double> transform_to_base(std::span<const double> lambda, double rho) {
  return detail::mu_of_lambda(lambda, rho);
}

/// Inverse of `transform_to_base`.
inline std::vector<double> transform_from_base(std::span<const double> mu, double rho) {
  const double n = static_cast<double>(mu.size());
  const double total = std::accumulate(mu.begin(), mu.end(), 0.0);
  std::vector<double> lam(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) lam[i] = (total - (n - rho) * mu[i]) / rho;
  return lam;
}

inline constexpr double kKappaTol = 1e-12;

inline int compute_kappa(const ConeSpec& spec) {
  int kappa = 0;
  std::vector<double> v(static_cast<std::size_t>(spec.n));
  for (int k = 0; k <= spec.n - 1; ++k) {
    for (int i = 0; i < spec.n; ++i) v[static_cast<std::size_t>(i)] = i < k ? 0.0 : 1.0;
    if (is_interior(spec, v, kKappaTol)) kappa = k;
  }
  return kappa;
}

enum class ConeType { Type1, Type2 };

inline ConeType cone_type(const ConeSpec& spec) {
  std::vector<double> v(static_cast<std::size_t>(spec.n), 0.0);
  v.back() = 1.0;
  return is_interior(spec, v, kKappaTol) ? ConeType::Type2 : ConeType::Type1;
}

inline constexpr int kVarrhoMaxIter = 200;

/// The constant rho with (1,...,1,1-rho) on the boundary, by bisection on [1, n].
inline double compute_varrho(const ConeSpec& spec, double tol = 1e-10) {
  if (!(tol > 0.0)) throw PreconditionError("varrho tolerance must be positive");
  std::vector<double> v(static_cast<std::size_t>(spec.n), 1.0);
  auto margin_at = [&](double rho) {
    v.back() = 1.0 - rho;
    return cone_margin(spec, v);
  };
  double lo = 1.0, hi = static_cast<double>(spec.n);
  if (margin_at(hi) > 0.0)
    throw InvariantViolation(spec.id() + ": (1,...,1,1-n) is interior, violating varrho <= n");
  if (margin_at(lo) < -1e-9)
    throw InvariantViolation(spec.id() + ": (1,...,1,0) is exterior, violating varrho >= 1");
  for (int it = 0; it < kVarrhoMaxIter && hi - lo >= tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (margin_at(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Checked transform: rho != 0 and rho <= varrho(spec).
inline ConeSpec transform_cone(const ConeSpec& spec, double rho) {
  if (rho == 0.0) throw PreconditionError("transform requires rho != 0");
  const double vr = compute_varrho(spec);
  if (rho > vr + 1e-9)
    throw PreconditionError("transform requires rho <= varrho = " + std::to_string(vr) + ", got " +
                            std::to_string(rho));
  if (!(rho < spec.n)) throw PreconditionError("transform requires rho < n");
  return ConeSpec::transform_unchecked(spec, rho);
}

/// Projection onto the first `target_dim` coordinates. Every intermediate
/// projection must be of type 1, and target_dim >= kappa + 1.
inline ConeSpec project_cone(const ConeSpec& spec, int target_dim) {
  const int kappa = compute_kappa(spec);
  if (cone_type(spec) == ConeType::Type2)
    throw PreconditionError(spec.id() + " is of type 2; its projection is all of R^(n-1)");
  if (target_dim < kappa + 1 || target_dim >= spec.n)
    throw PreconditionError("projection target must lie in [kappa+1, n-1] = [" + std::to_string(kappa + 1) +
                            ", " + std::to_string(spec.n - 1) + "]");
  for (int d = spec.n - 1; d > target_dim; --d) {
    if (cone_type(ConeSpec::projection_unchecked(spec, d)) == ConeType::Type2)
      throw PreconditionError("intermediate projection to R^" + std::to_string(d) + " is of type 2");
  }
  return ConeSpec::projection_unchecked(spec, target_dim);
}

}  // namespace ccl
