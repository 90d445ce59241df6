#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ccl/cone.hpp"
#include "ccl/error.hpp"
#include "ccl/parallel.hpp"
#include "ccl/sampling.hpp"
#include "ccl/symmetric_poly.hpp"

namespace ccl {

struct FunctionSpec {
  enum class Family { SigmaKRoot, SigmaQuotientRoot, Linear };

  Family family = Family::Linear;
  int k = 1;
  int l = 0;
  ConeSpec domain;
  double varsigma = 1.0;  // homogeneity degree

  /// sigma_k^{1/k} on `domain`.
  static FunctionSpec sigma_k_root(const ConeSpec& domain, int k) {
    if (k < 1 || k > domain.n) throw PreconditionError("sigma_k_root needs 1 <= k <= n");
    return {Family::SigmaKRoot, k, 0, domain, 1.0};
  }
  /// (sigma_k / sigma_l)^{1/(k-l)} on `domain`.
  static FunctionSpec sigma_quotient_root(const ConeSpec& domain, int k, int l) {
    if (!(0 <= l && l < k && k <= domain.n)) throw PreconditionError("sigma_quotient_root needs 0 <= l < k <= n");
    return {Family::SigmaQuotientRoot, k, l, domain, 1.0};
  }
  static FunctionSpec linear(const ConeSpec& domain) { return {Family::Linear, 1, 0, domain, 1.0}; }

  std::string id() const {
    switch (family) {
      case Family::SigmaKRoot: return "sigma_k_root(k=" + std::to_string(k) + ")@" + domain.id();
      case Family::SigmaQuotientRoot:
        return "sigma_quotient_root(k=" + std::to_string(k) + ",l=" + std::to_string(l) + ")@" + domain.id();
      case Family::Linear: return "sigma1@" + domain.id();
    }
    return "?";
  }
};

namespace detail {

inline void require_dim(int n, std::span<const double> lam) {
  if (static_cast<int>(lam.size()) != n)
    throw PreconditionError("vector length " + std::to_string(lam.size()) + " does not match dimension " +
                            std::to_string(n));
}

inline void require_interior(const ConeSpec& cone, std::span<const double> lam) {
  require_dim(cone.n, lam);
  if (!(cone_margin(cone, lam) > 0.0)) throw DomainError("point is not in the interior of " + cone.id());
}

inline double f_sorted(const FunctionSpec& s, std::span<const double> lam, std::vector<double>* grad);

// Value and gradient without the domain check. Entries are sorted first so
// the result is exactly permutation invariant (equivariant for the gradient).
inline double f_raw(const FunctionSpec& s, std::span<const double> lam, std::vector<double>* grad) {
  std::vector<std::size_t> idx(lam.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return lam[a] < lam[b]; });
  std::vector<double> sorted(lam.size());
  for (std::size_t i = 0; i < idx.size(); ++i) sorted[i] = lam[idx[i]];
  if (!grad) return f_sorted(s, sorted, nullptr);
  std::vector<double> g;
  const double f = f_sorted(s, sorted, &g);
  grad->resize(lam.size());
  for (std::size_t i = 0; i < idx.size(); ++i) (*grad)[idx[i]] = g[i];
  return f;
}

inline double f_sorted(const FunctionSpec& s, std::span<const double> lam, std::vector<double>* grad) {
  const std::size_t n = lam.size();
  if (s.family == FunctionSpec::Family::Linear) {
    if (grad) grad->assign(n, 1.0);
    return std::accumulate(lam.begin(), lam.end(), 0.0);
  }
  const auto e = elementary_symmetric(lam);
  const double sk = e[static_cast<std::size_t>(s.k)];
  if (s.family == FunctionSpec::Family::SigmaKRoot) {
    const double f = std::pow(sk, 1.0 / s.k);
    if (grad) {
      grad->resize(n);
      for (std::size_t i = 0; i < n; ++i) (*grad)[i] = f / (s.k * sk) * sigma_without(lam, s.k - 1, i);
    }
    return f;
  }
  const double sl = e[static_cast<std::size_t>(s.l)];
  const double f = std::pow(sk / sl, 1.0 / (s.k - s.l));
  if (grad) {
    grad->resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double dl = s.l == 0 ? 0.0 : sigma_without(lam, s.l - 1, i) / sl;
      (*grad)[i] = f / (s.k - s.l) * (sigma_without(lam, s.k - 1, i) / sk - dl);
    }
  }
  return f;
}

}  // namespace detail

inline double eval_f(const FunctionSpec& spec, std::span<const double> lambda) {
  detail::require_interior(spec.domain, lambda);
  return detail::f_raw(spec, lambda, nullptr);
}

inline std::vector<double> grad_f(const FunctionSpec& spec, std::span<const double> lambda) {
  detail::require_interior(spec.domain, lambda);
  std::vector<double> g;
  detail::f_raw(spec, lambda, &g);
  return g;
}

/// f~(lambda) = f(mu(lambda)) on the transformed cone.
struct TransformedOperator {
  FunctionSpec base;
  double rho = 0.0;
  ConeSpec tilde_domain;

  TransformedOperator(const FunctionSpec& b, double r)
      : base(b), rho(r), tilde_domain(ConeSpec::transform_unchecked(b.domain, r)) {}

  std::string id() const {
    std::string s = std::to_string(rho);
    return "tilde(rho=" + s + "," + base.id() + ")";
  }
};

/// Checked constructor: rho != 0 and rho < varrho of the base domain.
inline TransformedOperator make_transformed(const FunctionSpec& base, double rho) {
  if (rho == 0.0) throw PreconditionError("transformed operator needs rho != 0");
  const double vr = compute_varrho(base.domain);
  if (!(rho < vr)) throw PreconditionError("transformed operator needs rho < varrho = " + std::to_string(vr));
  return TransformedOperator(base, rho);
}

struct ValueGrad {
  double value = 0.0;
  std::vector<double> grad;
};

inline ValueGrad tilde_eval_grad(const TransformedOperator& op, std::span<const double> lambda) {
  detail::require_interior(op.tilde_domain, lambda);
  const auto mu = transform_to_base(lambda, op.rho);
  ValueGrad out;
  std::vector<double> g;
  out.value = detail::f_raw(op.base, mu, &g);
  const double n = static_cast<double>(lambda.size());
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  out.grad.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out.grad[i] = (total - op.rho * g[i]) / (n - op.rho);
  return out;
}

struct EllipticityCertificate {
  enum class Kind { Partial, Full };

  Kind kind = Kind::Partial;
  bool passed = true;
  double theta = std::numeric_limits<double>::infinity();  // inf of min ratio f_i / sum f_j over the checked range
  double theta_bound = 0.0;                                 // partial: the theta used in the inequalities
  int kappa_used = 0;
  std::size_t samples = 0;
  std::size_t violations = 0;
  double worst_margin = std::numeric_limits<double>::infinity();  // smallest normalized slack in the inequalities
  double margin_floor = 0.0;
  std::vector<double> worst_case;
  std::string failure;
};

inline constexpr double kGradientMarginFloor = 1e-8;

/// Checks f_i >= 0, sum f_i > 0 and f_i >= n theta f_1 >= theta sum f_j for
/// 1 <= i <= kappa + 1 (lambda sorted ascending) on sampled interior points.
inline EllipticityCertificate certify_partial_ellipticity(const FunctionSpec& spec, double theta_lower,
                                                          std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw PreconditionError("certificate needs at least one sample");
  EllipticityCertificate cert;
  cert.kind = EllipticityCertificate::Kind::Partial;
  cert.theta_bound = theta_lower;
  cert.kappa_used = compute_kappa(spec.domain);
  cert.samples = samples;
  cert.margin_floor = kGradientMarginFloor;
  const int n = spec.domain.n;

  // sup f = +infinity along the diagonal, the hypothesis behind the theorem.
  {
    std::vector<double> d(static_cast<std::size_t>(n), 1.0);
    const double f1 = eval_f(spec, d);
    for (auto& v : d) v = 1e6;
    if (!(eval_f(spec, d) > 1e3 * f1)) {
      cert.passed = false;
      cert.failure = "f does not grow without bound along the diagonal";
    }
  }

  Rng rng(seed);
  SamplerOptions opt;
  opt.margin_floor = kGradientMarginFloor;
  opt.boundary_share = 0.5;
  auto pts = sample_interior(spec.domain, samples, rng, opt);
  std::vector<double> slack(samples), ratio(samples);
  std::vector<char> bad(samples, 0);
  parallel_for(samples, [&](std::size_t s) {
    auto& p = pts[s];
    std::sort(p.begin(), p.end());
    std::vector<double> g;
    detail::f_raw(spec, p, &g);
    const double total = std::accumulate(g.begin(), g.end(), 0.0);
    const double eps = 1e-10 * std::abs(total);
    bool ok = total > 0.0;
    for (double gi : g) ok = ok && gi >= -eps;
    double worst = std::numeric_limits<double>::infinity(), r = worst;
    const double mid = n * theta_lower * g[0];
    for (int i = 0; i <= cert.kappa_used && i < n; ++i) {
      const double gi = g[static_cast<std::size_t>(i)];
      worst = std::min(worst, (gi - mid) / total);
      r = std::min(r, gi / total);
    }
    worst = std::min(worst, (mid - theta_lower * total) / total);
    ok = ok && worst >= -1e-10;
    slack[s] = worst;
    ratio[s] = r;
    bad[s] = !ok;
  });
  for (std::size_t s = 0; s < samples; ++s) {
    cert.theta = std::min(cert.theta, ratio[s]);
    if (bad[s]) ++cert.violations;
    if (slack[s] < cert.worst_margin || (bad[s] && cert.violations == 1)) {
      cert.worst_margin = slack[s];
      cert.worst_case = pts[s];
    }
  }
  if (cert.violations) {
    cert.passed = false;
    cert.failure = std::to_string(cert.violations) + " samples violate the partial ellipticity inequalities";
  }
  return cert;
}

namespace detail {

inline double min_grad_ratio(const TransformedOperator& op, std::span<const double> lam) {
  const auto mu = transform_to_base(lam, op.rho);
  std::vector<double> g;
  f_raw(op.base, mu, &g);
  const double n = static_cast<double>(lam.size());
  const double total = std::accumulate(g.begin(), g.end(), 0.0);
  double mn = std::numeric_limits<double>::infinity(), sum = 0.0;
  for (double gi : g) {
    const double t = (total - op.rho * gi) / (n - op.rho);
    mn = std::min(mn, t);
    sum += t;
  }
  return mn / sum;
}

}  // namespace detail

struct FullEllipticityOptions {
  std::size_t refine_points = 8;
  std::size_t refine_steps = 400;
};

/// theta = inf over sampled lambda of min_i f~_i / sum_j f~_j. Samples are
/// biased toward the boundary and the worst ones are refined by local search.
inline EllipticityCertificate certify_full_ellipticity(const TransformedOperator& op, std::size_t samples,
                                                       std::uint64_t seed, const FullEllipticityOptions& fo = {}) {
  if (samples < 1) throw PreconditionError("certificate needs at least one sample");
  if (op.rho == 0.0) throw PreconditionError("full ellipticity needs rho != 0");
  const double vr = compute_varrho(op.base.domain);
  if (!(op.rho < vr)) throw PreconditionError("full ellipticity needs rho < varrho = " + std::to_string(vr));
  EllipticityCertificate cert;
  cert.kind = EllipticityCertificate::Kind::Full;
  cert.kappa_used = compute_kappa(op.tilde_domain);
  cert.samples = samples;
  cert.margin_floor = kGradientMarginFloor;
  const auto& cone = op.tilde_domain;

  Rng rng(seed);
  SamplerOptions opt;
  opt.margin_floor = kGradientMarginFloor;
  opt.boundary_share = 0.5;
  auto pts = sample_interior(cone, samples, rng, opt);
  std::vector<double> ratio(samples);
  parallel_for(samples, [&](std::size_t s) { ratio[s] = detail::min_grad_ratio(op, pts[s]); });

  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t m = std::min(fo.refine_points, samples);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                    [&](std::size_t a, std::size_t b) { return ratio[a] < ratio[b]; });
  std::vector<std::uint64_t> seeds(m);
  for (auto& sd : seeds) sd = static_cast<std::uint64_t>(rng.uniform() * 9007199254740992.0);
  parallel_for(m, [&](std::size_t j) {
    const std::size_t s = order[j];
    Rng local(seeds[j]);
    auto x = pts[s];
    double best = ratio[s], step = 0.3;
    std::vector<double> cand(x.size());
    for (std::size_t it = 0; it < fo.refine_steps; ++it) {
      const double scale = inf_norm(x);
      for (std::size_t i = 0; i < x.size(); ++i) cand[i] = x[i] + step * scale * local.normal();
      if (cone_margin(cone, cand) > kGradientMarginFloor) {
        const double r = detail::min_grad_ratio(op, cand);
        if (r < best) {
          best = r;
          x = cand;
          step = std::min(1.0, step * 1.5);
          continue;
        }
      }
      step = std::max(1e-8, step * 0.9);
    }
    pts[s] = x;
    ratio[s] = best;
  });

  for (std::size_t s = 0; s < samples; ++s) {
    if (ratio[s] < cert.theta) {
      cert.theta = ratio[s];
      cert.worst_case = pts[s];
    }
    if (!(ratio[s] > 0.0)) ++cert.violations;
  }
  cert.worst_margin = cert.theta;
  if (cert.violations) {
    cert.passed = false;
    cert.failure = std::to_string(cert.violations) + " samples with nonpositive gradient ratio";
  }
  return cert;
}

struct ConcavityReport {
  bool passed = true;
  std::size_t pairs_tested = 0;
  std::size_t violations = 0;
  double worst_gap = std::numeric_limits<double>::infinity();  // min of (f(mid) - (f(a)+f(b))/2) / max(1, |f|)
  std::vector<double> witness_a, witness_b;
};

/// Midpoint test f((a+b)/2) >= (f(a)+f(b))/2 - 1e-10 over sampled interior
/// pairs. The slack is relative once |f| exceeds 1 (samples reach |lambda| ~ 1e6).
template <class F>
ConcavityReport certify_concavity_of(const ConeSpec& cone, F&& f, std::size_t pairs, std::uint64_t seed) {
  if (pairs < 1) throw PreconditionError("concavity check needs at least one pair");
  ConcavityReport rep;
  Rng rng(seed);
  SamplerOptions opt;
  opt.boundary_share = 0.3;
  const auto a = sample_interior(cone, pairs, rng, opt);
  const auto b = sample_interior(cone, pairs, rng, opt);
  std::vector<double> gap(pairs, std::numeric_limits<double>::infinity()), scale(pairs, 1.0);
  parallel_for(pairs, [&](std::size_t s) {
    std::vector<double> mid(a[s].size());
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (a[s][i] + b[s][i]);
    if (!(cone_margin(cone, mid) > 0.0)) return;
    const double fa = f(a[s]), fb = f(b[s]);
    gap[s] = f(mid) - 0.5 * (fa + fb);
    scale[s] = std::max(1.0, 0.5 * (std::abs(fa) + std::abs(fb)));
  });
  for (std::size_t s = 0; s < pairs; ++s) {
    if (std::isinf(gap[s])) continue;
    ++rep.pairs_tested;
    gap[s] /= scale[s];
    if (gap[s] < rep.worst_gap) {
      rep.worst_gap = gap[s];
      rep.witness_a = a[s];
      rep.witness_b = b[s];
    }
    if (gap[s] < -1e-10) ++rep.violations;
  }
  rep.passed = rep.violations == 0;
  return rep;
}

inline ConcavityReport certify_concavity(const FunctionSpec& spec, std::size_t pairs, std::uint64_t seed) {
  return certify_concavity_of(
      spec.domain, [&](std::span<const double> x) { return detail::f_raw(spec, x, nullptr); }, pairs, seed);
}

inline ConcavityReport certify_concavity(const TransformedOperator& op, std::size_t pairs, std::uint64_t seed) {
  return certify_concavity_of(
      op.tilde_domain,
      [&](std::span<const double> x) { return detail::f_raw(op.base, transform_to_base(x, op.rho), nullptr); },
      pairs, seed);
}

}  // namespace ccl
