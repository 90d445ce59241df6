#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "ccl/cone_invariants.hpp"
#include "ccl/operators.hpp"

namespace {

using namespace ccl;

std::vector<FunctionSpec> families() {
  return {FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2),
          FunctionSpec::sigma_k_root(ConeSpec::garding(5, 3), 3),
          FunctionSpec::sigma_k_root(ConeSpec::garding(4, 4), 4),
          FunctionSpec::sigma_quotient_root(ConeSpec::garding(5, 3), 3, 1),
          FunctionSpec::sigma_quotient_root(ConeSpec::garding(4, 2), 2, 1),
          FunctionSpec::linear(ConeSpec::garding(4, 1))};
}

std::vector<double> central_diff(const std::function<double(const std::vector<double>&)>& f,
                                 const std::vector<double>& x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto p = x, m = x;
    p[i] += h;
    m[i] -= h;
    g[i] = (f(p) - f(m)) / (2 * h);
  }
  return g;
}

TEST(EvalF, SpecExamples) {
  std::vector<double> ones4(4, 1.0);
  EXPECT_NEAR(eval_f(FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2), ones4), std::sqrt(6.0), 1e-14);
  std::vector<double> t5(5, 0.7);
  EXPECT_NEAR(eval_f(FunctionSpec::linear(ConeSpec::garding(5, 1)), t5), 3.5, 1e-14);
  std::vector<double> ones3(3, 1.0);
  EXPECT_NEAR(eval_f(FunctionSpec::sigma_quotient_root(ConeSpec::garding(3, 2), 2, 1), ones3), 1.0, 1e-14);
  std::vector<double> out{0, 0, 0, 1};
  EXPECT_THROW(eval_f(FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2), out), DomainError);
}

TEST(GradF, SpecExamples) {
  std::vector<double> ones4(4, 1.0);
  auto g1 = grad_f(FunctionSpec::linear(ConeSpec::garding(4, 1)), ones4);
  for (double v : g1) EXPECT_EQ(v, 1.0);
  auto g2 = grad_f(FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2), ones4);
  for (double v : g2) EXPECT_NEAR(v, 3.0 / (2 * std::sqrt(6.0)), 1e-14);
  for (double t : {0.1, 2.0, 50.0}) {
    std::vector<double> x{1, 1, 1, t};
    auto g = grad_f(FunctionSpec::sigma_k_root(ConeSpec::garding(4, 4), 4), x);
    EXPECT_NEAR(g[3] / g[0], 1.0 / t, 1e-12);
  }
}

TEST(GradF, SecondOrderAgainstFiniteDifferences) {
  Rng rng(4);
  for (const auto& fs : families()) {
    SamplerOptions opt;
    opt.margin_floor = 0.05;
    auto pts = sample_interior(fs.domain, 20, rng, opt);
    auto f = [&](const std::vector<double>& x) { return detail::f_raw(fs, x, nullptr); };
    for (const auto& x : pts) {
      const auto g = grad_f(fs, x);
      const double gn = inf_norm(g);
      std::vector<double> err;
      for (double h : {1e-3, 5e-4, 2.5e-4}) {
        const double sc = inf_norm(x);
        auto fd = central_diff(f, x, h * sc);
        double e = 0;
        for (std::size_t i = 0; i < g.size(); ++i) e = std::max(e, std::abs(fd[i] - g[i]));
        err.push_back(e / gn);
      }
      if (err[0] < 1e-11) continue;  // exact (linear); nothing to measure
      const double order = std::log2(err[0] / err[2]) / 2.0;
      EXPECT_GE(order, 1.9) << fs.id();
    }
  }
}

TEST(GradF, EulerIdentityAndPermutationEquivariance) {
  Rng rng(5);
  for (const auto& fs : families()) {
    auto pts = sample_interior(fs.domain, 1000, rng);
    for (const auto& x : pts) {
      const double f = eval_f(fs, x);
      const auto g = grad_f(fs, x);
      double dot = 0;
      for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * g[i];
      EXPECT_NEAR(dot, fs.varsigma * f, 1e-10 * std::abs(f)) << fs.id();
      std::vector<std::size_t> perm(x.size());
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(perm);
      std::vector<double> px(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) px[i] = x[perm[i]];
      const auto pg = grad_f(fs, px);
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(pg[i], g[perm[i]], 1e-14 * inf_norm(g));
    }
  }
}

TEST(EvalF, PositivityHomogeneityAndBoundaryDecay) {
  Rng rng(6);
  for (const auto& fs : families()) {
    auto pts = sample_interior(fs.domain, 300, rng);
    for (const auto& x : pts) {
      const double f = eval_f(fs, x);
      EXPECT_GT(f, 0.0);
      const double t = std::exp(rng.normal());
      auto tx = x;
      for (auto& v : tx) v *= t;
      EXPECT_NEAR(eval_f(fs, tx), std::pow(t, fs.varsigma) * f, 1e-12 * f * (1 + t));
    }
    if (fs.family == FunctionSpec::Family::Linear) continue;
    // Approach the boundary along a ray: f tends to 0.
    std::vector<double> dir{-1, 0.2, 0.3, 0.1, 0.4};
    dir.resize(static_cast<std::size_t>(fs.domain.n));
    auto at = [&](double s) {
      std::vector<double> p(dir.size());
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = 1 + s * dir[i];
      return p;
    };
    double lo = 0, hi = 1;
    while (cone_margin(fs.domain, at(hi)) > 0) hi *= 2;
    for (int i = 0; i < 100; ++i) {
      double m = 0.5 * (lo + hi);
      (cone_margin(fs.domain, at(m)) > 0 ? lo : hi) = m;
    }
    EXPECT_LT(eval_f(fs, at(lo)), 1e-3 * eval_f(fs, at(0))) << fs.id();
  }
}

TEST(Tilde, SpecExamples) {
  std::vector<double> ones4(4, 1.0);
  auto op = make_transformed(FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2), 1.0);
  auto vg = tilde_eval_grad(op, ones4);
  EXPECT_NEAR(vg.value, std::sqrt(6.0), 1e-14);
  for (double v : vg.grad) EXPECT_NEAR(v, 3.0 / (2 * std::sqrt(6.0)), 1e-14);

  Rng rng(9);
  for (double rho : {-3.0, -0.5, 0.5}) {
    auto lin = make_transformed(FunctionSpec::linear(ConeSpec::garding(5, 1)), rho);
    auto pts = sample_interior(lin.tilde_domain, 200, rng);
    for (const auto& x : pts) {
      auto r = tilde_eval_grad(lin, x);
      EXPECT_NEAR(r.value, std::accumulate(x.begin(), x.end(), 0.0), 1e-12 * inf_norm(x));
      for (double g : r.grad) EXPECT_NEAR(g, 1.0, 1e-14);
    }
  }
}

TEST(Tilde, ChainRuleMatchesFiniteDifferencesAndDiagonal) {
  Rng rng(10);
  for (double rho : {1.0, -2.0, 1.9}) {
    auto op = make_transformed(FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2), rho);
    auto f = [&](const std::vector<double>& x) { return detail::f_raw(op.base, transform_to_base(x, rho), nullptr); };
    SamplerOptions opt;
    opt.margin_floor = 0.05;
    for (const auto& x : sample_interior(op.tilde_domain, 20, rng, opt)) {
      auto r = tilde_eval_grad(op, x);
      auto fd = central_diff(f, x, 1e-5 * inf_norm(x));
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(fd[i], r.grad[i], 1e-7 * inf_norm(r.grad));
    }
    std::vector<double> one(4, 1.0);
    auto r = tilde_eval_grad(op, one);
    const double d = std::accumulate(r.grad.begin(), r.grad.end(), 0.0);
    EXPECT_NEAR(d, op.base.varsigma * r.value, 1e-13);
  }
}

TEST(Tilde, Preconditions) {
  auto fs = FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2);
  EXPECT_THROW(make_transformed(fs, 0.0), PreconditionError);
  EXPECT_THROW(make_transformed(fs, 2.0), PreconditionError);
}

TEST(PartialEllipticity, LinearOnGammaOne) {
  auto fs = FunctionSpec::linear(ConeSpec::garding(4, 1));
  auto cert = certify_partial_ellipticity(fs, 0.25, 500, 3);
  EXPECT_TRUE(cert.passed) << cert.failure;
  EXPECT_NEAR(cert.theta, 0.25, 1e-14);
}

TEST(PartialEllipticity, SigmaTwoOnGammaTwo) {
  auto fs = FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2);
  auto th = compute_theta(fs.domain, 4000, 1);
  auto cert = certify_partial_ellipticity(fs, th.lower, 10000, 2);
  EXPECT_TRUE(cert.passed) << cert.failure;
  EXPECT_EQ(cert.kappa_used, 2);
  EXPECT_EQ(cert.violations, 0u);
}

TEST(PartialEllipticity, TooLargeThetaIsCaught) {
  auto fs = FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2);
  auto cert = certify_partial_ellipticity(fs, 0.5, 2000, 2);
  EXPECT_FALSE(cert.passed);
  EXPECT_GT(cert.violations, 0u);
  EXPECT_FALSE(cert.worst_case.empty());
}

TEST(FullEllipticity, LinearBaseIsOneOverN) {
  for (double rho : {-1.0, 0.5}) {
    auto op = make_transformed(FunctionSpec::linear(ConeSpec::garding(4, 1)), rho);
    auto cert = certify_full_ellipticity(op, 500, 1);
    EXPECT_TRUE(cert.passed);
    EXPECT_NEAR(cert.theta, 0.25, 1e-14);
  }
}

TEST(FullEllipticity, SweepDecaysTowardVarrho) {
  auto fs = FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2);
  std::vector<double> thetas;
  for (double rho : {1.0, 1.5, 1.9, 1.99}) {
    auto op = make_transformed(fs, rho);
    auto cert = certify_full_ellipticity(op, 4000, 11);
    EXPECT_TRUE(cert.passed);
    EXPECT_GT(cert.theta, 0.0);
    EXPECT_EQ(cone_type(op.tilde_domain), ConeType::Type2);
    // infimum over the cone is (1 - rho/2)/(4 - rho)
    const double exact = (1 - rho / 2) / (4 - rho);
    EXPECT_GE(cert.theta, exact - 1e-9);
    EXPECT_LE(cert.theta, 1.2 * exact);
    thetas.push_back(cert.theta);
  }
  for (std::size_t i = 1; i < thetas.size(); ++i) EXPECT_LT(thetas[i], thetas[i - 1]);
  EXPECT_GE(thetas.front() / thetas.back(), 10.0);
}

TEST(FullEllipticity, DichotomyWithConeType) {
  // Type 1 base cone itself is not fully elliptic: ratio degenerates at (0,..,0,1).
  auto fs = FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2);
  EXPECT_EQ(cone_type(fs.domain), ConeType::Type1);
  std::vector<double> x{1e-6, 1e-6, 1e-6, 1};
  auto g = grad_f(fs, x);
  EXPECT_LT(g[3] / std::accumulate(g.begin(), g.end(), 0.0), 1e-5);
}

TEST(Concavity, Families) {
  for (const auto& fs : families()) {
    auto rep = certify_concavity(fs, 2000, 4);
    EXPECT_TRUE(rep.passed) << fs.id();
    EXPECT_GT(rep.pairs_tested, 1000u);
  }
  auto lin = certify_concavity(FunctionSpec::linear(ConeSpec::garding(4, 1)), 500, 1);
  EXPECT_NEAR(lin.worst_gap, 0.0, 1e-12);
  auto op = make_transformed(FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2), 1.0);
  EXPECT_TRUE(certify_concavity(op, 10000, 5).passed);
}

TEST(Concavity, NonConcaveFunctionIsCaught) {
  auto rep = certify_concavity_of(
      ConeSpec::garding(3, 3), [](std::span<const double> x) { return x[0] * x[0]; }, 500, 1);
  EXPECT_FALSE(rep.passed);
  EXPECT_FALSE(rep.witness_a.empty());
}

}  // namespace
