#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "ccl/cone.hpp"
#include "ccl/cone_invariants.hpp"
#include "ccl/sampling.hpp"

namespace {

using namespace ccl;

// Brute-force sigma_k by subset enumeration, independent of the recurrence.
double sigma_brute(const std::vector<double>& x, int k) {
  const int n = static_cast<int>(x.size());
  double s = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    double p = 1.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) p *= x[static_cast<std::size_t>(i)];
    s += p;
  }
  return s;
}

// Every k-subset sum positive, by enumeration.
bool all_subset_sums_positive(const std::vector<double>& x, int k) {
  const int n = static_cast<int>(x.size());
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != k) continue;
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      if (mask & (1u << i)) s += x[static_cast<std::size_t>(i)];
    if (!(s > 0.0)) return false;
  }
  return true;
}

TEST(SymmetricPoly, MatchesEnumeration) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(6);
    for (auto& v : x) v = rng.normal();
    for (int k = 0; k <= 6; ++k) EXPECT_NEAR(sigma(x, k), sigma_brute(x, k), 1e-12);
  }
}

TEST(ConeMembership, SpecExamples) {
  const double tol = 1e-12;
  std::vector<double> ones(5, 1.0);
  EXPECT_EQ(cone_membership(ConeSpec::sum_cone(5, 3), ones, tol).cls, Membership::Interior);

  const auto g2 = ConeSpec::garding(4, 2);
  std::vector<double> a{0, 0, 1, 1}, b{0, 0, 0, 1};
  EXPECT_EQ(cone_membership(g2, a, tol).cls, Membership::Interior);
  EXPECT_EQ(cone_membership(g2, b, tol).cls, Membership::Boundary);

  const auto tr = ConeSpec::transform_unchecked(ConeSpec::garding(4, 4), -2.0);
  std::vector<double> c{1, 1, 1, -0.9};
  EXPECT_EQ(cone_membership(tr, c, tol).cls, Membership::Interior);
  // sum - rho*lambda_i = 2.1 + 2 lambda_i, smallest 0.3 > 0
  auto mu = transform_to_base(c, -2.0);
  for (double m : mu) EXPECT_GT(m, 0.0);
}

TEST(ConeMembership, Errors) {
  std::vector<double> v{1, 2, 3};
  EXPECT_THROW(cone_membership(ConeSpec::garding(4, 2), v, 1e-9), PreconditionError);
  EXPECT_THROW(ConeSpec::transform_unchecked(ConeSpec::garding(4, 2), 0.0), PreconditionError);
  EXPECT_THROW(ConeSpec::garding(4, 5), PreconditionError);
  EXPECT_THROW(ConeSpec::garding(1, 1), PreconditionError);
}

TEST(ConeMembership, GardingAgreesWithBruteForceSigma) {
  Rng rng(11);
  for (int n = 3; n <= 6; ++n)
    for (int k = 1; k <= n; ++k) {
      const auto g = ConeSpec::garding(n, k);
      for (int s = 0; s < 300; ++s) {
        std::vector<double> x(static_cast<std::size_t>(n));
        for (auto& v : x) v = 1.0 + 1.5 * rng.normal();
        bool oracle = true;
        for (int j = 1; j <= k; ++j) oracle = oracle && sigma_brute(x, j) > 0;
        EXPECT_EQ(is_interior(g, x), oracle);
      }
    }
}

TEST(ConeMembership, SumConeAgreesWithEnumeration) {
  Rng rng(12);
  const auto p = ConeSpec::sum_cone(6, 3);
  for (int s = 0; s < 1000; ++s) {
    std::vector<double> x(6);
    for (auto& v : x) v = 0.5 + rng.normal();
    EXPECT_EQ(is_interior(p, x), all_subset_sums_positive(x, 3));
  }
}

std::vector<ConeSpec> property_cones() {
  return {ConeSpec::garding(4, 2),
          ConeSpec::garding(5, 3),
          ConeSpec::sum_cone(5, 3),
          ConeSpec::half_space(4, -2.0),
          ConeSpec::transform_unchecked(ConeSpec::garding(4, 2), 1.0),
          ConeSpec::projection_unchecked(ConeSpec::garding(5, 2), 4)};
}

TEST(ConeProperties, SymmetryPositivityScalingConvexity) {
  Rng rng(21);
  for (const auto& c : property_cones()) {
    const auto n = static_cast<std::size_t>(c.n);
    for (int s = 0; s < 1000; ++s) {
      std::vector<double> x(n), y(n), pos(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = 1.0 + 1.5 * rng.normal();
        y[i] = 1.0 + 1.5 * rng.normal();
        pos[i] = std::exp(rng.normal());
      }
      EXPECT_TRUE(is_interior(c, pos)) << c.id();
      auto perm = x;
      rng.shuffle(perm);
      EXPECT_EQ(is_interior(c, x), is_interior(c, perm)) << c.id();
      if (is_interior(c, x)) {
        const double t = std::exp(2.0 * rng.normal());
        std::vector<double> tx(x);
        for (auto& v : tx) v *= t;
        EXPECT_TRUE(is_interior(c, tx)) << c.id();
        if (is_interior(c, y)) {
          std::vector<double> mid(n);
          for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (x[i] + y[i]);
          EXPECT_TRUE(is_interior(c, mid)) << c.id();
        }
      }
    }
  }
}

TEST(ConeProperties, ProjectionMonotoneInR) {
  const auto base = ConeSpec::garding(5, 2);
  Rng rng(5);
  for (int s = 0; s < 200; ++s) {
    std::vector<double> lam(4);
    for (auto& v : lam) v = rng.normal();
    std::vector<double> full(5);
    std::copy(lam.begin(), lam.end(), full.begin());
    bool seen = false;
    for (double r = 0.01; r < 1e8; r *= 3.0) {
      full[4] = r;
      const bool in = is_interior(base, full);
      if (seen) {
        EXPECT_TRUE(in);
      }
      seen = seen || in;
    }
  }
}

TEST(Kappa, SpecExamples) {
  EXPECT_EQ(compute_kappa(ConeSpec::sum_cone(5, 3)), 2);
  EXPECT_EQ(compute_kappa(ConeSpec::garding(5, 5)), 0);
  EXPECT_EQ(compute_kappa(ConeSpec::garding(4, 2)), 2);
}

TEST(Varrho, SpecExamples) {
  EXPECT_NEAR(compute_varrho(ConeSpec::garding(6, 2)), 3.0, 1e-8);
  EXPECT_NEAR(compute_varrho(ConeSpec::garding(5, 5)), 1.0, 1e-8);
  EXPECT_NEAR(compute_varrho(ConeSpec::sum_cone(5, 3)), 3.0, 1e-8);
}

TEST(Varrho, GardingGoldensUpToEight) {
  for (int n = 2; n <= 8; ++n)
    for (int k = 1; k <= n; ++k)
      EXPECT_NEAR(compute_varrho(ConeSpec::garding(n, k)), static_cast<double>(n) / k, 1e-8) << n << "," << k;
}

TEST(ConeType, SpecExamples) {
  EXPECT_EQ(cone_type(ConeSpec::garding(5, 1)), ConeType::Type2);
  EXPECT_EQ(cone_type(ConeSpec::garding(4, 2)), ConeType::Type1);
  EXPECT_EQ(cone_type(transform_cone(ConeSpec::garding(4, 4), -2.0)), ConeType::Type2);
}

TEST(Transform, RoundTripAndTrace) {
  Rng rng(8);
  for (double rho : {-3.0, -0.5, 0.7, 1.9}) {
    for (int s = 0; s < 1000; ++s) {
      std::vector<double> lam(5);
      for (auto& v : lam) v = 3.0 * rng.normal();
      auto mu = transform_to_base(lam, rho);
      auto back = transform_from_base(mu, rho);
      const double scale = 1.0 + inf_norm(lam);
      for (std::size_t i = 0; i < 5; ++i) EXPECT_LE(std::abs(back[i] - lam[i]), 1e-12 * scale);
      EXPECT_NEAR(std::accumulate(mu.begin(), mu.end(), 0.0), std::accumulate(lam.begin(), lam.end(), 0.0),
                  1e-12 * scale);
    }
  }
  std::vector<double> diag(4, 2.5);
  auto mu = transform_to_base(diag, 1.3);
  for (double m : mu) EXPECT_NEAR(m, 2.5, 1e-14);
}

TEST(Transform, VarrhoFormulas) {
  EXPECT_NEAR(compute_varrho(transform_cone(ConeSpec::garding(4, 4), -2.0)), 2.0, 1e-8);
  EXPECT_NEAR(compute_varrho(transform_cone(ConeSpec::garding(4, 2), 1.0)), 3.0, 1e-8);
  // varrho < 0 branch on the Gamma_2 base: rho_G + rho_G (n - rho_G)/(rho_G - rho)
  const double rg = 2.0, rho = -1.5, n = 4.0;
  EXPECT_NEAR(compute_varrho(transform_cone(ConeSpec::garding(4, 2), rho)), rg + rg * (n - rg) / (rg - rho), 1e-8);
}

TEST(Transform, TypeTwoBaseIsStrictlyAboveNMinusRho) {
  // Gamma_1 is type 2; 0 < rho <= varrho gives varrho~ > n - rho.
  const auto base = ConeSpec::garding(4, 1);
  for (double rho : {0.5, 1.0, 2.0}) {
    const double v = compute_varrho(transform_cone(base, rho));
    EXPECT_GT(v, 4.0 - rho + 1e-6);
  }
}

TEST(Transform, Errors) {
  EXPECT_THROW(transform_cone(ConeSpec::garding(4, 2), 0.0), PreconditionError);
  EXPECT_THROW(transform_cone(ConeSpec::garding(4, 2), 2.5), PreconditionError);
}

TEST(Transform, TypeTwoCorollaryExample) {
  for (int n : {4, 6})
    for (double t : {1.5, 2.0, 3.7}) {
      const double rho = (t - n) / (t - 1.0);
      EXPECT_NEAR(compute_varrho(ConeSpec::half_space(n, rho)), t, 1e-6);
      EXPECT_NEAR(compute_varrho(transform_cone(ConeSpec::garding(n, n), rho)), t, 1e-6);
    }
}

TEST(Projection, SpecExamples) {
  const auto p1 = project_cone(ConeSpec::garding(5, 2), 4);
  EXPECT_EQ(compute_kappa(p1), 3);
  EXPECT_EQ(compute_kappa(ConeSpec::garding(5, 2)), 3);
  const auto p2 = project_cone(ConeSpec::sum_cone(5, 3), 4);
  EXPECT_EQ(compute_kappa(p2), 2);
  EXPECT_NEAR(compute_varrho(p2), 3.0, 1e-8);
  EXPECT_THROW(project_cone(ConeSpec::garding(5, 1), 4), PreconditionError);
}

TEST(Projection, PreservesKappaAndRaisesVarrho) {
  for (auto base : {ConeSpec::garding(6, 3), ConeSpec::garding(6, 2), ConeSpec::sum_cone(6, 2)}) {
    const int kappa = compute_kappa(base);
    const double vr = compute_varrho(base);
    for (int d = base.n - 1; d >= kappa + 1; --d) {
      const auto p = project_cone(base, d);
      EXPECT_EQ(compute_kappa(p), kappa) << p.id();
      EXPECT_GE(compute_varrho(p), vr - 1e-8) << p.id();
    }
  }
}

TEST(Theta, PositiveOrthantIsExact) {
  auto t = compute_theta(ConeSpec::garding(5, 5), 10, 1);
  EXPECT_EQ(t.lower, 1.0 / 5);
  EXPECT_EQ(t.estimate, 1.0 / 5);
}

TEST(Theta, GammaOneApproachesOneOverN) {
  auto t = compute_theta(ConeSpec::garding(4, 1), 20000, 7);
  EXPECT_LE(t.lower, 0.25);
  EXPECT_LE(t.lower, t.estimate);
  EXPECT_GT(t.estimate, 0.2);
  EXPECT_LE(t.estimate, 0.25 + 1e-9);
}

TEST(Theta, GammaTwoBoundAndDeterminism) {
  const auto g = ConeSpec::garding(4, 2);
  auto a = compute_theta(g, 5000, 42);
  auto b = compute_theta(g, 5000, 42);
  EXPECT_EQ(a.lower, b.lower);
  EXPECT_EQ(a.estimate, b.estimate);
  EXPECT_GT(a.lower, 0.0);
  EXPECT_LE(a.lower, 1.0 / 8 + 1e-12);
  EXPECT_LE(a.lower, a.estimate);
  EXPECT_TRUE(is_interior(g, a.witness));
}

TEST(SubsetSums, SpecExamples) {
  auto r = verify_subset_sums(ConeSpec::garding(4, 2), 10000, 3);
  EXPECT_EQ(r.kappa, 2);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_EQ(r.type1_violations, 0u);
  auto r2 = verify_subset_sums(ConeSpec::garding(4, 4), 1000, 3);
  EXPECT_EQ(r2.violations, 0u);
  EXPECT_GT(r2.worst_subset_sum, 0.0);
  // Gamma_1 in R^3: only the full sum is constrained.
  std::vector<double> x{-1, -1, 3};
  EXPECT_TRUE(is_interior(ConeSpec::garding(3, 1), x));
  EXPECT_EQ(compute_kappa(ConeSpec::garding(3, 1)), 2);
  EXPECT_DOUBLE_EQ(x[0] + x[1] + x[2], 1.0);
}

TEST(Invariants, SpecExamples) {
  auto p4 = invariant_report(ConeSpec::sum_cone(7, 4));
  EXPECT_EQ(p4.kappa, 3);
  EXPECT_NEAR(p4.varrho, 4.0, 1e-8);
  EXPECT_TRUE(p4.rigidity);
  EXPECT_TRUE(p4.checks_passed);

  auto g3 = invariant_report(ConeSpec::garding(5, 3));
  EXPECT_EQ(g3.kappa, 2);
  EXPECT_NEAR(g3.varrho, 5.0 / 3, 1e-8);
  EXPECT_FALSE(g3.rigidity);
  EXPECT_TRUE(g3.checks_passed);
  EXPECT_NEAR(1.0 + (5 - 2) / g3.varrho, 2.8, 1e-8);

  auto gn = invariant_report(ConeSpec::garding(4, 4));
  EXPECT_EQ(gn.kappa, 0);
  EXPECT_NEAR(gn.varrho, 1.0, 1e-8);
  EXPECT_EQ(gn.theta_lower, 0.25);
  EXPECT_TRUE(gn.checks_passed);
}

}  // namespace
