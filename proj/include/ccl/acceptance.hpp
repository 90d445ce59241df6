#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "ccl/commands.hpp"

namespace ccl::acceptance {

using io::json;

struct Outcome {
  std::string id;
  std::string title;
  bool passed = false;
  std::string detail;
  json data = json::object();
  double seconds = 0.0;
};

/// Accumulates named checks; the criterion passes when all of them do.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      passed_ = false;
      if (!failed_.empty()) failed_ += "; ";
      failed_ += what;
    }
  }
  void note(const std::string& s) {
    if (!notes_.empty()) notes_ += "; ";
    notes_ += s;
  }
  bool passed() const { return passed_; }
  std::string detail() const { return passed_ ? notes_ : "FAILED: " + failed_ + (notes_.empty() ? "" : " | " + notes_); }
  json data = json::object();

 private:
  bool passed_ = true;
  std::string failed_, notes_;
};

inline std::string num(double v, int prec = 3) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

using Body = std::function<void(Checks&, std::uint64_t seed)>;

struct Criterion {
  std::string id;
  std::string title;
  Body body;
};

// ---- 1 -------------------------------------------------------------------------

inline void cone_goldens(Checks& c, std::uint64_t) {
  double worst_g = 0.0, worst_p = 0.0;
  int kappa_bad = 0, count = 0;
  for (int n = 2; n <= 8; ++n)
    for (int k = 1; k <= n; ++k) {
      worst_g = std::max(worst_g, std::abs(compute_varrho(ConeSpec::garding(n, k)) - static_cast<double>(n) / k));
      const auto p = ConeSpec::sum_cone(n, k);
      if (compute_kappa(p) != k - 1) ++kappa_bad;
      worst_p = std::max(worst_p, std::abs(compute_varrho(p) - k));
      ++count;
    }
  c.expect(worst_g <= 1e-8, "varrho(Gamma_k) off by " + num(worst_g));
  c.expect(kappa_bad == 0, std::to_string(kappa_bad) + " P_k with kappa != k-1");
  c.expect(worst_p <= 1e-8, "varrho(P_k) off by " + num(worst_p));
  c.note(std::to_string(count) + " (n,k) pairs; max |varrho - n/k| = " + num(worst_g) + ", max |varrho(P_k) - k| = " + num(worst_p));
  c.data = {{"pairs", count}, {"garding_error", worst_g}, {"pk_error", worst_p}};
}

// ---- 2 -------------------------------------------------------------------------

inline void upper_bound_rigidity(Checks& c, std::uint64_t seed) {
  const auto battery = builtin_cone_battery();
  c.expect(battery.size() >= 30, "battery has only " + std::to_string(battery.size()) + " cones");
  InvariantOptions opt;
  opt.seed = seed;
  int over = 0, false_rigid = 0, missed_rigid = 0, check_fail = 0;
  double worst = -1e300;
  for (const auto& item : battery) {
    const auto inv = invariant_report(item.cone, opt);
    worst = std::max(worst, inv.varrho - inv.kappa - 1.0);
    if (inv.varrho > inv.kappa + 1 + 1e-8) ++over;
    if (inv.rigidity && !item.is_sum_cone) ++false_rigid;
    if (!inv.rigidity && item.is_sum_cone) ++missed_rigid;
    if (!inv.checks_passed) ++check_fail;
  }
  c.expect(over == 0, std::to_string(over) + " cones with varrho > kappa + 1");
  c.expect(false_rigid == 0, std::to_string(false_rigid) + " non-P_k cones flagged rigid");
  c.expect(missed_rigid == 0, std::to_string(missed_rigid) + " P_k cones not flagged rigid");
  c.expect(check_fail == 0, std::to_string(check_fail) + " cones fail cross-checks");
  c.note(std::to_string(battery.size()) + " cones; max varrho - kappa - 1 = " + num(worst));
  c.data = {{"cones", battery.size()}, {"max_excess", worst}};
}

// ---- 3 -------------------------------------------------------------------------

inline void transform_formulas(Checks& c, std::uint64_t) {
  double worst = 0.0;
  int type_bad = 0, strict_bad = 0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  for (int n : {4, 6}) {
    for (const auto& base : {ConeSpec::garding(n, n), ConeSpec::garding(n, 2)}) {
      const double vg = compute_varrho(base);
      for (double rho : {-0.5, -2.0, -5.0}) {
        const auto t = transform_cone(base, rho);
        track(compute_varrho(t), vg + vg * (n - vg) / (vg - rho));
        if (cone_type(t) != ConeType::Type2) ++type_bad;
      }
    }
    // type 1 base: varrho~ = n - rho for 0 < rho <= varrho
    const auto g2 = ConeSpec::garding(n, 2);
    const double v2 = compute_varrho(g2);
    for (double rho : {0.5 * v2, 0.75 * v2, v2}) track(compute_varrho(transform_cone(g2, rho)), n - rho);
    // type 2 base: strictly above n - rho
    const auto g1 = ConeSpec::garding(n, 1);
    for (double rho : {0.5, 1.0, 2.0})
      if (!(compute_varrho(transform_cone(g1, rho)) > n - rho + 1e-6)) ++strict_bad;
    for (double t : {1.5, 2.0, 3.7}) {
      const double rho = (t - n) / (t - 1.0);
      track(compute_varrho(ConeSpec::half_space(n, rho)), t);
      track(compute_varrho(transform_cone(ConeSpec::garding(n, n), rho)), t);
    }
  }
  c.expect(worst <= 1e-6, "max formula deviation " + num(worst));
  c.expect(type_bad == 0, std::to_string(type_bad) + " negative-rho transforms not of type 2");
  c.expect(strict_bad == 0, std::to_string(strict_bad) + " type-2-base transforms not above n - rho");
  c.note("max deviation " + num(worst));
  c.data = {{"max_deviation", worst}};
}

// ---- 4 -------------------------------------------------------------------------

inline void subset_sums(Checks& c, std::uint64_t seed) {
  std::size_t viol = 0, t1 = 0, cones = 0;
  double worst = 1e300;
  for (const auto& item : builtin_cone_battery()) {
    const auto r = verify_subset_sums(item.cone, 10000, seed + cones);
    viol += r.violations;
    t1 += r.type1_violations;
    worst = std::min(worst, r.worst_subset_sum);
    ++cones;
  }
  c.expect(viol == 0, std::to_string(viol) + " (kappa+1)-subset violations");
  c.expect(t1 == 0, std::to_string(t1) + " leave-one-out violations on type 1 cones");
  c.note(std::to_string(cones) + " cones x 10000 samples; smallest normalized subset sum " + num(worst));
  c.data = {{"cones", cones}, {"violations", viol}, {"type1_violations", t1}, {"worst_subset_sum", worst}};
}

// ---- 5 -------------------------------------------------------------------------

inline void ellipticity_dichotomy(Checks& c, std::uint64_t seed) {
  struct Case {
    FunctionSpec f;
    std::vector<double> rhos;
  };
  const std::vector<Case> cases{
      {FunctionSpec::linear(ConeSpec::garding(4, 1)), {-1.0, 2.0, 3.5}},
      {FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2), {-2.0, 0.5, 1.5}},
      {FunctionSpec::sigma_k_root(ConeSpec::garding(5, 3), 3), {-1.0, 1.0, 1.5}},
      {FunctionSpec::sigma_quotient_root(ConeSpec::garding(5, 3), 3, 1), {-1.0, 1.0}},
      {FunctionSpec::sigma_k_root(ConeSpec::garding(6, 6), 6), {-3.0, 0.5}},
  };
  json rows = json::array();
  double worst_spread = 0.0;
  for (const auto& cs : cases)
    for (double rho : cs.rhos) {
      const auto op = make_transformed(cs.f, rho);
      const auto a = certify_full_ellipticity(op, 10000, seed);
      const auto b = certify_full_ellipticity(op, 10000, seed + 1);
      const double spread = std::abs(a.theta - b.theta) / std::max(a.theta, b.theta);
      worst_spread = std::max(worst_spread, spread);
      c.expect(a.passed && b.passed && a.theta > 0 && b.theta > 0, cs.f.id() + " rho=" + num(rho) + " not positive");
      c.expect(spread <= 0.05, cs.f.id() + " rho=" + num(rho) + " theta spread " + num(spread));
      rows.push_back({{"function", cs.f.id()}, {"rho", rho}, {"theta", std::min(a.theta, b.theta)}, {"spread", spread}});
    }
  // sweep toward varrho on the type 1 base Gamma_2(R^4)
  const auto f = FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2);
  std::vector<double> th;
  json sweep = json::array();
  for (double rho : {1.0, 1.5, 1.9, 1.99}) {
    const auto cert = certify_full_ellipticity(make_transformed(f, rho), 10000, seed);
    th.push_back(cert.theta);
    sweep.push_back({{"rho", rho}, {"theta", cert.theta}, {"exact_infimum", (1 - rho / 2) / (4 - rho)}});
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < th.size(); ++i) decreasing = decreasing && th[i] < th[i - 1];
  c.expect(decreasing, "sweep theta not decreasing");
  c.expect(th.front() / th.back() >= 10.0, "sweep ratio " + num(th.front() / th.back()) + " < 10");
  c.note(std::to_string(rows.size()) + " (f, rho) pairs positive, max seed spread " + num(worst_spread) +
         "; sweep theta(1.0)/theta(1.99) = " + num(th.front() / th.back()));
  c.data = {{"pairs", rows}, {"sweep", sweep}};
}

// ---- 6 -------------------------------------------------------------------------

inline void partial_ellipticity(Checks& c, std::uint64_t seed) {
  std::size_t certs = 0, viol = 0;
  for (int n = 2; n <= 6; ++n)
    for (int k = 1; k <= n; ++k) {
      const auto f = FunctionSpec::sigma_k_root(ConeSpec::garding(n, k), k);
      const double theta = compute_theta(f.domain, 4000, seed).lower;
      const auto cert = certify_partial_ellipticity(f, theta, 10000, seed + certs);
      c.expect(cert.passed, f.id() + ": " + cert.failure);
      viol += cert.violations;
      ++certs;
    }
  // sigma_n^{1/n}: f_n / f_1 = 1/t at (1, ..., 1, t), so no uniform bound beyond kappa + 1 = 1
  double worst = 0.0, smallest = 1.0;
  for (int n = 3; n <= 6; ++n) {
    const auto f = FunctionSpec::sigma_k_root(ConeSpec::garding(n, n), n);
    for (double t : {10.0, 1e3, 1e6}) {
      std::vector<double> lam(static_cast<std::size_t>(n), 1.0);
      lam.back() = t;
      const auto g = grad_f(f, lam);
      worst = std::max(worst, std::abs(g.back() / g.front() * t - 1.0));
      smallest = std::min(smallest, g.back() / std::accumulate(g.begin(), g.end(), 0.0));
    }
  }
  c.expect(worst <= 1e-12, "f_n/f_1 deviates from 1/t by " + num(worst));
  c.expect(smallest < 1e-6, "largest-eigenvalue weight does not degenerate");
  c.note(std::to_string(certs) + " certificates, " + std::to_string(viol) + " violations; f_n/f_1 = 1/t to " + num(worst) +
         ", min f_n/sum f = " + num(smallest));
  c.data = {{"certificates", certs}, {"violations", viol}, {"ratio_error", worst}, {"min_weight", smallest}};
}

// ---- 7 -------------------------------------------------------------------------

inline void conformal_identities(Checks& c, std::uint64_t seed) {
  const json cfg = {{"schema", io::kSchema},
                    {"manifold",
                     {{"kind", "conformal_torus"},
                      {"n", 4},
                      {"grid", 12},
                      {"phi", {{"modes", {{{"amp", 0.1}, {"k", {1, 0, 1, 0}}, {"phase", {0.3, 0, 1.1, 0}}},
                                          {{"amp", -0.07}, {"k", {0, 2, 0, 1}}, {"phase", {0, 0.5, 0, 2.0}}}}}}}}},
                    {"tau", 3.0},
                    {"alpha", 1.0}};
  for (auto [tau, alpha] : std::vector<std::pair<double, double>>{{3.0, 1.0}, {-2.0, -1.0}, {0.5, -1.0}}) {
    auto j = cfg;
    j["tau"] = tau;
    j["alpha"] = alpha;
    CommandOptions opt;
    opt.seed = seed;
    const auto r = commands::verify_identities(j, opt);
    for (const auto& key : {"check_identity", "v_additivity", "v_scaling"}) {
      const double v = r.summary[key]["residual"].get<double>();
      c.expect(v <= 1e-12, std::string(key) + " residual " + num(v) + " at tau=" + num(tau));
      c.data[key + std::string("_tau_") + num(tau)] = v;
    }
  }
  Rng rng(seed);
  auto phi = random_field(3, rng, 2, 0.1);
  auto u = random_field(3, rng, 3, 0.15);
  const auto st = conformal_formula_convergence(3, phi, u, {12, 24, 48}, 3.0, 1.0, 200);
  c.expect(st.order >= 1.8, "observed order " + num(st.order));
  c.note("identities <= 1e-12 on a 12^4 conformal torus; formula vs direct order " + num(st.order) + " (errors " +
         num(st.errors[0]) + ", " + num(st.errors[1]) + ", " + num(st.errors[2]) + ")");
  c.data["convergence"] = {{"nodes", st.nodes}, {"errors", st.errors}, {"order", st.order}};
}

// ---- 8 -------------------------------------------------------------------------

inline Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ();
}

inline void einstein_sectional(Checks& c, std::uint64_t seed) {
  Rng rng(seed);
  double gspec = 0.0;
  for (int s = 0; s < 1000; ++s) {
    const int n = 3 + static_cast<int>(rng.index(4));
    Eigen::MatrixXd S(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) S(i, j) = rng.normal();
    S = (0.5 * (S + S.transpose())).eval();
    const auto r = schouten_algebra(S);
    for (int i = 0; i < n; ++i)
      gspec = std::max(gspec, std::abs(r.g_eigs[i] - (n - 2) * (S.trace() - r.s_eigs[i])) / (1.0 + S.cwiseAbs().maxCoeff()));
  }
  c.expect(gspec <= 1e-12, "G spectrum residual " + num(gspec));

  const auto H = ModelManifold::hyperbolic_chart(3, 9);
  const auto Sp = ModelManifold::sphere_chart(3, 9);
  double sf = 0.0;
  const Eigen::Vector3d x(1, 0, 0), y(0, 1, 0.5);
  for (std::size_t i = 0; i < H.grid.size(); i += 37) {
    const auto h = sectional_vs_einstein(H, i, x, y);
    const auto s = sectional_vs_einstein(Sp, i, x, y);
    sf = std::max({sf, std::abs(h.einstein_normal - 1), std::abs(h.minus_sectional - 1), std::abs(s.einstein_normal + 1),
                   std::abs(s.minus_sectional + 1)});
  }
  c.expect(sf <= 1e-10, "space-form deviation " + num(sf));

  std::size_t samples = 0, neg = 0;
  for (const auto& item : builtin_cone_battery()) {
    if (cone_type(item.cone) != ConeType::Type1 || item.cone.n < 3) continue;
    const int n = item.cone.n;
    for (const auto& lam : sample_interior(item.cone, 1000, rng, SamplerOptions{1.5, 0.0, 0.5, 1000})) {
      const Eigen::MatrixXd Q = random_orthogonal(n, rng);
      const Eigen::VectorXd l = Eigen::Map<const Eigen::VectorXd>(lam.data(), n);
      Eigen::MatrixXd S = Q * l.asDiagonal() * Q.transpose();
      S = (0.5 * (S + S.transpose())).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(schouten_algebra(S).G);
      if (es.eigenvalues().minCoeff() < -1e-12 * l.cwiseAbs().maxCoeff()) ++neg;
      ++samples;
    }
  }
  c.expect(neg == 0, std::to_string(neg) + " Einstein tensors with a negative eigenvalue");
  c.note("G spectrum " + num(gspec) + "; space forms " + num(sf) + "; Einstein positive on " + std::to_string(samples) +
         " type 1 samples");
  c.data = {{"g_spectrum", gspec}, {"space_form", sf}, {"einstein_samples", samples}, {"einstein_negative", neg}};
}

// ---- 9 -------------------------------------------------------------------------

inline FieldSpec warped_bump_v() {
  FieldSpec v = FieldSpec::cosine(4, 0, -0.1);
  v.constant = -1.15;
  for (int i = 1; i < 4; ++i) v += FieldSpec::cosine(4, i, -0.01);
  return v;
}

inline ModelManifold warped_bump_torus(int nodes) {
  return ModelManifold::warped_torus(4, nodes, {FieldSpec::zero(), FieldSpec::sine(4, 0, 0.3), FieldSpec::sine(4, 0, -0.3),
                                                FieldSpec::zero()});
}

inline void construction(Checks& c, std::uint64_t) {
  auto direct = [](const ModelManifold& M, const FieldSpec& v, double N, const ConeSpec& cone) {
    return verify_conformal_metric(M, [&](const Eigen::VectorXd& x) { return std::exp(N * v.value(x)); }, 3.0, 1.0, cone);
  };
  {
    const auto M = ModelManifold::slab(4, 9);
    FieldSpec v;
    v.constant = -2.0;
    v.linear = {1.0, 0, 0, 0};
    const auto r = construct_admissible(M, ConeSpec::garding(4, 1), 3.0, 1.0, v, 64.0);
    c.expect(r.success && r.hypotheses_met, "slab construction failed");
    if (r.success) {
      const auto d = direct(M, v, r.N, ConeSpec::garding(4, 1));
      c.expect(d.cls == Admissibility::Admissible, "slab ubar is " + to_string(d.cls) + " under direct differentiation");
      c.note("slab N = " + num(r.N) + ", direct min margin " + num(d.worst_margin));
      c.data["slab_N"] = r.N;
    }
  }
  {
    const auto M = warped_bump_torus(8);
    const auto v = warped_bump_v();
    const auto r = construct_admissible(M, ConeSpec::garding(4, 1), 3.0, 1.0, v, 1024.0);
    c.expect(r.base_report.cls == Admissibility::QuasiAdmissible, "bumped torus base is " + to_string(r.base_report.cls));
    c.expect(r.success && r.hypotheses_met, "bumped torus construction failed");
    if (r.success) {
      const auto d = direct(M, v, r.N, ConeSpec::garding(4, 1));
      c.expect(d.cls == Admissibility::Admissible, "bumped torus ubar is " + to_string(d.cls) + " under direct differentiation");
      c.note("bumped torus N = " + num(r.N) + ", direct min margin " + num(d.worst_margin));
      c.data["bumped_N"] = r.N;
    }
  }
  {
    const auto M = ModelManifold::flat_torus(4, 8);
    auto v = FieldSpec::cosine(4, 0, 0.1);
    v.constant = -1.5;
    const auto r = construct_admissible(M, ConeSpec::garding(4, 1), 3.0, 1.0, v, 64.0);
    c.expect(!r.hypotheses_met && !r.success, "flat torus construction not reported as failing");
    c.note("flat torus: " + (r.hypothesis_notes.empty() ? std::string("?") : r.hypothesis_notes.front()));
  }
}

// ---- 10 ------------------------------------------------------------------------

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// The manufactured problems exactly as stated, on the flat torus.
inline void flat_torus_solver(Checks& c, std::uint64_t) {
  {
    const auto M = ModelManifold::flat_torus(3, 16);
    const auto f = FunctionSpec::linear(ConeSpec::garding(3, 1));
    const auto ustar = torus_trial_solution(3);
    try {
      auto P = ProblemSpec::make(M, f, 3.0, 1.0, manufactured_psi(M, f, 3.0, 1.0, ustar, false));
      const auto us = sample_values(M.grid, ustar);
      SolveOptions o;
      o.tol = 1e-11;
      const auto r = solve_closed(P, us, o);
      c.expect(r.converged && sup_diff(r.u, us) <= 1e-8, "sigma_1 16^3 recovery failed");
    } catch (const Error& e) {
      c.expect(false, std::string("sigma_1 16^3: ") + e.what());
    }
    // weighted mean of tr(-A~) against e^{(n-2)u} is -(n-2)/2 <e^{(n-2)u} |du|^2> < 0
    double mean = 0.0;
    for (std::size_t i = 0; i < M.grid.size(); ++i) {
      const auto j = ustar(M.grid.coord(i));
      mean += std::exp(j.v) * (j.dd.trace() + 0.5 * j.d.squaredNorm());
    }
    mean /= static_cast<double>(M.grid.size());
    c.note("on a flat torus the e^{(n-2)u}-weighted mean of tr(-A~) is " + num(mean) +
           " < 0, so no u* is admissible for a trace-positive cone");
    c.data["weighted_trace_mean"] = mean;
  }
  const auto f = FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2);
  for (int nodes : {8, 12, 16}) {
    const auto M = ModelManifold::flat_torus(4, nodes);
    try {
      manufactured_psi(M, f, 2.5, 1.0, torus_trial_solution(4), true);
    } catch (const Error& e) {
      c.expect(false, "sigma_2^{1/2} " + std::to_string(nodes) + "^4: " + e.what());
    }
  }
}

/// Same solver claims on closed problems that admit admissible solutions.
inline void admissible_solver(Checks& c, std::uint64_t) {
  auto bowed = [](const Grid& g, std::vector<double> u) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double x = g.coord(i)[0];
      u[i] -= 0.2 * x * (1.0 - x);
    }
    return u;
  };
  auto all_interior = [](const SolveReport& r) {
    for (double m : r.min_margin)
      if (!(m > 0.0)) return false;
    return true;
  };
  {
    const auto M = ModelManifold::slab(3, 16);
    const auto f = FunctionSpec::linear(ConeSpec::garding(3, 1));
    const auto P = ProblemSpec::make(M, f, 3.0, 1.0, manufactured_psi(M, f, 3.0, 1.0, slab_trial_solution(3), false));
    const auto us = sample_values(M.grid, slab_trial_solution(3));
    SolveOptions o;
    o.tol = 1e-11;
    const auto r = solve_closed(P, bowed(M.grid, us), o);
    const double e = sup_diff(r.u, us);
    c.expect(r.converged && e <= 1e-8 && r.iterations <= 12, "slab sigma_1 16^3 recovery error " + num(e));
    c.expect(all_interior(r), "slab sigma_1 iterate left the cone");
    c.note("slab sigma_1 16^3: error " + num(e) + " in " + std::to_string(r.iterations) + " steps");
    c.data["slab_sigma1"] = {{"error", e}, {"iterations", r.iterations}};
  }
  {
    const auto M = warped_bump_torus(8);
    const auto v = warped_bump_v();
    const auto con = construct_admissible(M, ConeSpec::garding(4, 1), 3.0, 1.0, v, 1024);
    c.expect(con.success, "warped torus construction failed");
    if (con.success) {
      const auto f = FunctionSpec::linear(ConeSpec::garding(4, 1));
      const auto P = ProblemSpec::make(M, f, 3.0, 1.0, manufactured_psi(M, f, 3.0, 1.0, exp_field_jet(v, con.N), false));
      const auto us = sample_values(M.grid, exp_field_jet(v, con.N));
      const auto r = solve_closed(P, sample_values(M.grid, exp_field_jet(v, 1.1 * con.N)));
      const double e = sup_diff(r.u, us);
      c.expect(r.converged && e <= 1e-8 && r.iterations <= 12, "closed warped torus recovery error " + num(e));
      c.expect(all_interior(r), "warped torus iterate left the cone");
      c.note("closed warped torus 8^4: error " + num(e) + " in " + std::to_string(r.iterations) + " steps");
      c.data["warped_sigma1"] = {{"error", e}, {"iterations", r.iterations}};
    }
  }
  {
    const auto f = FunctionSpec::sigma_k_root(ConeSpec::garding(4, 2), 2);
    const double theta = (1.0 - (2.0 / 1.5) / 2.0) / (4.0 - 2.0 / 1.5);
    std::vector<double> nodes{8, 12, 16}, err;
    for (double nd : nodes) {
      const auto M = ModelManifold::slab(4, static_cast<int>(nd));
      const auto P = ProblemSpec::make(M, f, 2.5, 1.0, manufactured_psi(M, f, 2.5, 1.0, slab_trial_solution(4), true));
      const auto us = sample_values(M.grid, slab_trial_solution(4));
      SolveOptions o;
      o.tol = 1e-11;
      o.theta_bound = theta;
      const auto r = solve_closed(P, bowed(M.grid, us), o);
      c.expect(r.converged, "slab sigma_2 " + num(nd) + "^4 did not converge");
      c.expect(all_interior(r), "slab sigma_2 iterate left the cone");
      err.push_back(sup_diff(r.u, us));
    }
    const double order = observed_order(nodes, err);
    c.expect(order >= 1.8, "sigma_2 refinement order " + num(order));
    c.note("slab sigma_2^{1/2} errors " + num(err[0]) + ", " + num(err[1]) + ", " + num(err[2]) + ", order " + num(order));
    c.data["slab_sigma2"] = {{"nodes", nodes}, {"errors", err}, {"order", order}};
  }
}

// ---- 11 ------------------------------------------------------------------------

inline ProblemSpec hyperbolic_radial_problem(int n, const FunctionSpec& f, double tau, double scale = 1.0) {
  const auto M = ModelManifold::radial_ball(n, 11);
  const auto P0 = ProblemSpec::make(M, f, tau, 1.0, std::vector<double>(11, 1.0));
  const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
  const double psi = 0.5 * tilde_eval_grad(P0.op, ones).value / P0.c;
  return ProblemSpec::make(M, f, tau, 1.0, std::vector<double>(11, psi * scale));
}

inline void radial_blowup(Checks& c, std::uint64_t) {
  const auto f = FunctionSpec::linear(ConeSpec::garding(3, 1));
  const auto P = hyperbolic_radial_problem(3, f, 3.0);
  RadialOptions o;
  o.eps_schedule = {0.2, 0.1, 0.05, 0.025, 0.0125};
  const auto r = solve_radial_blowup(P, o);
  c.expect(r.converged, "continuation failed: " + r.failure);
  if (!r.converged) return;
  double err = 0.0, gap = 1e300, change = 0.0;
  for (std::size_t i = 0; i < r.r.size(); ++i)
    if (r.r[i] <= 0.9) err = std::max(err, std::abs(r.profiles.back()[i] - hyperbolic_profile(r.r[i])));
  for (double g : r.monotonicity_gap) gap = std::min(gap, g);
  for (std::size_t k = 2; k < r.interior_change.size(); ++k) change = std::max(change, r.interior_change[k]);
  c.expect(err <= 1e-3, "profile deviation " + num(err));
  c.expect(r.monotone && gap >= -1e-10, "profiles not monotone in eps (gap " + num(gap) + ")");
  c.expect(change <= 1e-6, "interior values move by " + num(change) + " under continuation");

  RadialOptions o4 = o;
  o4.boundary_shift = -std::log(4.0) / 2.0;
  const auto r4 = solve_radial_blowup(hyperbolic_radial_problem(3, f, 3.0, 4.0), o4);
  double shift = 0.0;
  if (r4.converged)
    for (std::size_t i = 0; i < r.r.size(); ++i)
      shift = std::max(shift, std::abs(r4.profiles.back()[i] - (r.profiles.back()[i] - std::log(4.0) / 2.0)));
  c.expect(r4.converged && shift <= 1e-9, "psi -> 4 psi shift error " + num(shift));
  c.note("sup |u - log(2/(1-r^2))| on r <= 0.9 = " + num(err) + ", min monotonicity gap " + num(gap) +
         ", psi-scaling shift error " + num(shift));
  c.data = {{"deviation", err}, {"min_gap", gap}, {"interior_change", change}, {"shift_error", shift}};
}

// ---- 12 ------------------------------------------------------------------------

struct ReproCase {
  std::string command;
  json config;
};

inline std::vector<ReproCase> reproducibility_cases() {
  const json s = io::kSchema;
  return {
      {"cone-report",
       {{"schema", s},
        {"battery", {{{"kind", "garding"}, {"n", 5}, {"k", 2}}, {{"kind", "pk"}, {"n", 5}, {"k", 3}},
                     {{"kind", "transform"}, {"rho", 1.0}, {"base", {{"kind", "garding"}, {"n", 4}, {"k", 2}}}}}}}},
      {"ellipticity",
       {{"schema", s},
        {"function", {{"family", "sigma_k_root"}, {"k", 2}, {"cone", {{"kind", "garding"}, {"n", 4}, {"k", 2}}}}},
        {"samples", 2000},
        {"rho", {-1.0, 1.5}}}},
      {"verify-identities",
       {{"schema", s},
        {"manifold", {{"kind", "conformal_torus"}, {"n", 3}, {"grid", 8}, {"phi", {{"modes", {{{"amp", 0.1}, {"k", {1, 1, 0}}}}}}}}},
        {"random_matrices", 200}}},
      {"construct",
       {{"schema", s},
        {"manifold", {{"kind", "slab"}, {"n", 4}, {"grid", 8}}},
        {"cone", {{"kind", "garding"}, {"n", 4}, {"k", 1}}},
        {"tau", 3.0},
        {"v", {{"constant", -2.0}, {"linear", {1.0, 0, 0, 0}}}},
        {"N_max", 64}}},
      {"solve",
       {{"schema", s},
        {"manifold", {{"kind", "slab"}, {"n", 3}, {"grid", 10}}},
        {"function", {{"family", "sigma_k_root"}, {"k", 2}, {"cone", {{"kind", "garding"}, {"n", 3}, {"k", 2}}}}},
        {"tau", 3.0},
        {"psi", {{"kind", "manufactured"}, {"solution", {{"kind", "slab_trial"}}}, {"mode", "analytic"}}},
        {"initial", {{"kind", "slab_trial"}, {"bow", 0.2}}}}},
  };
}

inline void reproducibility(Checks& c, std::uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("ccl_repro_" + std::to_string(seed) + "_" + std::to_string(::getpid()));
  const char* prev = std::getenv("CCL_THREADS");
  const std::string saved = prev ? prev : "";
  int k = 0;
  for (const auto& rc : reproducibility_cases()) {
    const auto fn = *find_command(rc.command);
    CommandOptions opt;
    opt.seed = seed;
    std::vector<std::string> hashes;
    for (const char* threads : {"1", "2", "1"}) {
      setenv("CCL_THREADS", threads, 1);
      const auto r = run_command(fn, rc.config, opt);
      if (r.exit_code != kExitOk) {
        c.expect(false, rc.command + " exited " + std::to_string(r.exit_code) + ": " + r.message);
        break;
      }
      const auto dir = root / (std::to_string(k) + "_" + std::to_string(hashes.size()));
      hashes.push_back(write_result(r, rc.command, rc.config, dir, opt, 0.0));
      const auto manifest = io::load_json(dir / "manifest.json");
      c.expect(manifest["artifacts_hash"] == hashes.back(), rc.command + ": manifest hash does not match artifacts");
      c.expect(manifest["seed"] == seed, rc.command + ": seed missing from the manifest");
    }
    if (hashes.size() == 3) {
      c.expect(hashes[0] == hashes[1] && hashes[1] == hashes[2], rc.command + ": reruns differ");
      c.data[rc.command] = hashes[0];
    }
    ++k;
  }
  if (prev) {
    setenv("CCL_THREADS", saved.c_str(), 1);
  } else {
    unsetenv("CCL_THREADS");
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  c.note(std::to_string(k) + " commands rerun 3x (1, 2, 1 threads) with identical artifact hashes");
}

// ---- registry ------------------------------------------------------------------

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"1", "cone goldens", cone_goldens},
      {"2", "upper bound and rigidity", upper_bound_rigidity},
      {"3", "transform formulas", transform_formulas},
      {"4", "subset-sum positivity", subset_sums},
      {"5", "full ellipticity dichotomy and sweep", ellipticity_dichotomy},
      {"6", "partial ellipticity", partial_ellipticity},
      {"7", "conformal identities and formula convergence", conformal_identities},
      {"8", "Einstein and sectional curvature", einstein_sectional},
      {"9", "admissible construction", construction},
      {"10", "manufactured solves on the flat torus", flat_torus_solver},
      {"10b", "manufactured solves on admissible closed problems", admissible_solver},
      {"11", "radial blow-up profile", radial_blowup},
      {"12", "bitwise reproducibility", reproducibility},
  };
  return all;
}

inline Outcome run(const Criterion& cr, std::uint64_t seed) {
  Outcome o{cr.id, cr.title, false, "", json::object(), 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  Checks c;
  try {
    cr.body(c, seed);
    o.passed = c.passed();
    o.detail = c.detail();
  } catch (const std::exception& e) {
    o.passed = false;
    o.detail = std::string("FAILED: exception: ") + e.what() + (c.detail().empty() ? "" : " | " + c.detail());
  }
  o.data = c.data;
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

inline std::string line(const Outcome& o) {
  std::ostringstream s;
  s << (o.passed ? "PASS" : "FAIL") << " criterion " << o.id << " (" << o.title << ", " << std::fixed << std::setprecision(1)
    << o.seconds << " s): " << o.detail;
  return s.str();
}

}  // namespace ccl::acceptance

namespace ccl::commands {

/// Runs the acceptance battery (all criteria, or the ids listed under "criteria").
inline CommandResult suite(const io::json& cfg, const CommandOptions& opt) {
  std::vector<std::string> ids = io::get_or<std::vector<std::string>>(cfg, "criteria", {}, "suite");
  std::vector<const acceptance::Criterion*> chosen;
  for (const auto& cr : acceptance::criteria())
    if (ids.empty() || std::find(ids.begin(), ids.end(), cr.id) != ids.end()) chosen.push_back(&cr);
  for (const auto& id : ids) {
    bool found = false;
    for (const auto& cr : acceptance::criteria()) found = found || cr.id == id;
    if (!found) throw ConfigError("suite: unknown criterion \"" + id + "\"");
  }
  CommandResult res;
  io::json rows = io::json::array();
  std::string csv = "criterion,title,passed,detail\n";
  for (const auto* cr : chosen) {
    const auto o = acceptance::run(*cr, opt.seed);
    rows.push_back({{"criterion", o.id}, {"title", o.title}, {"passed", o.passed}, {"detail", o.detail}, {"data", o.data}});
    csv += o.id + "," + csv_quote(o.title) + "," + (o.passed ? "1" : "0") + "," + csv_quote(o.detail) + "\n";
    res.summary[o.id] = o.passed;
    if (!o.passed) res.fail(kExitInvariant, "criterion " + o.id + " failed");
  }
  res.add_json("suite.json", {{"schema", io::kSchema}, {"seed", opt.seed}, {"criteria", rows}});
  res.add("summary.csv", csv);
  return res;
}

}  // namespace ccl::commands
