#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ccl/conformal.hpp"
#include "ccl/operators.hpp"
#include "ccl/parallel.hpp"

namespace ccl {

using JetFn = std::function<ScalarJet(const Eigen::VectorXd&)>;

/// f~(lambda(-g^{-1} A_{g~})) = c psi e^{2 varsigma u} on a model manifold,
/// with f~ the transform of `f` by varrho = (n-2)/(tau-1).
struct ProblemSpec {
  ModelManifold manifold;
  FunctionSpec f;
  double tau = 3.0, alpha = 1.0;
  std::vector<double> psi;  // nodal, > 0

  ReductionConstants k;
  TransformedOperator op{FunctionSpec::linear(ConeSpec::garding(3, 1)), 1.0};
  double c = 0.0;

  static ProblemSpec make(const ModelManifold& M, const FunctionSpec& f, double tau, double alpha,
                          std::vector<double> psi) {
    if (f.domain.n != M.n) throw PreconditionError("function dimension does not match the manifold");
    ProblemSpec p;
    p.manifold = M;
    p.f = f;
    p.tau = tau;
    p.alpha = alpha;
    p.k = ReductionConstants::make(M.n, tau, alpha);
    const double vr = compute_varrho(f.domain);
    const bool sharp = alpha > 0 ? tau > 1.0 + (M.n - 2.0) / vr : tau < 1.0;
    if (!sharp)
      throw PreconditionError("(tau, alpha) fails the sharp condition: varrho = " + std::to_string(p.k.varrho) +
                              " must be below varrho_cone = " + std::to_string(vr));
    p.op = make_transformed(f, p.k.varrho);
    const double den = M.n * tau + 2.0 - 2.0 * M.n;
    if (den == 0.0) throw PreconditionError("n tau + 2 - 2n = 0: the right-hand prefactor is undefined");
    const double base = (M.n - 2.0) / (alpha * den);
    if (base < 0.0 && f.varsigma != std::round(f.varsigma))
      throw PreconditionError("negative prefactor base with non-integer homogeneity");
    p.c = std::pow(base, f.varsigma);
    if (psi.size() != M.grid.size()) throw PreconditionError("psi must have one value per node");
    for (std::size_t i = 0; i < psi.size(); ++i)
      if (!(psi[i] > 0.0)) throw PreconditionError("psi must be positive (node " + std::to_string(i) + ")");
    p.psi = std::move(psi);
    return p;
  }
};

namespace detail {

/// -A_{e^{2u} g} from the base Schouten tensor and a jet of u.
inline Eigen::MatrixXd minus_schouten_conformal(const Eigen::MatrixXd& g, const Eigen::MatrixXd& ginv,
                                                const std::vector<Eigen::MatrixXd>& gamma, const Eigen::MatrixXd& A,
                                                const ScalarJet& u) {
  const auto cj = covariant(ginv, gamma, u);
  return -A + cj.hess + 0.5 * cj.grad2 * g - cj.du * cj.du.transpose();
}

inline bool is_boundary_node(const Grid& grid, std::size_t idx) {
  const auto m = grid.unravel(idx);
  for (int a = 0; a < grid.ndim(); ++a) {
    const auto ua = static_cast<std::size_t>(a);
    if (!grid.periodic[ua] && (m[ua] == 0 || m[ua] == grid.dims[ua] - 1)) return true;
  }
  return false;
}

inline double sup_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

/// Precomputed base geometry and Schouten tensor for repeated evaluation.
struct SolverContext {
  const ProblemSpec* problem = nullptr;
  BaseGeometry base;
  std::vector<Eigen::MatrixXd> A;
  std::vector<char> dirichlet;

  explicit SolverContext(const ProblemSpec& p, CurvatureMethod method = CurvatureMethod::Auto)
      : problem(&p), base(base_geometry(p.manifold, method)) {
    const auto N = base.size();
    A.resize(N);
    dirichlet.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
      A[i] = schouten(base.ric[i], base.scalar[i], base.g[i]);
      dirichlet[i] = detail::is_boundary_node(p.manifold.grid, i) ? 1 : 0;
    }
  }
};

/// Per-node eigen data of -g^{-1} A_{g~} for a nodal u (second-order jets).
struct NodalState {
  std::vector<ScalarJet> jets;
  std::vector<FrameEigen> eig;
  std::vector<double> margin;  // cone margin in the transformed cone (+inf on Dirichlet nodes)
};

inline NodalState nodal_state(const SolverContext& ctx, const std::vector<double>& u) {
  const auto& P = *ctx.problem;
  const auto& grid = P.manifold.grid;
  if (u.size() != grid.size()) throw PreconditionError("u must have one value per node");
  NodalState s;
  s.jets.resize(u.size());
  s.eig.resize(u.size());
  s.margin.assign(u.size(), std::numeric_limits<double>::infinity());
  parallel_for(u.size(), [&](std::size_t i) {
    s.jets[i] = fd_scalar_jet(grid, u, i, 2);
    const auto& b = ctx.base;
    s.eig[i] = frame_eigen(b.g[i], detail::minus_schouten_conformal(b.g[i], b.ginv[i], b.gamma[i], ctx.A[i], s.jets[i]));
    if (ctx.dirichlet[i]) return;
    const auto lam = to_std(s.eig[i].values);
    double scale = 0.0;
    for (double x : lam) scale = std::max(scale, std::abs(x));
    s.margin[i] = scale == 0.0 ? 0.0 : cone_margin(P.op.tilde_domain, lam);
  });
  return s;
}

inline constexpr double kBoundaryMarginTol = 1e-12;

/// Nodal residual f~(lambda) - c psi e^{2 varsigma u}. Points on the boundary
/// of the transformed cone contribute f~ = 0 (every supported family vanishes
/// there); points outside raise DomainError naming the worst node.
inline std::vector<double> residual(const SolverContext& ctx, const std::vector<double>& u) {
  const auto& P = *ctx.problem;
  const auto s = nodal_state(ctx, u);
  std::size_t worst = 0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (s.margin[i] < s.margin[worst]) worst = i;
  if (s.margin[worst] < -kBoundaryMarginTol)
    throw DomainError("eigenvalues leave the transformed cone at node " + std::to_string(worst) +
                      " (margin " + std::to_string(s.margin[worst]) + ")");
  std::vector<double> r(u.size(), 0.0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (ctx.dirichlet[i]) continue;
    const double fv = s.margin[i] > kBoundaryMarginTol ? tilde_eval_grad(P.op, to_std(s.eig[i].values)).value : 0.0;
    r[i] = fv - P.c * P.psi[i] * std::exp(2.0 * P.f.varsigma * u[i]);
  }
  return r;
}

inline std::vector<double> residual(const ProblemSpec& P, const std::vector<double>& u) {
  return residual(SolverContext(P), u);
}

// ---- manufactured data --------------------------------------------------------

/// psi making u* an exact solution. With `analytic` the jets of u* are exact
/// (continuous problem); otherwise they come from the discrete stencil, so u*
/// solves the discrete system to round-off.
inline std::vector<double> manufactured_psi(const ModelManifold& M, const FunctionSpec& f, double tau, double alpha,
                                            const JetFn& ustar, bool analytic) {
  std::vector<double> ones(M.grid.size(), 1.0);
  const auto P = ProblemSpec::make(M, f, tau, alpha, ones);
  const SolverContext ctx(P);
  std::vector<double> uval(M.grid.size());
  for (std::size_t i = 0; i < uval.size(); ++i) uval[i] = ustar(M.grid.coord(i)).v;
  std::vector<double> psi(uval.size());
  for (std::size_t i = 0; i < uval.size(); ++i) {
    const auto& b = ctx.base;
    // Dirichlet nodes never enter the discrete equations; exact jets keep psi there well defined
    const bool exact = analytic || ctx.dirichlet[i];
    const ScalarJet j = exact ? ustar(M.grid.coord(i)) : fd_scalar_jet(M.grid, uval, i, 2);
    const auto lam = to_std(frame_eigen(b.g[i], detail::minus_schouten_conformal(b.g[i], b.ginv[i], b.gamma[i], ctx.A[i], j)).values);
    if (!is_interior(P.op.tilde_domain, lam))
      throw DomainError("manufactured solution is not admissible at node " + std::to_string(i) + ": lambda(-g^{-1}A) = (" +
                        [&] {
                          std::string t;
                          for (double x : lam) t += (t.empty() ? "" : ", ") + std::to_string(x);
                          return t;
                        }() +
                        ") is outside " + P.op.tilde_domain.id());
    psi[i] = tilde_eval_grad(P.op, lam).value / (P.c * std::exp(2.0 * f.varsigma * uval[i]));
    if (!(psi[i] > 0.0))
      throw PreconditionError("manufactured psi is not positive at node " + std::to_string(i) +
                              " (the prefactor c has the wrong sign for this (tau, alpha))");
  }
  return psi;
}

inline JetFn field_jet(const FieldSpec& f) {
  return [f](const Eigen::VectorXd& x) { return f.jet(x); };
}

/// 0.1 sin x_1 + 0.05 cos x_2 cos x_3 (first three axes).
inline JetFn torus_trial_solution(int n) {
  if (n < 3) throw PreconditionError("dimension must be >= 3");
  return [n](const Eigen::VectorXd& x) {
    ScalarJet j;
    const double s0 = std::sin(x[0]), c0 = std::cos(x[0]), s1 = std::sin(x[1]), c1 = std::cos(x[1]),
                 s2 = std::sin(x[2]), c2 = std::cos(x[2]);
    j.v = 0.1 * s0 + 0.05 * c1 * c2;
    j.d = Eigen::VectorXd::Zero(n);
    j.dd = Eigen::MatrixXd::Zero(n, n);
    j.d[0] = 0.1 * c0;
    j.d[1] = -0.05 * s1 * c2;
    j.d[2] = -0.05 * c1 * s2;
    j.dd(0, 0) = -0.1 * s0;
    j.dd(1, 1) = j.dd(2, 2) = -0.05 * c1 * c2;
    j.dd(1, 2) = j.dd(2, 1) = 0.05 * s1 * s2;
    return j;
  };
}

/// -log(x_0 + 1) + amp sin x_1 cos x_2 on the slab: a perturbed hyperbolic
/// half-space factor, for which -A of the conformal metric is close to g~/2.
inline JetFn slab_trial_solution(int n, double amp = 0.05) {
  if (n < 3) throw PreconditionError("dimension must be >= 3");
  return [n, amp](const Eigen::VectorXd& x) {
    ScalarJet j;
    const double q = x[0] + 1.0, s1 = std::sin(x[1]), c1 = std::cos(x[1]), s2 = std::sin(x[2]), c2 = std::cos(x[2]);
    j.v = -std::log(q) + amp * s1 * c2;
    j.d = Eigen::VectorXd::Zero(n);
    j.dd = Eigen::MatrixXd::Zero(n, n);
    j.d[0] = -1.0 / q;
    j.d[1] = amp * c1 * c2;
    j.d[2] = -amp * s1 * s2;
    j.dd(0, 0) = 1.0 / (q * q);
    j.dd(1, 1) = j.dd(2, 2) = -amp * s1 * c2;
    j.dd(1, 2) = j.dd(2, 1) = -amp * c1 * s2;
    return j;
  };
}

/// Jets of e^{N v}.
inline JetFn exp_field_jet(const FieldSpec& v, double N) {
  return [v, N](const Eigen::VectorXd& x) {
    const auto j = v.jet(x);
    const double e = std::exp(N * j.v);
    ScalarJet o;
    o.v = e;
    o.d = N * e * j.d;
    o.dd = N * e * (j.dd + N * j.d * j.d.transpose());
    return o;
  };
}

inline std::vector<double> sample_values(const Grid& grid, const JetFn& u) {
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = u(grid.coord(i)).v;
  return out;
}

// ---- damped Newton ------------------------------------------------------------

struct SolveOptions {
  double tol = 1e-10;
  int max_iter = 30;
  double forcing = 1e-2;                    // linear tolerance relative to the residual
  double min_step = 1.0 / (1 << 20);
  double floor_abort = 1e-12;
  double theta_bound = 0.0;                 // asserted lower bound on the ellipticity floor
  std::size_t coefficient_checks = 16;      // nodes whose coefficient spectrum is checked per iteration
};

struct SolveReport {
  std::vector<double> u;
  std::vector<double> residual_history;  // sup norm, one entry per accepted iterate
  std::vector<double> step_norms;        // sup norm of the applied increment
  std::vector<double> theta_floor;       // min over nodes of min_i f~_i / sum_j f~_j
  std::vector<std::size_t> floor_node;
  std::vector<int> floor_index;
  std::vector<double> damping;           // accepted step length
  std::vector<int> linear_iterations;
  std::vector<std::string> linear_solver;
  std::vector<double> min_margin;        // min cone margin of each accepted iterate
  bool converged = false;
  int iterations = 0;
  std::string failure;
  std::string note;
};

namespace detail {

struct Linearization {
  Eigen::SparseMatrix<double> J;
  std::vector<double> F;
  double floor = std::numeric_limits<double>::infinity();
  std::size_t floor_node = 0;
  int floor_index = 0;
  double coefficient_error = 0.0;
};

inline Linearization linearize(const SolverContext& ctx, const std::vector<double>& u, const NodalState& s,
                               std::size_t coefficient_checks) {
  const auto& P = *ctx.problem;
  const auto& grid = P.manifold.grid;
  const int n = grid.ndim();
  const auto un = static_cast<std::size_t>(n);
  const std::size_t N = u.size();
  Linearization L;
  L.F.assign(N, 0.0);
  std::vector<std::vector<Eigen::Triplet<double>>> rows(N);
  std::vector<double> ratio(N, std::numeric_limits<double>::infinity()), cerr(N, 0.0);
  std::vector<int> ratio_idx(N, 0);
  const std::size_t check_stride = coefficient_checks ? std::max<std::size_t>(1, N / coefficient_checks) : 0;

  parallel_for(N, [&](std::size_t i) {
    auto& row = rows[i];
    if (ctx.dirichlet[i]) {
      row.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      return;
    }
    const auto& b = ctx.base;
    const auto lam = to_std(s.eig[i].values);
    const auto vg = tilde_eval_grad(P.op, lam);
    const double rhs = P.c * P.psi[i] * std::exp(2.0 * P.f.varsigma * u[i]);
    L.F[i] = vg.value - rhs;

    double total = 0.0;
    for (double x : vg.grad) total += x;
    for (std::size_t q = 0; q < vg.grad.size(); ++q)
      if (vg.grad[q] / total < ratio[i]) {
        ratio[i] = vg.grad[q] / total;
        ratio_idx[i] = static_cast<int>(q);
      }

    const Eigen::MatrixXd& E = s.eig[i].frame;
    Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(n, n);
    for (int q = 0; q < n; ++q) Phi += vg.grad[static_cast<std::size_t>(q)] * E.col(q) * E.col(q).transpose();
    if (check_stride && i % check_stride == 0) {
      // spectrum of Phi against g^{-1} must reproduce the f~ gradient
      Eigen::VectorXd ev = frame_eigen(b.ginv[i], Phi).values;
      auto gs = vg.grad;
      std::sort(gs.begin(), gs.end());
      for (int q = 0; q < n; ++q) cerr[i] = std::max(cerr[i], std::abs(ev[q] - gs[static_cast<std::size_t>(q)]) / total);
    }

    const Eigen::VectorXd& du = s.jets[i].d;
    Eigen::VectorXd bcoef = (Phi.cwiseProduct(b.g[i])).sum() * (b.ginv[i] * du) - 2.0 * Phi * du;
    for (int kk = 0; kk < n; ++kk) bcoef[kk] -= Phi.cwiseProduct(b.gamma[i][static_cast<std::size_t>(kk)]).sum();
    const double zeroth = -2.0 * P.f.varsigma * rhs;

    const auto m = grid.unravel(i);
    std::vector<int> p(m);
    auto add = [&](const std::vector<int>& q, double w) {
      row.emplace_back(static_cast<int>(i), static_cast<int>(grid.wrap(q)), w);
    };
    add(m, zeroth);
    std::vector<Stencil1D> s1(un);
    for (int a = 0; a < n; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      s1[ua] = detail::first_on_axis(m[ua], grid.dims[ua], grid.periodic[ua], 2);
      const double ha = grid.h[ua];
      for (std::size_t q = 0; q < s1[ua].off.size(); ++q) {
        p[ua] = m[ua] + s1[ua].off[q];
        add(p, bcoef[a] * s1[ua].w[q] / ha);
      }
      const auto s2 = detail::second_on_axis(m[ua], grid.dims[ua], grid.periodic[ua], 2);
      for (std::size_t q = 0; q < s2.off.size(); ++q) {
        p[ua] = m[ua] + s2.off[q];
        add(p, Phi(a, a) * s2.w[q] / (ha * ha));
      }
      p[ua] = m[ua];
    }
    for (int a = 0; a < n; ++a)
      for (int bb = a + 1; bb < n; ++bb) {
        const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(bb);
        const double scale = 2.0 * Phi(a, bb) / (grid.h[ua] * grid.h[ub]);
        for (std::size_t q = 0; q < s1[ua].off.size(); ++q)
          for (std::size_t r = 0; r < s1[ub].off.size(); ++r) {
            p[ua] = m[ua] + s1[ua].off[q];
            p[ub] = m[ub] + s1[ub].off[r];
            add(p, scale * s1[ua].w[q] * s1[ub].w[r]);
          }
        p[ua] = m[ua];
        p[ub] = m[ub];
      }
  });

  std::vector<Eigen::Triplet<double>> trip;
  for (auto& r : rows) trip.insert(trip.end(), r.begin(), r.end());
  L.J.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  L.J.setFromTriplets(trip.begin(), trip.end());
  for (std::size_t i = 0; i < N; ++i) {
    if (ratio[i] < L.floor) {
      L.floor = ratio[i];
      L.floor_node = i;
      L.floor_index = ratio_idx[i];
    }
    L.coefficient_error = std::max(L.coefficient_error, cerr[i]);
  }
  return L;
}

struct LinearSolve {
  Eigen::VectorXd x;
  int iterations = 0;
  std::string method;
};

inline LinearSolve solve_linear(const Eigen::SparseMatrix<double>& J, const Eigen::VectorXd& rhs, double rel_tol) {
  LinearSolve out;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>, Eigen::DiagonalPreconditioner<double>> it;
  it.setTolerance(rel_tol);
  it.setMaxIterations(std::max<Eigen::Index>(200, 4 * static_cast<Eigen::Index>(std::sqrt(static_cast<double>(J.rows())))));
  it.compute(J);
  if (it.info() == Eigen::Success) {
    out.x = it.solve(rhs);
    out.iterations = static_cast<int>(it.iterations());
    if (it.info() == Eigen::Success && out.x.allFinite()) {
      out.method = "bicgstab";
      return out;
    }
  }
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(J);
  if (lu.info() != Eigen::Success) throw InvariantViolation("linearized operator is singular");
  out.x = lu.solve(rhs);
  out.method = "sparse_lu";
  return out;
}

}  // namespace detail

/// One undamped Newton increment from u (exact direct solve), with the residual at u.
inline std::pair<std::vector<double>, std::vector<double>> newton_increment(const SolverContext& ctx,
                                                                            const std::vector<double>& u) {
  const auto s = nodal_state(ctx, u);
  auto L = detail::linearize(ctx, u, s, 0);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(L.J);
  if (lu.info() != Eigen::Success) throw InvariantViolation("linearized operator is singular");
  const Eigen::VectorXd F = Eigen::Map<const Eigen::VectorXd>(L.F.data(), static_cast<Eigen::Index>(L.F.size()));
  const Eigen::VectorXd d = lu.solve(-F);
  return {std::vector<double>(d.data(), d.data() + d.size()), L.F};
}

/// Damped inexact Newton. Nodes on closed (non-periodic) axes keep the values
/// of u0 as Dirichlet data. Every accepted iterate is interior in the
/// transformed cone at every other node.
inline SolveReport solve_closed(const ProblemSpec& P, const std::vector<double>& u0, const SolveOptions& opt = {},
                                CurvatureMethod method = CurvatureMethod::Auto) {
  if (!(opt.tol > 0.0)) throw PreconditionError("tolerance must be positive");
  if (P.manifold.kind == ModelManifold::Kind::RadialBall) throw PreconditionError("use solve_radial_blowup on the ball");
  const SolverContext ctx(P, method);
  SolveReport rep;
  rep.u = u0;
  auto state = nodal_state(ctx, rep.u);
  auto min_margin = [&](const NodalState& s) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : s.margin) m = std::min(m, x);
    return m;
  };
  {
    const double mm = min_margin(state);
    if (!(mm > 0.0)) throw DomainError("initial guess is not admissible (min margin " + std::to_string(mm) + ")");
    rep.min_margin.push_back(mm);
  }
  for (int it = 0;; ++it) {
    auto L = detail::linearize(ctx, rep.u, state, opt.coefficient_checks);
    const double res = detail::sup_norm(L.F);
    rep.residual_history.push_back(res);
    rep.theta_floor.push_back(L.floor);
    rep.floor_node.push_back(L.floor_node);
    rep.floor_index.push_back(L.floor_index);
    if (L.coefficient_error > 1e-8)
      throw InvariantViolation("coefficient spectrum disagrees with the operator gradient by " +
                               std::to_string(L.coefficient_error));
    if (L.floor < opt.floor_abort) {
      rep.failure = "ellipticity floor " + std::to_string(L.floor) + " below abort threshold";
      return rep;
    }
    if (L.floor < opt.theta_bound - 1e-12)
      throw InvariantViolation("ellipticity floor " + std::to_string(L.floor) + " below the certified bound " +
                               std::to_string(opt.theta_bound));
    if (res <= opt.tol) {
      rep.converged = true;
      return rep;
    }
    if (it >= opt.max_iter) {
      rep.failure = "max_iter exceeded with residual " + std::to_string(res);
      return rep;
    }
    const Eigen::VectorXd F = Eigen::Map<const Eigen::VectorXd>(L.F.data(), static_cast<Eigen::Index>(L.F.size()));
    const auto ls = detail::solve_linear(L.J, -F, opt.forcing);
    rep.linear_iterations.push_back(ls.iterations);
    rep.linear_solver.push_back(ls.method);

    double t = 1.0;
    std::vector<double> trial(rep.u.size());
    for (;;) {
      for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = rep.u[i] + t * ls.x[static_cast<Eigen::Index>(i)];
      auto st = nodal_state(ctx, trial);
      const double mm = min_margin(st);
      if (mm > 0.0) {
        state = std::move(st);
        rep.min_margin.push_back(mm);
        break;
      }
      t *= 0.5;
      if (t < opt.min_step) {
        rep.failure = "damping fell below the minimum step without an admissible iterate";
        return rep;
      }
    }
    rep.u = trial;
    rep.damping.push_back(t);
    rep.step_norms.push_back(t * ls.x.cwiseAbs().maxCoeff());
    rep.iterations = it + 1;
  }
}

// ---- radial blow-up problem ----------------------------------------------------

/// Chebyshev-Gauss-Lobatto points on [0, S] (ascending) with the first and
/// second differentiation matrices.
struct ChebyshevBasis {
  Eigen::VectorXd s;
  Eigen::MatrixXd D1, D2;

  static ChebyshevBasis make(int N, double S) {
    if (N < 4) throw PreconditionError("Chebyshev basis needs at least 4 intervals");
    ChebyshevBasis b;
    Eigen::VectorXd x(N + 1), c(N + 1);
    for (int j = 0; j <= N; ++j) {
      x[j] = -std::cos(std::numbers::pi * j / N);  // ascending on [-1, 1]
      c[j] = (j == 0 || j == N ? 2.0 : 1.0) * (j % 2 ? -1.0 : 1.0);
    }
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N + 1, N + 1);
    for (int i = 0; i <= N; ++i)
      for (int j = 0; j <= N; ++j)
        if (i != j) D(i, j) = (c[i] / c[j]) / (x[i] - x[j]);
    for (int i = 0; i <= N; ++i) D(i, i) = -D.row(i).sum();  // negative-sum trick
    b.s = S * 0.5 * (x.array() + 1.0);
    b.D1 = D * (2.0 / S);
    b.D2 = b.D1 * b.D1;
    return b;
  }

  /// Barycentric interpolation of nodal values at s.
  double interpolate(const Eigen::VectorXd& f, double t) const {
    const auto N = s.size() - 1;
    double num = 0.0, den = 0.0;
    for (Eigen::Index j = 0; j <= N; ++j) {
      const double w = (j == 0 || j == N ? 0.5 : 1.0) * (j % 2 ? -1.0 : 1.0);
      const double d = t - s[j];
      if (d == 0.0) return f[j];
      num += w / d * f[j];
      den += w / d;
    }
    return num / den;
  }
};

struct RadialOptions {
  std::vector<double> eps_schedule{0.2, 0.1, 0.05, 0.025};
  int chebyshev_intervals = 0;  // 0: sized per stage from the distance to the singularity at r = 1
  double tol = 1e-10;          // residual sup norm relative to max(1, sup c psi e^{2 varsigma u})
  double step_tol = 1e-12;     // and the last increment (relative to |u|) must be this small
  int max_iter = 60;
  double boundary_shift = 0.0;     // added to the Dirichlet value M(eps)
  double monotone_slack = 1e-10;
  std::vector<double> report_r;    // output radii; defaults to 101 points on [0, 1 - eps_min]
};

struct RadialStage {
  double eps = 0.0;
  double boundary_value = 0.0;
  SolveReport solve;
  ChebyshevBasis basis;
  Eigen::VectorXd u;  // nodal values on the basis
  double operator()(double r) const { return basis.interpolate(u, r * r); }
};

struct RadialReport {
  std::vector<RadialStage> stages;
  std::vector<double> r;            // report radii
  std::vector<std::vector<double>> profiles;  // per stage, NaN beyond 1 - eps
  std::vector<double> monotonicity_gap;       // min over common radii of u_{eps'} - u_eps
  std::vector<double> interior_change;        // sup over r <= 0.9 of |u_{eps'} - u_eps|
  bool converged = false;
  bool monotone = true;
  std::string failure;
  std::string note =
      "eps-truncation continuation with Dirichlet data log(2/(1-(1-eps)^2)); its relation to the maximal solution "
      "is heuristic";
};

inline double hyperbolic_profile(double r) { return std::log(2.0 / (1.0 - r * r)); }

namespace detail {

// Radial eigenvalues of -A_{g~} for u(s), s = r^2, on the flat ball.
inline std::vector<double> radial_lambda(int n, double s, double us, double uss) {
  std::vector<double> lam(static_cast<std::size_t>(n), 2.0 * us + 2.0 * s * us * us);
  lam[0] = 2.0 * us + 4.0 * s * uss - 2.0 * s * us * us;
  return lam;
}

}  // namespace detail

/// Radial Loewner-Nirenberg type problem on the unit ball, flat background:
/// solves on r <= 1 - eps with u(1 - eps) = M(eps) for each eps in the
/// schedule, continuing from the previous profile.
inline RadialReport solve_radial_blowup(const ProblemSpec& P, const RadialOptions& opt = {}) {
  if (P.manifold.kind != ModelManifold::Kind::RadialBall) throw PreconditionError("radial solve needs a RadialBall manifold");
  if (opt.eps_schedule.empty()) throw PreconditionError("empty eps schedule");
  for (std::size_t i = 0; i < opt.eps_schedule.size(); ++i) {
    const double e = opt.eps_schedule[i];
    if (!(e > 0.0 && e < 1.0)) throw PreconditionError("eps must lie in (0, 1)");
    if (i && !(e < opt.eps_schedule[i - 1])) throw PreconditionError("eps schedule must decrease");
  }
  const int n = P.manifold.n;
  const auto& rg = P.manifold.grid;
  auto psi_at = [&](double r) {
    const double t = std::clamp(r / rg.h[0], 0.0, static_cast<double>(rg.dims[0] - 1));
    const auto j = std::min(static_cast<std::size_t>(t), P.psi.size() - 2);
    const double w = t - static_cast<double>(j);
    return (1.0 - w) * P.psi[j] + w * P.psi[j + 1];
  };

  RadialReport rep;
  const double eps_min = opt.eps_schedule.back();
  rep.r = opt.report_r;
  if (rep.r.empty())
    for (int i = 0; i <= 100; ++i) rep.r.push_back((1.0 - eps_min) * i / 100.0);

  for (double eps : opt.eps_schedule) {
    RadialStage st;
    st.eps = eps;
    const double R = 1.0 - eps, S = R * R;
    st.boundary_value = hyperbolic_profile(R) + opt.boundary_shift;
    int intervals = opt.chebyshev_intervals;
    if (intervals <= 0) {
      // u is analytic in s up to s = 1; aim for a geometric decay factor of 1e-14
      const double rate = std::acosh(1.0 + 2.0 * (1.0 - S) / S);
      intervals = std::clamp(static_cast<int>(std::ceil(32.0 / rate)), 24, 192);
    }
    st.basis = ChebyshevBasis::make(intervals, S);
    const auto& b = st.basis;
    const auto N = b.s.size();
    Eigen::VectorXd psi(N), u(N);
    for (Eigen::Index j = 0; j < N; ++j) psi[j] = psi_at(std::sqrt(b.s[j]));

    auto lambda_at = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& vs, const Eigen::VectorXd& vss, Eigen::Index j) {
      (void)v;
      return detail::radial_lambda(n, b.s[j], vs[j], vss[j]);
    };
    auto admissible = [&](const Eigen::VectorXd& v, double* mm) {
      const Eigen::VectorXd vs = b.D1 * v, vss = b.D2 * v;
      double m = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < N; ++j) m = std::min(m, cone_margin(P.op.tilde_domain, lambda_at(v, vs, vss, j)));
      if (mm) *mm = m;
      return m > 0.0;
    };

    // initial guess: previous profile rescaled onto the longer interval, else a linear ramp in s
    bool have = false;
    if (!rep.stages.empty()) {
      const auto& prev = rep.stages.back();
      const double Sp = prev.basis.s[prev.basis.s.size() - 1];
      for (Eigen::Index j = 0; j < N; ++j)
        u[j] = prev.basis.interpolate(prev.u, b.s[j] * Sp / S) + (st.boundary_value - prev.boundary_value);
      have = admissible(u, nullptr);
    }
    if (!have) {
      const double slope = 0.5 / S;
      for (Eigen::Index j = 0; j < N; ++j) u[j] = st.boundary_value + slope * (b.s[j] - S);
      if (!admissible(u, nullptr)) {
        rep.failure = "no admissible initial guess at eps = " + std::to_string(eps);
        return rep;
      }
    }

    auto eval = [&](const Eigen::VectorXd& v, Eigen::VectorXd& F, Eigen::MatrixXd* J) {
      const Eigen::VectorXd vs = b.D1 * v, vss = b.D2 * v;
      F.resize(N);
      if (J) J->setZero(N, N);
      for (Eigen::Index j = 0; j + 1 < N; ++j) {
        const auto lam = lambda_at(v, vs, vss, j);
        const auto vg = tilde_eval_grad(P.op, lam);
        const double rhs = P.c * psi[j] * std::exp(2.0 * P.f.varsigma * v[j]);
        F[j] = vg.value - rhs;
        if (J) {
          double gt = 0.0;
          for (int q = 1; q < n; ++q) gt += vg.grad[static_cast<std::size_t>(q)];
          const double gr = vg.grad[0], s = b.s[j];
          // d lam_rad = 2 d_s + 4 s d_ss - 4 s u_s d_s ; d lam_tan = 2 d_s + 4 s u_s d_s
          const double c1 = gr * (2.0 - 4.0 * s * vs[j]) + gt * (2.0 + 4.0 * s * vs[j]);
          J->row(j) = c1 * b.D1.row(j) + (4.0 * s * gr) * b.D2.row(j);
          (*J)(j, j) -= 2.0 * P.f.varsigma * rhs;
        }
      }
      F[N - 1] = v[N - 1] - st.boundary_value;
      if (J) (*J)(N - 1, N - 1) = 1.0;
    };

    Eigen::VectorXd F;
    Eigen::MatrixXd J;
    double mm = 0.0;
    admissible(u, &mm);
    st.solve.min_margin.push_back(mm);
    for (int it = 0;; ++it) {
      eval(u, F, &J);
      const double res = F.cwiseAbs().maxCoeff();
      double rhs_scale = 1.0;
      for (Eigen::Index j = 0; j < N; ++j)
        rhs_scale = std::max(rhs_scale, std::abs(P.c * psi[j]) * std::exp(2.0 * P.f.varsigma * u[j]));
      st.solve.residual_history.push_back(res);
      const bool stalled = !st.solve.step_norms.empty() &&
                           st.solve.step_norms.back() <= opt.step_tol * (1.0 + u.cwiseAbs().maxCoeff());
      if (res <= opt.tol * rhs_scale && stalled) {
        st.solve.converged = true;
        break;
      }
      if (it >= opt.max_iter) {
        {
          std::ostringstream os;
          os << "max_iter exceeded with residual " << res;
          st.solve.failure = os.str();
        }
        break;
      }
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
      const Eigen::VectorXd d = lu.solve(-F);
      if (!d.allFinite()) {
        st.solve.failure = "collocation system is singular";
        break;
      }
      double t = 1.0;
      Eigen::VectorXd trial, Ft;
      for (;;) {
        trial = u + t * d;
        if (admissible(trial, &mm)) {
          eval(trial, Ft, nullptr);
          if (Ft.cwiseAbs().maxCoeff() < res || t < 1e-3) break;
        }
        t *= 0.5;
        if (t < 1.0 / (1 << 20)) break;
      }
      if (t < 1.0 / (1 << 20)) {
        st.solve.failure = "damping fell below the minimum step";
        break;
      }
      u = trial;
      st.solve.damping.push_back(t);
      st.solve.step_norms.push_back(t * d.cwiseAbs().maxCoeff());
      st.solve.min_margin.push_back(mm);
      st.solve.iterations = it + 1;
    }
    st.u = u;
    st.solve.u.assign(u.data(), u.data() + u.size());
    const bool ok = st.solve.converged;
    const std::string why = st.solve.failure;
    rep.stages.push_back(std::move(st));
    if (!ok) {
      rep.failure = "collocation failure at eps = " + std::to_string(eps) + ": " + why;
      return rep;
    }
  }

  for (const auto& st : rep.stages) {
    std::vector<double> prof(rep.r.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < rep.r.size(); ++i)
      if (rep.r[i] <= 1.0 - st.eps + 1e-15) prof[i] = st(rep.r[i]);
    rep.profiles.push_back(std::move(prof));
  }
  for (std::size_t k = 1; k < rep.stages.size(); ++k) {
    const auto& a = rep.stages[k - 1];
    const auto& b = rep.stages[k];
    double gap = std::numeric_limits<double>::infinity(), change = 0.0;
    const int M = 400;
    for (int i = 0; i <= M; ++i) {
      const double r = (1.0 - a.eps) * i / M;
      const double d = b(r) - a(r);
      gap = std::min(gap, d);
      if (r <= 0.9) change = std::max(change, std::abs(d));
    }
    rep.monotonicity_gap.push_back(gap);
    rep.interior_change.push_back(change);
    if (gap < -opt.monotone_slack) rep.monotone = false;
  }
  if (!rep.monotone) {
    rep.failure = "continuation is not monotone in eps";
    return rep;
  }
  rep.converged = true;
  return rep;
}

/// Residual of the radial equation for nodal values on a Chebyshev basis.
inline std::vector<double> radial_residual(const ProblemSpec& P, const ChebyshevBasis& b, const Eigen::VectorXd& u,
                                           double psi) {
  const int n = P.manifold.n;
  const Eigen::VectorXd us = b.D1 * u, uss = b.D2 * u;
  std::vector<double> r(static_cast<std::size_t>(u.size()));
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const auto lam = detail::radial_lambda(n, b.s[j], us[j], uss[j]);
    r[static_cast<std::size_t>(j)] =
        tilde_eval_grad(P.op, lam).value - P.c * psi * std::exp(2.0 * P.f.varsigma * u[j]);
  }
  return r;
}

}  // namespace ccl
