#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "ccl/cone.hpp"
#include "ccl/cone_invariants.hpp"
#include "ccl/curvature.hpp"
#include "ccl/error.hpp"
#include "ccl/grid.hpp"
#include "ccl/manifold.hpp"
#include "ccl/parallel.hpp"

namespace ccl {

// ---- tensor algebra -------------------------------------------------------

inline Eigen::MatrixXd schouten(const Eigen::MatrixXd& ric, double R, const Eigen::MatrixXd& g) {
  const double n = static_cast<double>(g.rows());
  return (ric - R / (2.0 * (n - 1.0)) * g) / (n - 2.0);
}

/// alpha/(n-2) (Ric - tau R/(2(n-1)) g).
inline Eigen::MatrixXd modified_schouten(const Eigen::MatrixXd& ric, double R, const Eigen::MatrixXd& g, double tau,
                                         double alpha) {
  const double n = static_cast<double>(g.rows());
  return alpha / (n - 2.0) * (ric - tau * R / (2.0 * (n - 1.0)) * g);
}

inline Eigen::MatrixXd einstein(const Eigen::MatrixXd& ric, double R, const Eigen::MatrixXd& g) { return ric - 0.5 * R * g; }

/// tau, alpha and the derived varrho = (n-2)/(tau-1), gamma = (tau-2)(n-2)/(2(tau-1)),
/// scale = (n-2)/(alpha(tau-1)) so that A = scale * A^{tau,alpha}.
struct ReductionConstants {
  int n = 3;
  double tau = 0.0, alpha = 1.0;
  double varrho = 0.0, gamma = 0.0, scale = 0.0;

  static ReductionConstants make(int n, double tau, double alpha) {
    if (n < 3) throw PreconditionError("dimension must be >= 3");
    if (alpha != 1.0 && alpha != -1.0) throw PreconditionError("alpha must be +1 or -1");
    if (tau == 1.0)
      throw PreconditionError("tau = 1: varrho and gamma are undefined; use the direct Schouten form instead");
    ReductionConstants c;
    c.n = n;
    c.tau = tau;
    c.alpha = alpha;
    c.varrho = (n - 2.0) / (tau - 1.0);
    c.gamma = (tau - 2.0) * (n - 2.0) / (2.0 * (tau - 1.0));
    c.scale = (n - 2.0) / (alpha * (tau - 1.0));
    return c;
  }
};

// ---- covariant derivatives of a scalar -----------------------------------

struct CovariantJet {
  Eigen::VectorXd du;   // coordinate gradient (a covector)
  Eigen::MatrixXd hess; // covariant Hessian
  double lap = 0.0;
  double grad2 = 0.0;   // |grad u|^2
};

inline CovariantJet covariant(const Eigen::MatrixXd& ginv, const std::vector<Eigen::MatrixXd>& gamma, const ScalarJet& u) {
  CovariantJet c;
  c.du = u.d;
  c.hess = u.dd;
  for (std::size_t k = 0; k < gamma.size(); ++k) c.hess -= u.d[static_cast<Eigen::Index>(k)] * gamma[k];
  c.lap = ginv.cwiseProduct(c.hess).sum();
  c.grad2 = u.d.dot(ginv * u.d);
  return c;
}

/// A^{tau,alpha} of e^{2u} g from that of g.
inline Eigen::MatrixXd conformal_modified_schouten_at(const Eigen::MatrixXd& g, const Eigen::MatrixXd& ginv,
                                                      const std::vector<Eigen::MatrixXd>& gamma,
                                                      const Eigen::MatrixXd& a_tau, const ScalarJet& u, double tau,
                                                      double alpha) {
  const double n = static_cast<double>(g.rows());
  const auto c = covariant(ginv, gamma, u);
  return a_tau + alpha * (tau - 1.0) / (n - 2.0) * c.lap * g - alpha * c.hess + alpha * (tau - 2.0) / 2.0 * c.grad2 * g +
         alpha * c.du * c.du.transpose();
}

/// V[u] = Lap u g - varrho Hess u + gamma |grad u|^2 g + varrho du du + A.
inline Eigen::MatrixXd v_operator_at(const Eigen::MatrixXd& g, const Eigen::MatrixXd& ginv,
                                     const std::vector<Eigen::MatrixXd>& gamma, const Eigen::MatrixXd& A,
                                     const ScalarJet& u, const ReductionConstants& k) {
  const auto c = covariant(ginv, gamma, u);
  return c.lap * g - k.varrho * c.hess + k.gamma * c.grad2 * g + k.varrho * c.du * c.du.transpose() + A;
}

/// Right-hand side of the additivity expansion of V[ubar + w].
inline Eigen::MatrixXd v_additivity_rhs(const Eigen::MatrixXd& g, const Eigen::MatrixXd& ginv,
                                        const std::vector<Eigen::MatrixXd>& gamma, const Eigen::MatrixXd& A,
                                        const ScalarJet& ubar, const ScalarJet& w, const ReductionConstants& k) {
  const auto cu = covariant(ginv, gamma, ubar);
  const auto cw = covariant(ginv, gamma, w);
  const double cross = cw.du.dot(ginv * cu.du);
  return v_operator_at(g, ginv, gamma, A, w, k) + cu.lap * g - k.varrho * cu.hess + k.gamma * cu.grad2 * g +
         k.varrho * cu.du * cu.du.transpose() + 2.0 * k.gamma * cross * g +
         k.varrho * (cu.du * cw.du.transpose() + cw.du * cu.du.transpose());
}

/// Closed form of V[e^{N v}] - A.
inline Eigen::MatrixXd v_exp_closed_form(const Eigen::MatrixXd& g, const Eigen::MatrixXd& ginv,
                                         const std::vector<Eigen::MatrixXd>& gamma, const ScalarJet& v, double N,
                                         const ReductionConstants& k) {
  const auto c = covariant(ginv, gamma, v);
  const double e = std::exp(N * v.v);
  return N * N * e *
         ((c.lap * g - k.varrho * c.hess) / N + (1.0 + k.gamma * e) * c.grad2 * g +
          k.varrho * (e - 1.0) * c.du * c.du.transpose());
}

// ---- fields over a manifold ----------------------------------------------

/// Per-node data shared by the conformal operators and the solver.
struct BaseGeometry {
  std::vector<Eigen::MatrixXd> g, ginv, ric;
  std::vector<double> scalar;
  std::vector<std::vector<Eigen::MatrixXd>> gamma;
  std::size_t size() const { return g.size(); }
};

inline BaseGeometry base_geometry(const ModelManifold& M, CurvatureMethod method = CurvatureMethod::Auto) {
  if (M.kind != ModelManifold::Kind::RadialBall) require_resolution(M.grid);
  const std::size_t N = M.grid.size();
  BaseGeometry b;
  b.g.resize(N);
  b.ginv.resize(N);
  b.ric.resize(N);
  b.scalar.resize(N);
  b.gamma.resize(N);
  parallel_for(N, [&](std::size_t i) {
    auto p = point_geometry(M, i, method);
    b.g[i] = std::move(p.g);
    b.ginv[i] = std::move(p.ginv);
    b.ric[i] = std::move(p.ric);
    b.scalar[i] = p.scalar;
    b.gamma[i] = std::move(p.gamma);
  });
  return b;
}

struct TensorField {
  Grid grid;
  std::vector<Eigen::MatrixXd> data;
};

struct CurvatureFields {
  TensorField ric, A, A_tau, G;
  std::vector<double> scalar;
  double tau = 0.0, alpha = 0.0;
  double trace_residual = 0.0;  // max |g^{ij} Ric_ij - R| / (1 + |R|)
};

inline CurvatureFields curvature(const ModelManifold& M, double tau, double alpha,
                                 CurvatureMethod method = CurvatureMethod::Auto) {
  if (alpha != 1.0 && alpha != -1.0) throw PreconditionError("alpha must be +1 or -1");
  const auto b = base_geometry(M, method);
  CurvatureFields c;
  c.tau = tau;
  c.alpha = alpha;
  for (auto* t : {&c.ric, &c.A, &c.A_tau, &c.G}) {
    t->grid = M.grid;
    t->data.resize(b.size());
  }
  c.scalar = b.scalar;
  for (std::size_t i = 0; i < b.size(); ++i) {
    c.ric.data[i] = b.ric[i];
    c.A.data[i] = schouten(b.ric[i], b.scalar[i], b.g[i]);
    c.A_tau.data[i] = modified_schouten(b.ric[i], b.scalar[i], b.g[i], tau, alpha);
    c.G.data[i] = einstein(b.ric[i], b.scalar[i], b.g[i]);
    const double tr = b.ginv[i].cwiseProduct(b.ric[i]).sum();
    c.trace_residual = std::max(c.trace_residual, std::abs(tr - b.scalar[i]) / (1.0 + std::abs(b.scalar[i])));
  }
  return c;
}

inline TensorField conformal_modified_schouten(const ModelManifold& M, const ConformalFactor& u, double tau, double alpha,
                                               CurvatureMethod method = CurvatureMethod::Auto) {
  if (u.jets.size() != M.grid.size()) throw PreconditionError("conformal factor does not live on the manifold grid");
  const auto b = base_geometry(M, method);
  TensorField t{M.grid, std::vector<Eigen::MatrixXd>(b.size())};
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto at = modified_schouten(b.ric[i], b.scalar[i], b.g[i], tau, alpha);
    t.data[i] = conformal_modified_schouten_at(b.g[i], b.ginv[i], b.gamma[i], at, u.jets[i], tau, alpha);
  }
  return t;
}

inline TensorField v_operator(const ModelManifold& M, const ConformalFactor& u, const ReductionConstants& k,
                              CurvatureMethod method = CurvatureMethod::Auto) {
  if (u.jets.size() != M.grid.size()) throw PreconditionError("conformal factor does not live on the manifold grid");
  const auto b = base_geometry(M, method);
  TensorField t{M.grid, std::vector<Eigen::MatrixXd>(b.size())};
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Eigen::MatrixXd A = k.scale * modified_schouten(b.ric[i], b.scalar[i], b.g[i], k.tau, k.alpha);
    t.data[i] = v_operator_at(b.g[i], b.ginv[i], b.gamma[i], A, u.jets[i], k);
  }
  return t;
}

// ---- frame algebra ----------------------------------------------------------

/// Curvature quantities determined by S = -A_g in an orthonormal frame.
struct SchoutenAlgebra {
  Eigen::MatrixXd ric, G, A_tau;
  double R = 0.0;
  Eigen::VectorXd s_eigs, g_eigs;  // ascending eigenvalues of S; G eigenvalues in the same eigenbasis
};

inline SchoutenAlgebra schouten_algebra(const Eigen::MatrixXd& S, double tau = 1.0, double alpha = 1.0) {
  const auto n = S.rows();
  if (S.cols() != n) throw PreconditionError("S must be square");
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + S.cwiseAbs().maxCoeff()))
    throw PreconditionError("S must be symmetric");
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd A = -S;
  const double trA = A.trace();
  SchoutenAlgebra r;
  r.ric = (n - 2.0) * A + trA * I;
  r.R = 2.0 * (n - 1.0) * trA;
  r.G = (n - 2.0) * (S.trace() * I - S);
  r.A_tau = modified_schouten(r.ric, r.R, I, tau, alpha);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  r.s_eigs = es.eigenvalues();
  r.g_eigs = (es.eigenvectors().transpose() * r.G * es.eigenvectors()).diagonal();
  return r;
}

/// Both sides of tr(g^{-1}(-A)) g - varrho (-A) = (n-2)/(alpha(tau-1)) A^{tau,alpha} in an orthonormal frame.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> check_identity_sides(const Eigen::MatrixXd& S, double tau, double alpha) {
  const auto n = static_cast<int>(S.rows());
  const auto k = ReductionConstants::make(n, tau, alpha);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd lhs = S.trace() * I - k.varrho * S;
  return {lhs, k.scale * schouten_algebra(S, tau, alpha).A_tau};
}

/// G(nv, nv) for the unit normal nv of span(x, y), and -Sec(span(x, y)).
struct SectionalEinstein {
  double einstein_normal = 0.0;
  double minus_sectional = 0.0;
};

inline SectionalEinstein sectional_vs_einstein(const PointGeometry& p, const Eigen::Vector3d& x, const Eigen::Vector3d& y) {
  if (p.dim() != 3) throw PreconditionError("sectional/Einstein relation requires dimension 3");
  const Eigen::Vector3d omega = x.cross(y);  // covector annihilating x and y
  Eigen::VectorXd nv = p.ginv * Eigen::VectorXd(omega);
  nv /= std::sqrt(nv.dot(p.g * nv));
  const Eigen::MatrixXd G = einstein(p.ric, p.scalar, p.g);
  return {nv.dot(G * nv), -p.sectional(x, y)};
}

inline SectionalEinstein sectional_vs_einstein(const ModelManifold& M, std::size_t node, const Eigen::Vector3d& x,
                                               const Eigen::Vector3d& y, CurvatureMethod method = CurvatureMethod::Auto) {
  if (M.n != 3) throw PreconditionError("sectional/Einstein relation requires dimension 3");
  return sectional_vs_einstein(point_geometry(M, node, method), x, y);
}

// ---- admissibility ---------------------------------------------------------

enum class Admissibility { Admissible, QuasiAdmissible, PseudoAdmissible, None };

inline std::string to_string(Admissibility a) {
  switch (a) {
    case Admissibility::Admissible: return "admissible";
    case Admissibility::QuasiAdmissible: return "quasi_admissible";
    case Admissibility::PseudoAdmissible: return "pseudo_admissible";
    case Admissibility::None: return "none";
  }
  return "?";
}

struct AdmissibilityReport {
  Admissibility cls = Admissibility::None;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::size_t worst_node = 0;
  std::vector<double> worst_eigenvalues;
  std::size_t interior_nodes = 0, nodes = 0;
  std::vector<double> margins;  // per node
};

inline constexpr double kAdmissibilityTol = 1e-9;

/// Classifies lambda(g^{-1} T) node by node against `cone`.
inline AdmissibilityReport classify_tensor_field(const std::vector<Eigen::MatrixXd>& g, const std::vector<Eigen::MatrixXd>& T,
                                                 const ConeSpec& cone, double tol = kAdmissibilityTol) {
  if (g.size() != T.size()) throw PreconditionError("metric and tensor fields differ in size");
  AdmissibilityReport r;
  r.nodes = g.size();
  r.margins.resize(g.size());
  std::vector<std::vector<double>> eigs(g.size());
  parallel_for(g.size(), [&](std::size_t i) {
    eigs[i] = to_std(eigenvalues_relative(g[i], T[i]));
    r.margins[i] = cone_margin(cone, eigs[i]);
  });
  bool closure = true;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double m = r.margins[i];
    if (m > tol) ++r.interior_nodes;
    if (m < -tol) closure = false;
    if (m < r.worst_margin) {
      r.worst_margin = m;
      r.worst_node = i;
      r.worst_eigenvalues = eigs[i];
    }
  }
  if (r.interior_nodes == r.nodes)
    r.cls = Admissibility::Admissible;
  else if (closure && r.interior_nodes > 0)
    r.cls = Admissibility::QuasiAdmissible;
  else if (closure)
    r.cls = Admissibility::PseudoAdmissible;
  else
    r.cls = Admissibility::None;
  return r;
}

inline AdmissibilityReport classify_admissibility(const ModelManifold& M, double tau, double alpha, const ConeSpec& cone,
                                                  double tol = kAdmissibilityTol,
                                                  CurvatureMethod method = CurvatureMethod::Auto) {
  if (cone.n != M.n) throw PreconditionError("cone dimension does not match the manifold");
  if (alpha != 1.0 && alpha != -1.0) throw PreconditionError("alpha must be +1 or -1");
  const auto b = base_geometry(M, method);
  std::vector<Eigen::MatrixXd> at(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) at[i] = modified_schouten(b.ric[i], b.scalar[i], b.g[i], tau, alpha);
  return classify_tensor_field(b.g, at, cone, tol);
}

// ---- condition ladder ---------------------------------------------------------

struct ConditionLadder {
  int n = 0, kappa = 0;
  double tau = 0.0, alpha = 0.0;
  double varrho_cone = 0.0, theta = 0.0;
  ConeType type = ConeType::Type1;
  bool sharp = false;           // tau < 1 (alpha=-1) or tau > 1 + (n-2)/varrho_cone (alpha=1)
  bool baseline = false;        // tau < 1 (alpha=-1) or tau > 1 + (n-2)/(1 + n kappa theta) (alpha=1)
  bool broad_construction = false;   // tau <= 2 - 2/varrho_cone (alpha=-1) or tau >= 2 (alpha=1)
  bool narrow_construction = false;  // tau <= 0 (alpha=-1) or tau >= 2 (alpha=1)
  bool direct_schouten_path = false; // tau = 1, alpha = -1 on a type 2 cone
  bool reduction_defined = false;
  double varrho = 0.0, gamma = 0.0, gamma_plus_varrho = 0.0;
  bool key_vector_in_closure = false;  // (gamma,...,gamma,gamma+varrho) in the closed cone
  double key_vector_margin = 0.0;
};

inline ConditionLadder condition_ladder(double tau, double alpha, const ConeSpec& cone, std::size_t theta_budget = 4000,
                                        std::uint64_t seed = 1) {
  if (alpha != 1.0 && alpha != -1.0) throw PreconditionError("alpha must be +1 or -1");
  ConditionLadder L;
  const int n = cone.n;
  L.n = n;
  L.tau = tau;
  L.alpha = alpha;
  L.varrho_cone = compute_varrho(cone);
  L.kappa = compute_kappa(cone);
  L.theta = compute_theta(cone, theta_budget, seed).lower;
  L.type = cone_type(cone);
  const double tol = 1e-9;
  if (alpha < 0) {
    L.sharp = tau < 1.0;
    L.baseline = tau < 1.0;
    L.broad_construction = tau <= 2.0 - 2.0 / L.varrho_cone + tol;
    L.narrow_construction = tau <= 0.0;
    L.direct_schouten_path = tau == 1.0 && L.type == ConeType::Type2;
  } else {
    L.sharp = tau > 1.0 + (n - 2.0) / L.varrho_cone;
    L.baseline = tau > 1.0 + (n - 2.0) / (1.0 + n * L.kappa * L.theta);
    L.broad_construction = tau >= 2.0;
    L.narrow_construction = tau >= 2.0;
  }
  L.reduction_defined = tau != 1.0;
  if (L.reduction_defined) {
    L.varrho = (n - 2.0) / (tau - 1.0);
    L.gamma = (tau - 2.0) * (n - 2.0) / (2.0 * (tau - 1.0));
    L.gamma_plus_varrho = tau * (n - 2.0) / (2.0 * (tau - 1.0));
    std::vector<double> key(static_cast<std::size_t>(n), L.gamma);
    key.back() = L.gamma_plus_varrho;
    L.key_vector_margin = cone_margin(cone, key);
    L.key_vector_in_closure = L.key_vector_margin >= -tol;
  }
  return L;
}

// ---- construction ------------------------------------------------------------

struct ConstructionResult {
  bool success = false;
  bool hypotheses_met = true;
  std::vector<std::string> hypothesis_notes;
  double N = 0.0;
  std::vector<double> tried;
  ConformalFactor ubar;
  AdmissibilityReport base_report;   // of A^{tau,alpha}_g
  AdmissibilityReport final_report;  // of V[ubar] at the accepted (or last tried) N
  double min_grad_v = 0.0;
  double max_v = 0.0;
};

/// Doubling search over N in {1, 2, 4, ..., N_max} for ubar = e^{N v} with
/// lambda(g^{-1} V[ubar]) interior at every node.
inline ConstructionResult construct_admissible(const ModelManifold& M, const ConeSpec& cone, double tau, double alpha,
                                               const FieldSpec& v, double N_max,
                                               CurvatureMethod method = CurvatureMethod::Auto) {
  if (cone.n != M.n) throw PreconditionError("cone dimension does not match the manifold");
  if (!(N_max >= 1.0)) throw PreconditionError("N_max must be >= 1");
  const auto k = ReductionConstants::make(M.n, tau, alpha);
  if (!(k.scale > 0.0)) throw PreconditionError("construction needs alpha (tau - 1) > 0");
  ConstructionResult res;
  const auto b = base_geometry(M, method);
  const auto vf = ConformalFactor::from_field(M.grid, v);

  std::vector<Eigen::MatrixXd> A(b.size());
  for (std::size_t i = 0; i < b.size(); ++i)
    A[i] = k.scale * modified_schouten(b.ric[i], b.scalar[i], b.g[i], tau, alpha);
  res.base_report = classify_tensor_field(b.g, A, cone);

  res.max_v = -std::numeric_limits<double>::infinity();
  res.min_grad_v = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < b.size(); ++i) {
    res.max_v = std::max(res.max_v, vf.jets[i].v);
    res.min_grad_v = std::min(res.min_grad_v, std::sqrt(vf.jets[i].d.dot(b.ginv[i] * vf.jets[i].d)));
  }
  auto note = [&](std::string s) {
    res.hypotheses_met = false;
    res.hypothesis_notes.push_back(std::move(s));
  };
  if (M.closed()) {
    if (res.max_v > -1.0) note("v <= -1 fails (max v = " + std::to_string(res.max_v) + ")");
    if (res.base_report.cls != Admissibility::QuasiAdmissible && res.base_report.cls != Admissibility::Admissible)
      note("base metric is " + to_string(res.base_report.cls) + ", not quasi-admissible");
  } else {
    if (!(res.min_grad_v > 1e-8)) note("v has a critical point on the grid");
    std::vector<double> key(static_cast<std::size_t>(M.n), k.gamma);
    key.back() = k.gamma + k.varrho;
    if (cone_margin(cone, key) < -1e-9) note("(gamma,...,gamma,gamma+varrho) is outside the closed cone");
    if (res.base_report.cls == Admissibility::None) note("base metric is not pseudo-admissible");
  }

  std::vector<Eigen::MatrixXd> V(b.size());
  for (double N = 1.0; N <= N_max; N *= 2.0) {
    res.tried.push_back(N);
    auto ub = vf.exp_scaled(N);
    for (std::size_t i = 0; i < b.size(); ++i) V[i] = v_operator_at(b.g[i], b.ginv[i], b.gamma[i], A[i], ub.jets[i], k);
    res.final_report = classify_tensor_field(b.g, V, cone);
    res.N = N;
    res.ubar = std::move(ub);
    if (res.final_report.cls == Admissibility::Admissible) {
      res.success = true;
      break;
    }
  }
  return res;
}

/// Classifies e^{2u} g by differentiating its metric directly (no conformal
/// formula): lambda(g~^{-1} A^{tau,alpha}_{g~}) against `cone` at every node.
inline AdmissibilityReport verify_conformal_metric(const ModelManifold& M, const std::function<double(const Eigen::VectorXd&)>& u,
                                                   double tau, double alpha, const ConeSpec& cone, int order = 4,
                                                   double tol = kAdmissibilityTol) {
  if (M.kind == ModelManifold::Kind::RadialBall) throw PreconditionError("direct verification needs a tensor grid");
  require_resolution(M.grid);
  const MetricFn gt = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd { return std::exp(2.0 * u(x)) * M.metric(x); };
  std::vector<Eigen::MatrixXd> g(M.grid.size()), at(M.grid.size());
  parallel_for(M.grid.size(), [&](std::size_t i) {
    auto p = geometry_fd(M.grid, gt, M.grid.unravel(i), order);
    at[i] = modified_schouten(p.ric, p.scalar, p.g, tau, alpha);
    g[i] = std::move(p.g);
  });
  return classify_tensor_field(g, at, cone, tol);
}

// ---- convergence study ---------------------------------------------------------

/// Least-squares slope of -log(error) against log(nodes).
inline double observed_order(const std::vector<double>& nodes, const std::vector<double>& errors) {
  if (nodes.size() != errors.size() || nodes.size() < 2) throw PreconditionError("order fit needs >= 2 matching points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!(errors[i] > 0.0)) throw PreconditionError("order fit needs positive errors");
    const double x = std::log(nodes[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

struct ConvergenceStudy {
  std::vector<double> nodes, errors;
  double order = 0.0;
};

/// A^{tau,alpha} of e^{2u} g two ways on conformal tori of increasing
/// resolution: the conformal formula with second-order jets of the nodal u,
/// and fourth-order differences of the metric e^{2u} g itself. Errors are
/// sup-norm over `samples` evenly strided nodes, relative to 1 + |A|.
inline ConvergenceStudy conformal_formula_convergence(int n, const FieldSpec& phi, const FieldSpec& u,
                                                      const std::vector<int>& nodes, double tau, double alpha,
                                                      std::size_t samples = 400) {
  ConvergenceStudy st;
  for (int N : nodes) {
    const auto M = ModelManifold::conformal_torus(n, N, phi);
    require_resolution(M.grid);
    std::vector<double> uval(M.grid.size());
    for (std::size_t i = 0; i < uval.size(); ++i) uval[i] = u.value(M.grid.coord(i));
    const MetricFn gt = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd { return std::exp(2.0 * u.value(x)) * M.metric(x); };
    const std::size_t stride = std::max<std::size_t>(1, M.grid.size() / samples);
    const std::size_t count = (M.grid.size() + stride - 1) / stride;
    std::vector<double> err(count, 0.0);
    parallel_for(count, [&](std::size_t s) {
      const std::size_t i = s * stride;
      const auto b = point_geometry(M, i, CurvatureMethod::FiniteDifference4);
      const Eigen::MatrixXd at = modified_schouten(b.ric, b.scalar, b.g, tau, alpha);
      const auto jet = fd_scalar_jet(M.grid, uval, i, 2);
      const Eigen::MatrixXd formula = conformal_modified_schouten_at(b.g, b.ginv, b.gamma, at, jet, tau, alpha);
      const auto d = geometry_fd(M.grid, gt, M.grid.unravel(i), 4);
      const Eigen::MatrixXd direct = modified_schouten(d.ric, d.scalar, d.g, tau, alpha);
      err[s] = (formula - direct).cwiseAbs().maxCoeff() / (1.0 + direct.cwiseAbs().maxCoeff());
    });
    st.nodes.push_back(N);
    st.errors.push_back(*std::max_element(err.begin(), err.end()));
  }
  st.order = observed_order(st.nodes, st.errors);
  return st;
}

}  // namespace ccl
