#pragma once

#include <Eigen/Dense>

#include <vector>

#include "ccl/error.hpp"

namespace ccl {

/// Metric with first and second coordinate derivatives: dg[c](a,b) = d_c g_ab,
/// ddg[c][d](a,b) = d_c d_d g_ab.
struct MetricJet {
  Eigen::MatrixXd g;
  std::vector<Eigen::MatrixXd> dg;
  std::vector<std::vector<Eigen::MatrixXd>> ddg;
};

/// Pointwise geometry: metric, inverse, Christoffel symbols Gamma[k](i,j),
/// Riemann tensor R_abcd (flattened), Ricci and scalar curvature.
struct PointGeometry {
  Eigen::MatrixXd g, ginv;
  std::vector<Eigen::MatrixXd> gamma;
  std::vector<double> riem;
  Eigen::MatrixXd ric;
  double scalar = 0.0;

  int dim() const { return static_cast<int>(g.rows()); }
  double R(int a, int b, int c, int d) const {
    const int n = dim();
    return riem[static_cast<std::size_t>(((a * n + b) * n + c) * n + d)];
  }
  /// Sectional curvature of the plane spanned by x, y.
  double sectional(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
    const int n = dim();
    double num = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) num += R(a, b, c, d) * x[a] * y[b] * x[c] * y[d];
    const double xx = x.dot(g * x), yy = y.dot(g * y), xy = x.dot(g * y);
    return num / (xx * yy - xy * xy);
  }
};

inline std::vector<Eigen::MatrixXd> christoffel(const Eigen::MatrixXd& ginv, const std::vector<Eigen::MatrixXd>& dg) {
  const auto n = ginv.rows();
  // first kind: G1[c](a,b) = (d_a g_bc + d_b g_ac - d_c g_ab) / 2
  std::vector<Eigen::MatrixXd> first(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, n));
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b)
        first[static_cast<std::size_t>(c)](a, b) =
            0.5 * (dg[static_cast<std::size_t>(a)](b, c) + dg[static_cast<std::size_t>(b)](a, c) -
                   dg[static_cast<std::size_t>(c)](a, b));
  std::vector<Eigen::MatrixXd> gam(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, n));
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index c = 0; c < n; ++c) gam[static_cast<std::size_t>(k)] += ginv(k, c) * first[static_cast<std::size_t>(c)];
  return gam;
}

inline PointGeometry geometry_from_jet(const MetricJet& j) {
  PointGeometry p;
  const auto n = j.g.rows();
  const auto un = static_cast<std::size_t>(n);
  p.g = j.g;
  p.ginv = j.g.inverse();
  p.gamma = christoffel(p.ginv, j.dg);
  p.riem.assign(un * un * un * un, 0.0);
  auto ddg = [&](Eigen::Index c, Eigen::Index d, Eigen::Index a, Eigen::Index b) {
    return j.ddg[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)](a, b);
  };
  // lowered Christoffel symbols Gl[e](b,c) = g_ef Gamma^f_bc
  std::vector<Eigen::MatrixXd> gl(un, Eigen::MatrixXd::Zero(n, n));
  for (Eigen::Index e = 0; e < n; ++e)
    for (Eigen::Index f = 0; f < n; ++f) gl[static_cast<std::size_t>(e)] += p.g(e, f) * p.gamma[static_cast<std::size_t>(f)];
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b)
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index d = 0; d < n; ++d) {
          double r = 0.5 * (ddg(b, c, a, d) + ddg(a, d, b, c) - ddg(b, d, a, c) - ddg(a, c, b, d));
          for (Eigen::Index e = 0; e < n; ++e) {
            const auto ue = static_cast<std::size_t>(e);
            r += gl[ue](a, d) * p.gamma[ue](b, c) - gl[ue](a, c) * p.gamma[ue](b, d);
          }
          p.riem[static_cast<std::size_t>(((a * n + b) * n + c) * n + d)] = r;
        }
  p.ric = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) {
      double s = 0.0;
      for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) s += p.ginv(a, c) * p.R(a, b, c, d);
      p.ric(b, d) = s;
    }
  p.ric = 0.5 * (p.ric + p.ric.transpose()).eval();
  p.scalar = (p.ginv.cwiseProduct(p.ric)).sum();
  return p;
}

/// Eigen-decomposition of g^{-1} T by congruence: with g = L L^T,
/// M = L^{-1} T L^{-T} = Q diag(lambda) Q^T. `frame` = L^{-T} Q, so
/// frame^T g frame = I and frame^T T frame = diag(lambda).
struct FrameEigen {
  Eigen::VectorXd values;  // ascending
  Eigen::MatrixXd frame;
};

inline FrameEigen frame_eigen(const Eigen::MatrixXd& g, const Eigen::MatrixXd& T) {
  Eigen::LLT<Eigen::MatrixXd> llt(g);
  if (llt.info() != Eigen::Success) throw DomainError("metric is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd M = L.triangularView<Eigen::Lower>().solve(T);
  M = L.triangularView<Eigen::Lower>().solve(M.transpose()).transpose();
  M = 0.5 * (M + M.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  FrameEigen fe;
  fe.values = es.eigenvalues();
  fe.frame = L.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
  return fe;
}

inline Eigen::VectorXd eigenvalues_relative(const Eigen::MatrixXd& g, const Eigen::MatrixXd& T) {
  return frame_eigen(g, T).values;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace ccl
