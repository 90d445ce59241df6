#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "ccl/curvature.hpp"
#include "ccl/error.hpp"
#include "ccl/grid.hpp"

namespace ccl {

using MetricFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// Discretized model manifolds. Conformally flat kinds carry g = e^{2 phi} delta;
/// WarpedTorus carries g = sum_i e^{2 phi_i} dx_i^2.
struct ModelManifold {
  enum class Kind { FlatTorus, SphereChart, HyperbolicChart, ConformalTorus, WarpedTorus, RadialBall, Slab };

  Kind kind = Kind::FlatTorus;
  int n = 3;
  Grid grid;
  double radius = 1.0;           // SphereChart
  FieldSpec phi;                 // ConformalTorus
  std::vector<FieldSpec> phis;   // WarpedTorus, one per axis

  static ModelManifold flat_torus(int n, int nodes) { return make(Kind::FlatTorus, n, Grid::torus(n, nodes)); }
  /// Stereographic chart of the round sphere of the given radius on [-1, 1]^n.
  static ModelManifold sphere_chart(int n, int nodes, double radius = 1.0) {
    auto m = make(Kind::SphereChart, n, Grid::box(n, nodes, -1.0, 1.0));
    if (!(radius > 0.0)) throw PreconditionError("sphere radius must be positive");
    m.radius = radius;
    return m;
  }
  /// Poincare ball chart of hyperbolic space on the cube [-s, s]^n, s = 0.8/sqrt(n),
  /// which sits inside the ball of radius 0.8.
  static ModelManifold hyperbolic_chart(int n, int nodes) {
    const double s = 0.8 / std::sqrt(static_cast<double>(n));
    return make(Kind::HyperbolicChart, n, Grid::box(n, nodes, -s, s));
  }
  static ModelManifold conformal_torus(int n, int nodes, const FieldSpec& phi) {
    auto m = make(Kind::ConformalTorus, n, Grid::torus(n, nodes));
    m.phi = phi;
    return m;
  }
  static ModelManifold warped_torus(int n, int nodes, std::vector<FieldSpec> phis) {
    auto m = make(Kind::WarpedTorus, n, Grid::torus(n, nodes));
    if (static_cast<int>(phis.size()) != n) throw PreconditionError("warped torus needs one log-factor per axis");
    m.phis = std::move(phis);
    return m;
  }
  /// Unit ball carried by a radial grid on [0, 1].
  static ModelManifold radial_ball(int n, int radial_nodes) {
    if (n < 3) throw PreconditionError("manifold dimension must be >= 3");
    ModelManifold m;
    m.kind = Kind::RadialBall;
    m.n = n;
    m.grid = Grid::box(1, radial_nodes, 0.0, 1.0);
    return m;
  }
  /// [0, 1] x (periodic 2 pi)^{n-1}, flat.
  static ModelManifold slab(int n, int nodes) {
    auto g = Grid::torus(n, nodes);
    g.periodic[0] = false;
    g.lo[0] = 0.0;
    g.h[0] = 1.0 / (nodes - 1);
    return make(Kind::Slab, n, g);
  }

  bool closed() const { return kind == Kind::FlatTorus || kind == Kind::ConformalTorus || kind == Kind::WarpedTorus; }

  std::string kind_name() const {
    switch (kind) {
      case Kind::FlatTorus: return "flat_torus";
      case Kind::SphereChart: return "sphere_chart";
      case Kind::HyperbolicChart: return "hyperbolic_chart";
      case Kind::ConformalTorus: return "conformal_torus";
      case Kind::WarpedTorus: return "warped_torus";
      case Kind::RadialBall: return "radial_ball";
      case Kind::Slab: return "slab";
    }
    return "?";
  }

  /// Constant sectional curvature for space forms; NaN otherwise.
  double space_form_curvature() const {
    switch (kind) {
      case Kind::FlatTorus:
      case Kind::Slab:
      case Kind::RadialBall: return 0.0;
      case Kind::SphereChart: return 1.0 / (radius * radius);
      case Kind::HyperbolicChart: return -1.0;
      default: return std::nan("");
    }
  }

  /// log-factor jets for conformally flat kinds.
  ScalarJet log_factor(const Eigen::VectorXd& x) const {
    ScalarJet j;
    const auto dim = x.size();
    if (kind == Kind::ConformalTorus) return phi.jet(x);
    j.d = Eigen::VectorXd::Zero(dim);
    j.dd = Eigen::MatrixXd::Zero(dim, dim);
    if (kind == Kind::SphereChart || kind == Kind::HyperbolicChart) {
      // phi = log c - log(1 + s |x|^2), s = +1 sphere, -1 ball
      const double s = kind == Kind::SphereChart ? 1.0 : -1.0;
      const double c = kind == Kind::SphereChart ? 2.0 * radius : 2.0;
      const double q = 1.0 + s * x.squaredNorm();
      if (!(q > 0.0)) throw DomainError("point outside the hyperbolic chart");
      j.v = std::log(c) - std::log(q);
      j.d = -2.0 * s * x / q;
      j.dd = -2.0 * s / q * Eigen::MatrixXd::Identity(dim, dim) + 4.0 * x * x.transpose() / (q * q);
    }
    return j;
  }

  Eigen::MatrixXd metric(const Eigen::VectorXd& x) const {
    if (kind == Kind::WarpedTorus) {
      Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
      for (int i = 0; i < n; ++i) g(i, i) = std::exp(2.0 * phis[static_cast<std::size_t>(i)].value(x));
      return g;
    }
    return std::exp(2.0 * log_factor(x).v) * Eigen::MatrixXd::Identity(n, n);
  }

  /// Exact metric jet.
  MetricJet metric_jet(const Eigen::VectorXd& x) const {
    MetricJet mj;
    const auto un = static_cast<std::size_t>(n);
    mj.g = Eigen::MatrixXd::Zero(n, n);
    mj.dg.assign(un, Eigen::MatrixXd::Zero(n, n));
    mj.ddg.assign(un, std::vector<Eigen::MatrixXd>(un, Eigen::MatrixXd::Zero(n, n)));
    auto fill_diag = [&](int i, const ScalarJet& p) {
      const double e = std::exp(2.0 * p.v);
      mj.g(i, i) = e;
      for (int c = 0; c < n; ++c) {
        mj.dg[static_cast<std::size_t>(c)](i, i) = 2.0 * e * p.d[c];
        for (int d = 0; d < n; ++d)
          mj.ddg[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)](i, i) =
              e * (4.0 * p.d[c] * p.d[d] + 2.0 * p.dd(c, d));
      }
    };
    if (kind == Kind::WarpedTorus) {
      for (int i = 0; i < n; ++i) fill_diag(i, phis[static_cast<std::size_t>(i)].jet(x));
    } else {
      const auto p = log_factor(x);
      for (int i = 0; i < n; ++i) fill_diag(i, p);
    }
    return mj;
  }

 private:
  static ModelManifold make(Kind k, int n, Grid g) {
    if (n < 3) throw PreconditionError("manifold dimension must be >= 3");
    ModelManifold m;
    m.kind = k;
    m.n = n;
    m.grid = std::move(g);
    return m;
  }
};

enum class CurvatureMethod { Auto, ClosedForm, AnalyticJet, FiniteDifference2, FiniteDifference4 };

/// Geometry at node `m` from a metric function by finite differences of order 2 or 4.
inline PointGeometry geometry_fd(const Grid& grid, const MetricFn& metric, const std::vector<int>& m, int order) {
  const int n = grid.ndim();
  MetricJet mj;
  mj.g = metric(grid.coord(m));
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
  fd_derivatives<Eigen::MatrixXd>(grid, m, order, [&](const std::vector<int>& p) { return metric(grid.coord(p)); }, zero,
                                  mj.dg, mj.ddg);
  return geometry_from_jet(mj);
}

inline constexpr int kMinNodesPerAxis = 8;

inline void require_resolution(const Grid& grid) {
  for (int d : grid.dims)
    if (d < kMinNodesPerAxis)
      throw PreconditionError("grid too coarse: " + std::to_string(d) + " nodes on an axis, need at least " +
                              std::to_string(kMinNodesPerAxis));
}

/// Geometry at a grid node. Auto uses closed forms for space forms, exact jets
/// for the warped torus and fourth-order differences for the conformal torus.
inline PointGeometry point_geometry(const ModelManifold& M, std::size_t idx, CurvatureMethod method = CurvatureMethod::Auto) {
  const auto m = M.grid.unravel(idx);
  const double K = M.space_form_curvature();
  if (method == CurvatureMethod::Auto) {
    if (!std::isnan(K))
      method = CurvatureMethod::ClosedForm;
    else if (M.kind == ModelManifold::Kind::WarpedTorus)
      method = CurvatureMethod::AnalyticJet;
    else
      method = CurvatureMethod::FiniteDifference4;
  }
  if (M.kind == ModelManifold::Kind::RadialBall) {
    PointGeometry p;
    const int n = M.n;
    p.g = p.ginv = Eigen::MatrixXd::Identity(n, n);
    p.gamma.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, n));
    p.riem.assign(static_cast<std::size_t>(n * n * n * n), 0.0);
    p.ric = Eigen::MatrixXd::Zero(n, n);
    return p;
  }
  const Eigen::VectorXd x = M.grid.coord(m);
  switch (method) {
    case CurvatureMethod::ClosedForm: {
      if (std::isnan(K)) throw PreconditionError("closed-form curvature is only available for space forms");
      const auto mj = M.metric_jet(x);
      PointGeometry p;
      const int n = M.n;
      p.g = mj.g;
      p.ginv = mj.g.inverse();
      p.gamma = christoffel(p.ginv, mj.dg);
      p.riem.assign(static_cast<std::size_t>(n * n * n * n), 0.0);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            for (int d = 0; d < n; ++d)
              p.riem[static_cast<std::size_t>(((a * n + b) * n + c) * n + d)] =
                  K * (p.g(a, c) * p.g(b, d) - p.g(a, d) * p.g(b, c));
      p.ric = (n - 1) * K * p.g;
      p.scalar = n * (n - 1) * K;
      return p;
    }
    case CurvatureMethod::AnalyticJet: return geometry_from_jet(M.metric_jet(x));
    case CurvatureMethod::FiniteDifference2:
    case CurvatureMethod::FiniteDifference4: {
      const int order = method == CurvatureMethod::FiniteDifference2 ? 2 : 4;
      return geometry_fd(M.grid, [&](const Eigen::VectorXd& y) { return M.metric(y); }, m, order);
    }
    default: break;
  }
  throw PreconditionError("unknown curvature method");
}

}  // namespace ccl
