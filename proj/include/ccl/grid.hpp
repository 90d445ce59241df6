#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "ccl/error.hpp"

namespace ccl {

/// Uniform tensor-product grid. Periodic axes hold N nodes on [lo, lo + N h);
/// closed axes hold N nodes on [lo, lo + (N-1) h] including both ends.
struct Grid {
  std::vector<int> dims;
  std::vector<double> lo, h;
  std::vector<bool> periodic;

  int ndim() const { return static_cast<int>(dims.size()); }

  std::size_t size() const {
    std::size_t s = 1;
    for (int d : dims) s *= static_cast<std::size_t>(d);
    return s;
  }

  /// Periodic box [0, length)^n with N nodes per axis.
  static Grid torus(int n, int nodes, double length = 2.0 * std::numbers::pi) {
    Grid g;
    g.dims.assign(static_cast<std::size_t>(n), nodes);
    g.lo.assign(static_cast<std::size_t>(n), 0.0);
    g.h.assign(static_cast<std::size_t>(n), length / nodes);
    g.periodic.assign(static_cast<std::size_t>(n), true);
    g.validate();
    return g;
  }

  /// Closed box [a, b]^n.
  static Grid box(int n, int nodes, double a, double b) {
    Grid g;
    g.dims.assign(static_cast<std::size_t>(n), nodes);
    g.lo.assign(static_cast<std::size_t>(n), a);
    g.h.assign(static_cast<std::size_t>(n), (b - a) / (nodes - 1));
    g.periodic.assign(static_cast<std::size_t>(n), false);
    g.validate();
    return g;
  }

  void validate() const {
    const std::size_t n = dims.size();
    if (lo.size() != n || h.size() != n || periodic.size() != n) throw PreconditionError("grid arrays disagree in length");
    for (std::size_t a = 0; a < n; ++a) {
      if (dims[a] < 2) throw PreconditionError("grid needs at least 2 nodes per axis");
      if (!(h[a] > 0.0)) throw PreconditionError("grid spacing must be positive");
    }
  }

  std::vector<int> unravel(std::size_t idx) const {
    std::vector<int> m(dims.size());
    for (std::size_t a = dims.size(); a-- > 0;) {
      m[a] = static_cast<int>(idx % static_cast<std::size_t>(dims[a]));
      idx /= static_cast<std::size_t>(dims[a]);
    }
    return m;
  }

  std::size_t ravel(const std::vector<int>& m) const {
    std::size_t idx = 0;
    for (std::size_t a = 0; a < dims.size(); ++a) idx = idx * static_cast<std::size_t>(dims[a]) + static_cast<std::size_t>(m[a]);
    return idx;
  }

  /// Coordinates of a possibly out-of-range multi-index (periodic axes are not wrapped;
  /// analytic fields are periodic themselves).
  Eigen::VectorXd coord(const std::vector<int>& m) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(dims.size()));
    for (std::size_t a = 0; a < dims.size(); ++a) x[static_cast<Eigen::Index>(a)] = lo[a] + m[a] * h[a];
    return x;
  }
  Eigen::VectorXd coord(std::size_t idx) const { return coord(unravel(idx)); }

  /// Index of a neighbour; periodic axes wrap.
  std::size_t wrap(std::vector<int> m) const {
    for (std::size_t a = 0; a < dims.size(); ++a)
      if (periodic[a]) m[a] = ((m[a] % dims[a]) + dims[a]) % dims[a];
    return ravel(m);
  }
};

/// Value, gradient and coordinate Hessian of a scalar at a point.
struct ScalarJet {
  double v = 0.0;
  Eigen::VectorXd d;
  Eigen::MatrixXd dd;
};

/// const + linear . x + sum_m amp_m prod_a cos(k_ma x_a + p_ma), with exact jets.
struct FieldSpec {
  struct Mode {
    double amp = 0.0;
    std::vector<double> k, phase;
  };
  double constant = 0.0;
  std::vector<double> linear;
  std::vector<Mode> modes;

  static FieldSpec zero() { return {}; }
  static FieldSpec constant_field(double c) {
    FieldSpec f;
    f.constant = c;
    return f;
  }
  /// amp * sin(k x_axis) in dimension n.
  static FieldSpec sine(int n, int axis, double amp, double k = 1.0) {
    return cosine(n, axis, amp, k, -std::numbers::pi / 2);
  }
  static FieldSpec cosine(int n, int axis, double amp, double k = 1.0, double phase = 0.0) {
    FieldSpec f;
    Mode m;
    m.amp = amp;
    m.k.assign(static_cast<std::size_t>(n), 0.0);
    m.phase.assign(static_cast<std::size_t>(n), 0.0);
    m.k[static_cast<std::size_t>(axis)] = k;
    m.phase[static_cast<std::size_t>(axis)] = phase;
    f.modes.push_back(m);
    return f;
  }

  FieldSpec& operator+=(const FieldSpec& o) {
    constant += o.constant;
    if (linear.size() < o.linear.size()) linear.resize(o.linear.size(), 0.0);
    for (std::size_t i = 0; i < o.linear.size(); ++i) linear[i] += o.linear[i];
    modes.insert(modes.end(), o.modes.begin(), o.modes.end());
    return *this;
  }
  FieldSpec operator*(double s) const {
    FieldSpec f = *this;
    f.constant *= s;
    for (auto& c : f.linear) c *= s;
    for (auto& m : f.modes) m.amp *= s;
    return f;
  }

  double value(const Eigen::VectorXd& x) const {
    double v = constant;
    for (std::size_t a = 0; a < linear.size(); ++a) v += linear[a] * x[static_cast<Eigen::Index>(a)];
    for (const auto& m : modes) {
      double p = m.amp;
      for (std::size_t a = 0; a < m.k.size(); ++a) p *= std::cos(m.k[a] * x[static_cast<Eigen::Index>(a)] + m.phase[a]);
      v += p;
    }
    return v;
  }

  ScalarJet jet(const Eigen::VectorXd& x) const {
    const auto n = x.size();
    ScalarJet j;
    j.v = constant;
    j.d = Eigen::VectorXd::Zero(n);
    j.dd = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t a = 0; a < linear.size(); ++a) {
      j.v += linear[a] * x[static_cast<Eigen::Index>(a)];
      j.d[static_cast<Eigen::Index>(a)] += linear[a];
    }
    std::vector<double> c(static_cast<std::size_t>(n)), s(static_cast<std::size_t>(n));
    for (const auto& m : modes) {
      for (Eigen::Index a = 0; a < n; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const double arg = m.k[ua] * x[a] + m.phase[ua];
        c[ua] = std::cos(arg);
        s[ua] = std::sin(arg);
      }
      auto prod_except = [&](Eigen::Index a, Eigen::Index b) {
        double p = m.amp;
        for (Eigen::Index e = 0; e < n; ++e)
          if (e != a && e != b) p *= c[static_cast<std::size_t>(e)];
        return p;
      };
      j.v += prod_except(-1, -1);
      for (Eigen::Index a = 0; a < n; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        if (m.k[ua] == 0.0) continue;
        j.d[a] += -m.k[ua] * s[ua] * prod_except(a, -1);
        j.dd(a, a) += -m.k[ua] * m.k[ua] * c[ua] * prod_except(a, -1);
        for (Eigen::Index b = a + 1; b < n; ++b) {
          const auto ub = static_cast<std::size_t>(b);
          if (m.k[ub] == 0.0) continue;
          const double v = m.k[ua] * s[ua] * m.k[ub] * s[ub] * prod_except(a, b);
          j.dd(a, b) += v;
          j.dd(b, a) += v;
        }
      }
    }
    return j;
  }
};

// ---- finite-difference stencils -----------------------------------------

struct Stencil1D {
  std::vector<int> off;
  std::vector<double> w;  // unscaled by h
};

namespace detail {

inline Stencil1D first_central(int order) {
  if (order == 4) return {{-2, -1, 1, 2}, {1.0 / 12, -2.0 / 3, 2.0 / 3, -1.0 / 12}};
  return {{-1, 1}, {-0.5, 0.5}};
}
inline Stencil1D second_central(int order) {
  if (order == 4) return {{-2, -1, 0, 1, 2}, {-1.0 / 12, 4.0 / 3, -2.5, 4.0 / 3, -1.0 / 12}};
  return {{-1, 0, 1}, {1.0, -2.0, 1.0}};
}

// Stencils at node i of a closed axis with N nodes: central where it fits,
// otherwise one-sided second order.
inline Stencil1D first_on_axis(int i, int N, bool periodic, int order) {
  const int reach = order == 4 ? 2 : 1;
  if (periodic || (i - reach >= 0 && i + reach <= N - 1)) return first_central(order);
  if (i - 1 < 0) return {{0, 1, 2}, {-1.5, 2.0, -0.5}};
  if (i + 1 > N - 1) return {{-2, -1, 0}, {0.5, -2.0, 1.5}};
  return first_central(2);
}
inline Stencil1D second_on_axis(int i, int N, bool periodic, int order) {
  const int reach = order == 4 ? 2 : 1;
  if (periodic || (i - reach >= 0 && i + reach <= N - 1)) return second_central(order);
  if (i - 1 < 0) return {{0, 1, 2, 3}, {2.0, -5.0, 4.0, -1.0}};
  if (i + 1 > N - 1) return {{-3, -2, -1, 0}, {-1.0, 4.0, -5.0, 2.0}};
  return second_central(2);
}

}  // namespace detail

/// Finite-difference first derivatives and coordinate Hessian at node `m` of a
/// quantity T sampled by sample(multi_index). T is double or an Eigen matrix.
/// The multi-index passed to `sample` is not wrapped.
template <class T, class Sample>
void fd_derivatives(const Grid& grid, const std::vector<int>& m, int order, Sample&& sample, const T& zero,
                    std::vector<T>& d, std::vector<std::vector<T>>& dd) {
  const int n = grid.ndim();
  const auto un = static_cast<std::size_t>(n);
  d.assign(un, zero);
  dd.assign(un, std::vector<T>(un, zero));
  std::vector<Stencil1D> s1(un);
  for (int a = 0; a < n; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    s1[ua] = detail::first_on_axis(m[ua], grid.dims[ua], grid.periodic[ua], order);
  }
  std::vector<int> p(m);
  for (int a = 0; a < n; ++a) {
    const auto ua = static_cast<std::size_t>(a);
    const double ha = grid.h[ua];
    T acc = zero;
    for (std::size_t q = 0; q < s1[ua].off.size(); ++q) {
      p[ua] = m[ua] + s1[ua].off[q];
      acc = acc + s1[ua].w[q] * sample(p);
    }
    p[ua] = m[ua];
    d[ua] = acc / ha;

    const auto s2 = detail::second_on_axis(m[ua], grid.dims[ua], grid.periodic[ua], order);
    acc = zero;
    for (std::size_t q = 0; q < s2.off.size(); ++q) {
      p[ua] = m[ua] + s2.off[q];
      acc = acc + s2.w[q] * sample(p);
    }
    p[ua] = m[ua];
    dd[ua][ua] = acc / (ha * ha);

    for (int b = a + 1; b < n; ++b) {
      const auto ub = static_cast<std::size_t>(b);
      acc = zero;
      for (std::size_t q = 0; q < s1[ua].off.size(); ++q)
        for (std::size_t r = 0; r < s1[ub].off.size(); ++r) {
          p[ua] = m[ua] + s1[ua].off[q];
          p[ub] = m[ub] + s1[ub].off[r];
          acc = acc + (s1[ua].w[q] * s1[ub].w[r]) * sample(p);
        }
      p[ua] = m[ua];
      p[ub] = m[ub];
      dd[ua][ub] = acc / (ha * grid.h[ub]);
      dd[ub][ua] = dd[ua][ub];
    }
  }
}

/// Scalar jets of a nodal array by finite differences (periodic axes wrap).
inline ScalarJet fd_scalar_jet(const Grid& grid, const std::vector<double>& values, std::size_t idx, int order) {
  const auto m = grid.unravel(idx);
  std::vector<double> d;
  std::vector<std::vector<double>> dd;
  fd_derivatives<double>(grid, m, order, [&](const std::vector<int>& p) { return values[grid.wrap(p)]; }, 0.0, d, dd);
  const int n = grid.ndim();
  ScalarJet j;
  j.v = values[idx];
  j.d.resize(n);
  j.dd.resize(n, n);
  for (int a = 0; a < n; ++a) {
    j.d[a] = d[static_cast<std::size_t>(a)];
    for (int b = 0; b < n; ++b) j.dd(a, b) = dd[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
  }
  return j;
}

/// Conformal factor as per-node jets (value, gradient, coordinate Hessian).
struct ConformalFactor {
  Grid grid;
  std::vector<ScalarJet> jets;

  /// Exact jets of an analytic field at the nodes.
  static ConformalFactor from_field(const Grid& g, const FieldSpec& f) {
    ConformalFactor c{g, std::vector<ScalarJet>(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) c.jets[i] = f.jet(g.coord(i));
    return c;
  }
  /// Jets regenerated from nodal values under the fixed stencil.
  static ConformalFactor from_values(const Grid& g, const std::vector<double>& u, int order) {
    if (u.size() != g.size()) throw PreconditionError("nodal array size does not match grid");
    ConformalFactor c{g, std::vector<ScalarJet>(g.size())};
    for (std::size_t i = 0; i < g.size(); ++i) c.jets[i] = fd_scalar_jet(g, u, i, order);
    return c;
  }
  /// Jets of e^{N v} by the chain rule.
  ConformalFactor exp_scaled(double N) const {
    ConformalFactor c{grid, jets};
    for (auto& j : c.jets) {
      const double e = std::exp(N * j.v);
      const Eigen::MatrixXd dd = N * e * (j.dd + N * j.d * j.d.transpose());
      j.d = N * e * j.d;
      j.dd = dd;
      j.v = e;
    }
    return c;
  }
  std::vector<double> values() const {
    std::vector<double> v(jets.size());
    for (std::size_t i = 0; i < jets.size(); ++i) v[i] = jets[i].v;
    return v;
  }
};

}  // namespace ccl
