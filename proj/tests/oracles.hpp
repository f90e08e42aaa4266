#pragma once

// Independent reference computations used by the tests. None of these share
// code paths with the solvers they check.

#include "dgoc/control.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using dgoc::Vector;

/// Integral of x^a y^b over the unit right triangle (0,0),(1,0),(0,1).
inline double monomial_integral(int a, int b) {
  double num = 1.0;
  for (int i = 2; i <= a; ++i) num *= i;
  for (int i = 2; i <= b; ++i) num *= i;
  double den = 1.0;
  for (int i = 2; i <= a + b + 2; ++i) den *= i;
  return num / den;
}

struct LcpSolution {
  Vector u;
  Vector zeta;
};

/// Tries all 2^n active sets of the LCP  A u - b = zeta >= 0, u >= g, zeta^T(u-g) = 0.
inline std::optional<LcpSolution> enumerate_lcp(const Eigen::MatrixXd& a, const Vector& b, const Vector& g,
                                                 double tol = 1e-12) {
  const int n = static_cast<int>(a.rows());
  for (std::uint32_t set = 0; set < (1u << n); ++set) {
    Vector u = g;
    std::vector<int> free;
    for (int i = 0; i < n; ++i)
      if (!(set & (1u << i))) free.push_back(i);
    if (!free.empty()) {
      const int m = static_cast<int>(free.size());
      Eigen::MatrixXd aff(m, m);
      Vector rhs(m);
      for (int r = 0; r < m; ++r) {
        rhs[r] = b[free[r]];
        for (int j = 0; j < n; ++j)
          if (set & (1u << j)) rhs[r] -= a(free[r], j) * g[j];
        for (int c = 0; c < m; ++c) aff(r, c) = a(free[r], free[c]);
      }
      const Vector uf = aff.ldlt().solve(rhs);
      for (int r = 0; r < m; ++r) u[free[r]] = uf[r];
    }
    const Vector zeta = a * u - b;
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      if (set & (1u << i))
        ok = zeta[i] >= -tol;
      else
        ok = u[i] - g[i] >= -tol && std::abs(zeta[i]) <= 1e-9;
    }
    if (ok) return LcpSolution{u, zeta};
  }
  return std::nullopt;
}

/// Random SPD matrix: sparse-ish symmetric part plus a diagonal shift.
inline Eigen::MatrixXd random_spd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i == j || unit(rng) < 0.05) b(i, j) = normal(rng);
  Eigen::MatrixXd a = b * b.transpose();
  a.diagonal().array() += 0.5 + unit(rng);
  return a;
}

/// Unconstrained linear-quadratic optimum from the monolithic KKT system
///   A u - M z = 0,  A p - N u = -b_d,  nu M z + M p = 0.
inline Vector lq_optimum(const dgoc::ControlProblem& cp) {
  using Sp = dgoc::SparseMatrix;
  const int n = cp.num_dofs();
  const Sp& a = cp.system().sipg->matrix();
  const Sp& m = cp.system().mass->matrix();
  const Sp& nh = cp.tracking_mass().matrix();
  std::vector<Eigen::Triplet<double>> t;
  auto put = [&](const Sp& s, int r0, int c0, double f) {
    for (int k = 0; k < s.outerSize(); ++k)
      for (Sp::InnerIterator it(s, k); it; ++it) t.emplace_back(r0 + it.row(), c0 + it.col(), f * it.value());
  };
  // unknowns ordered (u, z, p)
  put(a, 0, 0, 1.0);
  put(m, 0, n, -1.0);
  put(nh, n, 0, -1.0);
  put(a, n, 2 * n, 1.0);
  put(m, 2 * n, n, cp.nu());
  put(m, 2 * n, 2 * n, 1.0);
  Sp k(3 * n, 3 * n);
  k.setFromTriplets(t.begin(), t.end());
  Vector rhs = Vector::Zero(3 * n);
  rhs.segment(n, n) = -cp.desired_load();
  Eigen::SparseLU<Sp> lu;
  lu.compute(k);
  if (lu.info() != Eigen::Success) throw std::runtime_error("lq_optimum: KKT factorization failed");
  const Vector x = lu.solve(rhs);
  return x.segment(n, n);
}

/// Mass-preconditioned steepest descent on F_h with central-difference gradients
/// and Armijo backtracking from the step 1/nu (the curvature scale of the control
/// cost). Returns the final objective.
inline double fd_descent(const dgoc::ControlProblem& cp, Vector z, double step = 1e-6, double f_tol = 1e-14,
                         int max_iter = 500) {
  const int n = cp.num_dofs();
  Eigen::SimplicialLDLT<dgoc::SparseMatrix> mass(cp.system().mass->matrix());
  auto f = [&](const Vector& x) { return dgoc::reduced_objective(x, cp); };
  double fz = f(z);
  for (int it = 0; it < max_iter; ++it) {
    Vector grad(n);
    for (int i = 0; i < n; ++i) {
      Vector zp = z, zm = z;
      zp[i] += step;
      zm[i] -= step;
      grad[i] = (f(zp) - f(zm)) / (2.0 * step);
    }
    const Vector dir = -mass.solve(grad);
    const double slope = grad.dot(dir);
    if (slope > -1e-30) break;
    double s = 1.0 / cp.nu();
    Vector trial;
    double ft = 0.0;
    for (int k = 0; k < 60; ++k) {
      trial = z + s * dir;
      ft = f(trial);
      if (ft <= fz + 1e-4 * s * slope) break;
      s *= 0.5;
    }
    if (!(ft < fz)) break;
    const bool done = fz - ft <= f_tol;
    z = trial;
    fz = ft;
    if (done) break;
  }
  return fz;
}

}  // namespace oracle
