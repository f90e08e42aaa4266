#pragma once

// Discrete obstacle problem in complementarity form:
//   A u = zeta + b,  u >= g,  zeta >= 0,  zeta^T (u - g) = 0,
// solved by a primal-dual active set method with a projected Gauss-Seidel
// solver as fallback and as an independent check.

#include "dgoc/assembly.hpp"
#include "dgoc/dgspace.hpp"
#include "dgoc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgoc {

/// Post-hoc classification threshold on u - g.
inline constexpr double kActiveTol = 1e-10;

struct ObstacleProblem {
  std::shared_ptr<const SparseOperator> op;
  Vector load;
  Vector obstacle;

  int size() const { return op ? op->dimension() : 0; }

  void validate() const {
    if (!op) throw std::invalid_argument("ObstacleProblem: missing operator");
    if (load.size() != op->dimension() || obstacle.size() != op->dimension())
      throw std::invalid_argument("ObstacleProblem: size mismatch");
  }
};

struct LcpResiduals {
  double feasibility = 0.0;      // max (g - u)^+
  double sign = 0.0;             // max (-zeta)^+
  double complementarity = 0.0;  // max |min(u - g, zeta)|

  double max() const { return std::max({feasibility, sign, complementarity}); }
};

inline LcpResiduals lcp_residuals(const Vector& u, const Vector& zeta, const Vector& g) {
  LcpResiduals r;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double gap = u[i] - g[i];
    r.feasibility = std::max(r.feasibility, -gap);
    r.sign = std::max(r.sign, -zeta[i]);
    r.complementarity = std::max(r.complementarity, std::abs(std::min(gap, zeta[i])));
  }
  return r;
}

struct ObstacleSolution {
  Vector u;
  /// Raw residual A u - b.
  Vector zeta;
  std::vector<Index> active_set;
  LcpResiduals residuals;
  int iterations = 0;
  /// True when PDAS handed over to projected Gauss-Seidel.
  bool polished = false;

  Mask active_mask() const {
    Mask m(static_cast<std::size_t>(u.size()), 0);
    for (Index i : active_set) m[i] = 1;
    return m;
  }
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Vector last_iterate, LcpResiduals residuals)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)), residuals_(residuals) {}
  const Vector& last_iterate() const { return last_iterate_; }
  const LcpResiduals& residuals() const { return residuals_; }

 private:
  Vector last_iterate_;
  LcpResiduals residuals_;
};

namespace detail {

inline ObstacleSolution finish(const ObstacleProblem& p, Vector u, int iterations, bool polished) {
  ObstacleSolution s;
  s.zeta = p.op->apply(u) - p.load;
  s.residuals = lcp_residuals(u, s.zeta, p.obstacle);
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u[i] - p.obstacle[i] <= kActiveTol) s.active_set.push_back(static_cast<Index>(i));
  s.u = std::move(u);
  s.iterations = iterations;
  s.polished = polished;
  return s;
}

}  // namespace detail

/// Projected Gauss-Seidel. Converges for SPD operators; `start` defaults to max(g, 0).
inline ObstacleSolution solve_pgs(const ObstacleProblem& p, double tol, int max_iter,
                                  const Vector* start = nullptr) {
  p.validate();
  const int n = p.size();
  const Eigen::SparseMatrix<double, Eigen::RowMajor, int> a(p.op->matrix());
  Vector diag(n);
  for (int i = 0; i < n; ++i) {
    diag[i] = a.coeff(i, i);
    if (!(diag[i] > 0.0)) throw std::invalid_argument("solve_pgs: non-positive diagonal entry");
  }
  Vector u = start ? start->cwiseMax(p.obstacle) : Vector(p.obstacle.cwiseMax(0.0));
  LcpResiduals res;
  for (int sweep = 1; sweep <= max_iter; ++sweep) {
    for (int i = 0; i < n; ++i) {
      double s = p.load[i];
      for (decltype(a)::InnerIterator it(a, i); it; ++it)
        if (it.col() != i) s -= it.value() * u[it.col()];
      u[i] = std::max(p.obstacle[i], s / diag[i]);
    }
    if (sweep <= 10 || sweep % 10 == 0 || sweep == max_iter) {
      res = lcp_residuals(u, a * u - p.load, p.obstacle);
      if (res.max() <= tol) return detail::finish(p, std::move(u), sweep, false);
    }
  }
  throw SolverError("solve_pgs: no convergence within max_iter sweeps", u, res);
}

/// Primal-dual active set (semismooth Newton on min(u - g, zeta) = 0).
/// Stops when two consecutive active sets coincide; a set seen earlier triggers
/// projected Gauss-Seidel polishing from the current iterate.
inline ObstacleSolution solve_pdas(const ObstacleProblem& p, double tol, int max_iter,
                                   SubsystemSolver* workspace = nullptr, const Mask* initial_active = nullptr,
                                   int polish_sweeps = 1000000) {
  p.validate();
  const int n = p.size();
  std::optional<SubsystemSolver> local;
  if (!workspace) workspace = &local.emplace(p.op);
  if (&workspace->op() != p.op.get())
    throw std::invalid_argument("solve_pdas: workspace built for a different operator");
  Vector diag(n);
  for (int i = 0; i < n; ++i) diag[i] = p.op->coeff(i, i);

  Mask active(n, 0);
  if (initial_active && static_cast<int>(initial_active->size()) == n) active = *initial_active;
  std::vector<Mask> history;
  Vector u = p.obstacle;
  for (int it = 1; it <= max_iter; ++it) {
    Mask free(n);
    for (int i = 0; i < n; ++i) free[i] = !active[i];
    try {
      u = workspace->solve(free, p.load, p.obstacle);
    } catch (const FactorizationError& e) {
      throw SolverError(std::string("solve_pdas: ") + e.what(), u, LcpResiduals{});
    }
    const Vector zeta = p.op->apply(u) - p.load;
    Mask next(n);
    for (int i = 0; i < n; ++i) next[i] = zeta[i] - diag[i] * (u[i] - p.obstacle[i]) > 0.0;
    if (next == active) {
      ObstacleSolution s = detail::finish(p, std::move(u), it, false);
      if (s.residuals.max() <= tol) return s;
      ObstacleSolution polished = solve_pgs(p, tol, polish_sweeps, &s.u);
      polished.iterations += it;
      polished.polished = true;
      return polished;
    }
    if (std::find(history.begin(), history.end(), next) != history.end()) {
      ObstacleSolution polished = solve_pgs(p, tol, polish_sweeps, &u);
      polished.iterations += it;
      polished.polished = true;
      return polished;
    }
    history.push_back(active);
    active = std::move(next);
  }
  throw SolverError("solve_pdas: no convergence within max_iter iterations", u,
                    lcp_residuals(u, p.op->apply(u) - p.load, p.obstacle));
}

/// Nodal multiplier zeta_h with <zeta_h, v>_h = A^SIP(u, v) - (z, v): division by the lumped weights.
inline DGFunction extract_multiplier(const Vector& u, const AssembledSystem& system, const Vector& b) {
  if (u.size() != system.num_dofs() || b.size() != system.num_dofs())
    throw std::invalid_argument("extract_multiplier: size mismatch");
  return DGFunction(Vector((system.sipg->apply(u) - b).array() / system.weights.array()));
}

}  // namespace dgoc
