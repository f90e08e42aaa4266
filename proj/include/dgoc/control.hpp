#pragma once

// Discrete optimal control of the SIPG obstacle problem: reduced objective,
// adjoint with strictly-active constraints, a damped fixed-point iteration on
// z = -p/nu, stationarity residuals and two falsification oracles.

#include "dgoc/assembly.hpp"
#include "dgoc/dgspace.hpp"
#include "dgoc/lcp.hpp"
#include "dgoc/linalg.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgoc {

enum class Matching { global, local };

inline const char* to_string(Matching m) { return m == Matching::global ? "global" : "local"; }

inline Matching parse_matching(const std::string& s) {
  if (s == "global") return Matching::global;
  if (s == "local") return Matching::local;
  throw std::invalid_argument("unknown matching mode '" + s + "' (expected global or local)");
}

struct ControlOptions {
  double lcp_tol = 1e-11;
  int lcp_max_iter = 500;
  /// zeta_h at or below this value on an active node makes the node biactive.
  double biactive_tol = 1e-8;
};

/// min F_h(z) = 1/2 ||S_h(z) - u_d||^2_{L2(Omega_hat)} + nu/2 ||z||^2, with z on the DG index set.
class ControlProblem {
 public:
  ControlProblem(AssembledSystem system, ScalarField g, ScalarField u_d, double nu,
                 Matching matching = Matching::global, Mask omega0 = {}, ControlOptions options = {})
      : system_(std::move(system)), g_(std::move(g)), ud_(std::move(u_d)), nu_(nu), matching_(matching),
        options_(options) {
    if (!(nu_ > 0.0) || !std::isfinite(nu_)) throw std::invalid_argument("ControlProblem: nu must be positive");
    const Mesh& mesh = *system_.mesh;
    if (matching_ == Matching::global) {
      region_.assign(mesh.num_cells(), 1);
    } else {
      if (static_cast<Index>(omega0.size()) != mesh.num_cells())
        throw std::invalid_argument("ControlProblem: local matching needs one flag per cell");
      bool any = false, all = true;
      for (char c : omega0) {
        any = any || c;
        all = all && c;
      }
      if (!any) throw std::invalid_argument("ControlProblem: empty matching subdomain");
      // Omega_0 = Omega (all cells) is accepted as the degenerate case equal to global matching.
      if (!all) {
        for (Index k = 0; k < mesh.num_cells(); ++k) {
          if (!omega0[k]) continue;
          for (Index v : mesh.cell(k))
            if (mesh.is_boundary_vertex(v))
              throw std::invalid_argument("ControlProblem: matching subdomain touches the boundary");
        }
      }
      region_ = std::move(omega0);
    }
    obstacle_ = embed_conforming(interpolate_conforming(g_, mesh), mesh).coefficients();
    tracking_mass_ = std::make_shared<const SparseOperator>(assemble_mass(mesh, &region_));
    desired_load_ = assemble_load(mesh, ud_, &region_);
    const auto& rule = triangle_rule();
    ud_at_points_.assign(mesh.num_cells(), {});
    for (Index k = 0; k < mesh.num_cells(); ++k) {
      if (!region_[k]) continue;
      for (int q = 0; q < 6; ++q) ud_at_points_[k][q] = ud_.at(k, mesh.map_from_barycentric(k, rule.points[q]));
    }
    workspace_ = std::make_shared<SubsystemSolver>(system_.sipg);
    last_active_ = std::make_shared<Mask>();
  }

  const AssembledSystem& system() const { return system_; }
  const Mesh& mesh() const { return *system_.mesh; }
  const ScalarField& obstacle_field() const { return g_; }
  const ScalarField& desired_state() const { return ud_; }
  double nu() const { return nu_; }
  Matching matching() const { return matching_; }
  const ControlOptions& options() const { return options_; }
  const Mask& matching_region() const { return region_; }
  const Vector& obstacle() const { return obstacle_; }
  const Vector& desired_load() const { return desired_load_; }
  const SparseOperator& tracking_mass() const { return *tracking_mass_; }
  SubsystemSolver& workspace() const { return *workspace_; }
  Index num_dofs() const { return system_.num_dofs(); }

  /// Same data with a different regularization parameter (shares the factorization cache).
  ControlProblem with_nu(double nu) const {
    if (!(nu > 0.0)) throw std::invalid_argument("ControlProblem: nu must be positive");
    ControlProblem c = *this;
    c.nu_ = nu;
    return c;
  }

  Vector state_load(const Vector& z) const { return system_.mass->apply(z); }

  ObstacleSolution solve_state(const Vector& z) const {
    if (z.size() != num_dofs()) throw std::invalid_argument("solve_state: control size mismatch");
    ObstacleProblem p{system_.sipg, state_load(z), obstacle_};
    const Mask* warm = last_active_->empty() ? nullptr : last_active_.get();
    ObstacleSolution s = solve_pdas(p, options_.lcp_tol, options_.lcp_max_iter, workspace_.get(), warm);
    *last_active_ = s.active_mask();
    return s;
  }

  /// 1/2 int_{Omega_hat} (u_h - u_d)^2 by the cell quadrature rule.
  double tracking(const Vector& u) const {
    const Mesh& m = mesh();
    const auto& rule = triangle_rule();
    double s = 0.0;
    for (Index k = 0; k < m.num_cells(); ++k) {
      if (!region_[k]) continue;
      double c = 0.0;
      for (int q = 0; q < 6; ++q) {
        const Eigen::Vector3d& l = rule.points[q];
        const double d = l[0] * u[dof(k, 0)] + l[1] * u[dof(k, 1)] + l[2] * u[dof(k, 2)] - ud_at_points_[k][q];
        c += rule.weights[q] * d * d;
      }
      s += c * m.cell_area(k);
    }
    return 0.5 * s;
  }

  double control_cost(const Vector& z) const { return 0.5 * nu_ * system_.mass->bilinear(z, z); }

  double objective(const Vector& z, const Vector& u) const { return tracking(u) + control_cost(z); }

  /// Adjoint right-hand side N_hat u - b_d.
  Vector adjoint_rhs(const Vector& u) const { return tracking_mass_->apply(u) - desired_load_; }

 private:
  AssembledSystem system_;
  ScalarField g_;
  ScalarField ud_;
  double nu_;
  Matching matching_;
  ControlOptions options_;
  Mask region_;
  Vector obstacle_;
  std::shared_ptr<const SparseOperator> tracking_mass_;
  Vector desired_load_;
  std::vector<std::array<double, 6>> ud_at_points_;
  std::shared_ptr<SubsystemSolver> workspace_;
  std::shared_ptr<Mask> last_active_;
};

inline double reduced_objective(const Vector& z, const ControlProblem& cp) {
  return cp.objective(z, cp.solve_state(z).u);
}

inline double l2_norm(const Vector& v, const SparseOperator& mass) {
  return std::sqrt(std::max(0.0, mass.bilinear(v, v)));
}

// --- stationarity ------------------------------------------------------------

struct ActiveSets {
  std::vector<Index> active;
  std::vector<Index> strictly_active;
  std::vector<Index> biactive;
};

inline std::vector<Index> to_indices(const Mask& m) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out.push_back(static_cast<Index>(i));
  return out;
}

inline Mask to_mask(const std::vector<Index>& idx, Index n) {
  Mask m(n, 0);
  for (Index i : idx) {
    if (i < 0 || i >= n) throw std::out_of_range("index set entry out of range");
    m[i] = 1;
  }
  return m;
}

/// Nodal classification: active u - g <= kActiveTol; strictly active adds zeta_h > tol_b.
inline ActiveSets classify(const Vector& u, const Vector& zeta_h, const Vector& g, double tol_b) {
  ActiveSets s;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u[i] - g[i] > kActiveTol) continue;
    s.active.push_back(static_cast<Index>(i));
    (zeta_h[i] > tol_b ? s.strictly_active : s.biactive).push_back(static_cast<Index>(i));
  }
  return s;
}

struct AdjointSolution {
  Vector p;
  Vector lambda;
};

/// A p = N_hat u - b_d + W lambda with p = 0 and lambda free on the strictly active set,
/// lambda = 0 elsewhere.
inline AdjointSolution solve_adjoint(const Vector& u, const std::vector<Index>& strictly_active,
                                     const ControlProblem& cp) {
  const Index n = cp.num_dofs();
  if (u.size() != n) throw std::invalid_argument("solve_adjoint: state size mismatch");
  const Mask fixed = to_mask(strictly_active, n);
  Mask free(n);
  for (Index i = 0; i < n; ++i) free[i] = !fixed[i];
  const Vector r = cp.adjoint_rhs(u);
  AdjointSolution a;
  try {
    a.p = cp.workspace().solve(free, r, Vector::Zero(n));
  } catch (const FactorizationError& e) {
    throw std::runtime_error(std::string("solve_adjoint: ") + e.what());
  }
  const Vector res = cp.system().sipg->apply(a.p) - r;
  a.lambda = Vector::Zero(n);
  for (Index i : strictly_active) a.lambda[i] = res[i] / cp.system().weights[i];
  return a;
}

struct StationarityPoint {
  Vector z, u, p, zeta, lambda;
  std::vector<Index> active_set;
  std::vector<Index> strictly_active_set;
  std::vector<Index> biactive_set;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> objective_trace;
};

struct ResidualReport {
  double state_residual = 0.0;
  double adjoint_residual = 0.0;
  double complementarity_residual = 0.0;
  double sign_violation_lambda = 0.0;
  double sign_violation_p = 0.0;
  double gradient_residual = 0.0;

  double max() const {
    return std::max({state_residual, adjoint_residual, complementarity_residual, sign_violation_lambda,
                     sign_violation_p, gradient_residual});
  }

  nlohmann::ordered_json to_json() const {
    return {{"state_residual", state_residual},
            {"adjoint_residual", adjoint_residual},
            {"complementarity_residual", complementarity_residual},
            {"sign_violation_lambda", sign_violation_lambda},
            {"sign_violation_p", sign_violation_p},
            {"gradient_residual", gradient_residual}};
  }
};

/// Nodal sup-norm residuals of the discrete strong-stationarity system, with the
/// lumped weights dividing the state and adjoint equations.
inline ResidualReport stationarity_residual(const StationarityPoint& pt, const ControlProblem& cp) {
  const Index n = cp.num_dofs();
  for (const Vector* v : {&pt.z, &pt.u, &pt.p, &pt.zeta, &pt.lambda})
    if (v->size() != n) throw std::invalid_argument("stationarity_residual: size mismatch");
  const AssembledSystem& s = cp.system();
  const Vector& w = s.weights;
  const Vector& g = cp.obstacle();
  ResidualReport r;
  const Vector state = (s.sipg->apply(pt.u) - cp.state_load(pt.z)).cwiseQuotient(w) - pt.zeta;
  const Vector adj = (s.sipg->apply(pt.p) - cp.adjoint_rhs(pt.u)).cwiseQuotient(w) - pt.lambda;
  r.state_residual = state.lpNorm<Eigen::Infinity>();
  r.adjoint_residual = adj.lpNorm<Eigen::Infinity>();
  for (Index i = 0; i < n; ++i) {
    const double gap = pt.u[i] - g[i];
    r.complementarity_residual = std::max({r.complementarity_residual, std::abs(std::min(gap, pt.zeta[i])),
                                           std::abs(gap * pt.lambda[i]), std::abs(pt.zeta[i] * pt.p[i])});
  }
  for (Index i : pt.biactive_set) {
    r.sign_violation_lambda = std::max(r.sign_violation_lambda, pt.lambda[i]);
    r.sign_violation_p = std::max(r.sign_violation_p, -pt.p[i]);
  }
  r.gradient_residual = (cp.nu() * pt.z + pt.p).lpNorm<Eigen::Infinity>();
  return r;
}

// --- fixed-point iteration ------------------------------------------------------

class ControlSolverError : public std::runtime_error {
 public:
  ControlSolverError(const std::string& what, std::vector<double> trace, bool oscillation)
      : std::runtime_error(what), trace_(std::move(trace)), oscillation_(oscillation) {}
  const std::vector<double>& objective_trace() const { return trace_; }
  bool oscillation() const { return oscillation_; }

 private:
  std::vector<double> trace_;
  bool oscillation_;
};

struct ControlResult {
  StationarityPoint point;
  ResidualReport report;
};

inline constexpr double kMonotoneSlack = 1e-12;

namespace detail {

inline StationarityPoint stationarity_at(const ControlProblem& cp, const Vector& z, ObstacleSolution state) {
  StationarityPoint pt;
  pt.z = z;
  pt.zeta = state.zeta.cwiseQuotient(cp.system().weights);
  const ActiveSets sets = classify(state.u, pt.zeta, cp.obstacle(), cp.options().biactive_tol);
  pt.u = std::move(state.u);
  AdjointSolution adj = solve_adjoint(pt.u, sets.strictly_active, cp);
  pt.p = std::move(adj.p);
  pt.lambda = std::move(adj.lambda);
  pt.active_set = sets.active;
  pt.strictly_active_set = sets.strictly_active;
  pt.biactive_set = sets.biactive;
  return pt;
}

}  // namespace detail

/// Damped iteration z <- z + theta (z_new - z), z_new = -p/nu, with step halving
/// whenever F_h would increase. Stops once ||z_new - z||_{L2} <= tol; the returned
/// control is z_new itself, so z = -p/nu holds exactly.
inline ControlResult solve_control_fixed_point(const ControlProblem& cp, const Vector& z0, double theta = 0.5,
                                               double tol = 1e-10, int max_iter = 1000) {
  if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("solve_control_fixed_point: theta must lie in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("solve_control_fixed_point: tol must be positive");
  if (z0.size() != cp.num_dofs()) throw std::invalid_argument("solve_control_fixed_point: z0 size mismatch");
  const SparseOperator& mass = *cp.system().mass;
  Vector z = z0;
  ObstacleSolution state = cp.solve_state(z);
  double f = cp.objective(z, state.u);
  std::vector<double> trace{f};
  for (int it = 1; it <= max_iter; ++it) {
    StationarityPoint pt = detail::stationarity_at(cp, z, state);
    Vector z_new = -pt.p / cp.nu();
    const Vector d = z_new - z;
    if (l2_norm(d, mass) <= tol) {
      pt.z = std::move(z_new);
      pt.objective = f;
      pt.iterations = it;
      pt.objective_trace = std::move(trace);
      ResidualReport rep = stationarity_residual(pt, cp);
      return {std::move(pt), rep};
    }
    double step = theta;
    Vector z_trial;
    ObstacleSolution trial;
    double f_trial = 0.0;
    for (int halving = 0;; ++halving) {
      z_trial = z + step * d;
      trial = cp.solve_state(z_trial);
      f_trial = cp.objective(z_trial, trial.u);
      if (f_trial <= f + kMonotoneSlack || halving == 40) break;
      step *= 0.5;
    }
    z = std::move(z_trial);
    state = std::move(trial);
    f = f_trial;
    trace.push_back(f);
  }
  bool oscillation = false;
  for (std::size_t i = 1; i < trace.size(); ++i) oscillation = oscillation || trace[i] > trace[i - 1] + kMonotoneSlack;
  throw ControlSolverError(std::string("solve_control_fixed_point: no convergence within max_iter") +
                               (oscillation ? " (objective oscillates)" : ""),
                           std::move(trace), oscillation);
}

// --- oracles -------------------------------------------------------------------

/// Central differences of F_h in each coefficient direction.
inline Vector fd_gradient(const Vector& z, const ControlProblem& cp, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_gradient: step must be positive");
  if (z.size() != cp.num_dofs()) throw std::invalid_argument("fd_gradient: size mismatch");
  Vector grad(z.size());
  Vector zp = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    zp[i] = z[i] + step;
    const double fp = reduced_objective(zp, cp);
    zp[i] = z[i] - step;
    const double fm = reduced_objective(zp, cp);
    zp[i] = z[i];
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

/// Adjoint-based Euclidean gradient M (nu z + p) of F_h, valid where S_h is differentiable.
inline Vector adjoint_gradient(const Vector& z, const ControlProblem& cp) {
  const StationarityPoint pt = detail::stationarity_at(cp, z, cp.solve_state(z));
  return cp.system().mass->apply(cp.nu() * z + pt.p);
}

/// min over random perturbations delta with ||delta||_{L2} <= radius of F_h(z + delta) - F_h(z).
inline double local_optimality_probe(const StationarityPoint& pt, const ControlProblem& cp, int n_samples,
                                     double radius, std::uint64_t seed = 20240607) {
  if (radius < 0.0) throw std::invalid_argument("local_optimality_probe: radius must be non-negative");
  if (radius == 0.0 || n_samples <= 0) return 0.0;
  const SparseOperator& mass = *cp.system().mass;
  const double f0 = reduced_objective(pt.z, cp);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_samples; ++s) {
    Vector delta(pt.z.size());
    for (Eigen::Index i = 0; i < delta.size(); ++i) delta[i] = normal(rng);
    const double scale = radius * (1.0 - unit(rng)) / l2_norm(delta, mass);
    worst = std::min(worst, reduced_objective(pt.z + scale * delta, cp) - f0);
  }
  return worst;
}

}  // namespace dgoc
