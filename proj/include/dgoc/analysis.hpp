#pragma once

// Error norms, experimental orders of convergence, rate tables, and the
// patchwise discrete-maximum-principle audit.

#include "dgoc/assembly.hpp"
#include "dgoc/dgspace.hpp"
#include "dgoc/mesh.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgoc {

/// ||w||_h^2 = sum_K ||grad w||^2 + sum_e h_e^{-1} ||[w]||^2, boundary edges included.
inline double norm_h(const DGFunction& w, const Mesh& mesh) {
  if (w.num_cells() != mesh.num_cells()) throw std::invalid_argument("norm_h: size mismatch");
  const SparseOperator gram = assemble_energy_gram(mesh);
  return std::sqrt(std::max(0.0, gram.bilinear(w.coefficients(), w.coefficients())));
}

/// Same, with a caller-provided Gram matrix (assemble_energy_gram) to avoid reassembly.
inline double norm_h(const DGFunction& w, const SparseOperator& gram) {
  return std::sqrt(std::max(0.0, gram.bilinear(w.coefficients(), w.coefficients())));
}

inline double l2_norm(const DGFunction& w, const SparseOperator& mass) {
  return std::sqrt(std::max(0.0, mass.bilinear(w.coefficients(), w.coefficients())));
}

/// Pieces of the energy-type error of an exact field against a DG function.
struct EnergyError {
  double gradient_sq = 0.0;
  double jump_sq = 0.0;
  double hessian_sq = 0.0;

  double h_norm() const { return std::sqrt(gradient_sq + jump_sq); }
  double triple_norm() const { return std::sqrt(gradient_sq + jump_sq + hessian_sq); }
};

/// Quadrature evaluation of all three terms of |||u - u_h||| (D^2 u_h = 0 cellwise).
inline EnergyError energy_error(const ScalarField& u, const DGFunction& uh, const Mesh& mesh) {
  if (!u.has_gradient()) throw std::invalid_argument("energy_error: exact field needs a gradient");
  if (!u.has_hessian()) throw std::invalid_argument("energy_error: exact field needs a Hessian");
  if (uh.num_cells() != mesh.num_cells()) throw std::invalid_argument("energy_error: size mismatch");
  EnergyError err;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const Point gh = cell_gradient(uh, mesh, k);
    const double hk = mesh.cell_diameter(k);
    err.gradient_sq += integrate_cell(mesh, k, [&](const Point& x, const Eigen::Vector3d&) {
      return (u.gradient(x) - gh).squaredNorm();
    });
    err.hessian_sq += hk * hk * integrate_cell(mesh, k, [&](const Point& x, const Eigen::Vector3d&) {
      return u.hessian(x).squaredNorm();
    });
  }
  const auto& rule = edge_rule();
  for (const auto& e : mesh.edges()) {
    const Point& a = mesh.vertex(e.vertices[0]);
    const Point& b = mesh.vertex(e.vertices[1]);
    double s = 0.0;
    for (int q = 0; q < 3; ++q) {
      const Point x = a + rule.points[q] * (b - a);
      const double wp = u.at(e.plus_cell, x) - evaluate_barycentric(uh, e.plus_cell, mesh.barycentric(e.plus_cell, x));
      double jump = wp;
      if (!e.is_boundary())
        jump -= u.at(e.minus_cell, x) -
                evaluate_barycentric(uh, e.minus_cell, mesh.barycentric(e.minus_cell, x));
      s += rule.weights[q] * jump * jump;
    }
    err.jump_sq += s;  // h_e * (1/h_e) cancels
  }
  return err;
}

inline double triple_norm_error(const ScalarField& u, const DGFunction& uh, const Mesh& mesh) {
  return energy_error(u, uh, mesh).triple_norm();
}

/// L2 error over all cells or over a cell subset.
inline double l2_error(const ScalarField& u, const DGFunction& uh, const Mesh& mesh, const Mask* region = nullptr) {
  if (uh.num_cells() != mesh.num_cells()) throw std::invalid_argument("l2_error: size mismatch");
  double s = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    if (region && !(*region)[k]) continue;
    s += integrate_cell(mesh, k, [&](const Point& x, const Eigen::Vector3d& l) {
      const double d = u.at(k, x) - evaluate_barycentric(uh, k, l);
      return d * d;
    });
  }
  return std::sqrt(s);
}

/// Cells whose centroid lies in the open rectangle.
inline Mask cells_in(const Mesh& mesh, const Rectangle& r) {
  Mask m(mesh.num_cells(), 0);
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const Point c = mesh.centroid(k);
    m[k] = c.x() > r.x0 && c.x() < r.x1 && c.y() > r.y0 && c.y() < r.y1;
  }
  return m;
}

// --- EOC and rate tables -----------------------------------------------------

/// eoc_i = log(e_{i-1}/e_i) / log(h_{i-1}/h_i), i >= 1.
inline std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs) {
  if (errors.size() != hs.size() || errors.size() < 2) throw std::invalid_argument("eoc: need >= 2 paired entries");
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!(errors[i] > 0.0) || !(hs[i] > 0.0)) throw std::invalid_argument("eoc: entries must be strictly positive");
  std::vector<double> r;
  for (std::size_t i = 1; i < errors.size(); ++i) r.push_back(std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]));
  return r;
}

struct RateTable {
  struct Row {
    double h = 0.0;
    int n = 0;
    std::map<std::string, double> errors;
    std::map<std::string, double> rates;  // empty on the first row
  };

  std::vector<std::string> error_columns;  // CSV order
  std::vector<std::pair<std::string, std::string>> rate_columns;  // (rate column, error column)
  std::vector<Row> rows;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  void add_row(double h, int n, std::map<std::string, double> errors) {
    if (!rows.empty() && !(h < rows.back().h)) throw std::invalid_argument("RateTable: h must strictly decrease");
    rows.push_back({h, n, std::move(errors), {}});
  }

  /// Fills the rate columns from row 2 onward. Non-positive errors leave the rate NaN.
  void compute_rates() {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      for (const auto& [rate, col] : rate_columns) {
        const double e0 = rows[i - 1].errors.at(col), e1 = rows[i].errors.at(col);
        rows[i].rates[rate] = (e0 > 0.0 && e1 > 0.0) ? eoc({e0, e1}, {rows[i - 1].h, rows[i].h})[0]
                                                     : std::numeric_limits<double>::quiet_NaN();
      }
    }
  }

  double final_rate(const std::string& rate) const { return rows.back().rates.at(rate); }

  void write_csv(std::ostream& os) const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "h";
    for (const auto& c : error_columns) out << "," << c;
    for (const auto& r : rate_columns) out << "," << r.first;
    out << "\n";
    for (const auto& row : rows) {
      out << row.h;
      for (const auto& c : error_columns) out << "," << row.errors.at(c);
      for (const auto& r : rate_columns) {
        out << ",";
        auto it = row.rates.find(r.first);
        if (it != row.rates.end()) out << it->second;
      }
      out << "\n";
    }
    os << out.str();
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["metadata"] = metadata;
    j["columns"] = error_columns;
    nlohmann::ordered_json rs = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
      nlohmann::ordered_json r;
      r["n"] = row.n;
      r["h"] = row.h;
      for (const auto& c : error_columns) r[c] = row.errors.at(c);
      for (const auto& [rate, col] : rate_columns) {
        auto it = row.rates.find(rate);
        r[rate] = it == row.rates.end() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(it->second);
      }
      rs.push_back(r);
    }
    j["rows"] = rs;
    return j;
  }
};

// --- discrete maximum principle audit ---------------------------------------

enum class ExtremumKind { minimum, maximum };

inline const char* to_string(ExtremumKind k) { return k == ExtremumKind::minimum ? "minimum" : "maximum"; }

struct ExtremumRecord {
  Index vertex = -1;
  Index cell = -1;
  ExtremumKind kind = ExtremumKind::maximum;
  bool operator==(const ExtremumRecord&) const = default;
};

struct DmpReport {
  /// Strict local discrete extrema at interior vertices, per (vertex, cell) copy.
  std::vector<ExtremumRecord> extrema;
  /// Extrema the sign condition on A^SIP(v, phi_i^K) should have excluded.
  std::vector<ExtremumRecord> violations;
  Index interior_vertices = 0;

  nlohmann::ordered_json to_json() const {
    auto list = [](const std::vector<ExtremumRecord>& v) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (const auto& r : v) a.push_back({{"vertex", r.vertex}, {"cell", r.cell}, {"kind", to_string(r.kind)}});
      return a;
    };
    nlohmann::ordered_json j;
    j["interior_vertices"] = interior_vertices;
    j["strict_extrema"] = list(extrema);
    j["violations"] = list(violations);
    return j;
  }
};

inline constexpr double kStrictnessTol = 1e-12;

/// For each interior vertex x_i and each K in the patch omega_i, s_{i,K} = A^SIP(v, phi_i^K).
/// A strict local discrete maximum (minimum) of v^K at x_i is a violation when
/// s_{i,K'} <= 0 (>= 0) for every K' in omega_i. Strictness compares against all
/// nodal values of the patch at other vertices with threshold kStrictnessTol; copies
/// at x_i itself only need to be matched, not beaten.
inline DmpReport dmp_audit(const DGFunction& v, const AssembledSystem& system) {
  const Mesh& mesh = *system.mesh;
  if (v.num_cells() != mesh.num_cells()) throw std::invalid_argument("dmp_audit: size mismatch");
  const Vector s = system.sipg->apply(v.coefficients());
  DmpReport report;
  for (Index i = 0; i < mesh.num_vertices(); ++i) {
    if (mesh.is_boundary_vertex(i)) continue;
    ++report.interior_vertices;
    const auto& patch = mesh.vertex_patch(i);
    bool all_nonpos = true, all_nonneg = true;
    for (Index k : patch) {
      const double sk = s[dof(k, mesh.local_index(k, i))];
      all_nonpos = all_nonpos && sk <= kStrictnessTol;
      all_nonneg = all_nonneg && sk >= -kStrictnessTol;
    }
    for (Index k : patch) {
      const double val = v(k, mesh.local_index(k, i));
      bool strict_max = true, strict_min = true;
      for (Index kk : patch) {
        for (int j = 0; j < 3; ++j) {
          const double w = v(kk, j);
          if (mesh.cell(kk)[j] == i) {
            strict_max = strict_max && val >= w;
            strict_min = strict_min && val <= w;
          } else {
            strict_max = strict_max && val > w + kStrictnessTol;
            strict_min = strict_min && val < w - kStrictnessTol;
          }
        }
      }
      if (strict_max) {
        report.extrema.push_back({i, k, ExtremumKind::maximum});
        if (all_nonpos) report.violations.push_back({i, k, ExtremumKind::maximum});
      }
      if (strict_min) {
        report.extrema.push_back({i, k, ExtremumKind::minimum});
        if (all_nonneg) report.violations.push_back({i, k, ExtremumKind::minimum});
      }
    }
  }
  return report;
}

}  // namespace dgoc
