#pragma once

// Element-local P1 functions, conforming P1 functions, nodal interpolation,
// point evaluation, quadrature, and transfer between nested meshes.

#include "dgoc/mesh.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>

namespace dgoc {

/// Point callable with optional derivatives. `cell_value`, when set, takes
/// precedence inside quadrature loops so piecewise fields are read on the
/// correct side of an interface.
struct ScalarField {
  std::function<double(const Point&)> value;
  std::function<Point(const Point&)> gradient;
  std::function<Eigen::Matrix2d(const Point&)> hessian;
  std::function<double(Index, const Point&)> cell_value;

  ScalarField() = default;
  explicit ScalarField(std::function<double(const Point&)> f) : value(std::move(f)) {}

  double operator()(const Point& p) const { return value(p); }
  double at(Index cell, const Point& p) const { return cell_value ? cell_value(cell, p) : value(p); }
  bool has_gradient() const { return static_cast<bool>(gradient); }
  bool has_hessian() const { return static_cast<bool>(hessian); }

  static ScalarField constant(double c) {
    ScalarField f([c](const Point&) { return c; });
    f.gradient = [](const Point&) { return Point::Zero().eval(); };
    f.hessian = [](const Point&) { return Eigen::Matrix2d::Zero().eval(); };
    return f;
  }
};

/// Coefficients stored cell-major, corner order matching the cell's vertex triple.
class DGFunction {
 public:
  DGFunction() = default;
  explicit DGFunction(Index num_cells) : coeffs_(Eigen::VectorXd::Zero(3 * num_cells)) {}
  explicit DGFunction(Eigen::VectorXd coeffs) : coeffs_(std::move(coeffs)) {
    if (coeffs_.size() % 3 != 0) throw std::invalid_argument("DGFunction: length not a multiple of 3");
    if (!coeffs_.allFinite()) throw std::invalid_argument("DGFunction: non-finite value");
  }

  Index num_cells() const { return static_cast<Index>(coeffs_.size() / 3); }
  Index size() const { return static_cast<Index>(coeffs_.size()); }
  double& operator()(Index cell, int corner) { return coeffs_[3 * cell + corner]; }
  double operator()(Index cell, int corner) const { return coeffs_[3 * cell + corner]; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }
  Eigen::VectorXd& coefficients() { return coeffs_; }

 private:
  Eigen::VectorXd coeffs_;
};

inline Index dof(Index cell, int corner) { return 3 * cell + corner; }

class ConformingFunction {
 public:
  ConformingFunction() = default;
  explicit ConformingFunction(Eigen::VectorXd values) : values_(std::move(values)) {}
  Index size() const { return static_cast<Index>(values_.size()); }
  double operator[](Index i) const { return values_[i]; }
  const Eigen::VectorXd& values() const { return values_; }

 private:
  Eigen::VectorXd values_;
};

// --- quadrature ------------------------------------------------------------

struct TriangleRule {
  std::array<Eigen::Vector3d, 6> points;  // barycentric
  std::array<double, 6> weights;          // sum to 1; multiply by |K|
};

/// Symmetric 6-point rule, exact for polynomials of degree <= 4.
inline const TriangleRule& triangle_rule() {
  static const TriangleRule rule = [] {
    TriangleRule r;
    const double a1 = 0.44594849091596488632, b1 = 1.0 - 2.0 * a1, w1 = 0.22338158967801146570;
    const double a2 = 0.09157621350977074346, b2 = 1.0 - 2.0 * a2, w2 = 0.10995174365532186764;
    r.points = {Eigen::Vector3d(b1, a1, a1), Eigen::Vector3d(a1, b1, a1), Eigen::Vector3d(a1, a1, b1),
                Eigen::Vector3d(b2, a2, a2), Eigen::Vector3d(a2, b2, a2), Eigen::Vector3d(a2, a2, b2)};
    r.weights = {w1, w1, w1, w2, w2, w2};
    return r;
  }();
  return rule;
}

struct EdgeRule {
  std::array<double, 3> points;   // parameter on [0, 1]
  std::array<double, 3> weights;  // sum to 1; multiply by h_e
};

/// 3-point Gauss-Legendre, exact for degree <= 5.
inline const EdgeRule& edge_rule() {
  static const EdgeRule rule = [] {
    const double s = 0.5 * std::sqrt(3.0 / 5.0);
    return EdgeRule{{0.5 - s, 0.5, 0.5 + s}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
  }();
  return rule;
}

/// Integral of f over cell k with the degree-4 rule.
template <class F>
double integrate_cell(const Mesh& mesh, Index k, F&& f) {
  const auto& rule = triangle_rule();
  double s = 0.0;
  for (int q = 0; q < 6; ++q) s += rule.weights[q] * f(mesh.map_from_barycentric(k, rule.points[q]), rule.points[q]);
  return s * mesh.cell_area(k);
}

// --- interpolation and evaluation -----------------------------------------

inline ConformingFunction interpolate_conforming(const ScalarField& field, const Mesh& mesh) {
  Eigen::VectorXd v(mesh.num_vertices());
  for (Index i = 0; i < mesh.num_vertices(); ++i) v[i] = field(mesh.vertex(i));
  return ConformingFunction(std::move(v));
}

inline DGFunction embed_conforming(const ConformingFunction& gc, const Mesh& mesh) {
  if (gc.size() != mesh.num_vertices()) throw std::invalid_argument("embed_conforming: size mismatch");
  DGFunction v(mesh.num_cells());
  for (Index k = 0; k < mesh.num_cells(); ++k)
    for (int j = 0; j < 3; ++j) v(k, j) = gc[mesh.cell(k)[j]];
  return v;
}

/// Vertex values read from the first cell of each patch.
inline ConformingFunction read_vertex_values(const DGFunction& v, const Mesh& mesh) {
  if (v.num_cells() != mesh.num_cells()) throw std::invalid_argument("read_vertex_values: size mismatch");
  Eigen::VectorXd out(mesh.num_vertices());
  for (Index i = 0; i < mesh.num_vertices(); ++i) {
    const Index k = mesh.vertex_patch(i).front();
    out[i] = v(k, mesh.local_index(k, i));
  }
  return ConformingFunction(std::move(out));
}

inline DGFunction interpolate_dg(const ScalarField& field, const Mesh& mesh) {
  DGFunction v(mesh.num_cells());
  for (Index k = 0; k < mesh.num_cells(); ++k)
    for (int j = 0; j < 3; ++j) v(k, j) = field.at(k, mesh.vertex(mesh.cell(k)[j]));
  return v;
}

inline double evaluate(const DGFunction& v, const Mesh& mesh, Index cell, const Point& p) {
  if (cell < 0 || cell >= mesh.num_cells()) throw std::out_of_range("evaluate: cell index");
  const Eigen::Vector3d l = mesh.barycentric(cell, p);
  if (l.minCoeff() < -1e-12) throw std::domain_error("evaluate: point outside cell");
  return l[0] * v(cell, 0) + l[1] * v(cell, 1) + l[2] * v(cell, 2);
}

inline double evaluate_barycentric(const DGFunction& v, Index cell, const Eigen::Vector3d& l) {
  return l[0] * v(cell, 0) + l[1] * v(cell, 1) + l[2] * v(cell, 2);
}

inline Point cell_gradient(const DGFunction& v, const Mesh& mesh, Index cell) {
  const auto& g = mesh.basis_gradients(cell);
  return v(cell, 0) * g[0] + v(cell, 1) * g[1] + v(cell, 2) * g[2];
}

/// Cellwise view of a DG function (the point callable locates the cell).
inline ScalarField as_field(const DGFunction& v, const Mesh& mesh) {
  auto locator = std::make_shared<CellLocator>(mesh);
  ScalarField f([v, &mesh, locator](const Point& p) {
    const Index k = locator->find(p);
    if (k < 0) throw std::domain_error("as_field: point outside mesh");
    return evaluate_barycentric(v, k, mesh.barycentric(k, p));
  });
  f.cell_value = [v, &mesh](Index k, const Point& p) { return evaluate_barycentric(v, k, mesh.barycentric(k, p)); };
  return f;
}

/// Exact transfer of a coarse DG function onto a nested fine mesh.
inline DGFunction prolongate(const DGFunction& v, const Mesh& coarse, const Mesh& fine) {
  if (v.num_cells() != coarse.num_cells()) throw std::invalid_argument("prolongate: size mismatch");
  CellLocator locator(coarse);
  DGFunction out(fine.num_cells());
  for (Index k = 0; k < fine.num_cells(); ++k) {
    const Index parent = locator.find(fine.centroid(k));
    if (parent < 0) throw std::domain_error("prolongate: fine cell outside coarse mesh");
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector3d l = coarse.barycentric(parent, fine.vertex(fine.cell(k)[j]));
      if (l.minCoeff() < -1e-10) throw std::domain_error("prolongate: meshes are not nested");
      out(k, j) = evaluate_barycentric(v, parent, l);
    }
  }
  return out;
}

}  // namespace dgoc
