#pragma once

// SIPG operator, block mass operator, load vectors and the lumped inner product.

#include "dgoc/dgspace.hpp"
#include "dgoc/linalg.hpp"
#include "dgoc/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <array>
#include <iostream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dgoc {

namespace detail {

/// Values of the three local basis functions of `cell` at the edge quadrature points.
inline std::array<Eigen::Vector3d, 3> edge_basis_values(const Mesh& mesh, const Edge& e, Index cell) {
  const auto& rule = edge_rule();
  const Point& a = mesh.vertex(e.vertices[0]);
  const Point& b = mesh.vertex(e.vertices[1]);
  std::array<Eigen::Vector3d, 3> out;
  for (int q = 0; q < 3; ++q) out[q] = mesh.barycentric(cell, a + rule.points[q] * (b - a));
  return out;
}

struct EdgeSide {
  Index cell;
  double sign;  // +1 on K+ (or boundary), -1 on K-
  std::array<Eigen::Vector3d, 3> phi;
};

inline std::vector<EdgeSide> edge_sides(const Mesh& mesh, const Edge& e) {
  std::vector<EdgeSide> sides;
  sides.push_back({e.plus_cell, 1.0, edge_basis_values(mesh, e, e.plus_cell)});
  if (!e.is_boundary()) sides.push_back({e.minus_cell, -1.0, edge_basis_values(mesh, e, e.minus_cell)});
  return sides;
}

/// Face contributions: consistency/symmetry weight `consistency` (1 for SIPG, 0 for the
/// jump-only energy Gram) and penalty `penalty` times h_e^{-1}, optionally scaled per edge.
inline void add_face_terms(const Mesh& mesh, double consistency, double penalty,
                           std::vector<Eigen::Triplet<double>>& t, const std::vector<double>* edge_scale = nullptr) {
  const auto& rule = edge_rule();
  for (Index ei = 0; ei < mesh.num_edges(); ++ei) {
    const Edge& e = mesh.edges()[ei];
    const double pen = edge_scale ? penalty * (*edge_scale)[ei] : penalty;
    const auto sides = edge_sides(mesh, e);
    const double avg = e.is_boundary() ? 1.0 : 0.5;
    const double h = e.length;
    for (const auto& r : sides) {
      for (const auto& c : sides) {
        const auto& gr = mesh.basis_gradients(r.cell);
        const auto& gc = mesh.basis_gradients(c.cell);
        for (int i = 0; i < 3; ++i) {
          double int_r = 0.0;
          for (int q = 0; q < 3; ++q) int_r += rule.weights[q] * r.phi[q][i];
          int_r *= h;
          for (int j = 0; j < 3; ++j) {
            double int_c = 0.0, int_rc = 0.0;
            for (int q = 0; q < 3; ++q) {
              int_c += rule.weights[q] * c.phi[q][j];
              int_rc += rule.weights[q] * r.phi[q][i] * c.phi[q][j];
            }
            int_c *= h;
            int_rc *= h;
            double v = pen / h * r.sign * c.sign * int_rc;
            if (consistency != 0.0) {
              v -= consistency * avg * gc[j].dot(e.normal) * r.sign * int_r;
              v -= consistency * avg * gr[i].dot(e.normal) * c.sign * int_c;
            }
            t.emplace_back(dof(r.cell, i), dof(c.cell, j), v);
          }
        }
      }
    }
  }
}

inline void add_volume_stiffness(const Mesh& mesh, std::vector<Eigen::Triplet<double>>& t) {
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const auto& g = mesh.basis_gradients(k);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.emplace_back(dof(k, i), dof(k, j), mesh.cell_area(k) * g[i].dot(g[j]));
  }
}

}  // namespace detail

/// A^SIP = a_h + b_h: broken stiffness, consistency and symmetry face terms, and
/// the penalty eta/h_e on every edge (boundary edges carry the Dirichlet condition).
inline SparseOperator assemble_sipg(const Mesh& mesh, double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("assemble_sipg: eta must be positive");
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(9 * static_cast<std::size_t>(mesh.num_cells()) + 36 * static_cast<std::size_t>(mesh.num_edges()));
  detail::add_volume_stiffness(mesh, t);
  detail::add_face_terms(mesh, 1.0, eta, t);
  return SparseOperator::from_triplets(mesh.num_dofs(), t);
}

/// Gram matrix of ||.||_h: broken H1 seminorm plus h_e^{-1}-weighted jumps.
/// `edge_scale`, when given, multiplies the jump weight of each edge.
inline SparseOperator assemble_energy_gram(const Mesh& mesh, const std::vector<double>* edge_scale = nullptr) {
  if (edge_scale && static_cast<Index>(edge_scale->size()) != mesh.num_edges())
    throw std::invalid_argument("assemble_energy_gram: one scale per edge expected");
  std::vector<Eigen::Triplet<double>> t;
  detail::add_volume_stiffness(mesh, t);
  detail::add_face_terms(mesh, 0.0, 1.0, t, edge_scale);
  return SparseOperator::from_triplets(mesh.num_dofs(), t);
}

/// Block diagonal, (|K|/12) [[2,1,1],[1,2,1],[1,1,2]] per cell.
inline SparseOperator assemble_mass(const Mesh& mesh, const Mask* cells = nullptr) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(9 * static_cast<std::size_t>(mesh.num_cells()));
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    if (cells && !(*cells)[k]) continue;
    const double s = mesh.cell_area(k) / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) t.emplace_back(dof(k, i), dof(k, j), i == j ? 2.0 * s : s);
  }
  return SparseOperator::from_triplets(mesh.num_dofs(), t);
}

/// (f, phi_q^K) for every (cell, corner); optionally restricted to a cell subset.
inline Vector assemble_load(const Mesh& mesh, const ScalarField& f, const Mask* cells = nullptr) {
  Vector b = Vector::Zero(mesh.num_dofs());
  const auto& rule = triangle_rule();
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    if (cells && !(*cells)[k]) continue;
    const double area = mesh.cell_area(k);
    for (int q = 0; q < 6; ++q) {
      const double fq = f.at(k, mesh.map_from_barycentric(k, rule.points[q])) * rule.weights[q] * area;
      for (int j = 0; j < 3; ++j) b[dof(k, j)] += fq * rule.points[q][j];
    }
  }
  return b;
}

/// Right-hand side terms produced by nonzero Dirichlet data in the SIPG form.
inline Vector assemble_dirichlet_load(const Mesh& mesh, const ScalarField& gd, double eta) {
  Vector b = Vector::Zero(mesh.num_dofs());
  const auto& rule = edge_rule();
  for (const auto& e : mesh.edges()) {
    if (!e.is_boundary()) continue;
    const Index k = e.plus_cell;
    const auto phi = detail::edge_basis_values(mesh, e, k);
    const auto& g = mesh.basis_gradients(k);
    const Point& a = mesh.vertex(e.vertices[0]);
    const Point& c = mesh.vertex(e.vertices[1]);
    for (int q = 0; q < 3; ++q) {
      const double wq = rule.weights[q] * e.length * gd.at(k, a + rule.points[q] * (c - a));
      for (int j = 0; j < 3; ++j) b[dof(k, j)] += wq * (eta / e.length * phi[q][j] - g[j].dot(e.normal));
    }
  }
  return b;
}

/// |K|/(d+1) for each (cell, corner).
inline Vector lumped_weights(const Mesh& mesh) {
  Vector w(mesh.num_dofs());
  for (Index k = 0; k < mesh.num_cells(); ++k)
    for (int j = 0; j < 3; ++j) w[dof(k, j)] = mesh.cell_area(k) / (kDim + 1);
  return w;
}

/// <v, w>_h = sum_K |K|/(d+1) sum_{p in V_K} v(p) w(p).
inline double lumped_inner(const DGFunction& v, const DGFunction& w, const Mesh& mesh) {
  if (v.num_cells() != mesh.num_cells() || w.num_cells() != mesh.num_cells())
    throw std::invalid_argument("lumped_inner: size mismatch");
  return (lumped_weights(mesh).array() * v.coefficients().array() * w.coefficients().array()).sum();
}

struct AssembledSystem {
  std::shared_ptr<const Mesh> mesh;
  double eta = 10.0;
  std::shared_ptr<const SparseOperator> sipg;
  std::shared_ptr<const SparseOperator> mass;
  Vector weights;
  /// Set when the SPD check ran at assembly time.
  std::optional<bool> spd_verified;

  Index num_dofs() const { return mesh->num_dofs(); }
};

inline constexpr Index kSpdCheckLimit = 10000;

/// Assembles the system; operators up to kSpdCheckLimit unknowns are test-factorized
/// and a warning is printed when the penalty is too small.
inline AssembledSystem make_system(std::shared_ptr<const Mesh> mesh, double eta = 10.0) {
  AssembledSystem s;
  s.eta = eta;
  s.sipg = std::make_shared<const SparseOperator>(assemble_sipg(*mesh, eta));
  s.mass = std::make_shared<const SparseOperator>(assemble_mass(*mesh));
  s.weights = lumped_weights(*mesh);
  if (mesh->num_dofs() <= kSpdCheckLimit) {
    s.spd_verified = is_positive_definite(s.sipg->matrix());
    if (!*s.spd_verified)
      std::cerr << "warning: SIPG operator is not positive definite for eta=" << eta << "; increase eta\n";
  }
  s.mesh = std::move(mesh);
  return s;
}

inline AssembledSystem make_system(const Mesh& mesh, double eta = 10.0) {
  return make_system(std::make_shared<const Mesh>(mesh), eta);
}

/// Smallest c with A^SIP(v, v) >= c ||v||_h^2, by a dense generalized eigensolve.
inline double measure_coercivity(const AssembledSystem& s, Index max_dofs = 4000) {
  if (s.num_dofs() > max_dofs) throw std::invalid_argument("measure_coercivity: system too large for dense solve");
  const Eigen::MatrixXd a = Eigen::MatrixXd(s.sipg->matrix());
  const Eigen::MatrixXd h = Eigen::MatrixXd(assemble_energy_gram(*s.mesh).matrix());
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(a, h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("measure_coercivity: eigensolver failed");
  return es.eigenvalues().minCoeff();
}

}  // namespace dgoc
