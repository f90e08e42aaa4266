#pragma once

// Sparse operators and SPD factorizations (CHOLMOD supernodal Cholesky behind
// Eigen's wrapper), plus a small cache for principal-subsystem solves.

#include <Eigen/CholmodSupport>
#include <cholmod.h>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgoc {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vector = Eigen::VectorXd;
using Mask = std::vector<char>;

/// Square sparse operator, compressed, sorted, duplicates merged, and with
/// entries below 1e-15 in magnitude dropped.
class SparseOperator {
 public:
  SparseOperator() = default;
  explicit SparseOperator(SparseMatrix m) : matrix_(std::move(m)) {
    if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("SparseOperator: matrix not square");
    matrix_.prune([](int, int, double v) { return std::abs(v) > 1e-15; });
    matrix_.makeCompressed();
  }

  static SparseOperator from_triplets(int n, const std::vector<Eigen::Triplet<double>>& t) {
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    return SparseOperator(std::move(m));
  }

  int dimension() const { return static_cast<int>(matrix_.rows()); }
  const SparseMatrix& matrix() const { return matrix_; }
  Vector apply(const Vector& v) const {
    if (v.size() != matrix_.cols()) throw std::invalid_argument("SparseOperator::apply: size mismatch");
    return matrix_ * v;
  }
  double coeff(int i, int j) const { return matrix_.coeff(i, j); }
  double bilinear(const Vector& v, const Vector& w) const { return v.dot(matrix_ * w); }

  double max_asymmetry() const {
    SparseMatrix d = SparseMatrix(matrix_.transpose()) - matrix_;
    double m = 0.0;
    for (int k = 0; k < d.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  }

 private:
  SparseMatrix matrix_;
};

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Supernodal CHOLMOD delegates dense blocks to LAPACK; some BLAS builds return wrong
/// blocked Cholesky factors. Factor a 2D five-point Laplacian large enough to form big
/// supernodes and check the solve.
inline bool supernodal_self_test() {
  const int m = 48, n = m * m;
  std::vector<Eigen::Triplet<double>> t;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const int k = j * m + i;
      t.emplace_back(k, k, 4.0);
      if (i > 0) t.emplace_back(k, k - 1, -1.0);
      if (i + 1 < m) t.emplace_back(k, k + 1, -1.0);
      if (j > 0) t.emplace_back(k, k - m, -1.0);
      if (j + 1 < m) t.emplace_back(k, k + m, -1.0);
    }
  }
  SparseMatrix a(n, n);
  a.setFromTriplets(t.begin(), t.end());
  Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower> solver;
  solver.cholmod().print = 0;
  solver.compute(a);
  if (solver.info() != Eigen::Success) return false;
  const Vector b = Vector::LinSpaced(n, 1.0, 2.0);
  const Vector x = solver.solve(b);
  return solver.info() == Eigen::Success && (a * x - b).norm() <= 1e-10 * b.norm();
}

}  // namespace detail

/// True when the supernodal factorization is usable on this machine (checked once).
inline bool supernodal_available() {
  static const bool ok = detail::supernodal_self_test();
  return ok;
}

/// Cholesky factorization of an SPD matrix: CHOLMOD supernodal when the LAPACK
/// it relies on passes the self test, CHOLMOD simplicial otherwise.
class SpdFactorization {
 public:
  explicit SpdFactorization(const SparseMatrix& a) {
    if (supernodal_available()) {
      supernodal_ = std::make_unique<Supernodal>();
      factor(*supernodal_, a);
    } else {
      simplicial_ = std::make_unique<Simplicial>();
      factor(*simplicial_, a);
    }
  }
  Vector solve(const Vector& b) const {
    Vector x = supernodal_ ? Vector(supernodal_->solve(b)) : Vector(simplicial_->solve(b));
    if ((supernodal_ ? supernodal_->info() : simplicial_->info()) != Eigen::Success)
      throw FactorizationError("Cholesky solve failed");
    return x;
  }

 private:
  using Supernodal = Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower>;
  using Simplicial = Eigen::CholmodSimplicialLLT<SparseMatrix, Eigen::Lower>;

  template <class S>
  static void factor(S& s, const SparseMatrix& a) {
    s.cholmod().print = 0;
    s.compute(a);
    if (s.info() != Eigen::Success)
      throw FactorizationError("Cholesky factorization failed: matrix is not positive definite");
  }

  std::unique_ptr<Supernodal> supernodal_;
  std::unique_ptr<Simplicial> simplicial_;
};

inline bool is_positive_definite(const SparseMatrix& a) {
  try {
    SpdFactorization f(a);
    return true;
  } catch (const FactorizationError&) {
    return false;
  }
}

/// Principal submatrix A[free, free]; `map` receives the compressed position of each free index (-1 otherwise).
inline SparseMatrix principal_submatrix(const SparseMatrix& a, const Mask& free, std::vector<int>& map) {
  const int n = static_cast<int>(a.rows());
  map.assign(n, -1);
  int m = 0;
  for (int i = 0; i < n; ++i)
    if (free[i]) map[i] = m++;
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros()));
  for (int j = 0; j < n; ++j) {
    if (!free[j]) continue;
    for (SparseMatrix::InnerIterator it(a, j); it; ++it)
      if (free[it.row()]) t.emplace_back(map[it.row()], map[j], it.value());
  }
  SparseMatrix s(m, m);
  s.setFromTriplets(t.begin(), t.end());
  return s;
}

/// Simplicial LDL' factorization of the matrix A with the rows and columns of a
/// fixed index set replaced by identity rows, updated in place by CHOLMOD row
/// deletions and additions when the fixed set changes.
class ModifiableCholesky {
 public:
  ModifiableCholesky(std::shared_ptr<const SparseOperator> op, const Mask& free) : op_(std::move(op)) {
    if (static_cast<int>(free.size()) != op_->dimension()) throw std::invalid_argument("ModifiableCholesky: mask size");
    cholmod_start(&common_);
    common_.print = 0;
    common_.supernodal = CHOLMOD_SIMPLICIAL;
    common_.final_ll = 0;
    try {
      refactor(free);
    } catch (...) {
      if (factor_) cholmod_free_factor(&factor_, &common_);
      cholmod_finish(&common_);
      throw;
    }
  }
  ModifiableCholesky(const ModifiableCholesky&) = delete;
  ModifiableCholesky& operator=(const ModifiableCholesky&) = delete;
  ~ModifiableCholesky() {
    if (factor_) cholmod_free_factor(&factor_, &common_);
    cholmod_finish(&common_);
  }

  int dimension() const { return op_->dimension(); }
  const Mask& free_set() const { return free_; }
  std::size_t factorizations() const { return factorizations_; }
  std::size_t modifications() const { return modifications_; }

  /// Brings the factor to the new free set, refactorizing from scratch when the change is large.
  void set_free(const Mask& free) {
    const int n = dimension();
    std::vector<int> leave, enter;
    for (int i = 0; i < n; ++i) {
      if (free_[i] && !free[i]) leave.push_back(i);
      if (!free_[i] && free[i]) enter.push_back(i);
    }
    if (valid_ && leave.empty() && enter.empty()) return;
    if (!valid_ || leave.size() + enter.size() > refactor_threshold() ||
        modified_since_refactor_ > 8 * refactor_threshold()) {
      refactor(free);
      return;
    }
    const int* perm = static_cast<const int*>(factor_->Perm);
    std::vector<int> pinv(n);
    for (int k = 0; k < n; ++k) pinv[perm[k]] = k;
    for (int i : leave) {
      if (!cholmod_rowdel(static_cast<std::size_t>(pinv[i]), nullptr, factor_, &common_)) {
        valid_ = false;
        throw FactorizationError("CHOLMOD row deletion failed");
      }
      free_[i] = 0;
    }
    const SparseMatrix& a = op_->matrix();
    for (int i : enter) {
      std::vector<std::pair<int, double>> col;
      for (SparseMatrix::InnerIterator it(a, i); it; ++it)
        if (it.row() == i || free_[it.row()]) col.emplace_back(pinv[it.row()], it.value());
      std::sort(col.begin(), col.end());
      cholmod_sparse* r = cholmod_allocate_sparse(n, 1, col.size(), 1, 1, 0, CHOLMOD_REAL, &common_);
      if (!r) throw FactorizationError("CHOLMOD allocation failed");
      auto* rp = static_cast<int*>(r->p);
      auto* ri = static_cast<int*>(r->i);
      auto* rx = static_cast<double*>(r->x);
      rp[0] = 0;
      rp[1] = static_cast<int>(col.size());
      for (std::size_t q = 0; q < col.size(); ++q) {
        ri[q] = col[q].first;
        rx[q] = col[q].second;
      }
      const int ok = cholmod_rowadd(static_cast<std::size_t>(pinv[i]), r, factor_, &common_);
      cholmod_free_sparse(&r, &common_);
      if (!ok || common_.status == CHOLMOD_NOT_POSDEF || !(diagonal(pinv[i]) > 0.0)) {
        valid_ = false;
        throw FactorizationError("singular or indefinite constrained subsystem (is the penalty eta large enough?)");
      }
      free_[i] = 1;
    }
    modifications_ += leave.size() + enter.size();
    modified_since_refactor_ += leave.size() + enter.size();
  }

  /// Solves the modified system: rows in the fixed set return b unchanged.
  Vector solve(const Vector& b) {
    const int n = dimension();
    cholmod_dense bd;
    bd.nrow = n;
    bd.ncol = 1;
    bd.nzmax = n;
    bd.d = n;
    bd.x = const_cast<double*>(b.data());
    bd.z = nullptr;
    bd.xtype = CHOLMOD_REAL;
    bd.dtype = CHOLMOD_DOUBLE;
    cholmod_dense* x = cholmod_solve(CHOLMOD_A, factor_, &bd, &common_);
    if (!x) throw FactorizationError("CHOLMOD solve failed");
    Vector out = Eigen::Map<const Vector>(static_cast<const double*>(x->x), n);
    cholmod_free_dense(&x, &common_);
    return out;
  }

 private:
  std::size_t refactor_threshold() const { return std::max<std::size_t>(64, static_cast<std::size_t>(dimension()) / 50); }

  double diagonal(int k) const {
    const auto* lp = static_cast<const int*>(factor_->p);
    return static_cast<const double*>(factor_->x)[lp[k]];
  }

  void refactor(const Mask& free) {
    valid_ = false;
    const SparseMatrix& a = op_->matrix();
    const int n = dimension();
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(a.nonZeros()));
    for (int j = 0; j < n; ++j) {
      if (!free[j]) {
        t.emplace_back(j, j, 1.0);
        continue;
      }
      for (SparseMatrix::InnerIterator it(a, j); it; ++it)
        if (free[it.row()]) t.emplace_back(it.row(), j, it.value());
    }
    // Analyse the full pattern so later additions always fit.
    SparseMatrix m(n, n);
    m.setFromTriplets(t.begin(), t.end());
    if (factor_) cholmod_free_factor(&factor_, &common_);
    cholmod_sparse pattern = Eigen::viewAsCholmod(a.selfadjointView<Eigen::Lower>());
    factor_ = cholmod_analyze(&pattern, &common_);
    if (!factor_) throw FactorizationError("CHOLMOD analysis failed");
    const SparseMatrix& mc = m;
    cholmod_sparse values = Eigen::viewAsCholmod(mc.selfadjointView<Eigen::Lower>());
    cholmod_factorize(&values, factor_, &common_);
    if (common_.status == CHOLMOD_NOT_POSDEF || factor_->minor < factor_->n)
      throw FactorizationError("singular or indefinite constrained subsystem (is the penalty eta large enough?)");
    if (common_.status < CHOLMOD_OK) throw FactorizationError("CHOLMOD factorization failed");
    // LDL' does not stop at negative pivots, so definiteness is read off D.
    for (int k = 0; k < n; ++k)
      if (!(diagonal(k) > 0.0))
        throw FactorizationError("singular or indefinite constrained subsystem (is the penalty eta large enough?)");
    free_ = free;
    valid_ = true;
    ++factorizations_;
    modified_since_refactor_ = 0;
  }

  std::shared_ptr<const SparseOperator> op_;
  cholmod_common common_;
  cholmod_factor* factor_ = nullptr;
  Mask free_;
  /// False after a failed update; the next set_free starts from scratch.
  bool valid_ = false;
  std::size_t factorizations_ = 0;
  std::size_t modifications_ = 0;
  std::size_t modified_since_refactor_ = 0;
};

/// Solves A x = rhs on the free index set with x prescribed elsewhere, backed by a
/// single factorization that follows the free set through row modifications, with
/// one step of iterative refinement per solve.
class SubsystemSolver {
 public:
  explicit SubsystemSolver(std::shared_ptr<const SparseOperator> op) : op_(std::move(op)) {}

  const SparseOperator& op() const { return *op_; }

  Vector solve(const Mask& free, const Vector& rhs, const Vector& fixed) {
    const SparseMatrix& a = op_->matrix();
    const int n = static_cast<int>(a.rows());
    if (static_cast<int>(free.size()) != n || rhs.size() != n || fixed.size() != n)
      throw std::invalid_argument("SubsystemSolver: size mismatch");
    Vector x = fixed;
    bool any = false;
    for (int i = 0; i < n; ++i) {
      if (free[i]) {
        x[i] = 0.0;
        any = true;
      }
    }
    if (!any) return x;
    if (!chol_)
      chol_ = std::make_unique<ModifiableCholesky>(op_, free);
    else
      chol_->set_free(free);
    // rhs_F - A_{F,C} x_C on free rows, x_C on fixed rows.
    auto residual = [&](const Vector& y) {
      Vector r = y;
      const Vector ay = a * y;
      for (int i = 0; i < n; ++i) r[i] = free[i] ? rhs[i] - ay[i] : 0.0;
      return r;
    };
    Vector b = residual(x);
    for (int i = 0; i < n; ++i)
      if (!free[i]) b[i] = x[i];
    x = chol_->solve(b);
    const Vector c = chol_->solve(residual(x));
    for (int i = 0; i < n; ++i) x[i] = free[i] ? x[i] + c[i] : fixed[i];
    return x;
  }

  std::size_t factorizations() const { return chol_ ? chol_->factorizations() : 0; }
  std::size_t modifications() const { return chol_ ? chol_->modifications() : 0; }

 private:
  std::shared_ptr<const SparseOperator> op_;
  std::unique_ptr<ModifiableCholesky> chol_;
};

}  // namespace dgoc
