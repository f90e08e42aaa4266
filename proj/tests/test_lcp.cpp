#include "dgoc/analysis.hpp"
#include "dgoc/lcp.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dgoc;

namespace {

ObstacleProblem dense_problem(const Eigen::MatrixXd& a, const Vector& b, const Vector& g) {
  return {std::make_shared<const SparseOperator>(SparseMatrix(a.sparseView())), b, g};
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

ObstacleProblem benchmark_like(int n, std::uint64_t seed) {
  const Mesh mesh = build_uniform_mesh(n);
  const AssembledSystem s = make_system(mesh, 10.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Vector z(s.num_dofs());
  for (auto& x : z) x = 5.0 * nd(rng) - 4.0;
  const ScalarField g([](const Point& p) { return 0.02 - (p.x() - 0.5) * (p.x() - 0.5) - (p.y() - 0.5) * (p.y() - 0.5); });
  return {s.sipg, s.mass->apply(z), embed_conforming(interpolate_conforming(g, mesh), mesh).coefficients()};
}

}  // namespace

TEST(Lcp, ScalarUnconstrained) {
  const auto p = dense_problem(Eigen::MatrixXd::Constant(1, 1, 2.0), vec({1.0}), vec({0.0}));
  for (const auto& s : {solve_pdas(p, 1e-12, 50), solve_pgs(p, 1e-12, 1000)}) {
    EXPECT_NEAR(s.u[0], 0.5, 1e-10);
    EXPECT_NEAR(s.zeta[0], 0.0, 1e-10);
    EXPECT_TRUE(s.active_set.empty());
  }
}

TEST(Lcp, ScalarBinding) {
  const auto p = dense_problem(Eigen::MatrixXd::Constant(1, 1, 2.0), vec({-2.0}), vec({0.0}));
  for (const auto& s : {solve_pdas(p, 1e-12, 50), solve_pgs(p, 1e-12, 1000)}) {
    EXPECT_NEAR(s.u[0], 0.0, 1e-10);
    EXPECT_NEAR(s.zeta[0], 2.0, 1e-10);
    ASSERT_EQ(s.active_set.size(), 1u);
    EXPECT_EQ(s.active_set[0], 0);
  }
}

TEST(Lcp, TwoByTwoMatchesEnumeration) {
  const Eigen::MatrixXd a = mat2(2, -1, -1, 2);
  const Vector b = vec({-3.0, 0.0}), g = vec({0.0, 0.0});
  const auto ref = oracle::enumerate_lcp(a, b, g);
  ASSERT_TRUE(ref.has_value());
  EXPECT_LT((ref->u - vec({0.0, 0.0})).norm(), 1e-14);
  EXPECT_LT((ref->zeta - vec({3.0, 0.0})).norm(), 1e-14);
  const auto p = dense_problem(a, b, g);
  const auto pdas = solve_pdas(p, 1e-12, 50);
  const auto pgs = solve_pgs(p, 1e-12, 1000);
  for (const auto* s : {&pdas, &pgs}) {
    EXPECT_LT((s->u - ref->u).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_LT((s->zeta - ref->zeta).lpNorm<Eigen::Infinity>(), 1e-10);
  }
}

TEST(Lcp, DiagonalConvergesInOneSweep) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
  a.diagonal() << 1.0, 2.0, 3.0, 4.0;
  const auto p = dense_problem(a, vec({1.0, -1.0, 3.0, -8.0}), vec({0.0, 0.0, 0.5, 0.0}));
  const auto s = solve_pgs(p, 1e-14, 100);
  EXPECT_EQ(s.iterations, 1);
  EXPECT_LT((s.u - vec({1.0, 0.0, 1.0, 0.0})).norm(), 1e-15);
}

TEST(Lcp, UnconstrainedLimitIsLinearSolve) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd a = oracle::random_spd(40, rng);
  std::normal_distribution<double> nd;
  Vector b(40);
  for (auto& x : b) x = nd(rng);
  const auto p = dense_problem(a, b, Vector::Constant(40, -1e12));
  const Vector direct = a.ldlt().solve(b);
  EXPECT_LT((solve_pgs(p, 1e-12, 100000).u - direct).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_LT((solve_pdas(p, 1e-12, 50).u - direct).lpNorm<Eigen::Infinity>(), 1e-8);
}

TEST(Lcp, RandomProblemsMatchEnumeration) {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 7;
    const Eigen::MatrixXd a = oracle::random_spd(n, rng);
    Vector b(n), g(n);
    for (int i = 0; i < n; ++i) {
      b[i] = nd(rng);
      g[i] = 0.3 * nd(rng);
    }
    const auto ref = oracle::enumerate_lcp(a, b, g);
    ASSERT_TRUE(ref.has_value());
    const auto s = solve_pdas(dense_problem(a, b, g), 1e-12, 100);
    EXPECT_LT((s.u - ref->u).lpNorm<Eigen::Infinity>(), 1e-9) << "trial " << trial;
  }
}

TEST(Lcp, PdasAgreesWithGaussSeidel) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> size(5, 300);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = size(rng);
    const Eigen::MatrixXd a = oracle::random_spd(n, rng);
    Vector b(n), g(n);
    for (int i = 0; i < n; ++i) {
      b[i] = nd(rng);
      g[i] = 0.5 * nd(rng);
    }
    const auto p = dense_problem(a, b, g);
    const auto pdas = solve_pdas(p, 1e-12, 200);
    const auto pgs = solve_pgs(p, 1e-12, 200000);
    EXPECT_LT((pdas.u - pgs.u).lpNorm<Eigen::Infinity>(), 1e-8) << "trial " << trial << " n=" << n;
    EXPECT_LE(pdas.residuals.max(), 1e-10);
  }
}

TEST(Lcp, AssembledProblemAgreement) {
  for (int n : {4, 8, 16}) {
    const auto p = benchmark_like(n, 100 + n);
    const auto pdas = solve_pdas(p, 1e-12, 200);
    const auto pgs = solve_pgs(p, 1e-12, 2000000);
    EXPECT_FALSE(pdas.active_set.empty());
    EXPECT_LT((pdas.u - pgs.u).lpNorm<Eigen::Infinity>(), 1e-8) << "n=" << n;
    // (u - g) .* zeta = 0 and the min-function postcondition
    for (Eigen::Index i = 0; i < pdas.u.size(); ++i) {
      EXPECT_LE(std::abs(std::min(pdas.u[i] - p.obstacle[i], pdas.zeta[i])), 1e-10);
      EXPECT_LE(std::abs((pdas.u[i] - p.obstacle[i]) * pdas.zeta[i]), 1e-10);
    }
  }
}

TEST(Lcp, SinglePassWarmStartTerminates) {
  const auto p = benchmark_like(8, 5);
  const auto cold = solve_pdas(p, 1e-12, 200);
  const Mask warm = cold.active_mask();
  const auto again = solve_pdas(p, 1e-12, 200, nullptr, &warm);
  EXPECT_EQ(again.iterations, 1);
  EXPECT_LT((again.u - cold.u).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(Lcp, FailuresAreExplicit) {
  const auto p = benchmark_like(8, 9);
  try {
    solve_pdas(p, 1e-12, 1);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_EQ(e.last_iterate().size(), p.size());
  }
  try {
    solve_pgs(p, 1e-14, 2);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residuals().max(), 1e-14);
  }
  // indefinite free subsystem
  const auto bad = dense_problem(mat2(1, 2, 2, 1), vec({1.0, 1.0}), vec({-1e9, -1e9}));
  EXPECT_THROW(solve_pdas(bad, 1e-12, 10), SolverError);
  ObstacleProblem mismatched = p;
  mismatched.load = Vector::Zero(3);
  EXPECT_THROW(solve_pdas(mismatched, 1e-12, 10), std::invalid_argument);
}

TEST(Lcp, MultiplierExtraction) {
  // unconstrained solve: zeta_h = 0
  const AssembledSystem s = make_system(build_uniform_mesh(4), 10.0);
  const Vector b = assemble_load(*s.mesh, ScalarField::constant(1.0));
  const Vector u = SpdFactorization(s.sipg->matrix()).solve(b);
  EXPECT_LT(extract_multiplier(u, s, b).coefficients().lpNorm<Eigen::Infinity>(), 1e-10);

  // one cell, |K| = 1/2: zeta_h = 6 r
  const Mesh one({Point(0, 0), Point(1, 0), Point(0, 1)}, {{0, 1, 2}});
  const AssembledSystem s1 = make_system(one, 10.0);
  const Vector u1 = Vector::Zero(3);
  const Vector r = vec({0.0, -0.25, 0.0});  // residual A u - b = 0.25 at corner 1
  EXPECT_LT((extract_multiplier(u1, s1, r).coefficients() - vec({0.0, 1.5, 0.0})).norm(), 1e-15);
}

TEST(Lcp, MultiplierRecoversResidualFunctional) {
  const auto p = benchmark_like(8, 13);
  const AssembledSystem s = make_system(build_uniform_mesh(8), 10.0);
  const auto sol = solve_pdas(p, 1e-12, 200);
  const DGFunction zh = extract_multiplier(sol.u, s, p.load);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    Vector phi(s.num_dofs());
    for (auto& x : phi) x = nd(rng);
    const double lhs = lumped_inner(zh, DGFunction(phi), *s.mesh);
    const double rhs = s.sipg->bilinear(sol.u, phi) - p.load.dot(phi);
    EXPECT_NEAR(lhs, rhs, 1e-10 * (1.0 + std::abs(rhs)));
  }
}

TEST(Lcp, SolutionMapLipschitz) {
  // ||S(z1) - S(z2)||_h <= (1 / c_h) ||z1 - z2||_{L2}
  std::mt19937_64 rng(31);
  std::normal_distribution<double> nd;
  const ScalarField g([](const Point& p) { return 0.05 - (p.x() - 0.5) * (p.x() - 0.5) - (p.y() - 0.5) * (p.y() - 0.5); });
  for (int n : {4, 8}) {
    const AssembledSystem s = make_system(build_uniform_mesh(n), 10.0);
    const double c = measure_coercivity(s);
    const SparseOperator gram = assemble_energy_gram(*s.mesh);
    const Vector gv = embed_conforming(interpolate_conforming(g, *s.mesh), *s.mesh).coefficients();
    for (int t = 0; t < 10; ++t) {
      Vector z1(s.num_dofs()), z2(s.num_dofs());
      for (auto& x : z1) x = 3.0 * nd(rng);
      for (auto& x : z2) x = 3.0 * nd(rng);
      const Vector u1 = solve_pdas({s.sipg, s.mass->apply(z1), gv}, 1e-12, 200).u;
      const Vector u2 = solve_pdas({s.sipg, s.mass->apply(z2), gv}, 1e-12, 200).u;
      const Vector du = u1 - u2, dz = z1 - z2;
      EXPECT_LE(std::sqrt(gram.bilinear(du, du)), std::sqrt(s.mass->bilinear(dz, dz)) / c);
    }
  }
}

TEST(ModifiableCholesky, MatchesFreshFactorizationOnRandomMasks) {
  const AssembledSystem s = make_system(build_uniform_mesh(12), 10.0);
  const int n = s.num_dofs();
  SubsystemSolver solver(s.sipg);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mask free(n, 1);
  for (int round = 0; round < 25; ++round) {
    // small perturbations most rounds, occasionally a large change that triggers refactoring
    const double flip = round % 6 == 5 ? 0.4 : 0.01;
    for (int i = 0; i < n; ++i)
      if (unit(rng) < flip) free[i] = !free[i];
    Vector rhs(n), fixed(n);
    for (int i = 0; i < n; ++i) {
      rhs[i] = nd(rng);
      fixed[i] = nd(rng);
    }
    const Vector x = solver.solve(free, rhs, fixed);
    // reference: dense solve of the reduced system
    std::vector<int> map;
    const SparseMatrix aff = principal_submatrix(s.sipg->matrix(), free, map);
    Vector xc = Vector::Zero(n);
    for (int i = 0; i < n; ++i)
      if (!free[i]) xc[i] = fixed[i];
    const Vector r = rhs - s.sipg->apply(xc);
    Vector rf(aff.rows());
    for (int i = 0; i < n; ++i)
      if (free[i]) rf[map[i]] = r[i];
    const Vector xf = Eigen::MatrixXd(aff).ldlt().solve(rf);
    double err = 0.0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(x[i] - (free[i] ? xf[map[i]] : fixed[i])));
    EXPECT_LT(err, 1e-10) << "round " << round;
  }
  EXPECT_GE(solver.factorizations(), 2u);
  EXPECT_GT(solver.modifications(), 0u);
}
