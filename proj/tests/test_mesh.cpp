#include "dgoc/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace dgoc;

namespace {

int count_kind(const Mesh& m, EdgeKind k) {
  int c = 0;
  for (const auto& e : m.edges()) c += e.kind == k;
  return c;
}

}  // namespace

TEST(Mesh, SingleSquareCounts) {
  const Mesh m = build_uniform_mesh(1);
  EXPECT_EQ(m.num_vertices(), 4);
  EXPECT_EQ(m.num_cells(), 2);
  EXPECT_EQ(m.num_edges(), 5);
  EXPECT_EQ(count_kind(m, EdgeKind::boundary), 4);
  EXPECT_EQ(count_kind(m, EdgeKind::interior), 1);
}

TEST(Mesh, TwoByTwoCountsAndEuler) {
  const Mesh m = build_uniform_mesh(2);
  EXPECT_EQ(m.num_vertices(), 9);
  EXPECT_EQ(m.num_cells(), 8);
  EXPECT_EQ(m.num_edges(), 16);
  EXPECT_EQ(count_kind(m, EdgeKind::boundary), 8);
  EXPECT_EQ(count_kind(m, EdgeKind::interior), 8);
  EXPECT_EQ(m.num_vertices() - m.num_edges() + m.num_cells(), 1);
  EXPECT_NO_THROW(m.check_invariants());
}

TEST(Mesh, CongruentCellDiameters) {
  const Mesh m = build_uniform_mesh(4);
  for (Index k = 0; k < m.num_cells(); ++k) EXPECT_NEAR(m.cell_diameter(k), std::sqrt(2.0) / 4.0, 1e-15);
  EXPECT_NEAR(m.max_diameter(), std::sqrt(2.0) / 4.0, 1e-15);
}

TEST(Mesh, RejectsBadInput) {
  EXPECT_THROW(build_uniform_mesh(0), std::invalid_argument);
  EXPECT_THROW(build_uniform_mesh(-3), std::invalid_argument);
  EXPECT_THROW(build_uniform_mesh(2, Rectangle{0, 0, 0, 1}), std::invalid_argument);
  EXPECT_THROW(build_uniform_mesh(2, Rectangle{0, 1, 1, 1}), std::invalid_argument);
}

TEST(Mesh, NormalsAndLengths) {
  for (int n : {1, 3, 8}) {
    const Mesh m = build_uniform_mesh(n, Rectangle{-1.0, 0.5, 2.0, 1.5});
    for (const auto& e : m.edges()) {
      EXPECT_NEAR(e.normal.norm(), 1.0, 1e-14);
      const Point a = m.vertex(e.vertices[0]), b = m.vertex(e.vertices[1]);
      EXPECT_NEAR(e.length, (a - b).norm(), 1e-15);
      EXPECT_NEAR(e.normal.dot(b - a), 0.0, 1e-14);
      // n+ points out of K+ (away from its centroid)
      const Point mid = 0.5 * (a + b);
      EXPECT_GT(e.normal.dot(mid - m.centroid(e.plus_cell)), 0.0);
      if (!e.is_boundary()) {
        EXPECT_LT(e.normal.dot(mid - m.centroid(e.minus_cell)), 0.0);
      }
    }
  }
}

TEST(Mesh, AreaSumAndPatches) {
  const Rectangle r{0.0, 0.0, 3.0, 2.0};
  const Mesh m = build_uniform_mesh(7, r);
  EXPECT_NEAR(m.total_area(), r.area(), 1e-12 * r.area());
  for (Index i = 0; i < m.num_vertices(); ++i)
    for (Index k : m.vertex_patch(i)) EXPECT_GE(m.local_index(k, i), 0);
  // interior vertices of a Friedrichs-Keller mesh see six cells
  Index interior = 0;
  for (Index i = 0; i < m.num_vertices(); ++i)
    if (!m.is_boundary_vertex(i)) {
      ++interior;
      EXPECT_EQ(m.vertex_patch(i).size(), 6u);
    }
  EXPECT_EQ(interior, 6 * 6);
  EXPECT_NO_THROW(m.check_rectangle_boundary(r));
}

TEST(Mesh, DiagonalOrientationFixed) {
  // every square is split along the lower-left to upper-right diagonal
  const Mesh m = build_uniform_mesh(3);
  std::set<std::pair<Index, Index>> diagonals;
  for (const auto& e : m.edges()) {
    const Point d = m.vertex(e.vertices[1]) - m.vertex(e.vertices[0]);
    if (std::abs(d.x()) > 1e-14 && std::abs(d.y()) > 1e-14) {
      EXPECT_GT(d.x() * d.y(), 0.0);
      diagonals.insert(std::minmax(e.vertices[0], e.vertices[1]));
    }
  }
  EXPECT_EQ(diagonals.size(), 9u);
}

TEST(Mesh, RefinementQuadruplesAndKeepsInvariants) {
  const Mesh coarse = build_uniform_mesh(1);
  const Mesh fine = refine_uniform(coarse);
  EXPECT_EQ(fine.num_cells(), 8);
  EXPECT_NO_THROW(fine.check_invariants());
  const Mesh fine2 = refine_uniform(build_uniform_mesh(2));
  EXPECT_EQ(fine2.num_cells(), 32);
  EXPECT_NO_THROW(fine2.check_invariants());
  EXPECT_NO_THROW(fine2.check_rectangle_boundary(kUnitSquare));
  EXPECT_NEAR(fine2.total_area(), 1.0, 1e-12);
}

TEST(Mesh, DumpRoundTrip) {
  const Mesh m = build_uniform_mesh(3, Rectangle{0.0, 0.0, 1.0, 2.0});
  std::stringstream ss;
  write_mesh(ss, m);
  const std::string first = ss.str();
  EXPECT_EQ(first.rfind("vertices 16 cells 18 edges 33\n", 0), 0u);
  const Mesh back = read_mesh(ss);
  EXPECT_EQ(back.num_vertices(), m.num_vertices());
  EXPECT_EQ(back.num_cells(), m.num_cells());
  EXPECT_EQ(back.num_edges(), m.num_edges());
  for (Index i = 0; i < m.num_vertices(); ++i) EXPECT_EQ(back.vertex(i), m.vertex(i));
  std::stringstream again;
  write_mesh(again, back);
  EXPECT_EQ(again.str(), first);
}

TEST(Mesh, DumpRejectsGarbage) {
  std::stringstream bad("vertices 3 cells 1\n");
  EXPECT_THROW(read_mesh(bad), std::runtime_error);
  std::stringstream wrong_edges("vertices 3 cells 1 edges 3\nv 0 0\nv 1 0\nv 0 1\nc 0 1 2\ne 0 1 boundary\ne 1 2 interior\ne 0 2 boundary\n");
  EXPECT_THROW(read_mesh(wrong_edges), std::runtime_error);
}

TEST(Mesh, CellLocatorFindsContainingCell) {
  const Mesh m = build_uniform_mesh(5);
  const CellLocator loc(m);
  for (Index k = 0; k < m.num_cells(); ++k) EXPECT_EQ(loc.find(m.centroid(k)), k);
  EXPECT_LT(loc.find(Point(1.5, 0.5)), 0);
}

TEST(Mesh, BarycentricRoundTrip) {
  const Mesh m = build_uniform_mesh(2);
  const Eigen::Vector3d l(0.2, 0.3, 0.5);
  for (Index k = 0; k < m.num_cells(); ++k) {
    const Point p = m.map_from_barycentric(k, l);
    EXPECT_LT((m.barycentric(k, p) - l).norm(), 1e-14);
  }
}
