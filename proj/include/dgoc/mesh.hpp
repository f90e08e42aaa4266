#pragma once

// Conforming triangulations of rectangles: construction, midpoint refinement,
// edge topology with normals, vertex patches, and a plain-text dump format.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dgoc {

using Index = int;
using Point = Eigen::Vector2d;

/// Spatial dimension. Weights such as |K|/(d+1) are written against it.
inline constexpr int kDim = 2;

struct Rectangle {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 1.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(const Point& p, double tol = 0.0) const {
    return p.x() >= x0 - tol && p.x() <= x1 + tol && p.y() >= y0 - tol && p.y() <= y1 + tol;
  }
};

inline const Rectangle kUnitSquare{};

enum class EdgeKind { interior, boundary };

inline const char* to_string(EdgeKind k) { return k == EdgeKind::interior ? "interior" : "boundary"; }

struct Edge {
  std::array<Index, 2> vertices{};
  double length = 0.0;
  EdgeKind kind = EdgeKind::boundary;
  /// K+ for interior edges, the single adjacent cell for boundary edges.
  Index plus_cell = -1;
  /// K- for interior edges, -1 on the boundary.
  Index minus_cell = -1;
  /// n+ (pointing from K+ into K-) or the outward normal n^e.
  Point normal = Point::Zero();

  bool is_boundary() const { return kind == EdgeKind::boundary; }
};

class Mesh {
 public:
  using Cell = std::array<Index, 3>;

  Mesh(std::vector<Point> vertices, std::vector<Cell> cells)
      : vertices_(std::move(vertices)), cells_(std::move(cells)) {
    if (cells_.empty()) throw std::invalid_argument("mesh: no cells");
    const Index nv = num_vertices();
    for (const auto& c : cells_)
      for (Index v : c)
        if (v < 0 || v >= nv) throw std::invalid_argument("mesh: cell references unknown vertex");
    build_geometry();
    build_topology();
  }

  Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }
  Index num_dofs() const { return 3 * num_cells(); }

  const std::vector<Point>& vertices() const { return vertices_; }
  const Point& vertex(Index i) const { return vertices_[i]; }
  const std::vector<Cell>& cells() const { return cells_; }
  const Cell& cell(Index k) const { return cells_[k]; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(Index e) const { return edges_[e]; }
  /// Local edge j of cell k joins corners j and (j+1)%3.
  const std::array<Index, 3>& cell_edges(Index k) const { return cell_edges_[k]; }
  double cell_area(Index k) const { return areas_[k]; }
  /// h_K, the longest side of K.
  double cell_diameter(Index k) const { return diameters_[k]; }
  const std::vector<double>& cell_diameters() const { return diameters_; }
  const std::vector<Index>& vertex_patch(Index i) const { return patches_[i]; }
  bool is_boundary_vertex(Index i) const { return boundary_vertex_[i] != 0; }
  const std::vector<char>& boundary_vertex_flags() const { return boundary_vertex_; }

  double max_diameter() const { return *std::max_element(diameters_.begin(), diameters_.end()); }
  double total_area() const {
    double a = 0.0;
    for (double x : areas_) a += x;
    return a;
  }

  Point centroid(Index k) const {
    const auto& c = cells_[k];
    return (vertices_[c[0]] + vertices_[c[1]] + vertices_[c[2]]) / 3.0;
  }

  /// Gradients of the three barycentric coordinates (constant on the cell).
  const std::array<Point, 3>& basis_gradients(Index k) const { return gradients_[k]; }

  Eigen::Vector3d barycentric(Index k, const Point& p) const {
    const auto& c = cells_[k];
    const auto& g = gradients_[k];
    Eigen::Vector3d l;
    for (int j = 0; j < 3; ++j) {
      // lambda_j is affine, vanishes on the opposite edge; corner (j+1)%3 lies there.
      l[j] = g[j].dot(p - vertices_[c[(j + 1) % 3]]);
    }
    return l;
  }

  Point map_from_barycentric(Index k, const Eigen::Vector3d& l) const {
    const auto& c = cells_[k];
    return l[0] * vertices_[c[0]] + l[1] * vertices_[c[1]] + l[2] * vertices_[c[2]];
  }

  /// Local corner index of vertex v in cell k, or -1.
  int local_index(Index k, Index v) const {
    for (int j = 0; j < 3; ++j)
      if (cells_[k][j] == v) return j;
    return -1;
  }

  /// Throws std::logic_error naming the first failed invariant.
  void check_invariants() const {
    for (Index k = 0; k < num_cells(); ++k)
      if (!(areas_[k] > 0.0)) throw std::logic_error("mesh invariant: non-positive cell area");
    for (const auto& e : edges_) {
      if (!(e.length > 0.0)) throw std::logic_error("mesh invariant: zero-length edge");
      if (std::abs(e.normal.norm() - 1.0) > 1e-12) throw std::logic_error("mesh invariant: normal not unit");
      const double d = (vertices_[e.vertices[0]] - vertices_[e.vertices[1]]).norm();
      if (std::abs(d - e.length) > 1e-14 * std::max(1.0, d)) throw std::logic_error("mesh invariant: edge length");
      if (e.kind == EdgeKind::interior) {
        for (Index k : {e.plus_cell, e.minus_cell})
          if (local_index(k, e.vertices[0]) < 0 || local_index(k, e.vertices[1]) < 0)
            throw std::logic_error("mesh invariant: interior edge not shared by its cells");
      }
    }
    if (num_vertices() - num_edges() + num_cells() != 1)
      throw std::logic_error("mesh invariant: Euler relation V - E + C = 1 violated");
    for (Index i = 0; i < num_vertices(); ++i)
      for (Index k : patches_[i])
        if (local_index(k, i) < 0) throw std::logic_error("mesh invariant: patch cell misses vertex");
  }

  /// Conformity check for meshes of a rectangle: every boundary edge lies on a side.
  /// A hanging node shows up as a "boundary" edge in the interior.
  void check_rectangle_boundary(const Rectangle& r, double tol = 1e-12) const {
    auto on_side = [&](const Point& p) {
      return std::abs(p.x() - r.x0) <= tol || std::abs(p.x() - r.x1) <= tol || std::abs(p.y() - r.y0) <= tol ||
             std::abs(p.y() - r.y1) <= tol;
    };
    for (const auto& e : edges_) {
      if (!e.is_boundary()) continue;
      const Point mid = 0.5 * (vertices_[e.vertices[0]] + vertices_[e.vertices[1]]);
      if (!on_side(mid)) throw std::logic_error("mesh invariant: boundary edge inside the domain (hanging node?)");
    }
  }

 private:
  void build_geometry() {
    const Index nc = num_cells();
    areas_.resize(nc);
    diameters_.resize(nc);
    gradients_.resize(nc);
    for (Index k = 0; k < nc; ++k) {
      const auto& c = cells_[k];
      const Point& a = vertices_[c[0]];
      const Point& b = vertices_[c[1]];
      const Point& d = vertices_[c[2]];
      const double det = (b - a).x() * (d - a).y() - (b - a).y() * (d - a).x();
      if (!(det > 0.0)) throw std::invalid_argument("mesh: cell with non-positive orientation or zero area");
      areas_[k] = 0.5 * det;
      diameters_[k] = std::max({(b - a).norm(), (d - b).norm(), (a - d).norm()});
      // grad lambda_j = rot90(opposite edge) / (2|K|)
      for (int j = 0; j < 3; ++j) {
        const Point& p = vertices_[c[(j + 1) % 3]];
        const Point& q = vertices_[c[(j + 2) % 3]];
        const Point t = q - p;
        gradients_[k][j] = Point(-t.y(), t.x()) / det;
      }
    }
  }

  void build_topology() {
    const Index nc = num_cells();
    std::map<std::pair<Index, Index>, Index> lookup;
    cell_edges_.resize(nc);
    for (Index k = 0; k < nc; ++k) {
      for (int j = 0; j < 3; ++j) {
        const Index a = cells_[k][j];
        const Index b = cells_[k][(j + 1) % 3];
        const auto key = std::minmax(a, b);
        auto it = lookup.find(key);
        if (it == lookup.end()) {
          Edge e;
          e.vertices = {a, b};
          const Point t = vertices_[b] - vertices_[a];
          e.length = t.norm();
          e.normal = Point(t.y(), -t.x()) / e.length;
          e.plus_cell = k;
          e.kind = EdgeKind::boundary;
          lookup.emplace(key, num_edges());
          cell_edges_[k][j] = num_edges();
          edges_.push_back(e);
        } else {
          Edge& e = edges_[it->second];
          if (e.kind == EdgeKind::interior) throw std::invalid_argument("mesh: edge shared by more than two cells");
          if (e.vertices[0] != b || e.vertices[1] != a)
            throw std::invalid_argument("mesh: inconsistent orientation across an edge");
          e.kind = EdgeKind::interior;
          e.minus_cell = k;
          cell_edges_[k][j] = it->second;
        }
      }
    }
    patches_.assign(num_vertices(), {});
    for (Index k = 0; k < nc; ++k)
      for (Index v : cells_[k]) patches_[v].push_back(k);
    boundary_vertex_.assign(num_vertices(), 0);
    for (const auto& e : edges_)
      if (e.is_boundary()) boundary_vertex_[e.vertices[0]] = boundary_vertex_[e.vertices[1]] = 1;
  }

  std::vector<Point> vertices_;
  std::vector<Cell> cells_;
  std::vector<Edge> edges_;
  std::vector<std::array<Index, 3>> cell_edges_;
  std::vector<double> areas_;
  std::vector<double> diameters_;
  std::vector<std::array<Point, 3>> gradients_;
  std::vector<std::vector<Index>> patches_;
  std::vector<char> boundary_vertex_;
};

/// n x n squares, each split along its lower-left to upper-right diagonal.
inline Mesh build_uniform_mesh(int n, const Rectangle& domain = kUnitSquare) {
  if (n < 1) throw std::invalid_argument("build_uniform_mesh: n must be >= 1");
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
    throw std::invalid_argument("build_uniform_mesh: degenerate rectangle");
  std::vector<Point> vertices;
  vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      vertices.emplace_back(domain.x0 + domain.width() * i / n, domain.y0 + domain.height() * j / n);
  std::vector<Mesh::Cell> cells;
  cells.reserve(2 * static_cast<std::size_t>(n) * n);
  auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const Index v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      cells.push_back({v00, v10, v11});
      cells.push_back({v00, v11, v01});
    }
  }
  return Mesh(std::move(vertices), std::move(cells));
}

/// Red refinement: children of cell k are 4k..4k+3 (three corner cells, then the middle one).
inline Mesh refine_uniform(const Mesh& mesh) {
  std::vector<Point> vertices = mesh.vertices();
  const Index nv = mesh.num_vertices();
  for (const auto& e : mesh.edges()) vertices.push_back(0.5 * (mesh.vertex(e.vertices[0]) + mesh.vertex(e.vertices[1])));
  std::vector<Mesh::Cell> cells;
  cells.reserve(4 * static_cast<std::size_t>(mesh.num_cells()));
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const auto& c = mesh.cell(k);
    const auto& ce = mesh.cell_edges(k);
    const Index m01 = nv + ce[0], m12 = nv + ce[1], m20 = nv + ce[2];
    cells.push_back({c[0], m01, m20});
    cells.push_back({m01, c[1], m12});
    cells.push_back({m20, m12, c[2]});
    cells.push_back({m01, m12, m20});
  }
  return Mesh(std::move(vertices), std::move(cells));
}

/// Text dump: `vertices N cells M edges E`, then `v x y`, `c i j k`, `e i j kind` lines.
inline void write_mesh(std::ostream& os, const Mesh& mesh) {
  std::ostringstream buf;
  buf.precision(17);
  buf << "vertices " << mesh.num_vertices() << " cells " << mesh.num_cells() << " edges " << mesh.num_edges() << "\n";
  for (const auto& v : mesh.vertices()) buf << "v " << v.x() << " " << v.y() << "\n";
  for (const auto& c : mesh.cells()) buf << "c " << c[0] << " " << c[1] << " " << c[2] << "\n";
  for (const auto& e : mesh.edges())
    buf << "e " << e.vertices[0] << " " << e.vertices[1] << " " << to_string(e.kind) << "\n";
  os << buf.str();
}

inline Mesh read_mesh(std::istream& is) {
  std::string w0, w1, w2;
  long nv = -1, nc = -1, ne = -1;
  if (!(is >> w0 >> nv >> w1 >> nc >> w2 >> ne) || w0 != "vertices" || w1 != "cells" || w2 != "edges" || nv < 0 ||
      nc < 0 || ne < 0)
    throw std::runtime_error("read_mesh: malformed header");
  std::vector<Point> vertices;
  std::vector<Mesh::Cell> cells;
  std::vector<std::pair<std::pair<Index, Index>, std::string>> edges;
  std::string tag;
  for (long i = 0; i < nv; ++i) {
    double x, y;
    if (!(is >> tag >> x >> y) || tag != "v") throw std::runtime_error("read_mesh: bad vertex line");
    vertices.emplace_back(x, y);
  }
  for (long i = 0; i < nc; ++i) {
    Index a, b, c;
    if (!(is >> tag >> a >> b >> c) || tag != "c") throw std::runtime_error("read_mesh: bad cell line");
    cells.push_back({a, b, c});
  }
  for (long i = 0; i < ne; ++i) {
    Index a, b;
    std::string kind;
    if (!(is >> tag >> a >> b >> kind) || tag != "e") throw std::runtime_error("read_mesh: bad edge line");
    edges.push_back({std::minmax(a, b), kind});
  }
  Mesh mesh(std::move(vertices), std::move(cells));
  if (static_cast<long>(mesh.num_edges()) != ne) throw std::runtime_error("read_mesh: edge count mismatch");
  std::map<std::pair<Index, Index>, EdgeKind> built;
  for (const auto& e : mesh.edges()) built.emplace(std::minmax(e.vertices[0], e.vertices[1]), e.kind);
  for (const auto& [key, kind] : edges) {
    auto it = built.find(key);
    if (it == built.end() || kind != to_string(it->second))
      throw std::runtime_error("read_mesh: edge list inconsistent with cells");
  }
  return mesh;
}

/// Bucket grid over the bounding box for point-in-cell queries.
class CellLocator {
 public:
  explicit CellLocator(const Mesh& mesh) : mesh_(mesh) {
    lo_ = hi_ = mesh.vertex(0);
    for (const auto& v : mesh.vertices()) {
      lo_ = lo_.cwiseMin(v);
      hi_ = hi_.cwiseMax(v);
    }
    side_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_cells()) / 2.0)));
    buckets_.assign(static_cast<std::size_t>(side_) * side_, {});
    for (Index k = 0; k < mesh.num_cells(); ++k) {
      Point a = mesh.vertex(mesh.cell(k)[0]), b = a;
      for (Index v : mesh.cell(k)) {
        a = a.cwiseMin(mesh.vertex(v));
        b = b.cwiseMax(mesh.vertex(v));
      }
      const auto [i0, j0] = bucket(a);
      const auto [i1, j1] = bucket(b);
      for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) buckets_[static_cast<std::size_t>(j) * side_ + i].push_back(k);
    }
  }

  /// Cell containing p (barycentric coordinates >= -tol), or -1.
  Index find(const Point& p, double tol = 1e-12) const {
    const auto [i, j] = bucket(p);
    for (Index k : buckets_[static_cast<std::size_t>(j) * side_ + i]) {
      if (mesh_.barycentric(k, p).minCoeff() >= -tol) return k;
    }
    return -1;
  }

 private:
  std::pair<int, int> bucket(const Point& p) const {
    auto clampi = [this](double t) { return std::clamp(static_cast<int>(t * side_), 0, side_ - 1); };
    const Point ext = (hi_ - lo_).cwiseMax(Point::Constant(1e-300));
    return {clampi((p.x() - lo_.x()) / ext.x()), clampi((p.y() - lo_.y()) / ext.y())};
  }

  const Mesh& mesh_;
  Point lo_, hi_;
  int side_ = 1;
  std::vector<std::vector<Index>> buckets_;
};

}  // namespace dgoc
