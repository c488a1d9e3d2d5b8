#pragma once

// Linear triangle meshes for the two benchmark geometries, plus a plain-text
// mesh format.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddlab/errors.hpp"

namespace ddlab {

using Point2 = Eigen::Vector2d;
using Triangle = std::array<int, 3>;
using Edge = std::array<int, 2>;

struct Mesh {
  std::vector<Point2> nodes;
  std::vector<Triangle> triangles;
  std::map<std::string, std::vector<Edge>> edge_tags;
  std::map<std::string, int> node_tags;  // named single nodes, e.g. "tip"

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_elements() const { return triangles.size(); }

  double signed_area(std::size_t e) const {
    const Triangle& t = triangles[e];
    const Point2 a = nodes[static_cast<std::size_t>(t[1])] - nodes[static_cast<std::size_t>(t[0])];
    const Point2 b = nodes[static_cast<std::size_t>(t[2])] - nodes[static_cast<std::size_t>(t[0])];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }

  Point2 centroid(std::size_t e) const {
    const Triangle& t = triangles[e];
    return (nodes[static_cast<std::size_t>(t[0])] + nodes[static_cast<std::size_t>(t[1])] +
            nodes[static_cast<std::size_t>(t[2])]) /
           3.0;
  }

  const std::vector<Edge>& edges(const std::string& tag) const {
    auto it = edge_tags.find(tag);
    if (it == edge_tags.end()) throw InvalidConfig("unknown boundary tag '" + tag + "'");
    return it->second;
  }

  int node(const std::string& tag) const {
    auto it = node_tags.find(tag);
    if (it == node_tags.end()) throw InvalidConfig("unknown node tag '" + tag + "'");
    return it->second;
  }

  /// Throws if an element is inverted or degenerate, or a tag is dangling.
  void validate() const {
    for (std::size_t e = 0; e < triangles.size(); ++e) {
      for (int n : triangles[e])
        if (n < 0 || static_cast<std::size_t>(n) >= nodes.size()) throw InvalidConfig("triangle references missing node");
      if (!(signed_area(e) > 0.0)) throw InvalidConfig("non-positive triangle area at element " + std::to_string(e));
    }
    for (const auto& [tag, list] : edge_tags)
      for (const Edge& ed : list)
        for (int n : ed)
          if (n < 0 || static_cast<std::size_t>(n) >= nodes.size()) throw InvalidConfig("tag '" + tag + "' references missing node");
    for (const auto& [tag, n] : node_tags)
      if (n < 0 || static_cast<std::size_t>(n) >= nodes.size()) throw InvalidConfig("node tag '" + tag + "' references missing node");
  }
};

namespace detail {

// Node coordinates along [0, length] with n cells whose sizes grow
// geometrically so that last/first == ratio.
inline std::vector<double> graded_coordinates(double length, int n, double ratio) {
  std::vector<double> x(static_cast<std::size_t>(n) + 1, 0.0);
  if (n == 1 || ratio == 1.0) {
    for (int i = 0; i <= n; ++i) x[static_cast<std::size_t>(i)] = length * i / n;
    return x;
  }
  const double q = std::pow(ratio, 1.0 / (n - 1));
  const double h0 = length * (q - 1.0) / (std::pow(q, n) - 1.0);
  double h = h0;
  for (int i = 1; i <= n; ++i) {
    x[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i) - 1] + h;
    h *= q;
  }
  x.back() = length;
  return x;
}

// Structured (nx x ny) quad grid on a mapped patch, split into triangles.
// `diagonal(i, j)` picks the split direction of cell (i, j).
template <class Map, class Diagonal>
Mesh structured_triangles(int nx, int ny, Map&& map, Diagonal&& diagonal) {
  Mesh m;
  m.nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.nodes.push_back(map(i, j));
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if (diagonal(i, j)) {
        m.triangles.push_back({a, b, c});
        m.triangles.push_back({a, c, d});
      } else {
        m.triangles.push_back({a, b, d});
        m.triangles.push_back({b, c, d});
      }
    }
  }
  auto& bottom = m.edge_tags["bottom"];
  auto& top = m.edge_tags["top"];
  for (int i = 0; i < nx; ++i) {
    bottom.push_back({id(i, 0), id(i + 1, 0)});
    top.push_back({id(i + 1, ny), id(i, ny)});
  }
  auto& left = m.edge_tags["left"];
  auto& right = m.edge_tags["right"];
  for (int j = 0; j < ny; ++j) {
    left.push_back({id(0, j + 1), id(0, j)});
    right.push_back({id(nx, j), id(nx, j + 1)});
  }
  m.node_tags["bottom_left"] = id(0, 0);
  m.node_tags["bottom_right"] = id(nx, 0);
  m.node_tags["top_right"] = id(nx, ny);
  m.node_tags["top_left"] = id(0, ny);
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cook membrane: trapezoid (0,0)-(48,44)-(48,60)-(0,44) mm, clamped on the
// left edge, sheared on the right edge. Tags: left, right, top, bottom; node
// tag "tip" is the top-right corner.

struct CookGeometry {
  double width = 48.0;
  double right_bottom = 44.0;  // y of the lower right corner
  double right_top = 60.0;     // y of the upper right corner
  double left_top = 44.0;      // y of the upper left corner
};

struct CookMeshOptions {
  int nx = 21;  // cells along the width
  int ny = 21;  // cells across the height
  double perturbation = 0.15;  // interior node jitter as a fraction of local spacing
  std::uint64_t seed = 7;
  CookGeometry geometry{};

  /// Mesh the source dataset is sampled on: 986 elements.
  static CookMeshOptions source() { return {29, 17, 0.0, 0, {}}; }
  /// Changed mesh used for the comparisons: 882 elements.
  static CookMeshOptions modified() { return {21, 21, 0.15, 7, {}}; }
};

inline Mesh cook_mesh(const CookMeshOptions& opt) {
  if (opt.nx < 1 || opt.ny < 1) throw InvalidConfig("cook mesh needs at least one cell per direction");
  const CookGeometry g = opt.geometry;
  auto map = [&](int i, int j) {
    const double xi = static_cast<double>(i) / opt.nx;
    const double eta = static_cast<double>(j) / opt.ny;
    const double yb = g.right_bottom * xi;
    const double yt = g.left_top + (g.right_top - g.left_top) * xi;
    return Point2(g.width * xi, yb + eta * (yt - yb));
  };
  // Alternating split directions avoid a uniformly biased triangulation.
  auto diag = [](int i, int j) { return ((i / 2) + j) % 2 == 0; };
  Mesh m = detail::structured_triangles(opt.nx, opt.ny, map, diag);

  if (opt.perturbation > 0.0) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> jitter(-opt.perturbation, opt.perturbation);
    const double hx = g.width / opt.nx;
    for (int j = 1; j < opt.ny; ++j) {
      for (int i = 1; i < opt.nx; ++i) {
        const double xi = static_cast<double>(i) / opt.nx;
        const double hy = (g.left_top + (g.right_top - g.left_top - g.right_bottom) * xi) / opt.ny;
        Point2& p = m.nodes[static_cast<std::size_t>(j * (opt.nx + 1) + i)];
        const double dx = jitter(rng) * hx;
        const double dy = jitter(rng) * hy;
        p += Point2(dx, dy);
      }
    }
  }
  m.node_tags["tip"] = m.node_tags["top_right"];
  m.validate();
  return m;
}

/// Square-ish refinement: n_ref cells in both directions.
inline Mesh cook_mesh(int n_ref) {
  if (n_ref < 1) throw InvalidConfig("n_ref must be >= 1");
  CookMeshOptions opt = CookMeshOptions::modified();
  opt.nx = n_ref;
  opt.ny = n_ref;
  return cook_mesh(opt);
}

// ---------------------------------------------------------------------------
// Punch: rectangle 2L x L, traction on the left half of the top edge,
// symmetry on the left edge, rollers on the bottom. Graded towards the
// top-left corner. Tags: load, top_free, left, bottom, right; node tag "tip"
// is the top-left corner.

struct PunchMeshOptions {
  double length = 1.0;  // L, mm
  int nx_load = 24;     // cells under the load
  int nx_free = 18;     // cells beyond the load
  int ny = 37;
  double grading = 6.0;  // largest/smallest cell size per direction

  static PunchMeshOptions scaled(int n_ref) {
    PunchMeshOptions o;
    o.nx_load = std::max(1, 24 * n_ref / 37);
    o.nx_free = std::max(1, 18 * n_ref / 37);
    o.ny = std::max(1, n_ref);
    return o;
  }
};

inline Mesh punch_mesh(const PunchMeshOptions& opt) {
  if (opt.nx_load < 1 || opt.nx_free < 1 || opt.ny < 1) throw InvalidConfig("punch mesh needs positive cell counts");
  const double L = opt.length;
  std::vector<double> xs = detail::graded_coordinates(L, opt.nx_load, opt.grading);
  const std::vector<double> xr = detail::graded_coordinates(L, opt.nx_free, 1.0);
  for (std::size_t i = 1; i < xr.size(); ++i) xs.push_back(L + xr[i]);
  // Smallest cells at the top edge.
  std::vector<double> ys = detail::graded_coordinates(L, opt.ny, opt.grading);
  for (double& y : ys) y = L - y;
  std::reverse(ys.begin(), ys.end());

  const int nx = opt.nx_load + opt.nx_free;
  auto map = [&](int i, int j) { return Point2(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]); };
  auto diag = [](int i, int j) { return (i + j) % 2 == 0; };
  Mesh m = detail::structured_triangles(nx, opt.ny, map, diag);

  std::vector<Edge> load, free_top;
  for (const Edge& e : m.edge_tags["top"]) {
    const double xmax = std::max(m.nodes[static_cast<std::size_t>(e[0])].x(), m.nodes[static_cast<std::size_t>(e[1])].x());
    (xmax <= L * (1.0 + 1e-12) ? load : free_top).push_back(e);
  }
  m.edge_tags["load"] = std::move(load);
  m.edge_tags["top_free"] = std::move(free_top);
  m.node_tags["tip"] = m.node_tags["top_left"];
  m.validate();
  return m;
}

inline Mesh punch_mesh(int n_ref) { return punch_mesh(PunchMeshOptions::scaled(n_ref)); }

// ---------------------------------------------------------------------------
// Text format:
//   ddlab-mesh v1
//   nodes <n>            followed by n lines "x y"
//   triangles <m>        followed by m lines "a b c"
//   edge_tags <k>        followed by k blocks "name <count>" + count lines "a b"
//   node_tags <k>        followed by k lines "name index"

inline void write_mesh(std::ostream& os, const Mesh& m) {
  os << "ddlab-mesh v1\n" << std::setprecision(17);
  os << "nodes " << m.nodes.size() << '\n';
  for (const Point2& p : m.nodes) os << p.x() << ' ' << p.y() << '\n';
  os << "triangles " << m.triangles.size() << '\n';
  for (const Triangle& t : m.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "edge_tags " << m.edge_tags.size() << '\n';
  for (const auto& [name, edges] : m.edge_tags) {
    os << name << ' ' << edges.size() << '\n';
    for (const Edge& e : edges) os << e[0] << ' ' << e[1] << '\n';
  }
  os << "node_tags " << m.node_tags.size() << '\n';
  for (const auto& [name, n] : m.node_tags) os << name << ' ' << n << '\n';
}

inline Mesh read_mesh(std::istream& is) {
  std::string word;
  auto expect = [&](const char* w) {
    if (!(is >> word) || word != w) throw MalformedFile(std::string("mesh file: expected '") + w + "'");
  };
  auto count = [&]() {
    long long n = -1;
    if (!(is >> n) || n < 0) throw MalformedFile("mesh file: bad count");
    return static_cast<std::size_t>(n);
  };
  expect("ddlab-mesh");
  expect("v1");
  Mesh m;
  expect("nodes");
  m.nodes.resize(count());
  for (Point2& p : m.nodes)
    if (!(is >> p.x() >> p.y())) throw MalformedFile("mesh file: truncated node list");
  expect("triangles");
  m.triangles.resize(count());
  for (Triangle& t : m.triangles)
    if (!(is >> t[0] >> t[1] >> t[2])) throw MalformedFile("mesh file: truncated triangle list");
  expect("edge_tags");
  const std::size_t ntags = count();
  for (std::size_t k = 0; k < ntags; ++k) {
    std::string name;
    if (!(is >> name)) throw MalformedFile("mesh file: truncated tag list");
    std::vector<Edge> edges(count());
    for (Edge& e : edges)
      if (!(is >> e[0] >> e[1])) throw MalformedFile("mesh file: truncated edges of tag '" + name + "'");
    m.edge_tags[name] = std::move(edges);
  }
  expect("node_tags");
  const std::size_t nnodes = count();
  for (std::size_t k = 0; k < nnodes; ++k) {
    std::string name;
    int n = -1;
    if (!(is >> name >> n)) throw MalformedFile("mesh file: truncated node tags");
    m.node_tags[name] = n;
  }
  m.validate();
  return m;
}

}  // namespace ddlab
