#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace fractallab {

inline constexpr std::size_t default_vertex_cap = 6000;

// x -> ratio * x + offset
struct AffineMap {
  double ratio = 1.0;
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const { return ratio * x + offset; }
};

// Planar isometry x -> linear * x + offset, used for pattern symmetries.
struct Isometry {
  Eigen::Matrix2d linear = Eigen::Matrix2d::Identity();
  Eigen::Vector2d offset = Eigen::Vector2d::Zero();
  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const { return linear * x + offset; }
};

struct FractalModel {
  std::string name;
  std::vector<AffineMap> maps;
  int cell_count = 0;
  int length_factor = 0;
  double hausdorff_dim = 0.0;
  double walk_dim = 0.0;
  std::optional<double> topological_hausdorff_dim;
  double resistance_factor = 0.0;
  double time_factor = 0.0;

  // level-0 cell: vertices, edges, and the boundary points (corners)
  std::vector<Eigen::Vector2d> pattern_vertices;
  std::vector<std::pair<int, int>> pattern_edges;
  std::vector<int> boundary;
  // commuting involutions of the pattern that also permute the maps
  std::vector<Isometry> symmetries;
};

struct CellAddress {
  std::vector<std::uint8_t> word;  // symbols in 1..N
};

struct ApproxGraph {
  FractalModel model;
  int level = 0;
  Eigen::MatrixXd coords;  // n x dim
  std::vector<CellAddress> cells;
  std::vector<std::vector<int>> cell_vertices;  // pattern order
  std::vector<std::vector<int>> vertex_cells;
  std::vector<std::pair<int, int>> edges;  // i < j, sorted
  Eigen::VectorXd measure;
  std::vector<std::vector<int>> neighbors;
  // vertex permutations induced by model symmetries, verified to preserve edges and measure
  std::vector<std::vector<int>> automorphisms;

  int size() const { return static_cast<int>(coords.rows()); }
};

namespace detail {

inline FractalModel model_skeleton(const std::string& name) {
  FractalModel mdl;
  mdl.name = name;
  auto reflect = [](double a, double b, double c, double d, double ox, double oy) {
    Isometry s;
    s.linear << a, b, c, d;
    s.offset << ox, oy;
    return s;
  };
  if (name == "vicsek") {
    mdl.cell_count = 5;
    mdl.length_factor = 3;
    const double third = 1.0 / 3.0;
    const std::array<std::array<double, 2>, 5> off{{{0, 0}, {2, 0}, {1, 1}, {0, 2}, {2, 2}}};
    for (const auto& o : off) mdl.maps.push_back({third, Eigen::Vector2d(o[0] * third, o[1] * third)});
    // x1 lower-left, x2 upper-left, x3 upper-right, x4 lower-right, then the center
    mdl.pattern_vertices = {{0, 0}, {0, 1}, {1, 1}, {1, 0}, {0.5, 0.5}};
    mdl.pattern_edges = {{0, 4}, {1, 4}, {2, 4}, {3, 4}};
    mdl.boundary = {0, 1, 2, 3};
    mdl.symmetries = {reflect(0, 1, 1, 0, 0, 0), reflect(0, -1, -1, 0, 1, 1)};
  } else if (name == "gasket") {
    mdl.cell_count = 3;
    mdl.length_factor = 2;
    const double h = std::sqrt(3.0) / 2.0;
    mdl.maps = {{0.5, {0, 0}}, {0.5, {0.5, 0}}, {0.5, {0.25, h / 2}}};
    mdl.pattern_vertices = {{0, 0}, {1, 0}, {0.5, h}};
    mdl.pattern_edges = {{0, 1}, {1, 2}, {0, 2}};
    mdl.boundary = {0, 1, 2};
    mdl.symmetries = {reflect(-1, 0, 0, 1, 1, 0)};
  } else if (name == "interval") {
    mdl.cell_count = 2;
    mdl.length_factor = 2;
    mdl.maps = {{0.5, {0, 0}}, {0.5, {0.5, 0}}};
    mdl.pattern_vertices = {{0, 0}, {1, 0}};
    mdl.pattern_edges = {{0, 1}};
    mdl.boundary = {0, 1};
    mdl.symmetries = {reflect(-1, 0, 0, 1, 1, 0)};
    mdl.topological_hausdorff_dim = 1.0;
  } else {
    fail(ErrorKind::UnknownModel, "unknown model '" + name + "'");
  }
  mdl.hausdorff_dim = std::log(static_cast<double>(mdl.cell_count)) / std::log(static_cast<double>(mdl.length_factor));
  return mdl;
}

struct CoordKey {
  std::array<long long, 2> k;
  bool operator<(const CoordKey& o) const { return k < o.k; }
};

inline CoordKey coord_key(const Eigen::Vector2d& x, double tol) {
  return {{std::llround(x(0) / tol), std::llround(x(1) / tol)}};
}

// Cells, deduplicated vertices and edges of the level-m approximation.
struct Assembly {
  std::vector<Eigen::Vector2d> points;
  std::vector<CellAddress> cells;
  std::vector<std::vector<int>> cell_vertices;
  std::vector<std::pair<int, int>> edges;
  std::map<CoordKey, int> index;
  double tol = 0.0;
};

inline Assembly assemble(const FractalModel& mdl, int m, std::size_t cap) {
  if (m < 0) fail(ErrorKind::DomainError, "level must be nonnegative");
  const double n_cells = std::pow(static_cast<double>(mdl.cell_count), m);
  // every cell contributes at most |V_0| new vertices; refuse runaway enumerations early
  if (n_cells * static_cast<double>(mdl.pattern_vertices.size()) > 50.0 * static_cast<double>(cap) + 1e3)
    fail(ErrorKind::GraphTooLarge, "level " + std::to_string(m) + " exceeds vertex cap " + std::to_string(cap));

  Assembly a;
  a.tol = 1e-9 * std::pow(static_cast<double>(mdl.length_factor), -m);
  std::set<std::pair<int, int>> edge_set;
  std::vector<std::uint8_t> word(static_cast<std::size_t>(m), 0);
  const auto total = static_cast<long long>(std::llround(n_cells));
  for (long long c = 0; c < total; ++c) {
    long long rem = c;
    for (int d = m - 1; d >= 0; --d) {
      word[static_cast<std::size_t>(d)] = static_cast<std::uint8_t>(rem % mdl.cell_count);
      rem /= mdl.cell_count;
    }
    CellAddress addr;
    addr.word.reserve(word.size());
    std::vector<int> ids;
    for (auto s : word) addr.word.push_back(static_cast<std::uint8_t>(s + 1));
    for (const auto& v : mdl.pattern_vertices) {
      Eigen::Vector2d x = v;
      for (int d = m - 1; d >= 0; --d) x = mdl.maps[word[static_cast<std::size_t>(d)]](x);
      auto key = coord_key(x, a.tol);
      auto it = a.index.find(key);
      if (it == a.index.end()) {
        it = a.index.emplace(key, static_cast<int>(a.points.size())).first;
        a.points.push_back(x);
      }
      ids.push_back(it->second);
    }
    for (const auto& [u, v] : mdl.pattern_edges) {
      int i = ids[static_cast<std::size_t>(u)], j = ids[static_cast<std::size_t>(v)];
      edge_set.insert({std::min(i, j), std::max(i, j)});
    }
    a.cells.push_back(std::move(addr));
    a.cell_vertices.push_back(std::move(ids));
  }
  if (a.points.size() > cap)
    fail(ErrorKind::GraphTooLarge,
         std::to_string(a.points.size()) + " vertices exceed cap " + std::to_string(cap));
  a.edges.assign(edge_set.begin(), edge_set.end());
  return a;
}

inline Eigen::MatrixXd unit_laplacian(int n, const std::vector<std::pair<int, int>>& edges) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : edges) {
    L(i, i) += 1.0;
    L(j, j) += 1.0;
    L(i, j) -= 1.0;
    L(j, i) -= 1.0;
  }
  return L;
}

}  // namespace detail

/// Renormalization factor r > 1 of the level-1 network reduced onto the V_0 pattern.
inline double derive_resistance_factor(const FractalModel& mdl) {
  auto a = detail::assemble(mdl, 1, default_vertex_cap);
  const int n = static_cast<int>(a.points.size());
  const int nb = static_cast<int>(mdl.pattern_vertices.size());
  std::vector<int> bidx;
  for (const auto& v : mdl.pattern_vertices) {
    auto it = a.index.find(detail::coord_key(v, a.tol));
    if (it == a.index.end()) fail(ErrorKind::RenormalizationFailure, "pattern vertex missing at level 1");
    bidx.push_back(it->second);
  }
  std::vector<char> is_b(static_cast<std::size_t>(n), 0);
  for (int b : bidx) is_b[static_cast<std::size_t>(b)] = 1;
  std::vector<int> iidx;
  for (int i = 0; i < n; ++i)
    if (!is_b[static_cast<std::size_t>(i)]) iidx.push_back(i);

  Eigen::MatrixXd L1 = detail::unit_laplacian(n, a.edges);
  const int ni = static_cast<int>(iidx.size());
  Eigen::MatrixXd Lbb(nb, nb), Lbi(nb, ni), Lii(ni, ni);
  for (int r = 0; r < nb; ++r) {
    for (int c = 0; c < nb; ++c) Lbb(r, c) = L1(bidx[r], bidx[c]);
    for (int c = 0; c < ni; ++c) Lbi(r, c) = L1(bidx[r], iidx[c]);
  }
  for (int r = 0; r < ni; ++r)
    for (int c = 0; c < ni; ++c) Lii(r, c) = L1(iidx[r], iidx[c]);
  Eigen::MatrixXd S = Lbb;
  if (ni > 0) S -= Lbi * Lii.ldlt().solve(Lbi.transpose());

  const Eigen::MatrixXd L0 = detail::unit_laplacian(nb, mdl.pattern_edges);
  const double target = L0.squaredNorm();
  double r = 1.0;
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    const double next = r * target / (L0.cwiseProduct(r * S).sum());
    if (!std::isfinite(next)) break;
    const double step = std::abs(next - r);
    r = next;
    if (step <= 1e-12 * r) {
      converged = true;
      break;
    }
  }
  if (!converged) fail(ErrorKind::RenormalizationFailure, "scalar iteration did not converge");
  if ((r * S - L0).norm() > 1e-9 * std::sqrt(target))
    fail(ErrorKind::RenormalizationFailure, "reduced network is not a multiple of the level-0 network");
  if (!(r > 1.0)) fail(ErrorKind::RenormalizationFailure, "renormalization factor not above 1");
  return r;
}

inline FractalModel build_model(const std::string& name) {
  FractalModel mdl = detail::model_skeleton(name);
  mdl.resistance_factor = derive_resistance_factor(mdl);
  mdl.time_factor = mdl.cell_count * mdl.resistance_factor;
  mdl.walk_dim = std::log(mdl.time_factor) / std::log(static_cast<double>(mdl.length_factor));
  return mdl;
}

inline ApproxGraph build_graph(const FractalModel& mdl, int m, std::size_t cap = default_vertex_cap) {
  auto a = detail::assemble(mdl, m, cap);
  ApproxGraph g;
  g.model = mdl;
  g.level = m;
  const int n = static_cast<int>(a.points.size());
  g.coords.resize(n, 2);
  for (int i = 0; i < n; ++i) g.coords.row(i) = a.points[static_cast<std::size_t>(i)].transpose();
  g.cells = std::move(a.cells);
  g.cell_vertices = std::move(a.cell_vertices);
  g.edges = std::move(a.edges);
  g.vertex_cells.assign(static_cast<std::size_t>(n), {});
  g.measure = Eigen::VectorXd::Zero(n);
  const double share = std::pow(static_cast<double>(mdl.cell_count), -m) / static_cast<double>(mdl.pattern_vertices.size());
  for (std::size_t c = 0; c < g.cell_vertices.size(); ++c)
    for (int v : g.cell_vertices[c]) {
      g.vertex_cells[static_cast<std::size_t>(v)].push_back(static_cast<int>(c));
      g.measure(v) += share;
    }
  g.neighbors.assign(static_cast<std::size_t>(n), {});
  for (const auto& [i, j] : g.edges) {
    g.neighbors[static_cast<std::size_t>(i)].push_back(j);
    g.neighbors[static_cast<std::size_t>(j)].push_back(i);
  }

  std::set<std::pair<int, int>> edge_set(g.edges.begin(), g.edges.end());
  for (const auto& sym : mdl.symmetries) {
    std::vector<int> perm(static_cast<std::size_t>(n), -1);
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      auto it = a.index.find(detail::coord_key(sym(a.points[static_cast<std::size_t>(i)]), a.tol));
      if (it == a.index.end()) ok = false;
      else perm[static_cast<std::size_t>(i)] = it->second;
    }
    for (int i = 0; i < n && ok; ++i)
      if (g.measure(perm[static_cast<std::size_t>(i)]) != g.measure(i)) ok = false;
    for (auto it = g.edges.begin(); ok && it != g.edges.end(); ++it) {
      int u = perm[static_cast<std::size_t>(it->first)], v = perm[static_cast<std::size_t>(it->second)];
      if (!edge_set.count({std::min(u, v), std::max(u, v)})) ok = false;
    }
    if (ok) g.automorphisms.push_back(std::move(perm));
  }
  return g;
}

inline double metric(const ApproxGraph& g, int i, int j) {
  if (i == j) return 0.0;
  return (g.coords.row(i) - g.coords.row(j)).norm();
}

inline std::vector<int> ball(const ApproxGraph& g, int i, double r) {
  if (!(r > 0.0)) fail(ErrorKind::DomainError, "ball radius must be positive");
  std::vector<int> out;
  for (int j = 0; j < g.size(); ++j)
    if (j == i || metric(g, i, j) < r) out.push_back(j);
  return out;
}

inline double diameter(const ApproxGraph& g) {
  double d = 0.0;
  for (int i = 0; i < g.size(); ++i)
    for (int j = i + 1; j < g.size(); ++j) d = std::max(d, metric(g, i, j));
  return d;
}

inline double min_spacing(const ApproxGraph& g) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& [i, j] : g.edges) d = std::min(d, metric(g, i, j));
  return d;
}

inline bool is_connected(const ApproxGraph& g) {
  if (g.size() == 0) return false;
  std::vector<char> seen(static_cast<std::size_t>(g.size()), 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  int count = 1;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : g.neighbors[static_cast<std::size_t>(u)])
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        q.push(v);
      }
  }
  return count == g.size();
}

/// Ids of the vertices of V_m that lie in the level-k boundary set V_k (images of the corners).
inline std::vector<int> level_vertices(const ApproxGraph& g, int k) {
  if (k < 0 || k > g.level) fail(ErrorKind::DomainError, "level_vertices needs 0 <= k <= m");
  const auto& mdl = g.model;
  const double tol = 1e-9 * std::pow(static_cast<double>(mdl.length_factor), -g.level);
  std::map<detail::CoordKey, int> index;
  for (int i = 0; i < g.size(); ++i)
    index.emplace(detail::coord_key(Eigen::Vector2d(g.coords(i, 0), g.coords(i, 1)), tol), i);
  std::set<int> out;
  const long long total = std::llround(std::pow(static_cast<double>(mdl.cell_count), k));
  for (long long c = 0; c < total; ++c) {
    std::vector<int> word(static_cast<std::size_t>(k));
    long long rem = c;
    for (int d = k - 1; d >= 0; --d) {
      word[static_cast<std::size_t>(d)] = static_cast<int>(rem % mdl.cell_count);
      rem /= mdl.cell_count;
    }
    for (int b : mdl.boundary) {
      Eigen::Vector2d x = mdl.pattern_vertices[static_cast<std::size_t>(b)];
      for (int d = k - 1; d >= 0; --d) x = mdl.maps[static_cast<std::size_t>(word[static_cast<std::size_t>(d)])](x);
      auto it = index.find(detail::coord_key(x, tol));
      if (it == index.end()) fail(ErrorKind::DomainError, "boundary point not present in graph");
      out.insert(it->second);
    }
  }
  return {out.begin(), out.end()};
}

/// Vertex id whose coordinates match x, or -1.
inline int find_vertex(const ApproxGraph& g, const Eigen::VectorXd& x, double tol = 1e-9) {
  for (int i = 0; i < g.size(); ++i)
    if ((g.coords.row(i).transpose() - x).norm() <= tol) return i;
  return -1;
}

/// Indicator of a cell's vertices, used as a BV-like test function.
inline Eigen::VectorXd cell_indicator(const ApproxGraph& g, int cell) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(g.size());
  for (int v : g.cell_vertices.at(static_cast<std::size_t>(cell))) f(v) = 1.0;
  return f;
}

/// Union of the level-k cell with address prefix `word` (symbols 1..N).
inline Eigen::VectorXd subcell_indicator(const ApproxGraph& g, const std::vector<int>& word) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(g.size());
  for (std::size_t c = 0; c < g.cells.size(); ++c) {
    bool match = word.size() <= g.cells[c].word.size();
    for (std::size_t d = 0; match && d < word.size(); ++d) match = g.cells[c].word[d] == word[d];
    if (match)
      for (int v : g.cell_vertices[c]) f(v) = 1.0;
  }
  return f;
}

struct AhlforsProbe {
  double lower = 0.0;  // min of mu(B(i,r)) / r^{d_H}
  double upper = 0.0;  // max of the same ratio
  double ratio() const { return upper / lower; }
};

/// Two-sided volume growth constants over r in [L^{-m}, 1] (log grid of `n_radii` radii).
inline AhlforsProbe ahlfors_probe(const ApproxGraph& g, int n_radii = 9, int stride = 1) {
  const double d_h = g.model.hausdorff_dim;
  const double r_min = std::pow(static_cast<double>(g.model.length_factor), -g.level);
  AhlforsProbe out{std::numeric_limits<double>::infinity(), 0.0};
  for (int k = 0; k < n_radii; ++k) {
    const double r = r_min * std::pow(1.0 / r_min, n_radii == 1 ? 0.0 : static_cast<double>(k) / (n_radii - 1));
    for (int i = 0; i < g.size(); i += stride) {
      double mass = 0.0;
      for (int j = 0; j < g.size(); ++j)
        if (j == i || metric(g, i, j) < r) mass += g.measure(j);
      const double q = mass / std::pow(r, d_h);
      out.lower = std::min(out.lower, q);
      out.upper = std::max(out.upper, q);
    }
  }
  return out;
}

/// Cartesian product graph with product measure; coordinates are concatenated.
inline ApproxGraph product_graph(const ApproxGraph& a, const ApproxGraph& b, std::size_t cap = default_vertex_cap) {
  if (a.model.name != b.model.name || a.level != b.level)
    fail(ErrorKind::DomainError, "product graph needs two copies of the same model and level");
  const std::size_t n = static_cast<std::size_t>(a.size()) * static_cast<std::size_t>(b.size());
  if (n > cap) fail(ErrorKind::GraphTooLarge, std::to_string(n) + " product vertices exceed cap");
  ApproxGraph g;
  g.model = a.model;
  g.model.name = a.model.name + "^2";
  g.model.hausdorff_dim = a.model.hausdorff_dim + b.model.hausdorff_dim;
  g.model.symmetries.clear();
  g.level = a.level;
  const int na = a.size(), nb = b.size();
  g.coords.resize(static_cast<Eigen::Index>(n), a.coords.cols() + b.coords.cols());
  g.measure.resize(static_cast<Eigen::Index>(n));
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const int v = i * nb + j;
      g.coords.row(v) << a.coords.row(i), b.coords.row(j);
      g.measure(v) = a.measure(i) * b.measure(j);
    }
  for (int i = 0; i < na; ++i)
    for (const auto& [u, v] : b.edges) g.edges.push_back({i * nb + u, i * nb + v});
  for (const auto& [u, v] : a.edges)
    for (int j = 0; j < nb; ++j) g.edges.push_back({u * nb + j, v * nb + j});
  std::sort(g.edges.begin(), g.edges.end());
  g.neighbors.assign(n, {});
  for (const auto& [i, j] : g.edges) {
    g.neighbors[static_cast<std::size_t>(i)].push_back(j);
    g.neighbors[static_cast<std::size_t>(j)].push_back(i);
  }
  return g;
}

}  // namespace fractallab
