#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/IterativeLinearSolvers>

#include <cmath>
#include <queue>
#include <vector>

#include "fractal_geometry.hpp"

namespace fractallab {

// Renormalized graph energy with uniform conductance rho^m. Holds a non-owning graph pointer.
struct GraphEnergyForm {
  const ApproxGraph* graph = nullptr;
  double conductance = 1.0;
  int level = 0;
};

struct FunctionOnGraph {
  const ApproxGraph* graph = nullptr;
  Eigen::VectorXd values;
};

inline GraphEnergyForm make_form(const ApproxGraph& g) {
  return {&g, std::pow(g.model.resistance_factor, g.level), g.level};
}

inline double energy(const GraphEnergyForm& form, const FunctionOnGraph& f) {
  if (f.graph != form.graph || f.values.size() != form.graph->size())
    fail(ErrorKind::DomainError, "function lives on a different graph");
  double e = 0.0;
  for (const auto& [i, j] : form.graph->edges) {
    const double d = f.values(i) - f.values(j);
    e += d * d;
  }
  return form.conductance * e;
}

inline double energy(const GraphEnergyForm& form, const Eigen::VectorXd& f) {
  return energy(form, FunctionOnGraph{form.graph, f});
}

/// Stiffness matrix A with f^T A f = energy(f).
inline Eigen::SparseMatrix<double> stiffness(const GraphEnergyForm& form) {
  const int n = form.graph->size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(4 * form.graph->edges.size());
  for (const auto& [i, j] : form.graph->edges) {
    trip.emplace_back(i, i, form.conductance);
    trip.emplace_back(j, j, form.conductance);
    trip.emplace_back(i, j, -form.conductance);
    trip.emplace_back(j, i, -form.conductance);
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

/// Delta_m = -M^{-1} A, self-adjoint in the mu-weighted inner product.
inline Eigen::SparseMatrix<double> generator(const GraphEnergyForm& form) {
  const auto& mu = form.graph->measure;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    if (!(mu(i) > 0.0)) fail(ErrorKind::DegenerateMeasure, "vertex " + std::to_string(i) + " has zero measure");
  Eigen::SparseMatrix<double> D = stiffness(form);
  for (int k = 0; k < D.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(D, k); it; ++it) it.valueRef() = -it.value() / mu(it.row());
  return D;
}

/// Energy minimizing extension of boundary data given on the vertex ids `boundary`.
inline FunctionOnGraph harmonic_extension(const GraphEnergyForm& form, const std::vector<int>& boundary,
                                          const Eigen::VectorXd& values) {
  const auto& g = *form.graph;
  const int n = g.size();
  if (static_cast<Eigen::Index>(boundary.size()) != values.size() || boundary.empty())
    fail(ErrorKind::DomainError, "boundary ids and values differ in length");
  std::vector<int> slot(static_cast<std::size_t>(n), -1);
  std::vector<char> is_b(static_cast<std::size_t>(n), 0);
  for (int b : boundary) {
    if (b < 0 || b >= n) fail(ErrorKind::DomainError, "boundary vertex out of range");
    is_b[static_cast<std::size_t>(b)] = 1;
  }
  // every interior vertex must see the boundary, otherwise the system is singular
  {
    std::vector<char> seen(is_b);
    std::queue<int> q;
    for (int b : boundary) q.push(b);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : g.neighbors[static_cast<std::size_t>(u)])
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          q.push(v);
        }
    }
    for (int i = 0; i < n; ++i)
      if (!seen[static_cast<std::size_t>(i)]) fail(ErrorKind::ExtensionFailure, "interior component without boundary");
  }
  int ni = 0;
  for (int i = 0; i < n; ++i)
    if (!is_b[static_cast<std::size_t>(i)]) slot[static_cast<std::size_t>(i)] = ni++;

  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < boundary.size(); ++k) u(boundary[k]) = values(static_cast<Eigen::Index>(k));
  if (ni == 0) return {&g, u};

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ni);
  for (const auto& [i, j] : g.edges) {
    const int si = slot[static_cast<std::size_t>(i)], sj = slot[static_cast<std::size_t>(j)];
    if (si >= 0) trip.emplace_back(si, si, 1.0);
    if (sj >= 0) trip.emplace_back(sj, sj, 1.0);
    if (si >= 0 && sj >= 0) {
      trip.emplace_back(si, sj, -1.0);
      trip.emplace_back(sj, si, -1.0);
    } else if (si >= 0) {
      rhs(si) += u(j);
    } else if (sj >= 0) {
      rhs(sj) += u(i);
    }
  }
  Eigen::SparseMatrix<double> A(ni, ni);
  A.setFromTriplets(trip.begin(), trip.end());

  Eigen::VectorXd x;
  if (n <= 3000) {
    Eigen::SimplicialLLT<Eigen::SparseMatrix<double>> chol(A);
    if (chol.info() != Eigen::Success) fail(ErrorKind::ExtensionFailure, "Cholesky factorization failed");
    x = chol.solve(rhs);
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<double>>
        cg;
    cg.setTolerance(1e-13);
    cg.setMaxIterations(20 * ni);
    cg.compute(A);
    x = cg.solve(rhs);
    if (cg.info() != Eigen::Success) fail(ErrorKind::ExtensionFailure, "CG did not converge");
  }
  const double scale = std::max(1.0, rhs.norm());
  if (!((A * x - rhs).norm() <= 1e-10 * scale)) fail(ErrorKind::ExtensionFailure, "residual above 1e-10");
  for (int i = 0; i < n; ++i)
    if (slot[static_cast<std::size_t>(i)] >= 0) u(i) = x(slot[static_cast<std::size_t>(i)]);
  return {&g, u};
}

/// Harmonic extension of data given on the level-k corner set V_k.
inline FunctionOnGraph harmonic_extension_from_level(const GraphEnergyForm& form, int k, const Eigen::VectorXd& data) {
  return harmonic_extension(form, level_vertices(*form.graph, k), data);
}

/// Vicsek function: linear along the diagonal x1 -> x3, constant on every branch hanging off it.
inline FunctionOnGraph vicsek_harmonic_0(const ApproxGraph& g, double a, double b) {
  if (g.model.name != "vicsek") fail(ErrorKind::DomainError, "vicsek_harmonic_0 needs a vicsek graph");
  const int n = g.size();
  const double tol = 1e-9 * std::pow(3.0, -g.level);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  std::vector<char> done(static_cast<std::size_t>(n), 0);
  std::queue<int> q;
  for (int i = 0; i < n; ++i)
    if (std::abs(g.coords(i, 0) - g.coords(i, 1)) < tol) {
      h(i) = a + (b - a) * g.coords(i, 0);
      done[static_cast<std::size_t>(i)] = 1;
      q.push(i);
    }
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : g.neighbors[static_cast<std::size_t>(u)])
      if (!done[static_cast<std::size_t>(v)]) {
        h(v) = h(u);
        done[static_cast<std::size_t>(v)] = 1;
        q.push(v);
      }
  }
  return {&g, h};
}

}  // namespace fractallab
