#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <lapacke.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "dirichlet_form.hpp"
#include "fitting.hpp"
#include "report.hpp"

namespace fractallab {

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // of -Delta, ascending, eigenvalues(0) == 0
  Eigen::MatrixXd eigenvectors;  // columns, orthonormal in the mu inner product
  Eigen::VectorXd measure;
  int size() const { return static_cast<int>(measure.size()); }
};

struct HeatKernelGrid {
  double t = 0.0;
  Eigen::MatrixXd values;
  Eigen::VectorXd measure;
};

struct TimeWindow {
  double t_min = 0.0;
  double t_max = 0.0;
  std::string kind;
};

namespace detail {

inline void dense_eigensolve(Eigen::MatrixXd& a, Eigen::VectorXd& w) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(n);
  if (n == 0) return;
  // probe A x = W diag(w) W^T x with Eigen's own products, independent of the BLAS in use
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(n, -1.0, 1.0).array().sin();
  const Eigen::VectorXd ax = a.selfadjointView<Eigen::Lower>().toDenseMatrix().lazyProduct(x);
  const double anorm = a.cwiseAbs().maxCoeff() * n;
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, w.data());
  if (info != 0) fail(ErrorKind::SpectralFailure, "dsyevd returned " + std::to_string(info));
  const Eigen::VectorXd c = a.transpose().lazyProduct(x);
  const Eigen::VectorXd back = a.lazyProduct(c);
  const Eigen::VectorXd rec = a.lazyProduct(w.cwiseProduct(c));
  if ((back - x).norm() > 1e-8 * x.norm() || (rec - ax).norm() > 1e-8 * anorm * x.norm())
    fail(ErrorKind::SpectralFailure, "dense eigensolver returned inconsistent eigenpairs (broken BLAS kernel?)");
}

inline std::vector<int> compose(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[static_cast<std::size_t>(b[i])];
  return c;
}

// Orthonormal basis of the isotypic component for character `chi` of the group
// generated by commuting involutions; group element e (bitmask) acts as perms[e].
inline Eigen::SparseMatrix<double> isotypic_basis(const std::vector<std::vector<int>>& perms, unsigned chi, int n) {
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  int col = 0;
  std::vector<std::pair<int, double>> entries;
  for (int v = 0; v < n; ++v) {
    if (seen[static_cast<std::size_t>(v)]) continue;
    entries.clear();
    for (unsigned e = 0; e < perms.size(); ++e) {
      const int w = perms[e][static_cast<std::size_t>(v)];
      seen[static_cast<std::size_t>(w)] = 1;
      const double sign = (std::popcount(chi & e) % 2) ? -1.0 : 1.0;
      auto it = std::find_if(entries.begin(), entries.end(), [w](const auto& x) { return x.first == w; });
      if (it == entries.end()) entries.emplace_back(w, sign);
      else it->second += sign;
    }
    double norm = 0.0;
    for (const auto& [w, c] : entries) norm += c * c;
    if (norm < 0.5) continue;  // character not trivial on the stabilizer
    norm = std::sqrt(norm);
    std::sort(entries.begin(), entries.end());
    for (const auto& [w, c] : entries)
      if (c != 0.0) trip.emplace_back(w, col, c / norm);
    ++col;
  }
  Eigen::SparseMatrix<double> q(n, col);
  q.setFromTriplets(trip.begin(), trip.end());
  return q;
}

}  // namespace detail

/// Eigenpairs of -Delta via S = M^{1/2}(-Delta)M^{-1/2}; vertex permutations commuting with
/// Delta (commuting involutions) split S into independent blocks.
inline SpectralDecomposition decompose(const Eigen::SparseMatrix<double>& delta, const Eigen::VectorXd& mu,
                                       const std::vector<std::vector<int>>& symmetries = {}) {
  const int n = static_cast<int>(mu.size());
  if (delta.rows() != n || delta.cols() != n) fail(ErrorKind::DomainError, "generator and measure sizes differ");
  for (int i = 0; i < n; ++i)
    if (!(mu(i) > 0.0)) fail(ErrorKind::DegenerateMeasure, "zero measure vertex");
  const Eigen::VectorXd sq = mu.cwiseSqrt();
  Eigen::SparseMatrix<double> S = delta;
  for (int k = 0; k < S.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(S, k); it; ++it)
      it.valueRef() = -sq(it.row()) * it.value() / sq(it.col());
  const double snorm = S.norm();
  {
    Eigen::SparseMatrix<double> St = S.transpose();
    if ((S - St).norm() > 1e-12 * snorm) fail(ErrorKind::DomainError, "generator is not mu-self-adjoint");
  }

  // verify the symmetries: involutions, commuting, preserving S
  std::vector<std::vector<int>> gens;
  for (const auto& p : symmetries) {
    if (static_cast<int>(p.size()) != n) fail(ErrorKind::DomainError, "symmetry size mismatch");
    if (detail::compose(p, p) != [&] { std::vector<int> id(static_cast<std::size_t>(n)); std::iota(id.begin(), id.end(), 0); return id; }())
      fail(ErrorKind::DomainError, "symmetry is not an involution");
    for (int k = 0; k < S.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(S, k); it; ++it) {
        const double img = S.coeff(p[static_cast<std::size_t>(it.row())], p[static_cast<std::size_t>(it.col())]);
        if (std::abs(img - it.value()) > 1e-12 * std::abs(it.value()))
          fail(ErrorKind::DomainError, "permutation does not commute with the generator");
      }
    for (const auto& q : gens)
      if (detail::compose(p, q) != detail::compose(q, p)) fail(ErrorKind::DomainError, "symmetries do not commute");
    gens.push_back(p);
  }
  const unsigned n_elems = 1u << gens.size();
  std::vector<std::vector<int>> elems(n_elems);
  elems[0].resize(static_cast<std::size_t>(n));
  std::iota(elems[0].begin(), elems[0].end(), 0);
  for (unsigned e = 1; e < n_elems; ++e) {
    const unsigned low = static_cast<unsigned>(std::countr_zero(e));
    elems[e] = detail::compose(gens[low], elems[e & (e - 1)]);
  }

  struct Block {
    Eigen::SparseMatrix<double> q;
    Eigen::MatrixXd w;
    Eigen::VectorXd lam;
  };
  std::vector<Block> blocks;
  int total = 0;
  for (unsigned chi = 0; chi < n_elems; ++chi) {
    Block b;
    b.q = detail::isotypic_basis(elems, chi, n);
    if (b.q.cols() == 0) continue;
    Eigen::SparseMatrix<double> sq_c = b.q.transpose() * (S * b.q);
    b.w = Eigen::MatrixXd(sq_c);
    b.w = 0.5 * (b.w + b.w.transpose()).eval();
    detail::dense_eigensolve(b.w, b.lam);
    total += static_cast<int>(b.q.cols());
    blocks.push_back(std::move(b));
  }
  if (total != n) fail(ErrorKind::SpectralFailure, "symmetry blocks do not span the space");

  std::vector<std::tuple<double, int, int>> order;
  order.reserve(static_cast<std::size_t>(n));
  for (int b = 0; b < static_cast<int>(blocks.size()); ++b)
    for (int k = 0; k < blocks[static_cast<std::size_t>(b)].lam.size(); ++k)
      order.emplace_back(blocks[static_cast<std::size_t>(b)].lam(k), b, k);
  std::sort(order.begin(), order.end());

  SpectralDecomposition s;
  s.measure = mu;
  s.eigenvalues.resize(n);
  s.eigenvectors.resize(n, n);
  const Eigen::VectorXd isq = sq.cwiseInverse();
  for (int c = 0; c < n; ++c) {
    const auto& [lam, b, k] = order[static_cast<std::size_t>(c)];
    const auto& blk = blocks[static_cast<std::size_t>(b)];
    s.eigenvalues(c) = lam;
    Eigen::VectorXd u = blk.q * blk.w.col(k);
    u = u.cwiseProduct(isq);
    Eigen::Index arg = 0;
    u.cwiseAbs().maxCoeff(&arg);
    if (u(arg) < 0.0) u = -u;
    s.eigenvectors.col(c) = u;
  }
  const double lam_max = s.eigenvalues(n - 1);
  if (std::abs(s.eigenvalues(0)) > 1e-8 * std::max(1.0, lam_max)) fail(ErrorKind::SpectralFailure, "lowest eigenvalue is not zero");
  if (n > 1 && !(s.eigenvalues(1) > 1e-9 * lam_max)) fail(ErrorKind::SpectralFailure, "zero eigenvalue is not simple");
  s.eigenvalues(0) = 0.0;
  s.eigenvectors.col(0).setConstant(1.0 / std::sqrt(mu.sum()));
  return s;
}

inline SpectralDecomposition decompose(const GraphEnergyForm& form) {
  return decompose(generator(form), form.graph->measure, form.graph->automorphisms);
}

/// max |<phi_i, phi_j>_mu - delta_ij|
inline double orthonormality_error(const SpectralDecomposition& s) {
  Eigen::MatrixXd g = s.eigenvectors.transpose() * s.measure.asDiagonal() * s.eigenvectors;
  g.diagonal().array() -= 1.0;
  return g.cwiseAbs().maxCoeff();
}

/// ||Delta - sum(-lambda_j) phi_j phi_j^T M|| / ||Delta|| in the Frobenius norm.
inline double reconstruction_error(const SpectralDecomposition& s, const Eigen::SparseMatrix<double>& delta) {
  Eigen::MatrixXd r = -(s.eigenvectors * s.eigenvalues.asDiagonal() * s.eigenvectors.transpose()) * s.measure.asDiagonal();
  Eigen::MatrixXd d(delta);
  return (r - d).norm() / d.norm();
}

/// Number of leading modes with exp(-lambda t) above 1e-280. The rest contribute below double
/// precision and would only produce subnormal arithmetic.
inline Eigen::Index active_modes(const SpectralDecomposition& s, double t) {
  const double cut = 280.0 * std::log(10.0);
  Eigen::Index k = s.size();
  while (k > 1 && s.eigenvalues(k - 1) * t > cut) --k;
  return k;
}

inline Eigen::VectorXd spectral_coefficients(const SpectralDecomposition& s, const Eigen::VectorXd& f) {
  if (f.size() != s.size()) fail(ErrorKind::DomainError, "function size does not match spectrum");
  return s.eigenvectors.transpose() * s.measure.cwiseProduct(f);
}

inline Eigen::VectorXd semigroup_apply(const SpectralDecomposition& s, const Eigen::VectorXd& f, double t) {
  if (!(t >= 0.0)) fail(ErrorKind::DomainError, "semigroup time must be nonnegative");
  if (t == 0.0) {
    if (f.size() != s.size()) fail(ErrorKind::DomainError, "function size does not match spectrum");
    return f;
  }
  const Eigen::Index k = active_modes(s, t);
  Eigen::VectorXd a = s.eigenvectors.leftCols(k).transpose() * s.measure.cwiseProduct(f);
  a.array() *= (-s.eigenvalues.head(k).array() * t).exp();
  return s.eigenvectors.leftCols(k) * a;
}

inline FunctionOnGraph semigroup_apply(const SpectralDecomposition& s, const FunctionOnGraph& f, double t) {
  return {f.graph, semigroup_apply(s, f.values, t)};
}

/// p_t = Phi diag(exp(-lambda t)) Phi^T, assembled as B B^T so it is exactly symmetric.
inline HeatKernelGrid heat_kernel(const SpectralDecomposition& s, double t) {
  if (!(t > 0.0)) fail(ErrorKind::DomainError, "heat kernel time must be positive");
  const int n = s.size();
  const Eigen::Index m = active_modes(s, t);
  Eigen::MatrixXd b = s.eigenvectors.leftCols(m) * (-0.5 * t * s.eigenvalues.head(m).array()).exp().matrix().asDiagonal();
  HeatKernelGrid k;
  k.t = t;
  k.measure = s.measure;
  k.values = Eigen::MatrixXd::Zero(n, n);
  k.values.selfadjointView<Eigen::Lower>().rankUpdate(b);
  k.values.triangularView<Eigen::StrictlyUpper>() = k.values.transpose();
  return k;
}

/// p_t(i,i) for all i.
inline Eigen::VectorXd kernel_diagonal(const SpectralDecomposition& s, double t) {
  const Eigen::Index k = active_modes(s, t);
  const Eigen::VectorXd e = (-t * s.eigenvalues.head(k).array()).exp().matrix();
  return s.eigenvectors.leftCols(k).cwiseAbs2() * e;
}

/// sup_{i,j} p_t(i,j) = max_i p_t(i,i) since p_t(i,j)^2 <= p_t(i,i) p_t(j,j).
inline double kernel_sup(const SpectralDecomposition& s, double t) { return kernel_diagonal(s, t).maxCoeff(); }

/// Rows p_t(i, .) for the listed vertices, one column per vertex.
inline Eigen::MatrixXd kernel_rows(const SpectralDecomposition& s, const std::vector<int>& rows, double t) {
  const Eigen::Index m = active_modes(s, t);
  const Eigen::VectorXd e = (-t * s.eigenvalues.head(m).array()).exp().matrix();
  Eigen::MatrixXd c(m, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k)
    c.col(static_cast<Eigen::Index>(k)) = s.eigenvectors.row(rows[k]).head(m).transpose().cwiseProduct(e);
  return s.eigenvectors.leftCols(m) * c;
}

inline Eigen::VectorXd fractional_apply(const SpectralDecomposition& s, const Eigen::VectorXd& f, double alpha) {
  if (!(alpha > 0.0)) fail(ErrorKind::DomainError, "fractional power must be positive");
  Eigen::VectorXd a = spectral_coefficients(s, f);
  a(0) = 0.0;
  for (int j = 1; j < s.size(); ++j) a(j) *= std::pow(s.eigenvalues(j), alpha);
  return s.eigenvectors * a;
}

/// Tensor product spectrum; vertex (a, b) of the product has index a * n2 + b.
inline SpectralDecomposition product_decomposition(const SpectralDecomposition& s1, const SpectralDecomposition& s2,
                                                   std::size_t cap = default_vertex_cap) {
  const int n1 = s1.size(), n2 = s2.size();
  const std::size_t n = static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2);
  if (n > cap) fail(ErrorKind::GraphTooLarge, std::to_string(n) + " product vertices exceed cap");
  std::vector<std::tuple<double, int, int>> order;
  order.reserve(n);
  for (int i = 0; i < n1; ++i)
    for (int j = 0; j < n2; ++j) order.emplace_back(s1.eigenvalues(i) + s2.eigenvalues(j), i, j);
  std::sort(order.begin(), order.end());
  SpectralDecomposition s;
  const auto N = static_cast<Eigen::Index>(n);
  s.eigenvalues.resize(N);
  s.eigenvectors.resize(N, N);
  s.measure.resize(N);
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < n2; ++b) s.measure(a * n2 + b) = s1.measure(a) * s2.measure(b);
  for (Eigen::Index c = 0; c < N; ++c) {
    const auto& [lam, i, j] = order[static_cast<std::size_t>(c)];
    s.eigenvalues(c) = lam;
    for (int a = 0; a < n1; ++a)
      s.eigenvectors.col(c).segment(a * n2, n2) = s1.eigenvectors(a, i) * s2.eigenvectors.col(j);
  }
  return s;
}

/// [5 tau^{-m}, (1/4)^{d_W}]; for fractal models the upper end is snapped to a whole number of
/// tau-periods above the lower end so fits average over the log-periodic oscillation.
inline TimeWindow resolved_window(const FractalModel& mdl, int m) {
  TimeWindow w;
  w.kind = "resolved";
  w.t_min = 5.0 * std::pow(mdl.time_factor, -m);
  w.t_max = std::pow(0.25, mdl.walk_dim);
  if (mdl.name.rfind("interval", 0) != 0) {
    const int periods = static_cast<int>(std::floor(std::log(w.t_max / w.t_min) / std::log(mdl.time_factor) + 1e-9));
    if (periods >= 1) w.t_max = w.t_min * std::pow(mdl.time_factor, periods);
  }
  if (!(w.t_max > w.t_min)) fail(ErrorKind::InsufficientGrid, "level too coarse for a resolved time window");
  return w;
}

/// Half decade far below 1/lambda_max where Psi_2(t)/t has reached its graph limit 2E.
inline TimeWindow graph_limit_window(const SpectralDecomposition& s) {
  TimeWindow w;
  w.kind = "graph-limit";
  w.t_min = 1e-3 / s.eigenvalues(s.size() - 1);
  w.t_max = w.t_min * std::sqrt(10.0);
  return w;
}

inline std::vector<double> window_grid(const TimeWindow& w, int per_decade = 24) {
  return log_grid(w.t_min, w.t_max, per_decade);
}

struct UltracontractivityFit {
  double c_h = 0.0;
  double beta = 0.0;
  double stderr_beta = 0.0;
  std::vector<double> t;
  std::vector<double> sup_kernel;
};

/// C_h = max_t t^beta sup p_t over the samples of a fit.
inline double ultracontractivity_constant(const UltracontractivityFit& fit, double beta) {
  double c = 0.0;
  for (std::size_t k = 0; k < fit.t.size(); ++k) c = std::max(c, std::pow(fit.t[k], beta) * fit.sup_kernel[k]);
  return c;
}

inline UltracontractivityFit ultracontractivity_fit(const SpectralDecomposition& s, const std::vector<double>& t_grid) {
  if (t_grid.size() < 4) fail(ErrorKind::InsufficientGrid, "ultracontractivity fit needs at least 4 times");
  UltracontractivityFit out;
  std::vector<double> lx, ly;
  for (double t : t_grid) {
    const double sup = kernel_sup(s, t);
    out.t.push_back(t);
    out.sup_kernel.push_back(sup);
    lx.push_back(std::log(t));
    ly.push_back(std::log(sup));
  }
  const auto fit = ols(lx, ly);
  out.beta = -fit.slope;
  out.stderr_beta = fit.slope_stderr;
  out.c_h = ultracontractivity_constant(out, out.beta);
  return out;
}

struct SubGaussianOptions {
  int max_rows = 48;
  int max_times = 16;
  double resolve = 1e-10;  // kernel entries below resolve * sup are ignored
  std::vector<double> harnack_c{1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
  std::vector<double> kappas{1.0, 2.0};
  double spread_limit = 1e3;
};

/// Feasible two-sided sub-Gaussian constants and weak Harnack constants over sampled (i, j, t).
inline InequalityReport sub_gaussian_check(const ApproxGraph& g, const SpectralDecomposition& s,
                                           const std::vector<double>& t_grid, const SubGaussianOptions& opt = {}) {
  const int n = g.size();
  if (n != s.size()) fail(ErrorKind::DomainError, "graph and spectrum differ in size");
  if (t_grid.empty()) fail(ErrorKind::InsufficientGrid, "empty time grid");
  const double dw = g.model.walk_dim;
  std::vector<int> rows;
  const int stride = std::max(1, n / opt.max_rows);
  for (int i = 0; i < n; i += stride) rows.push_back(i);
  std::vector<double> times;
  const std::size_t tstride = std::max<std::size_t>(1, t_grid.size() / static_cast<std::size_t>(opt.max_times));
  for (std::size_t k = 0; k < t_grid.size(); k += tstride) times.push_back(t_grid[k]);

  // c2/c4 candidate grid for the exponential factor
  const auto cgrid = log_grid(1e-3, 1e1, 8);
  std::vector<double> lo(cgrid.size(), std::numeric_limits<double>::infinity()), hi(cgrid.size(), 0.0);
  std::vector<FunctionResult> harnack(opt.kappas.size());
  std::vector<std::vector<double>> hbest(opt.kappas.size(), std::vector<double>(opt.harnack_c.size(), 0.0));
  std::size_t used = 0, skipped = 0;
  double diag_c1 = std::numeric_limits<double>::infinity();
  for (double t : times) {
    const Eigen::MatrixXd kt = kernel_rows(s, rows, t);
    std::vector<Eigen::MatrixXd> kct;
    for (double c : opt.harnack_c) kct.push_back(c == 1.0 ? kt : kernel_rows(s, rows, c * t));
    const double sup = kernel_sup(s, t);
    const double rad = std::pow(t, 1.0 / dw);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const int i = rows[r];
      double vol = 0.0;
      for (int j = 0; j < n; ++j)
        if (j == i || metric(g, i, j) < rad) vol += g.measure(j);
      for (int j = 0; j < n; ++j) {
        const double p = kt(j, static_cast<Eigen::Index>(r));
        if (!(p > opt.resolve * sup)) {
          ++skipped;
          continue;
        }
        ++used;
        const double d = metric(g, i, j);
        const double ex = std::pow(std::pow(d, dw) / t, 1.0 / (dw - 1.0));
        const double vp = vol * p;
        if (i == j) diag_c1 = std::min(diag_c1, vp);
        for (std::size_t k = 0; k < cgrid.size(); ++k) {
          const double scaled = vp * std::exp(cgrid[k] * ex);
          lo[k] = std::min(lo[k], scaled);
          hi[k] = std::max(hi[k], scaled);
        }
        if (i == j) continue;
        for (std::size_t kk = 0; kk < opt.kappas.size(); ++kk) {
          const double kap = opt.kappas[kk];
          for (std::size_t cc = 0; cc < opt.harnack_c.size(); ++cc) {
            const double pc = kct[cc](j, static_cast<Eigen::Index>(r));
            const double ratio = pc > 0.0 ? std::pow(d, kap) * p / (std::pow(t, kap / dw) * pc)
                                          : std::numeric_limits<double>::infinity();
            hbest[kk][cc] = std::max(hbest[kk][cc], ratio);
          }
        }
      }
    }
  }

  InequalityReport rep;
  rep.inequality_id = "sub_gaussian";
  rep.model = g.model.name;
  rep.level = g.level;
  rep.exponents["d_W"] = dw;
  rep.exponents["d_H"] = g.model.hausdorff_dim;
  rep.window_min = t_grid.front();
  rep.window_max = t_grid.back();
  rep.window_kind = "resolved";
  rep.notes.push_back("kernel entries below " + std::to_string(opt.resolve) + " x sup ignored: " +
                      std::to_string(skipped) + " of " + std::to_string(used + skipped));

  FunctionResult two_sided;
  two_sided.function_id = "two_sided";
  double best = std::numeric_limits<double>::infinity();
  std::size_t bl = 0, bh = 0;
  for (std::size_t a = 0; a < cgrid.size(); ++a)      // c2 = cgrid[a]
    for (std::size_t b = 0; b <= a; ++b) {            // c4 = cgrid[b] <= c2
      if (!(lo[a] > 0.0) || !std::isfinite(hi[b])) continue;
      const double sp = hi[b] / lo[a];
      if (sp < best) {
        best = sp;
        bl = a;
        bh = b;
      }
    }
  two_sided.best_constant = best;
  two_sided.values = {best};
  two_sided.extras = {{"c1", lo[bl]}, {"c2", cgrid[bl]}, {"c3", hi[bh]}, {"c4", cgrid[bh]}, {"diagonal_c1", diag_c1}};
  two_sided.verdict = std::isfinite(best) && best < opt.spread_limit ? Verdict::Pass : Verdict::Fail;
  rep.results.push_back(two_sided);

  for (std::size_t kk = 0; kk < opt.kappas.size(); ++kk) {
    FunctionResult fr;
    fr.function_id = "weak_harnack_kappa" + std::to_string(static_cast<int>(opt.kappas[kk]));
    std::size_t arg = 0;
    for (std::size_t cc = 0; cc < opt.harnack_c.size(); ++cc)
      if (hbest[kk][cc] < hbest[kk][arg]) arg = cc;
    fr.best_constant = hbest[kk][arg];
    fr.grid = opt.harnack_c;
    fr.values = hbest[kk];
    fr.extras["c"] = opt.harnack_c[arg];
    fr.verdict = std::isfinite(fr.best_constant) ? Verdict::Pass : Verdict::Fail;
    rep.results.push_back(fr);
  }
  return rep;
}

/// Exact Hoelder bound of P_t over all f in L^inf:
/// t^{kappa/d_W} max_{i != j} ||p_t(i,.) - p_t(j,.)||_{L^1(mu)} / d(i,j)^kappa.
inline double semigroup_holder_bound(const ApproxGraph& g, const SpectralDecomposition& s, double t, double kappa) {
  const auto k = heat_kernel(s, t);
  const int n = g.size();
  double best = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double l1 = ((k.values.col(i) - k.values.col(j)).cwiseAbs().cwiseProduct(s.measure)).sum();
      best = std::max(best, l1 / std::pow(metric(g, i, j), kappa));
    }
  return std::pow(t, kappa / g.model.walk_dim) * best;
}

}  // namespace fractallab
