#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spectral_semigroup.hpp"

namespace fractallab {

struct BesovProfile {
  double p = 1.0;
  std::vector<double> t;
  std::vector<double> psi;  // Psi_p(t)^{1/p}
  Eigen::VectorXd f;
  TimeWindow window;
  std::string label;
};

struct ExponentEstimate {
  double p = 1.0;
  double alpha_hat = 0.0;
  double stderr_alpha = 0.0;
  TimeWindow window;
  std::vector<std::string> family;
  std::vector<double> slopes;  // NaN for constant members
  int argmax = -1;
};

struct VariationEstimate {
  double value = 0.0;           // min over the smallest half-decade
  double half_decade_sup = 0.0;  // max over the same samples
  double window_sup = 0.0;       // max over the whole window
};

namespace detail {

inline double abs_pow(double x, double p) {
  x = std::abs(x);
  if (p == 1.0) return x;
  if (p == 2.0) return x * x;
  if (p == 4.0) {
    const double y = x * x;
    return y * y;
  }
  return std::pow(x, p);
}

inline void check_function(const SpectralDecomposition& s, const Eigen::VectorXd& f) {
  if (f.size() != s.size()) fail(ErrorKind::DomainError, "function size does not match the decomposition");
}

inline bool is_constant(const Eigen::VectorXd& f) {
  if (f.size() == 0) return true;
  const double scale = std::max(f.cwiseAbs().maxCoeff(), 1e-300);
  return f.maxCoeff() - f.minCoeff() <= 1e-12 * scale;
}

/// Level sets of f, merging values within 1e-12 max|f| of the first value of a run.
inline std::vector<int> level_sets(const Eigen::VectorXd& f, std::vector<double>& values) {
  const int n = static_cast<int>(f.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return f(a) < f(b); });
  const double tol = 1e-12 * std::max(f.cwiseAbs().maxCoeff(), 1e-300);
  std::vector<int> label(static_cast<std::size_t>(n), -1);
  values.clear();
  double start = 0.0;
  for (int idx : order) {
    if (values.empty() || f(idx) - start > tol) {
      start = f(idx);
      values.push_back(f(idx));
    }
    label[static_cast<std::size_t>(idx)] = static_cast<int>(values.size()) - 1;
  }
  return label;
}

}  // namespace detail

/// c_k = phi_k^T M W M phi_k with W_ij = |f_i - f_j|^p, so that
/// sum_ij p_t(i,j)|f_i - f_j|^p mu_i mu_j = sum_k exp(-lambda_k t) c_k.
inline Eigen::VectorXd besov_coefficients(const SpectralDecomposition& s, const Eigen::VectorXd& f, double p) {
  detail::check_function(s, f);
  const Eigen::Index n = s.size();
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  if (detail::is_constant(f)) return c;
  if (p == 2.0) {
    // |f_i - f_j|^2 expands into rank-one pieces; phi_k is mean-zero for k >= 1
    const Eigen::VectorXd a = spectral_coefficients(s, f);
    c.tail(n - 1) = -2.0 * a.tail(n - 1).cwiseAbs2();
    c(0) = -c.tail(n - 1).sum();
    return c;
  }
  std::vector<double> v;
  const auto label = detail::level_sets(f, v);
  const auto kk = static_cast<Eigen::Index>(v.size());
  if (kk <= 2048) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(label[static_cast<std::size_t>(i)], i, s.measure(i));
    Eigen::SparseMatrix<double> agg(kk, n);
    agg.setFromTriplets(trip.begin(), trip.end());
    const Eigen::MatrixXd a = agg * s.eigenvectors;
    Eigen::MatrixXd d(kk, kk);
    for (Eigen::Index x = 0; x < kk; ++x)
      for (Eigen::Index y = 0; y < kk; ++y) d(x, y) = detail::abs_pow(v[static_cast<std::size_t>(x)] - v[static_cast<std::size_t>(y)], p);
    const Eigen::MatrixXd da = d * a;
    return a.cwiseProduct(da).colwise().sum().transpose();
  }
  const Eigen::Index bs = 256;
  for (Eigen::Index r0 = 0; r0 < n; r0 += bs) {
    const Eigen::Index nb = std::min(bs, n - r0);
    Eigen::MatrixXd w(nb, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < nb; ++i) w(i, j) = detail::abs_pow(f(r0 + i) - f(j), p) * s.measure(j);
    const Eigen::MatrixXd y = w * s.eigenvectors;
    const Eigen::MatrixXd x = s.measure.segment(r0, nb).asDiagonal() * s.eigenvectors.middleRows(r0, nb);
    c += x.cwiseProduct(y).colwise().sum().transpose();
  }
  return c;
}

/// Psi_p(t) from coefficients. The coefficients sum to zero, so the k = 0 term drops out and
/// expm1 keeps small t free of cancellation.
inline double besov_functional(const SpectralDecomposition& s, const Eigen::VectorXd& c, double t) {
  if (!(t >= 0.0)) fail(ErrorKind::DomainError, "time must be nonnegative");
  double acc = 0.0;
  for (Eigen::Index k = 1; k < s.size(); ++k) acc += std::expm1(-s.eigenvalues(k) * t) * c(k);
  return std::max(acc, 0.0);
}

/// Direct double sum sum_ij p_t(i,j) w(i,j) mu_i mu_j against an assembled kernel.
template <class PairWeight>
double kernel_pair_sum(const HeatKernelGrid& k, PairWeight&& w) {
  const Eigen::Index n = k.values.rows();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double col = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) col += k.values(i, j) * k.measure(i) * w(i, j);
    acc += col * k.measure(j);
  }
  return 2.0 * acc;
}

inline double besov_functional_quadrature(const HeatKernelGrid& k, const Eigen::VectorXd& f, double p) {
  if (f.size() != k.values.rows()) fail(ErrorKind::DomainError, "function size does not match the kernel");
  if (p < 1.0) fail(ErrorKind::DomainError, "p must be at least 1");
  return kernel_pair_sum(k, [&](Eigen::Index i, Eigen::Index j) { return detail::abs_pow(f(i) - f(j), p); });
}

/// 2 sum_j (1 - e^{-lambda_j t}) <f, phi_j>^2.
inline double besov_functional_spectral_p2(const SpectralDecomposition& s, const Eigen::VectorXd& f, double t) {
  detail::check_function(s, f);
  const Eigen::VectorXd a = spectral_coefficients(s, f);
  double acc = 0.0;
  for (Eigen::Index k = 1; k < s.size(); ++k) acc += -std::expm1(-s.eigenvalues(k) * t) * a(k) * a(k);
  return 2.0 * acc;
}

/// The profile window is the resolved window when the grid lies inside it, else the grid's own range.
inline BesovProfile besov_profile(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p,
                                  const std::vector<double>& t_grid, std::string label = {}) {
  if (p < 1.0) fail(ErrorKind::DomainError, "p must be at least 1");
  if (f.size() != g.size()) fail(ErrorKind::DomainError, "function size does not match the graph");
  if (t_grid.empty()) fail(ErrorKind::InsufficientGrid, "empty time grid");
  BesovProfile out;
  out.p = p;
  out.f = f;
  out.t = t_grid;
  out.label = std::move(label);
  const auto [lo, hi] = std::minmax_element(t_grid.begin(), t_grid.end());
  if (!(*lo > 0.0)) fail(ErrorKind::DomainError, "times must be positive");
  out.window = TimeWindow{*lo, *hi, "sampled"};
  try {
    const TimeWindow r = resolved_window(g.model, g.level);
    if (*lo >= r.t_min * (1 - 1e-9) && *hi <= r.t_max * (1 + 1e-9)) out.window = r;
  } catch (const Error&) {
  }
  const Eigen::VectorXd c = besov_coefficients(s, f, p);
  out.psi.reserve(t_grid.size());
  for (double t : t_grid) out.psi.push_back(std::pow(besov_functional(s, c, t), 1.0 / p));
  return out;
}

/// sup over samples with t < R of t^{-alpha} psi(t).
inline double seminorm(const BesovProfile& pr, double alpha, std::optional<double> r = std::nullopt) {
  if (!(alpha > 0.0)) fail(ErrorKind::DomainError, "alpha must be positive");
  double best = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < pr.t.size(); ++i) {
    if (r && !(pr.t[i] < *r)) continue;
    any = true;
    best = std::max(best, std::pow(pr.t[i], -alpha) * pr.psi[i]);
  }
  if (!any) fail(ErrorKind::InsufficientGrid, "no time samples below R");
  return best;
}

inline VariationEstimate p_variation(const BesovProfile& pr, double alpha_p) {
  if (!(alpha_p > 0.0)) fail(ErrorKind::DomainError, "alpha_p must be positive");
  const double lo = pr.window.t_min * (1 - 1e-9), hi = pr.window.t_max * (1 + 1e-9);
  const double half = pr.window.t_min * std::sqrt(10.0) * (1 + 1e-9);
  VariationEstimate v;
  v.value = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < pr.t.size(); ++i) {
    const double t = pr.t[i];
    if (t < lo || t > hi) continue;
    const double q = std::pow(t, -alpha_p) * pr.psi[i];
    v.window_sup = std::max(v.window_sup, q);
    if (t <= half) {
      any = true;
      v.value = std::min(v.value, q);
      v.half_decade_sup = std::max(v.half_decade_sup, q);
    }
  }
  if (!any) fail(ErrorKind::InsufficientGrid, "no samples in the first half-decade of the window");
  return v;
}

/// sum_i mu_i sum_{d(i,j)<r} |f_i - f_j|^p mu_j, optionally dividing the inner sum by mu(B(i,r)).
inline double ball_difference_sum(const ApproxGraph& g, const Eigen::VectorXd& f, double p, double r, bool normalize) {
  if (f.size() != g.size()) fail(ErrorKind::DomainError, "function size does not match the graph");
  if (!(r > 0.0)) fail(ErrorKind::DomainError, "radius must be positive");
  const int n = g.size();
  const int dim = static_cast<int>(g.coords.cols());
  const Eigen::MatrixXd xt = g.coords.transpose();
  const double r2 = r * r;
  Eigen::VectorXd inner = Eigen::VectorXd::Zero(n), vol = g.measure;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double d = xt(a, i) - xt(a, j);
        d2 += d * d;
      }
      if (d2 >= r2) continue;
      const double w = detail::abs_pow(f(i) - f(j), p);
      inner(i) += w * g.measure(j);
      inner(j) += w * g.measure(i);
      vol(i) += g.measure(j);
      vol(j) += g.measure(i);
    }
  }
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (normalize && !(vol(i) > 0.0)) fail(ErrorKind::DegenerateBall, "ball of zero measure");
    acc += g.measure(i) * (normalize ? inner(i) / vol(i) : inner(i));
  }
  return acc;
}

inline double korevaar_schoen(const ApproxGraph& g, const Eigen::VectorXd& f, double p, double alpha, double r) {
  if (p < 1.0) fail(ErrorKind::DomainError, "p must be at least 1");
  if (!(r > min_spacing(g))) fail(ErrorKind::DegenerateBall, "radius below the vertex spacing leaves every ball a single point");
  if (!(r < diameter(g))) fail(ErrorKind::DomainError, "radius must be below the diameter");
  return std::pow(r, -alpha * g.model.walk_dim) * std::pow(ball_difference_sum(g, f, p, r, true), 1.0 / p);
}

inline LinearFit profile_fit(const BesovProfile& pr) {
  std::vector<double> x, y;
  const double lo = pr.window.t_min * (1 - 1e-9), hi = pr.window.t_max * (1 + 1e-9);
  for (std::size_t i = 0; i < pr.t.size(); ++i) {
    if (pr.t[i] < lo || pr.t[i] > hi || !(pr.psi[i] > 0.0)) continue;
    x.push_back(std::log(pr.t[i]));
    y.push_back(std::log(pr.psi[i]));
  }
  return ols(x, y);
}

inline ExponentEstimate critical_exponent(const std::vector<BesovProfile>& family, double p) {
  ExponentEstimate e;
  e.p = p;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < family.size(); ++i) {
    const auto& pr = family[i];
    e.family.push_back(pr.label.empty() ? "f" + std::to_string(i) : pr.label);
    if (detail::is_constant(pr.f)) {
      e.slopes.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const LinearFit fit = profile_fit(pr);
    e.slopes.push_back(fit.slope);
    if (fit.slope > best) {
      best = fit.slope;
      e.argmax = static_cast<int>(i);
      e.alpha_hat = fit.slope;
      e.stderr_alpha = fit.slope_stderr;
      e.window = pr.window;
    }
  }
  if (e.argmax < 0) fail(ErrorKind::DegenerateFamily, "every profile in the family is constant");
  return e;
}

inline Eigen::VectorXd cutoff_family(const Eigen::VectorXd& f, double rho, int k) {
  if (!(rho > 1.0)) fail(ErrorKind::DomainError, "rho must exceed 1");
  if (f.size() > 0 && f.minCoeff() < 0.0) fail(ErrorKind::DomainError, "cutoff family needs f >= 0");
  const double lo = std::pow(rho, k), cap = lo * (rho - 1.0);
  return (f.array() - lo).cwiseMax(0.0).cwiseMin(cap).matrix();
}

inline FunctionOnGraph cutoff_family(const FunctionOnGraph& f, double rho, int k) {
  return FunctionOnGraph{f.graph, cutoff_family(f.values, rho, k)};
}

/// Band data for sum over k in Z of |f_{rho,k}(x) - f_{rho,k}(y)|^p. For values a < b the bands
/// strictly between the bands of a and b are covered whole, so their contribution is a geometric
/// sum; only the two end bands need the values themselves. With a = 0 every band below b is whole.
class CutoffBands {
 public:
  CutoffBands(const Eigen::VectorXd& f, double rho, double p) : rho_(rho), p_(p), c_(std::pow(rho - 1.0, p) / (std::pow(rho, p) - 1.0)) {
    if (!(rho > 1.0)) fail(ErrorKind::DomainError, "rho must exceed 1");
    const double lr = std::log(rho);
    const auto n = static_cast<std::size_t>(f.size());
    k_.resize(n);
    to_top_.resize(n);
    from_bottom_.resize(n);
    e_.resize(n);
    e_next_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = f(static_cast<Eigen::Index>(i));
      if (v < 0.0) fail(ErrorKind::DomainError, "cutoff family needs f >= 0");
      if (v == 0.0) {
        k_[i] = zero;
        continue;
      }
      long k = static_cast<long>(std::floor(std::log(v) / lr));
      while (std::pow(rho, static_cast<double>(k)) > v) --k;
      while (std::pow(rho, static_cast<double>(k + 1)) <= v) ++k;
      k_[i] = k;
      from_bottom_[i] = detail::abs_pow(v - std::pow(rho, static_cast<double>(k)), p);
      to_top_[i] = detail::abs_pow(std::pow(rho, static_cast<double>(k + 1)) - v, p);
      e_[i] = band_pow(k);
      e_next_[i] = band_pow(k + 1);
    }
    values_ = f;
  }

  double pair(Eigen::Index i, Eigen::Index j) const {
    auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
    if (values_(i) > values_(j)) std::swap(a, b);
    const double va = values_(static_cast<Eigen::Index>(a)), vb = values_(static_cast<Eigen::Index>(b));
    if (!(vb > va)) return 0.0;
    if (k_[a] == zero) return c_ * e_[b] + from_bottom_[b];
    if (k_[a] == k_[b]) return detail::abs_pow(vb - va, p_);
    return to_top_[a] + from_bottom_[b] + c_ * (e_[b] - e_next_[a]);
  }

 private:
  static constexpr long zero = std::numeric_limits<long>::min();
  double band_pow(long k) const { return std::pow(rho_, static_cast<double>(k) * p_); }

  double rho_, p_, c_;
  Eigen::VectorXd values_;
  std::vector<long> k_;
  std::vector<double> to_top_, from_bottom_, e_, e_next_;
};

inline double cutoff_pair_sum(double a, double b, double rho, double p) {
  Eigen::Vector2d v(a, b);
  return CutoffBands(v, rho, p).pair(0, 1);
}

/// LHS = sum_k Psi_p(t; f_{rho,k}) against RHS = 2(p+1) Psi_p(t; f) at the kernel's time.
/// The sum over k is taken in full, see CutoffBands.
inline FunctionResult cutoff_sum_result(const HeatKernelGrid& k, const Eigen::VectorXd& f, double p, double rho) {
  if (f.size() != k.values.rows()) fail(ErrorKind::DomainError, "function size does not match the kernel");
  if (f.size() > 0 && f.minCoeff() < 0.0) fail(ErrorKind::DomainError, "cutoff sum needs f >= 0");
  if (!(rho > 1.0)) fail(ErrorKind::DomainError, "rho must exceed 1");
  if (p < 1.0) fail(ErrorKind::DomainError, "p must be at least 1");
  const CutoffBands bands(f, rho, p);
  const double lhs = kernel_pair_sum(k, [&](Eigen::Index i, Eigen::Index j) { return bands.pair(i, j); });
  const double rhs = 2.0 * (p + 1.0) * besov_functional_quadrature(k, f, p);
  FunctionResult r;
  r.function_id = "cutoff_sum";
  r.grid = {k.t};
  const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.values = {ratio};
  r.best_constant = ratio;
  r.extras["lhs"] = lhs;
  r.extras["rhs"] = rhs;
  r.extras["rho"] = rho;
  r.verdict = lhs <= rhs ? Verdict::Pass : Verdict::Fail;
  return r;
}

inline InequalityReport cutoff_sum_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p,
                                         double rho, double t) {
  if (f.size() != g.size()) fail(ErrorKind::DomainError, "function size does not match the graph");
  InequalityReport rep;
  rep.inequality_id = "cutoff_sum";
  rep.model = g.model.name;
  rep.level = g.level;
  rep.p = p;
  rep.window_min = rep.window_max = t;
  rep.window_kind = "point";
  rep.results.push_back(cutoff_sum_result(heat_kernel(s, t), f, p, rho));
  return rep;
}

}  // namespace fractallab
