#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "error.hpp"

namespace fractallab {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::vector<double> residuals;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) fail(ErrorKind::InsufficientGrid, "least squares needs at least two samples");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorKind::InsufficientGrid, "degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  fit.residuals.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    fit.residuals[k] = y[k] - (fit.intercept + fit.slope * x[k]);
    ss += fit.residuals[k] * fit.residuals[k];
  }
  fit.slope_stderr = n > 2 ? std::sqrt(ss / static_cast<double>(n - 2) / sxx) : 0.0;
  return fit;
}

/// Log-spaced grid from a to b inclusive with about `per_decade` points per decade.
inline std::vector<double> log_grid(double a, double b, int per_decade = 24) {
  if (!(a > 0.0) || !(b > a) || per_decade < 1) fail(ErrorKind::DomainError, "log grid needs 0 < a < b");
  const int steps = std::max(1, static_cast<int>(std::lround(std::log10(b / a) * per_decade)));
  std::vector<double> out(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) out[static_cast<std::size_t>(k)] = a * std::pow(b / a, static_cast<double>(k) / steps);
  out.back() = b;
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// max/median over the finite entries; infinity when anything is non-finite.
inline double spread(const std::vector<double>& v) {
  double mx = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
    mx = std::max(mx, x);
  }
  const double md = median(v);
  if (mx == 0.0) return 1.0;
  return md > 0.0 ? mx / md : std::numeric_limits<double>::infinity();
}

/// max(a,b)/min(a,b), the drift between two levels.
inline double drift(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) return std::numeric_limits<double>::infinity();
  return std::max(a, b) / std::min(a, b);
}

}  // namespace fractallab
