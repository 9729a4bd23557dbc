#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "besov_sobolev.hpp"
#include "exponents.hpp"

namespace fractallab {

struct TestFunction {
  std::string id;
  Eigen::VectorXd values;
};

inline constexpr double infinity = std::numeric_limits<double>::infinity();

/// (sum mu |f|^p)^{1/p}; p = infinity gives the max.
inline double lp_norm(const Eigen::VectorXd& mu, const Eigen::VectorXd& f, double p) {
  if (std::isinf(p)) return f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) acc += mu(i) * detail::abs_pow(f(i), p);
  return std::pow(acc, 1.0 / p);
}

/// Fixed per-model family: phi_1..phi_5, harmonic functions for three boundary data, two cell
/// indicators and the distance to the first corner. Functions are defined the same way at every
/// level so constants can be compared across m.
inline std::vector<TestFunction> test_family(const ApproxGraph& g, const SpectralDecomposition& s) {
  std::vector<TestFunction> out;
  for (int k = 1; k <= 5 && k < s.size(); ++k) out.push_back({"phi" + std::to_string(k), s.eigenvectors.col(k)});
  const auto form = make_form(g);
  const auto b = level_vertices(g, 0);
  const auto nb = static_cast<Eigen::Index>(b.size());
  for (int j = 0; j < 3; ++j) {
    Eigen::VectorXd data(nb);
    for (Eigen::Index i = 0; i < nb; ++i) data(i) = j == 0 ? (i == 0 ? 1.0 : 0.0) : j == 1 ? (i % 2 == 0 ? 1.0 : -1.0) : static_cast<double>(i * i) / static_cast<double>(nb);
    out.push_back({"harmonic" + std::to_string(j + 1), harmonic_extension(form, b, data).values});
  }
  if (g.model.name == "vicsek") out.push_back({"vicsek_h", vicsek_harmonic_0(g, 0.0, 1.0).values});
  if (g.level >= 1) {
    const int last = g.model.cell_count;
    out.push_back({"cell1", subcell_indicator(g, std::vector<int>{1})});
    out.push_back({"cell" + std::to_string(last), subcell_indicator(g, std::vector<int>{last})});
  }
  Eigen::VectorXd dist(g.size());
  for (int i = 0; i < g.size(); ++i) dist(i) = (g.coords.row(i) - g.coords.row(b[0])).norm();
  out.push_back({"distance", dist});
  return out;
}

/// p = 2 reaches its graph limit only far below 1/lambda_max; other p use the resolved window.
inline TimeWindow variation_window(const SpectralDecomposition& s, const ApproxGraph& g, double p) {
  return p == 2.0 ? graph_limit_window(s) : resolved_window(g.model, g.level);
}

inline VariationEstimate variation(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p, double alpha_p) {
  return p_variation(besov_profile(s, g, f, p, window_grid(variation_window(s, g, p))), alpha_p);
}

namespace detail {

inline InequalityReport new_report(const std::string& id, const ApproxGraph& g, double p) {
  InequalityReport r;
  r.inequality_id = id;
  r.model = g.model.name;
  r.level = g.level;
  r.p = p;
  return r;
}

inline void set_window(InequalityReport& r, const std::vector<double>& grid, const std::string& kind) {
  if (grid.empty()) return;
  r.window_min = *std::min_element(grid.begin(), grid.end());
  r.window_max = *std::max_element(grid.begin(), grid.end());
  r.window_kind = kind;
}

inline void record_alpha(InequalityReport& r, const std::string& model, double p, const std::string& key = "alpha_p") {
  const Flagged a = alpha_p(model, p);
  r.exponents[key] = a.value;
  r.provenance[key] = to_string(a.provenance);
}

inline double nonconstant_variation(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p, double alpha) {
  if (detail::is_constant(f)) fail(ErrorKind::DegenerateFunction, "function is constant");
  const double v = variation(s, g, f, p, alpha).value;
  if (!(v > 0.0)) fail(ErrorKind::DegenerateFunction, "p-variation vanishes on the sampled window");
  return v;
}

inline std::vector<double> default_grid(const ApproxGraph& g) { return window_grid(resolved_window(g.model, g.level)); }

/// max over pairs with 0 < d(i,j) < r_max of |f_i - f_j| / d(i,j)^lambda.
inline double holder_sup(const ApproxGraph& g, const Eigen::VectorXd& f, double lambda, double r_max = infinity) {
  const int n = g.size();
  const int dim = static_cast<int>(g.coords.cols());
  const Eigen::MatrixXd xt = g.coords.transpose();
  const double r2 = r_max * r_max;
  double best = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int i = j + 1; i < n; ++i) {
      const double df = std::abs(f(i) - f(j));
      if (df == 0.0) continue;
      double d2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        const double d = xt(a, i) - xt(a, j);
        d2 += d * d;
      }
      if (d2 >= r2 || d2 == 0.0) continue;
      best = std::max(best, df / std::pow(d2, 0.5 * lambda));
    }
  }
  return best;
}

}  // namespace detail

/// C_p(t) = ||P_t f - f||_p / (t^alpha Var_p(f)) per time; pass iff finite and max/median < 10.
inline InequalityReport ppi_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p, double alpha,
                                  std::vector<double> t_grid = {}, const std::string& id = "f") {
  if (!(p >= 1.0)) fail(ErrorKind::DomainError, "p must be at least 1");
  if (t_grid.empty()) t_grid = detail::default_grid(g);
  const double var = detail::nonconstant_variation(s, g, f, p, alpha);
  auto rep = detail::new_report("ppi", g, p);
  rep.exponents["alpha_p"] = alpha;
  detail::set_window(rep, t_grid, "time");
  FunctionResult r;
  r.function_id = id;
  r.grid = t_grid;
  for (double t : t_grid) r.values.push_back(lp_norm(g.measure, semigroup_apply(s, f, t) - f, p) / (std::pow(t, alpha) * var));
  r.extras["variation"] = var;
  settle(r);
  rep.results.push_back(std::move(r));
  if (p > 2.0 && g.model.name == "vicsek") rep.notes.push_back("PPI_p for p > 2 on this model is measured only; no theorem backs it");
  return rep;
}

/// t^{1 - alpha_p} ||P_t f||_{q, alpha_q} / ||f||_q with 1/p + 1/q = 1. The Besov norm is a sup over
/// s from the graph limit up to the top of the resolved window.
inline InequalityReport gq_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double q,
                                 std::vector<double> t_grid = {}, const std::string& id = "f") {
  if (!(q > 1.0)) fail(ErrorKind::DomainError, "q must exceed 1");
  if (t_grid.empty()) t_grid = detail::default_grid(g);
  const double p = q / (q - 1.0);
  const double ap = alpha_p(g.model.name, p).value, aq = alpha_p(g.model.name, q).value;
  auto rep = detail::new_report("gq", g, p);
  detail::record_alpha(rep, g.model.name, p);
  detail::record_alpha(rep, g.model.name, q, "alpha_q");
  rep.exponents["q"] = q;
  detail::set_window(rep, t_grid, "time");
  const auto s_grid = log_grid(graph_limit_window(s).t_min, resolved_window(g.model, g.level).t_max, 8);
  const double fq = lp_norm(g.measure, f, q);
  FunctionResult r;
  r.function_id = id;
  r.grid = t_grid;
  for (double t : t_grid) {
    if (!(fq > 0.0)) {
      r.values.push_back(0.0);
      continue;
    }
    const auto pr = besov_profile(s, g, semigroup_apply(s, f, t), q, s_grid);
    r.values.push_back(std::pow(t, 1.0 - ap) * seminorm(pr, aq) / fq);
  }
  settle(r);
  rep.results.push_back(std::move(r));
  return rep;
}

/// sup over pairs of |P_t f(i) - P_t f(j)| t^{kappa_t} / (d^{kappa_d} ||f||_inf), one value per t.
/// Defaults: kappa_d = d_W - d_H and kappa_t = 1 - alpha_1.
inline InequalityReport bakry_emery_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f,
                                          std::vector<double> t_grid = {}, std::optional<double> kappa_d = std::nullopt,
                                          std::optional<double> kappa_t = std::nullopt, const std::string& id = "f") {
  const double sup = lp_norm(g.measure, f, infinity);
  if (!(sup > 0.0)) fail(ErrorKind::DegenerateFunction, "function vanishes identically");
  if (t_grid.empty()) t_grid = detail::default_grid(g);
  const auto d = dimensions(g.model.name);
  const double a1 = alpha_p(g.model.name, 1.0).value;
  const double kd = kappa_d.value_or(d.d_w * (1.0 - a1)), kt = kappa_t.value_or(1.0 - a1);
  auto rep = detail::new_report("bakry_emery", g, infinity);
  detail::record_alpha(rep, g.model.name, 1.0, "alpha_1");
  rep.exponents["kappa_d"] = kd;
  rep.exponents["kappa_t"] = kt;
  detail::set_window(rep, t_grid, "time");
  FunctionResult r;
  r.function_id = id;
  r.grid = t_grid;
  // P_t fixes constants; skip the round-off of the spectral sum
  const bool flat = detail::is_constant(f);
  for (double t : t_grid) r.values.push_back(flat ? 0.0 : std::pow(t, kt) * detail::holder_sup(g, semigroup_apply(s, f, t), kd) / sup);
  settle(r);
  rep.results.push_back(std::move(r));
  return rep;
}

struct GnInputs {
  double beta = 0.0;  // d_H / d_W from the calculator
  double c_h = 0.0;   // max over the resolved window of t^beta sup p_t
  double alpha = 0.0;
  double q = 0.0;
};

inline GnInputs gn_inputs(const SpectralDecomposition& s, const ApproxGraph& g, double p) {
  GnInputs in;
  const auto d = dimensions(g.model.name);
  in.beta = d.d_h / d.d_w;
  in.alpha = alpha_p(g.model.name, p).value;
  in.q = gn_exponents(p, in.alpha, in.beta).q;
  in.c_h = ultracontractivity_constant(ultracontractivity_fit(s, detail::default_grid(g)), in.beta);
  return in;
}

/// c_p = ||f||_q / (C_p^{b} C_h^{a} Var^{b} ||f||_1^{a}), a = alpha/(beta+alpha), b = beta/(beta+alpha).
/// C_p is the largest PPI constant over the family, standing in for the uniform constant.
/// Each function passes iff c_p is finite and its PPI ratios are stable over the window; the
/// "family" result holds all c_p and passes iff they agree to within max/median < 10.
inline InequalityReport gn_check(const SpectralDecomposition& s, const ApproxGraph& g, const std::vector<TestFunction>& family, double p) {
  const GnInputs in = gn_inputs(s, g, p);
  auto rep = detail::new_report("gn", g, p);
  detail::record_alpha(rep, g.model.name, p);
  rep.exponents["beta"] = in.beta;
  rep.exponents["q"] = in.q;
  rep.exponents["C_h"] = in.c_h;
  const auto grid = detail::default_grid(g);
  detail::set_window(rep, grid, "time");
  std::vector<InequalityReport> ppi;
  double cp = 0.0;
  for (const auto& f : family) {
    ppi.push_back(ppi_check(s, g, f.values, p, in.alpha, grid, f.id));
    cp = std::max(cp, ppi.back().results[0].best_constant);
  }
  rep.exponents["C_p"] = cp;
  const double a = in.alpha / (in.beta + in.alpha), b = in.beta / (in.beta + in.alpha);
  FunctionResult fam;
  fam.function_id = "family";
  for (std::size_t k = 0; k < family.size(); ++k) {
    const auto& f = family[k].values;
    const double var = ppi[k].results[0].extras.at("variation");
    const double c = lp_norm(g.measure, f, in.q) / (std::pow(cp, b) * std::pow(in.c_h, a) * std::pow(var, b) * std::pow(lp_norm(g.measure, f, 1.0), a));
    FunctionResult r;
    r.function_id = family[k].id;
    r.values = {c};
    r.best_constant = c;
    r.extras["variation"] = var;
    r.extras["ppi_constant"] = ppi[k].results[0].best_constant;
    r.extras["ppi_spread"] = ppi[k].results[0].extras.at("spread");
    r.verdict = std::isfinite(c) && ppi[k].results[0].verdict == Verdict::Pass ? Verdict::Pass : Verdict::Fail;
    fam.values.push_back(c);
    rep.results.push_back(std::move(r));
  }
  settle(fam);
  rep.results.push_back(std::move(fam));
  return rep;
}

inline InequalityReport trudinger_moser_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p,
                                              double c_bound = 10.0, const std::string& id = "f");

/// ||f||_r <= C Var^theta ||f||_s^{1-theta}; r = infinity selects the L^infinity form. The exponent
/// identity 1/r = theta(1/p - alpha_p/beta) + (1-theta)/s must hold to 1e-12.
inline InequalityReport gn_family_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p, double r,
                                        double s_exp, double theta, const std::string& id = "f") {
  const auto d = dimensions(g.model.name);
  const double beta = d.d_h / d.d_w;
  const double alpha = alpha_p(g.model.name, p).value;
  const double inv = [](double x) { return std::isinf(x) ? 0.0 : 1.0 / x; }(r);
  const double rhs = theta * (1.0 / p - alpha / beta) + (1.0 - theta) * (std::isinf(s_exp) ? 0.0 : 1.0 / s_exp);
  const auto gn = gn_exponents(p, alpha, beta);
  if (gn.regime == Regime::Critical) return trudinger_moser_check(s, g, f, p, 10.0, id);
  if (!(theta > 0.0 && theta <= 1.0) || std::abs(inv - rhs) > 1e-12)
    fail(ErrorKind::ExponentMismatch, "(r, s, theta) violate 1/r = theta(1/p - alpha_p/beta) + (1-theta)/s");
  const double var = detail::nonconstant_variation(s, g, f, p, alpha);
  auto rep = detail::new_report(std::isinf(r) ? "gn_linf" : gn.regime == Regime::Subcritical ? "gn_subcritical" : "gn_interpolation", g, p);
  detail::record_alpha(rep, g.model.name, p);
  rep.exponents["beta"] = beta;
  rep.exponents["r"] = r;
  rep.exponents["s"] = s_exp;
  rep.exponents["theta"] = theta;
  FunctionResult res;
  res.function_id = id;
  const double c = lp_norm(g.measure, f, r) / (std::pow(var, theta) * std::pow(lp_norm(g.measure, f, s_exp), 1.0 - theta));
  res.values = {c};
  res.extras["variation"] = var;
  if (gn.regime == Regime::Supercritical && s_exp == 1.0) {
    double supp = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i)
      if (f(i) != 0.0) supp += g.measure(i);
    res.extras["support_measure"] = supp;
    res.extras["support_form"] = lp_norm(g.measure, f, infinity) / (var * std::pow(supp, alpha / beta - 1.0 / p));
  }
  settle(res, false);
  rep.results.push_back(std::move(res));
  return rep;
}

/// p = 1: ||f||_inf / Var_1(f). p > 1: f is scaled to Var_p = 1 and the largest c on a log grid with
/// int (e^{c|f|^{p/(p-1)}} - 1) dmu <= C ||f||_1 is reported.
inline InequalityReport trudinger_moser_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p,
                                              double c_bound, const std::string& id) {
  const auto d = dimensions(g.model.name);
  const double beta = d.d_h / d.d_w;
  const double alpha = alpha_p(g.model.name, p).value;
  if (std::abs(p * alpha - beta) > 0.05) fail(ErrorKind::NotCritical, "p alpha_p differs from beta by more than 0.05");
  const double var = detail::nonconstant_variation(s, g, f, p, alpha);
  auto rep = detail::new_report("trudinger_moser", g, p);
  detail::record_alpha(rep, g.model.name, p);
  rep.exponents["beta"] = beta;
  FunctionResult r;
  r.function_id = id;
  r.extras["variation"] = var;
  if (p == 1.0) {
    r.values = {lp_norm(g.measure, f, infinity) / var};
    settle(r, false);
  } else {
    rep.exponents["C"] = c_bound;
    const Eigen::VectorXd h = f / var;
    const double l1 = lp_norm(g.measure, h, 1.0), e = p / (p - 1.0);
    double frontier = 0.0;
    for (double c : log_grid(1e-3, 1e3, 24)) {
      double acc = 0.0;
      for (Eigen::Index i = 0; i < h.size(); ++i) acc += g.measure(i) * std::expm1(c * std::pow(std::abs(h(i)), e));
      if (acc <= c_bound * l1) frontier = c;
      else break;
    }
    r.values = {frontier};
    r.best_constant = frontier;
    r.verdict = frontier > 0.0 ? Verdict::Pass : Verdict::Fail;
  }
  rep.results.push_back(std::move(r));
  return rep;
}

/// ||f||_q / (C_h^a (R^{-alpha}||f||_p + C_p(R) Var)^b ||f||_1^a) with C_p(R) the PPI constant over t < R.
inline InequalityReport local_gn_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p, double r_time,
                                       const std::string& id = "f") {
  const GnInputs in = gn_inputs(s, g, p);
  const auto w = resolved_window(g.model, g.level);
  if (r_time < w.t_min * (1 - 1e-9) || r_time > w.t_max * (1 + 1e-9)) fail(ErrorKind::DomainError, "R outside the resolved window");
  std::vector<double> grid;
  for (double t : detail::default_grid(g))
    if (t <= r_time * (1 + 1e-12)) grid.push_back(t);
  auto rep = detail::new_report("local_gn", g, p);
  detail::record_alpha(rep, g.model.name, p);
  rep.exponents["beta"] = in.beta;
  rep.exponents["q"] = in.q;
  rep.exponents["R"] = r_time;
  detail::set_window(rep, grid, "time");
  FunctionResult res;
  res.function_id = id;
  const double fq = lp_norm(g.measure, f, in.q), f1 = lp_norm(g.measure, f, 1.0), fp = lp_norm(g.measure, f, p);
  double cpr = 0.0, var = 0.0;
  if (!detail::is_constant(f)) {
    const auto ppi = ppi_check(s, g, f, p, in.alpha, grid, id);
    cpr = ppi.results[0].best_constant;
    var = ppi.results[0].extras.at("variation");
  }
  const double a = in.alpha / (in.beta + in.alpha), b = in.beta / (in.beta + in.alpha);
  const double combined = std::pow(r_time, -in.alpha) * fp + cpr * var;
  res.values = {fq == 0.0 ? 0.0 : fq / (std::pow(in.c_h, a) * std::pow(combined, b) * std::pow(f1, a))};
  res.extras["C_p_R"] = cpr;
  res.extras["variation"] = var;
  res.extras["lp_term"] = std::pow(r_time, -in.alpha) * fp;
  res.extras["variation_term"] = cpr * var;
  settle(res, false);
  rep.results.push_back(std::move(res));
  return rep;
}

/// Hoelder constant over pairs 0 < d < R/3 at lambda = d_W alpha - d_H/p, divided by ||f||_{p,alpha,R}.
/// R is a spatial radius; the seminorm runs over times t < R^{d_W}.
inline InequalityReport morrey_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p, double alpha,
                                     double r_space, const std::string& id = "f") {
  const auto d = dimensions(g.model.name);
  const double lambda = morrey_lambda(d, p, alpha);
  if (!(r_space > 0.0)) fail(ErrorKind::DomainError, "R must be positive");
  auto rep = detail::new_report("morrey", g, p);
  rep.exponents["alpha"] = alpha;
  rep.exponents["lambda"] = lambda;
  rep.exponents["R"] = r_space;
  const auto grid = detail::default_grid(g);
  detail::set_window(rep, grid, "time");
  FunctionResult res;
  res.function_id = id;
  const double h = detail::holder_sup(g, f, lambda, r_space / 3.0);
  res.extras["holder"] = h;
  if (h == 0.0) {
    res.values = {0.0};
  } else {
    const double norm = seminorm(besov_profile(s, g, f, p, grid), alpha, std::pow(r_space, d.d_w));
    res.extras["besov_norm"] = norm;
    res.values = {h / norm};
  }
  settle(res, false);
  rep.results.push_back(std::move(res));
  return rep;
}

/// Pairwise |f_i - f_j| <= C d^{alpha d_W - d_H/p} ||(-Delta)^alpha f||_p, and for alpha < alpha_p the
/// interpolated form with ||f||_p^{1 - alpha/alpha_p} Var^{alpha/alpha_p}.
inline InequalityReport morrey_fractional_check(const SpectralDecomposition& s, const ApproxGraph& g, const Eigen::VectorXd& f, double p,
                                                double alpha, const std::string& id = "f") {
  const auto d = dimensions(g.model.name);
  const double a1 = alpha_p(g.model.name, 1.0).value;
  const double lo = d.d_h / (p * d.d_w), hi = lo + (1.0 - 1.0 / p) * (1.0 - a1);
  if (!(p > 1.0) || !(alpha > lo && alpha < hi)) fail(ErrorKind::ExponentOutOfRange, "alpha outside (d_H/(p d_W), d_H/(p d_W) + (1-1/p)(1-alpha_1))");
  const double lambda = alpha * d.d_w - d.d_h / p;
  const double ap = alpha_p(g.model.name, p).value;
  auto rep = detail::new_report("morrey_fractional", g, p);
  rep.exponents["alpha"] = alpha;
  rep.exponents["lambda"] = lambda;
  detail::record_alpha(rep, g.model.name, p);
  const double h = detail::holder_sup(g, f, lambda);
  FunctionResult bessel;
  bessel.function_id = id + ":bessel";
  bessel.extras["holder"] = h;
  if (h == 0.0) {
    bessel.values = {0.0};
  } else {
    bessel.values = {h / lp_norm(g.measure, fractional_apply(s, f, alpha), p)};
  }
  settle(bessel, false);
  rep.results.push_back(bessel);
  if (alpha < ap) {
    FunctionResult interp;
    interp.function_id = id + ":interpolated";
    if (h == 0.0) {
      interp.values = {0.0};
    } else {
      const double var = detail::nonconstant_variation(s, g, f, p, ap);
      interp.extras["variation"] = var;
      interp.values = {h / (std::pow(lp_norm(g.measure, f, p), 1.0 - alpha / ap) * std::pow(var, alpha / ap))};
    }
    settle(interp, false);
    rep.results.push_back(interp);
  } else {
    rep.notes.push_back("alpha >= alpha_p: interpolated form not applicable");
  }
  return rep;
}

struct ContinuityRow {
  double p = 1.0;
  double lambda = 0.0;
  std::vector<double> holder;  // per level, max over the family of Hoelder constant / Var_p
  double growth = 0.0;         // last level over first
  bool bounded = false;
};

struct ContinuityProbe {
  std::string model;
  std::vector<int> levels;
  std::vector<ContinuityRow> rows;
  double threshold = 1.0;  // largest tested p with detected growth, or 1 if none
  Flagged delta;
};

struct LevelData {
  const ApproxGraph* g = nullptr;
  const SpectralDecomposition* s = nullptr;
};

/// For each p, Hoelder constants at lambda(p) = d_W alpha_p - d_H/p normalized by Var_p, tracked across
/// levels. Growth is a level-to-level ratio of at least `growth_limit`, or lambda <= 0.
inline ContinuityProbe continuity_probe(const std::vector<LevelData>& levels, const std::vector<double>& p_grid, double growth_limit = 2.0) {
  if (levels.size() < 2) fail(ErrorKind::InsufficientGrid, "continuity probe needs at least two levels");
  ContinuityProbe out;
  const std::string model = levels.front().g->model.name;
  out.model = model;
  out.delta = delta_E(model);
  const auto d = dimensions(model);
  for (const auto& l : levels) out.levels.push_back(l.g->level);
  for (double p : p_grid) {
    ContinuityRow row;
    row.p = p;
    const double ap = alpha_p(model, p).value;
    row.lambda = d.d_w * ap - d.d_h / p;
    if (row.lambda > 0.0) {
      for (const auto& l : levels) {
        double worst = 0.0;
        for (const auto& f : test_family(*l.g, *l.s)) {
          if (detail::is_constant(f.values)) continue;
          const double var = variation(*l.s, *l.g, f.values, p, ap).value;
          worst = std::max(worst, detail::holder_sup(*l.g, f.values, row.lambda) / var);
        }
        row.holder.push_back(worst);
      }
      row.growth = row.holder.back() / row.holder.front();
      row.bounded = true;
      for (std::size_t k = 1; k < row.holder.size(); ++k)
        if (!(row.holder[k] < growth_limit * row.holder[k - 1])) row.bounded = false;
    }
    if (!row.bounded) out.threshold = std::max(out.threshold, p);
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace fractallab
