#pragma once

#include <json.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"

namespace fractallab {

enum class Provenance { Theorem, Conjecture };

inline const char* to_string(Provenance p) { return p == Provenance::Theorem ? "theorem" : "conjecture"; }

struct Flagged {
  double value = 0.0;
  Provenance provenance = Provenance::Theorem;
};

struct ModelDimensions {
  std::string model;
  double d_h = 0.0;
  double d_w = 0.0;
  std::optional<double> d_th;     // topological Hausdorff dimension, where known
  bool approximate_walk_dim = false;  // carpet: literature value, not derived
};

/// Closed forms: d_H = log N / log L and d_W = d_H + log rho / log L.
inline ModelDimensions dimensions(const std::string& model) {
  ModelDimensions d;
  d.model = model;
  if (model == "vicsek") {
    d.d_h = std::log(5.0) / std::log(3.0);
    d.d_w = d.d_h + 1.0;
    d.d_th = 1.0;
  } else if (model == "gasket") {
    d.d_h = std::log(3.0) / std::log(2.0);
    d.d_w = std::log(5.0) / std::log(2.0);
  } else if (model == "interval") {
    d.d_h = 1.0;
    d.d_w = 2.0;
    d.d_th = 1.0;
  } else if (model == "carpet") {
    d.d_h = std::log(8.0) / std::log(3.0);
    d.d_w = 2.097;
    d.approximate_walk_dim = true;
  } else {
    fail(ErrorKind::UnknownModel, "no exponent data for model '" + model + "'");
  }
  return d;
}

/// beta_p = (1 - 2/p)(1 - d_H/d_W) + 1/p.
inline double beta_p(const ModelDimensions& d, double p) { return (1.0 - 2.0 / p) * (1.0 - d.d_h / d.d_w) + 1.0 / p; }

inline Flagged alpha_p(const std::string& model, double p) {
  if (!(p >= 1.0)) fail(ErrorKind::DomainError, "p must be at least 1");
  if (model == "interval") return {0.5, Provenance::Theorem};
  const ModelDimensions d = dimensions(model);
  if (model == "vicsek") return {p == 1.0 ? d.d_h / d.d_w : beta_p(d, p), Provenance::Theorem};
  if (model == "gasket") {
    if (p == 1.0) return {d.d_h / d.d_w, Provenance::Theorem};
    if (p == 2.0) return {0.5, Provenance::Theorem};
    return {beta_p(d, p), Provenance::Conjecture};
  }
  if (p == 2.0) return {0.5, Provenance::Theorem};
  return {beta_p(d, p), Provenance::Conjecture};
}

enum class Regime { Subcritical, Critical, Supercritical };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Subcritical: return "subcritical";
    case Regime::Critical: return "critical";
    case Regime::Supercritical: return "supercritical";
  }
  return "?";
}

struct GnExponents {
  double p = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double q = 0.0;
  double nash_theta = 0.0;
  std::optional<double> sobolev_r;  // subcritical only
  Regime regime = Regime::Critical;

  /// Exponent of the L^s norm in the L^infinity bound; supercritical only.
  double linf_theta(double s) const {
    if (regime != Regime::Supercritical) fail(ErrorKind::ExponentMismatch, "L^infinity bound needs the supercritical regime");
    if (!(s > 0.0)) fail(ErrorKind::DomainError, "s must be positive");
    return p * beta / (p * beta + s * (p * alpha - beta));
  }
};

inline GnExponents gn_exponents(double p, double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) fail(ErrorKind::DomainError, "alpha and beta must be positive");
  if (!(p >= 1.0)) fail(ErrorKind::DomainError, "p must be at least 1");
  GnExponents g;
  g.p = p;
  g.alpha = alpha;
  g.beta = beta;
  g.q = p * (1.0 + alpha / beta);
  g.nash_theta = (p - 1.0) * beta / (p * (alpha + beta) - beta);
  const double gap = p * alpha - beta;
  if (gap < 0.0) {
    g.regime = Regime::Subcritical;
    g.sobolev_r = p * beta / (beta - p * alpha);
  } else if (gap > 0.0) {
    g.regime = Regime::Supercritical;
  }
  return g;
}

/// lambda = d_W alpha - d_H / p.
inline double morrey_lambda(const ModelDimensions& d, double p, double alpha) {
  if (!(p >= 1.0)) fail(ErrorKind::DomainError, "p must be at least 1");
  if (!(alpha * p * d.d_w > d.d_h)) fail(ErrorKind::SubcriticalExponent, "alpha <= d_H/(p d_W): no Hoelder embedding");
  return d.d_w * alpha - d.d_h / p;
}

inline double morrey_lambda(const std::string& model, double p, double alpha) { return morrey_lambda(dimensions(model), p, alpha); }

inline Flagged delta_E(const std::string& model) {
  if (model == "vicsek" || model == "interval") return {1.0, Provenance::Theorem};
  if (model == "gasket") return {1.0, Provenance::Conjecture};
  if (model == "carpet") {
    const ModelDimensions d = dimensions(model);
    return {1.0 + std::log(2.0) / (d.d_w * std::log(3.0) - 2.0 * std::log(2.0)), Provenance::Conjecture};
  }
  fail(ErrorKind::UnknownModel, "no continuity exponent for model '" + model + "'");
}

/// Nested-fractal bounds 1 <= delta_E <= 2 d_H / d_W.
inline std::optional<std::pair<double, double>> delta_E_bounds(const std::string& model) {
  if (model != "vicsek" && model != "gasket") return std::nullopt;
  const ModelDimensions d = dimensions(model);
  return std::pair{1.0, 2.0 * d.d_h / d.d_w};
}

struct ExponentRow {
  double p = 1.0;
  Flagged alpha;
  GnExponents gn;
  std::optional<double> morrey;  // unset when subcritical
};

struct ExponentTable {
  ModelDimensions dims;
  double beta = 0.0;  // ultracontractivity exponent d_H / d_W
  Flagged delta;
  std::optional<std::pair<double, double>> delta_bounds;
  std::vector<ExponentRow> rows;
};

inline ExponentTable exponent_table(const std::string& model, const std::vector<double>& ps) {
  ExponentTable t;
  t.dims = dimensions(model);
  t.beta = t.dims.d_h / t.dims.d_w;
  t.delta = delta_E(model);
  t.delta_bounds = delta_E_bounds(model);
  for (double p : ps) {
    ExponentRow r;
    r.p = p;
    r.alpha = alpha_p(model, p);
    r.gn = gn_exponents(p, r.alpha.value, t.beta);
    if (r.alpha.value * p * t.dims.d_w > t.dims.d_h) r.morrey = morrey_lambda(t.dims, p, r.alpha.value);
    t.rows.push_back(r);
  }
  return t;
}

inline nlohmann::json flagged_json(const Flagged& f) { return {{"value", f.value}, {"provenance", to_string(f.provenance)}}; }

inline nlohmann::json to_json(const ExponentTable& t) {
  using nlohmann::json;
  json j;
  j["model"] = t.dims.model;
  j["d_H"] = t.dims.d_h;
  j["d_W"] = t.dims.d_w;
  if (t.dims.approximate_walk_dim) j["d_W_note"] = "approximate literature value";
  j["d_tH"] = t.dims.d_th ? json(*t.dims.d_th) : json(nullptr);
  j["beta"] = t.beta;
  j["delta_E"] = flagged_json(t.delta);
  if (t.delta_bounds) j["delta_E_bounds"] = {{"lower", t.delta_bounds->first}, {"upper", t.delta_bounds->second}, {"provenance", "theorem"}};
  json rows = json::array();
  for (const auto& r : t.rows) {
    // a derived value is only as firm as the alpha_p it came from
    const char* prov = to_string(r.alpha.provenance);
    json row{{"p", r.p},
             {"alpha_p", flagged_json(r.alpha)},
             {"q", {{"value", r.gn.q}, {"provenance", prov}}},
             {"nash_theta", {{"value", r.gn.nash_theta}, {"provenance", prov}}},
             {"regime", to_string(r.gn.regime)}};
    row["sobolev_r"] = r.gn.sobolev_r ? json{{"value", *r.gn.sobolev_r}, {"provenance", prov}} : json(nullptr);
    row["morrey_lambda"] = r.morrey ? json{{"value", *r.morrey}, {"provenance", prov}} : json(nullptr);
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j;
}

}  // namespace fractallab
