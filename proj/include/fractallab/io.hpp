#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "besov_sobolev.hpp"
#include "error.hpp"
#include "exponents.hpp"
#include "fractal_geometry.hpp"
#include "report.hpp"
#include "spectral_semigroup.hpp"

namespace fractallab {

namespace fs = std::filesystem;

/// Shortest decimal that round-trips; keeps CSV bodies byte-stable.
inline std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

inline void write_text(const fs::path& path, const std::string& body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  out << body;
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::IoError, path.string() + ": " + e.what());
  }
}

// ---- graphs ----

inline nlohmann::json graph_json(const ApproxGraph& g) {
  using nlohmann::json;
  json vs = json::array();
  for (int i = 0; i < g.size(); ++i) vs.push_back({{"id", i}, {"x", g.coords(i, 0)}, {"y", g.coords(i, 1)}, {"measure", g.measure(i)}});
  json es = json::array();
  for (const auto& [i, j] : g.edges) es.push_back({i, j});
  return {{"model", g.model.name}, {"level", g.level}, {"vertices", vs}, {"edges", es}};
}

// ---- functions ----

inline std::string function_csv(const Eigen::VectorXd& f) {
  std::string s = "vertex_id,value\n";
  for (Eigen::Index i = 0; i < f.size(); ++i) s += std::to_string(i) + "," + fmt(f(i)) + "\n";
  return s;
}

/// Reads (vertex_id, value) rows; every vertex 0..n-1 must appear exactly once.
inline Eigen::VectorXd read_function_csv(const fs::path& path, int n) {
  std::istringstream in(read_text(path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("vertex_id", 0) != 0) fail(ErrorKind::IoError, path.string() + ": missing header vertex_id,value");
  Eigen::VectorXd f = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(ErrorKind::IoError, path.string() + ": malformed row '" + line + "'");
    long id = 0;
    double v = 0.0;
    try {
      id = std::stol(line.substr(0, comma));
      v = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::IoError, path.string() + ": malformed row '" + line + "'");
    }
    if (id < 0 || id >= n || !std::isnan(f(id))) fail(ErrorKind::IoError, path.string() + ": bad or repeated vertex id " + std::to_string(id));
    f(id) = v;
    ++rows;
  }
  if (rows != n) fail(ErrorKind::IoError, path.string() + ": expected " + std::to_string(n) + " rows, got " + std::to_string(rows));
  return f;
}

// ---- kernels and matrices ----

inline std::string kernel_csv(const HeatKernelGrid& k) {
  std::string s = "t,i,j,value\n";
  const std::string t = fmt(k.t);
  for (Eigen::Index i = 0; i < k.values.rows(); ++i)
    for (Eigen::Index j = 0; j < k.values.cols(); ++j) s += t + "," + std::to_string(i) + "," + std::to_string(j) + "," + fmt(k.values(i, j)) + "\n";
  return s;
}

namespace detail {
inline constexpr char matrix_magic[8] = {'F', 'L', 'M', 'A', 'T', '0', '1', '\n'};
}

// magic, int64 rows, int64 cols, column-major little-endian doubles
inline void write_matrix(std::ostream& out, const Eigen::MatrixXd& a) {
  out.write(detail::matrix_magic, sizeof detail::matrix_magic);
  const std::int64_t dims[2] = {a.rows(), a.cols()};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
}

inline Eigen::MatrixXd read_matrix(std::istream& in, const std::string& what) {
  char magic[8];
  std::int64_t dims[2];
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(dims), sizeof dims);
  if (!in || std::memcmp(magic, detail::matrix_magic, sizeof magic) != 0 || dims[0] < 0 || dims[1] < 0)
    fail(ErrorKind::IoError, what + ": not a matrix dump");
  Eigen::MatrixXd a(dims[0], dims[1]);
  in.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  if (!in) fail(ErrorKind::IoError, what + ": truncated matrix dump");
  return a;
}

inline void write_matrix(const fs::path& path, const Eigen::MatrixXd& a) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
  write_matrix(out, a);
}

inline Eigen::MatrixXd read_matrix(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot read " + path.string());
  return read_matrix(in, path.string());
}

// ---- spectra: eigenvalues, eigenvectors, measure as three matrix blocks ----

inline void save_spectrum(const fs::path& path, const SpectralDecomposition& s) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".part";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) fail(ErrorKind::IoError, "cannot write " + tmp.string());
    write_matrix(out, s.eigenvalues);
    write_matrix(out, s.eigenvectors);
    write_matrix(out, s.measure);
    if (!out) fail(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline SpectralDecomposition load_spectrum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingArtifact, "cannot read " + path.string());
  SpectralDecomposition s;
  s.eigenvalues = read_matrix(in, path.string());
  s.eigenvectors = read_matrix(in, path.string());
  s.measure = read_matrix(in, path.string());
  const auto n = s.measure.size();
  if (s.eigenvalues.size() != n || s.eigenvectors.rows() != n || s.eigenvectors.cols() != n)
    fail(ErrorKind::IoError, path.string() + ": inconsistent spectrum blocks");
  return s;
}

inline std::string spectrum_csv(const SpectralDecomposition& s) {
  std::string out = "k,lambda\n";
  for (int k = 0; k < s.size(); ++k) out += std::to_string(k) + "," + fmt(s.eigenvalues(k)) + "\n";
  return out;
}

/// Cache lookup by (model, level); decomposes and stores on a miss.
inline SpectralDecomposition cached_spectrum(const fs::path& cache_dir, const ApproxGraph& g) {
  const fs::path file = cache_dir / (g.model.name + "_m" + std::to_string(g.level) + ".spec");
  if (fs::exists(file)) {
    auto s = load_spectrum(file);
    if (s.size() == g.size()) return s;
  }
  auto s = decompose(make_form(g));
  save_spectrum(file, s);
  return s;
}

// ---- profiles and estimates ----

inline std::string profile_csv(const BesovProfile& pr) {
  std::string s = "t,psi\n";
  for (std::size_t k = 0; k < pr.t.size(); ++k) s += fmt(pr.t[k]) + "," + fmt(pr.psi[k]) + "\n";
  return s;
}

inline nlohmann::json to_json(const ExponentEstimate& e) {
  return {{"p", e.p},
          {"alpha_hat", e.alpha_hat},
          {"stderr", e.stderr_alpha},
          {"window", {{"t_min", e.window.t_min}, {"t_max", e.window.t_max}, {"kind", e.window.kind}}},
          {"slopes", e.slopes},
          {"argmax", e.argmax},
          {"family", e.family}};
}

// ---- reports ----

inline nlohmann::json json_number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(fmt(x)); }

inline nlohmann::json to_json(const FunctionResult& r) {
  using nlohmann::json;
  json values = json::array(), extras = json::object();
  for (double v : r.values) values.push_back(json_number(v));
  for (const auto& [k, v] : r.extras) extras[k] = json_number(v);
  return {{"function_id", r.function_id}, {"best_constant", json_number(r.best_constant)}, {"verdict", to_string(r.verdict)},
          {"grid", r.grid}, {"values", values}, {"extras", extras}};
}

inline nlohmann::json to_json(const InequalityReport& rep) {
  using nlohmann::json;
  json exps = json::object();
  for (const auto& [k, v] : rep.exponents) {
    json e{{"value", json_number(v)}};
    if (auto it = rep.provenance.find(k); it != rep.provenance.end()) e["provenance"] = it->second;
    exps[k] = e;
  }
  json results = json::array();
  for (const auto& r : rep.results) results.push_back(to_json(r));
  return {{"schema_version", InequalityReport::schema_version},
          {"inequality", rep.inequality_id},
          {"model", rep.model},
          {"level", rep.level},
          {"p", json_number(rep.p)},
          {"exponents", exps},
          {"window", {{"t_min", rep.window_min}, {"t_max", rep.window_max}, {"kind", rep.window_kind}}},
          {"passed", rep.passed()},
          {"results", results},
          {"notes", rep.notes}};
}

inline double number_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  return s == "inf" ? std::numeric_limits<double>::infinity() : s == "-inf" ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
}

inline InequalityReport report_from_json(const nlohmann::json& j) {
  InequalityReport rep;
  rep.inequality_id = j.at("inequality");
  rep.model = j.at("model");
  rep.level = j.at("level");
  rep.p = number_from_json(j.at("p"));
  for (const auto& [k, e] : j.at("exponents").items()) {
    rep.exponents[k] = number_from_json(e.at("value"));
    if (e.contains("provenance")) rep.provenance[k] = e.at("provenance");
  }
  rep.window_min = j.at("window").at("t_min");
  rep.window_max = j.at("window").at("t_max");
  rep.window_kind = j.at("window").at("kind");
  for (const auto& rj : j.at("results")) {
    FunctionResult r;
    r.function_id = rj.at("function_id");
    r.best_constant = number_from_json(rj.at("best_constant"));
    r.verdict = rj.at("verdict") == "pass" ? Verdict::Pass : Verdict::Fail;
    r.grid = rj.at("grid").get<std::vector<double>>();
    for (const auto& v : rj.at("values")) r.values.push_back(number_from_json(v));
    for (const auto& [k, v] : rj.at("extras").items()) r.extras[k] = number_from_json(v);
    rep.results.push_back(std::move(r));
  }
  rep.notes = j.at("notes").get<std::vector<std::string>>();
  return rep;
}

/// Flat one-row-per-function summary.
inline std::string report_csv(const InequalityReport& rep) {
  std::string s = "inequality,model,m,p,function,best_constant,spread,verdict\n";
  for (const auto& r : rep.results) {
    const auto it = r.extras.find("spread");
    s += rep.inequality_id + "," + rep.model + "," + std::to_string(rep.level) + "," + fmt(rep.p) + "," + r.function_id + "," + fmt(r.best_constant) +
         "," + (it == r.extras.end() ? std::string("") : fmt(it->second)) + "," + to_string(r.verdict) + "\n";
  }
  return s;
}

inline std::string exponent_csv(const ExponentTable& t) {
  auto opt = [](const std::optional<double>& x) { return x ? fmt(*x) : std::string(""); };
  std::string s = "model,p,alpha_p,q,nash_theta,sobolev_r,morrey_lambda,regime,provenance\n";
  for (const auto& r : t.rows)
    s += t.dims.model + "," + fmt(r.p) + "," + fmt(r.alpha.value) + "," + fmt(r.gn.q) + "," + fmt(r.gn.nash_theta) + "," + opt(r.gn.sobolev_r) + "," +
         opt(r.morrey) + "," + to_string(r.gn.regime) + "," + to_string(r.alpha.provenance) + "\n";
  return s;
}

}  // namespace fractallab
