#pragma once

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <chrono>
#include <ctime>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "inequality_lab.hpp"
#include "io.hpp"

namespace fractallab {

inline constexpr const char* software_version = "fractallab 0.1.1";

// ---- hashing ----

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) fail(ErrorKind::IoError, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string sha256_file(const fs::path& path) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    EVP_MD_CTX_free(ctx);
    fail(ErrorKind::MissingArtifact, "cannot read " + path.string());
  }
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

// ---- configuration ----

struct GridSpec {
  std::string window = "auto";  // auto | resolved | graph_limit
  int per_decade = 12;
  std::optional<double> decades;  // measured down from the window's upper end
};

struct ExperimentConfig {
  std::string model;
  std::vector<int> levels;
  std::size_t vertex_cap = default_vertex_cap;
  GridSpec t_grid;
  std::optional<int> r_count;  // Korevaar-Schoen radii per level, optional
  std::vector<double> ps;
  std::vector<std::string> functions;  // empty: the full per-model family
  int random_count = 0;
  std::uint64_t seed = 1;
  std::vector<std::string> inequalities;
  fs::path output;
  std::map<std::string, double> tolerances;

  double tolerance(const std::string& key) const;
};

inline const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> t{
      {"stability", 10.0},     // max/median across the window
      {"drift", 2.0},          // between consecutive levels
      {"tm_bound", 10.0},      // C in the Trudinger-Moser integral bound
      {"morrey_radius", 0.75}, // fraction of the diameter
      {"growth_limit", 2.0},   // continuity probe
  };
  return t;
}

inline double ExperimentConfig::tolerance(const std::string& key) const {
  if (auto it = tolerances.find(key); it != tolerances.end()) return it->second;
  return default_tolerances().at(key);
}

inline const std::vector<std::string>& known_inequalities() {
  static const std::vector<std::string> v{"ppi", "gq", "bakry_emery", "gn", "trudinger_moser", "local_gn", "morrey",
                                          "morrey_fractional", "cutoff_sum", "sub_gaussian", "continuity"};
  return v;
}

/// Closed-form vertex counts, used to reject levels before anything is built.
inline std::size_t vertex_count(const std::string& model, int m) {
  std::size_t n = 0;
  if (model == "interval") n = (std::size_t{1} << m) + 1;
  else if (model == "vicsek") {
    n = 4;
    for (int k = 0; k < m; ++k) n *= 5;
    n += 1;
  } else if (model == "gasket") {
    std::size_t p = 3;
    for (int k = 0; k < m; ++k) p *= 3;
    n = (p + 3) / 2;
  } else {
    fail(ErrorKind::UnknownModel, "no approximating graphs for model '" + model + "'");
  }
  return n;
}

namespace detail {

[[noreturn]] inline void config_error(const std::string& what) { fail(ErrorKind::ConfigError, what); }

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    config_error("'" + key + "' has the wrong type");
  }
}

inline void allowed_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& keys) {
  if (!n.IsMap()) config_error("'" + where + "' must be a mapping");
  for (const auto& kv : n) {
    const auto k = kv.first.as<std::string>();
    if (!keys.count(k)) config_error("unknown key '" + k + "' in " + where);
  }
}

template <class T>
std::vector<T> sequence(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence() || n.size() == 0) config_error("'" + key + "' must be a nonempty list");
  std::vector<T> out;
  for (const auto& x : n) out.push_back(scalar<T>(x, key));
  return out;
}

inline std::set<std::string> family_ids(const std::string& model) {
  std::set<std::string> ids{"phi1", "phi2", "phi3", "phi4", "phi5", "harmonic1", "harmonic2", "harmonic3", "cell1", "distance"};
  ids.insert("cell" + std::to_string(build_model(model).cell_count));
  if (model == "vicsek") ids.insert("vicsek_h");
  return ids;
}

}  // namespace detail

/// Schema check and normalization; throws ConfigError before any computation.
inline ExperimentConfig parse_config(const YAML::Node& root) {
  using namespace detail;
  allowed_keys(root, "config", {"model", "levels", "vertex_cap", "t_grid", "r_grid", "p", "functions", "inequalities", "output", "tolerances"});
  ExperimentConfig c;
  for (const char* k : {"model", "levels", "p", "inequalities"})
    if (!root[k]) config_error(std::string("missing required key '") + k + "'");
  c.model = scalar<std::string>(root["model"], "model");
  try {
    build_model(c.model);
  } catch (const Error&) {
    config_error("unknown model '" + c.model + "'");
  }
  if (root["vertex_cap"]) {
    const long cap = scalar<long>(root["vertex_cap"], "vertex_cap");
    if (cap < 2) config_error("vertex_cap must be at least 2");
    c.vertex_cap = static_cast<std::size_t>(cap);
  }
  c.levels = sequence<int>(root["levels"], "levels");
  for (int m : c.levels) {
    if (m < 1 || m > 30) config_error("level " + std::to_string(m) + " out of range");
    if (vertex_count(c.model, m) > c.vertex_cap)
      config_error("level " + std::to_string(m) + " has " + std::to_string(vertex_count(c.model, m)) + " vertices, above the cap " + std::to_string(c.vertex_cap));
  }
  std::sort(c.levels.begin(), c.levels.end());
  c.levels.erase(std::unique(c.levels.begin(), c.levels.end()), c.levels.end());
  if (const auto t = root["t_grid"]) {
    allowed_keys(t, "t_grid", {"window", "per_decade", "decades"});
    if (t["window"]) c.t_grid.window = scalar<std::string>(t["window"], "t_grid.window");
    if (c.t_grid.window != "auto" && c.t_grid.window != "resolved" && c.t_grid.window != "graph_limit")
      config_error("t_grid.window must be auto, resolved or graph_limit");
    if (t["per_decade"]) c.t_grid.per_decade = scalar<int>(t["per_decade"], "t_grid.per_decade");
    if (c.t_grid.per_decade < 2) config_error("t_grid.per_decade must be at least 2");
    if (t["decades"]) {
      c.t_grid.decades = scalar<double>(t["decades"], "t_grid.decades");
      if (!(*c.t_grid.decades > 0.0)) config_error("t_grid.decades must be positive");
    }
  }
  if (const auto r = root["r_grid"]) {
    allowed_keys(r, "r_grid", {"count"});
    c.r_count = scalar<int>(r["count"], "r_grid.count");
    if (*c.r_count < 1) config_error("r_grid.count must be positive");
  }
  c.ps = sequence<double>(root["p"], "p");
  for (double p : c.ps)
    if (!(p >= 1.0) || !std::isfinite(p)) config_error("every p must be finite and at least 1");
  if (const auto f = root["functions"]) {
    allowed_keys(f, "functions", {"family", "random"});
    if (f["family"] && !(f["family"].IsScalar() && f["family"].as<std::string>() == "default")) {
      c.functions = sequence<std::string>(f["family"], "functions.family");
      const auto ids = family_ids(c.model);
      for (const auto& id : c.functions)
        if (!ids.count(id)) config_error("unknown test function '" + id + "' for model " + c.model);
    }
    if (const auto r = f["random"]) {
      allowed_keys(r, "functions.random", {"count", "seed"});
      if (r["count"]) c.random_count = scalar<int>(r["count"], "functions.random.count");
      if (r["seed"]) c.seed = scalar<std::uint64_t>(r["seed"], "functions.random.seed");
      if (c.random_count < 0) config_error("functions.random.count must be nonnegative");
    }
  }
  c.inequalities = sequence<std::string>(root["inequalities"], "inequalities");
  for (const auto& i : c.inequalities)
    if (std::find(known_inequalities().begin(), known_inequalities().end(), i) == known_inequalities().end()) config_error("unknown inequality '" + i + "'");
  if (std::count(c.inequalities.begin(), c.inequalities.end(), "continuity") && c.levels.size() < 2)
    config_error("continuity needs at least two levels");
  c.output = root["output"] ? fs::path(scalar<std::string>(root["output"], "output")) : fs::path("out") / c.model;
  if (const auto t = root["tolerances"]) {
    if (!t.IsMap()) config_error("'tolerances' must be a mapping");
    for (const auto& kv : t) {
      const auto k = kv.first.as<std::string>();
      if (!default_tolerances().count(k)) config_error("unknown tolerance '" + k + "'");
      c.tolerances[k] = scalar<double>(kv.second, "tolerances." + k);
      if (!(c.tolerances[k] > 0.0)) config_error("tolerance '" + k + "' must be positive");
    }
  }
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    fail(ErrorKind::ConfigError, "cannot read config " + path.string());
  } catch (const YAML::Exception& e) {
    fail(ErrorKind::ConfigError, path.string() + ": " + e.what());
  }
  auto c = parse_config(root);
  if (c.output.is_relative() && !root["output"]) c.output = path.parent_path() / c.output;
  return c;
}

/// Canonical form of everything that affects numeric output (the output directory does not).
inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json j{{"model", c.model}, {"levels", c.levels}, {"vertex_cap", c.vertex_cap}, {"p", c.ps}, {"inequalities", c.inequalities}};
  j["t_grid"] = {{"window", c.t_grid.window}, {"per_decade", c.t_grid.per_decade}, {"decades", c.t_grid.decades ? json(*c.t_grid.decades) : json(nullptr)}};
  j["r_grid"] = c.r_count ? json{{"count", *c.r_count}} : json(nullptr);
  j["functions"] = {{"family", c.functions.empty() ? json("default") : json(c.functions)}, {"random", {{"count", c.random_count}, {"seed", c.seed}}}};
  json tol = json::object();
  for (const auto& [k, v] : default_tolerances()) tol[k] = c.tolerance(k);
  j["tolerances"] = tol;
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) { return sha256_hex(to_json(c).dump()); }

// ---- manifest ----

struct Artifact {
  std::string path;  // relative to the output directory
  std::string sha256;
};

struct StageRecord {
  std::string id;
  std::string status = "pending";  // done | error | skipped
  std::vector<Artifact> artifacts;
  std::optional<bool> passed;  // checks only
  std::string error_kind, error_message;
  bool reused = false;
};

struct RunManifest {
  static constexpr int schema_version = 1;
  std::string config_hash;
  std::string software = software_version;
  std::string created, updated;
  nlohmann::json config;
  fs::path root;
  std::vector<StageRecord> stages;

  const StageRecord* stage(const std::string& id) const {
    for (const auto& s : stages)
      if (s.id == id) return &s;
    return nullptr;
  }
  std::vector<std::string> artifacts() const {
    std::vector<std::string> out;
    for (const auto& s : stages)
      for (const auto& a : s.artifacts) out.push_back(a.path);
    return out;
  }
  int computed() const {
    int n = 0;
    for (const auto& s : stages) n += s.status == "done" && !s.reused;
    return n;
  }
  bool has_errors() const {
    for (const auto& s : stages)
      if (s.status != "done") return true;
    return false;
  }
  bool all_passed() const {
    for (const auto& s : stages)
      if (s.passed && !*s.passed) return false;
    return true;
  }
  int exit_code() const { return has_errors() ? 2 : all_passed() ? 0 : 1; }
};

inline nlohmann::json to_json(const RunManifest& m) {
  using nlohmann::json;
  json stages = json::array();
  for (const auto& s : m.stages) {
    json arts = json::array();
    for (const auto& a : s.artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}});
    json j{{"id", s.id}, {"status", s.status}, {"artifacts", arts}, {"reused", s.reused}};
    if (s.passed) j["passed"] = *s.passed;
    if (!s.error_kind.empty()) j["error"] = {{"kind", s.error_kind}, {"message", s.error_message}};
    stages.push_back(j);
  }
  return {{"schema_version", RunManifest::schema_version}, {"software", m.software}, {"config_hash", m.config_hash},
          {"created", m.created}, {"updated", m.updated}, {"config", m.config}, {"stages", stages}};
}

inline RunManifest load_manifest(const fs::path& path) {
  const auto j = read_json(path);
  RunManifest m;
  try {
    m.config_hash = j.at("config_hash");
    m.software = j.at("software");
    m.created = j.at("created");
    m.updated = j.at("updated");
    m.config = j.at("config");
    for (const auto& sj : j.at("stages")) {
      StageRecord s;
      s.id = sj.at("id");
      s.status = sj.at("status");
      s.reused = sj.at("reused");
      for (const auto& a : sj.at("artifacts")) s.artifacts.push_back({a.at("path"), a.at("sha256")});
      if (sj.contains("passed")) s.passed = sj.at("passed").get<bool>();
      if (sj.contains("error")) {
        s.error_kind = sj.at("error").at("kind");
        s.error_message = sj.at("error").at("message");
      }
      m.stages.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::IoError, path.string() + ": malformed manifest: " + e.what());
  }
  m.root = path.parent_path();
  return m;
}

// ---- pipeline ----

namespace detail {

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string p_tag(double p) {
  std::string s = fmt(p);
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

// portable uniform(-1, 1) from the top 53 bits
inline double unit_symmetric(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; }

inline std::vector<double> config_grid(const ExperimentConfig& c, const ApproxGraph& g, const SpectralDecomposition& s) {
  TimeWindow w;
  if (c.t_grid.window == "graph_limit") {
    w = graph_limit_window(s);
  } else {
    try {
      w = resolved_window(g.model, g.level);
    } catch (const Error& e) {
      if (c.t_grid.window == "resolved" || e.kind() != ErrorKind::InsufficientGrid) throw;
      w = graph_limit_window(s);
    }
  }
  if (c.t_grid.decades) w.t_min = w.t_max * std::pow(10.0, -*c.t_grid.decades);
  if (!(w.t_max > w.t_min)) return {w.t_min};
  return log_grid(w.t_min, w.t_max, c.t_grid.per_decade);
}

inline std::vector<TestFunction> config_family(const ExperimentConfig& c, const ApproxGraph& g, const SpectralDecomposition& s) {
  std::vector<TestFunction> out;
  for (auto& f : test_family(g, s))
    if (c.functions.empty() || std::find(c.functions.begin(), c.functions.end(), f.id) != c.functions.end()) out.push_back(std::move(f));
  std::mt19937_64 rng(c.seed + static_cast<std::uint64_t>(g.level));
  for (int k = 0; k < c.random_count; ++k) {
    Eigen::VectorXd f(g.size());
    for (int i = 0; i < g.size(); ++i) f(i) = unit_symmetric(rng);
    out.push_back({"random" + std::to_string(k + 1), f});
  }
  return out;
}

inline bool not_applicable(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::DomainError:
    case ErrorKind::NotCritical:
    case ErrorKind::SubcriticalExponent:
    case ErrorKind::ExponentOutOfRange:
    case ErrorKind::ExponentMismatch: return true;
    default: return false;
  }
}

// Collect per-function reports into one report; functions that are degenerate for a check are noted.
inline std::optional<InequalityReport> merge_per_function(const std::vector<TestFunction>& family,
                                                           const std::function<InequalityReport(const TestFunction&)>& check) {
  std::optional<InequalityReport> out;
  std::vector<std::string> notes;
  for (const auto& f : family) {
    try {
      auto rep = check(f);
      if (!out) {
        out = std::move(rep);
      } else {
        for (auto& r : rep.results) out->results.push_back(std::move(r));
        for (auto& n : rep.notes) out->notes.push_back(std::move(n));
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateFunction && e.kind() != ErrorKind::DegenerateBall) throw;
      notes.push_back(f.id + ": " + e.what());
    }
  }
  if (out) out->notes.insert(out->notes.end(), notes.begin(), notes.end());
  return out;
}

inline void apply_stability(InequalityReport& rep, double limit) {
  if (limit == stability_limit) return;
  for (auto& r : rep.results) {
    const auto it = r.extras.find("spread");
    if (it == r.extras.end() || r.values.size() < 2) continue;
    r.verdict = std::isfinite(r.best_constant) && it->second < limit ? Verdict::Pass : Verdict::Fail;
  }
}

struct LevelState {
  std::optional<ApproxGraph> g;
  std::optional<SpectralDecomposition> s;
};

}  // namespace detail

/// One report per p (or a single p-independent report) for inequality `id` at one level.
inline nlohmann::json run_check(const ExperimentConfig& c, const std::string& id, const ApproxGraph& g, const SpectralDecomposition& s) {
  using nlohmann::json;
  const auto family = detail::config_family(c, g, s);
  const auto grid = detail::config_grid(c, g, s);
  json reports = json::array();
  bool passed = true;
  auto emit = [&](std::optional<InequalityReport> rep) {
    if (!rep) return;
    detail::apply_stability(*rep, c.tolerance("stability"));
    passed = passed && rep->passed();
    reports.push_back(to_json(*rep));
  };
  auto per_p = [&](const std::function<std::optional<InequalityReport>(double)>& body) {
    for (double p : c.ps) {
      try {
        emit(body(p));
      } catch (const Error& e) {
        if (!detail::not_applicable(e)) throw;
        reports.push_back({{"inequality", id}, {"p", p}, {"not_applicable", e.what()}});
      }
    }
  };
  if (id == "ppi") {
    per_p([&](double p) {
      const double a = alpha_p(g.model.name, p).value;
      return detail::merge_per_function(family, [&](const TestFunction& f) { return ppi_check(s, g, f.values, p, a, grid, f.id); });
    });
  } else if (id == "gq") {
    per_p([&](double p) {
      return detail::merge_per_function(family, [&](const TestFunction& f) { return gq_check(s, g, f.values, p, grid, f.id); });
    });
  } else if (id == "bakry_emery") {
    emit(detail::merge_per_function(family, [&](const TestFunction& f) { return bakry_emery_check(s, g, f.values, grid, std::nullopt, std::nullopt, f.id); }));
  } else if (id == "gn") {
    per_p([&](double p) {
      std::vector<TestFunction> usable;
      for (const auto& f : family)
        if (!detail::is_constant(f.values)) usable.push_back(f);
      return std::optional<InequalityReport>(gn_check(s, g, usable, p));
    });
  } else if (id == "trudinger_moser") {
    per_p([&](double p) {
      return detail::merge_per_function(family, [&](const TestFunction& f) { return trudinger_moser_check(s, g, f.values, p, c.tolerance("tm_bound"), f.id); });
    });
  } else if (id == "local_gn") {
    per_p([&](double p) {
      const double r = grid.back();
      return detail::merge_per_function(family, [&](const TestFunction& f) { return local_gn_check(s, g, f.values, p, r, f.id); });
    });
  } else if (id == "morrey") {
    const double r = c.tolerance("morrey_radius") * diameter(g);
    per_p([&](double p) {
      const double a = alpha_p(g.model.name, p).value;
      return detail::merge_per_function(family, [&](const TestFunction& f) { return morrey_check(s, g, f.values, p, a, r, f.id); });
    });
  } else if (id == "morrey_fractional") {
    per_p([&](double p) {
      const auto d = dimensions(g.model.name);
      const double lo = d.d_h / (p * d.d_w), hi = lo + (1.0 - 1.0 / p) * (1.0 - alpha_p(g.model.name, 1.0).value);
      return detail::merge_per_function(family, [&](const TestFunction& f) { return morrey_fractional_check(s, g, f.values, p, 0.5 * (lo + hi), f.id); });
    });
  } else if (id == "cutoff_sum") {
    std::vector<double> times;
    const std::size_t stride = std::max<std::size_t>(1, grid.size() / 4);
    for (std::size_t k = 0; k < grid.size(); k += stride) times.push_back(grid[k]);
    std::vector<HeatKernelGrid> kernels;
    for (double t : times) kernels.push_back(heat_kernel(s, t));
    per_p([&](double p) {
      InequalityReport rep;
      rep.inequality_id = "cutoff_sum";
      rep.model = g.model.name;
      rep.level = g.level;
      rep.p = p;
      rep.window_min = times.front();
      rep.window_max = times.back();
      rep.window_kind = "time";
      for (const auto& f : family) {
        const Eigen::VectorXd a = f.values.cwiseAbs();
        for (double rho : {1.5, 2.0, 4.0}) {
          FunctionResult agg;
          agg.function_id = f.id + ":rho=" + fmt(rho);
          for (const auto& k : kernels) {
            const auto r = cutoff_sum_result(k, a, p, rho);
            agg.grid.push_back(k.t);
            agg.values.push_back(r.best_constant);
          }
          settle(agg, false);
          if (agg.best_constant > 1.0) agg.verdict = Verdict::Fail;
          rep.results.push_back(std::move(agg));
        }
      }
      return std::optional<InequalityReport>(rep);
    });
  } else if (id == "sub_gaussian") {
    emit(sub_gaussian_check(g, s, grid));
  } else {
    fail(ErrorKind::ConfigError, "inequality '" + id + "' is not a per-level check");
  }
  return {{"passed", passed}, {"reports", reports}};
}

inline std::string profiles_csv(const ExperimentConfig& c, const ApproxGraph& g, const SpectralDecomposition& s) {
  const auto family = detail::config_family(c, g, s);
  const auto grid = detail::config_grid(c, g, s);
  std::string out = "model,m,p,function,t,psi\n";
  const std::string head = g.model.name + "," + std::to_string(g.level) + ",";
  for (double p : c.ps)
    for (const auto& f : family) {
      const auto pr = besov_profile(s, g, f.values, p, grid, f.id);
      for (std::size_t k = 0; k < pr.t.size(); ++k) out += head + fmt(p) + "," + f.id + "," + fmt(pr.t[k]) + "," + fmt(pr.psi[k]) + "\n";
    }
  return out;
}

inline std::string korevaar_schoen_csv(const ExperimentConfig& c, const ApproxGraph& g, const SpectralDecomposition& s) {
  const auto family = detail::config_family(c, g, s);
  const double lo = 2.0 * min_spacing(g), hi = 0.5 * diameter(g);
  std::vector<double> radii{hi};
  if (*c.r_count > 1) {
    radii.clear();
    for (int k = 0; k < *c.r_count; ++k) radii.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (*c.r_count - 1)));
  }
  std::string out = "model,m,p,function,r,ks\n";
  for (double p : c.ps) {
    const double a = alpha_p(g.model.name, p).value;
    for (const auto& f : family)
      for (double r : radii)
        out += g.model.name + "," + std::to_string(g.level) + "," + fmt(p) + "," + f.id + "," + fmt(r) + "," + fmt(korevaar_schoen(g, f.values, p, a, r)) + "\n";
  }
  return out;
}

/// build -> decompose -> profiles -> checks per level, then cross-level summaries. Stages whose
/// artifacts are already recorded under the same config hash are skipped.
inline RunManifest run(const ExperimentConfig& c, const std::optional<fs::path>& cache_dir = std::nullopt) {
  const fs::path root = c.output;
  fs::create_directories(root);
  const fs::path manifest_path = root / "manifest.json";
  RunManifest previous;
  bool have_previous = false;
  const std::string hash = config_hash(c);
  if (fs::exists(manifest_path)) {
    try {
      previous = load_manifest(manifest_path);
      have_previous = previous.config_hash == hash && previous.software == software_version;
    } catch (const Error&) {
      have_previous = false;
    }
  }
  RunManifest man;
  man.config_hash = hash;
  man.config = to_json(c);
  man.root = root;
  man.created = have_previous ? previous.created : detail::utc_now();

  auto reusable = [&](const std::string& id) -> const StageRecord* {
    if (!have_previous) return nullptr;
    const StageRecord* s = previous.stage(id);
    if (!s || s->status != "done") return nullptr;
    for (const auto& a : s->artifacts)
      if (!fs::exists(root / a.path) || sha256_file(root / a.path) != a.sha256) return nullptr;
    return s;
  };
  std::set<std::string> failed;
  // body writes its artifacts and returns their relative paths; pass/fail for checks via `passed`
  auto stage = [&](const std::string& id, const std::vector<std::string>& deps, const std::function<std::vector<std::string>(std::optional<bool>&)>& body) {
    StageRecord rec;
    rec.id = id;
    for (const auto& d : deps)
      if (failed.count(d)) {
        rec.status = "skipped";
        rec.error_message = "depends on failed stage " + d;
        failed.insert(id);
        man.stages.push_back(rec);
        return;
      }
    if (const StageRecord* old = reusable(id)) {
      rec = *old;
      rec.reused = true;
      man.stages.push_back(rec);
      return;
    }
    try {
      std::optional<bool> passed;
      for (const auto& path : body(passed)) rec.artifacts.push_back({path, sha256_file(root / path)});
      rec.passed = passed;
      rec.status = "done";
    } catch (const Error& e) {
      rec.status = "error";
      rec.error_kind = to_string(e.kind());
      rec.error_message = e.what();
      failed.insert(id);
    } catch (const std::exception& e) {
      rec.status = "error";
      rec.error_kind = "Internal";
      rec.error_message = e.what();
      failed.insert(id);
    }
    man.stages.push_back(rec);
  };

  std::map<int, detail::LevelState> state;
  auto graph_of = [&](int m) -> const ApproxGraph& {
    auto& st = state[m];
    if (!st.g) st.g = build_graph(build_model(c.model), m, c.vertex_cap);
    return *st.g;
  };
  auto spectrum_of = [&](int m) -> const SpectralDecomposition& {
    auto& st = state[m];
    if (!st.s) {
      const fs::path art = root / ("spectra/spectrum_m" + std::to_string(m) + ".bin");
      st.s = fs::exists(art) ? load_spectrum(art) : decompose(make_form(graph_of(m)));
    }
    return *st.s;
  };

  std::vector<std::string> check_ids;
  for (const auto& i : c.inequalities)
    if (i != "continuity") check_ids.push_back(i);

  for (int m : c.levels) {
    const std::string ms = std::to_string(m);
    stage("graph:" + ms, {}, [&](std::optional<bool>&) {
      const std::string rel = "graphs/graph_m" + ms + ".json";
      write_json(root / rel, graph_json(graph_of(m)));
      return std::vector<std::string>{rel};
    });
    stage("spectrum:" + ms, {"graph:" + ms}, [&](std::optional<bool>&) {
      const std::string rel = "spectra/spectrum_m" + ms + ".bin";
      auto& st = state[m];
      st.s = cache_dir ? cached_spectrum(*cache_dir, graph_of(m)) : decompose(make_form(graph_of(m)));
      save_spectrum(root / rel, *st.s);
      return std::vector<std::string>{rel};
    });
    stage("profiles:" + ms, {"spectrum:" + ms}, [&](std::optional<bool>&) {
      std::vector<std::string> rels{"profiles/besov_m" + ms + ".csv"};
      write_text(root / rels[0], profiles_csv(c, graph_of(m), spectrum_of(m)));
      if (c.r_count) {
        rels.push_back("profiles/korevaar_schoen_m" + ms + ".csv");
        write_text(root / rels[1], korevaar_schoen_csv(c, graph_of(m), spectrum_of(m)));
      }
      return rels;
    });
    for (const auto& id : check_ids) {
      stage("check:" + id + ":" + ms, {"spectrum:" + ms}, [&](std::optional<bool>& passed) {
        const std::string rel = "reports/" + id + "_m" + ms + ".json";
        auto j = run_check(c, id, graph_of(m), spectrum_of(m));
        passed = j["passed"].get<bool>();
        write_json(root / rel, j);
        return std::vector<std::string>{rel};
      });
    }
  }

  if (c.levels.size() >= 2 && !check_ids.empty()) {
    std::vector<std::string> deps;
    for (int m : c.levels)
      for (const auto& id : check_ids) deps.push_back("check:" + id + ":" + std::to_string(m));
    stage("stability", deps, [&](std::optional<bool>& passed) {
      // best constants per (inequality, p, function) across consecutive levels
      std::map<std::tuple<std::string, std::string, std::string>, std::vector<std::pair<int, double>>> series;
      for (int m : c.levels)
        for (const auto& id : check_ids) {
          const auto j = read_json(root / ("reports/" + id + "_m" + std::to_string(m) + ".json"));
          for (const auto& rj : j.at("reports")) {
            if (rj.contains("not_applicable")) continue;
            const auto rep = report_from_json(rj);
            for (const auto& r : rep.results) series[{id, fmt(rep.p), r.function_id}].push_back({m, r.best_constant});
          }
        }
      std::string out = "inequality,p,function,m,best_constant,drift,gated\n";
      bool ok = true;
      for (const auto& [key, pts] : series) {
        // random functions are redrawn per level and the cutoff ratio is checked against its
        // explicit bound, so their drift is reported but does not decide the stage
        const bool gated = std::get<2>(key).rfind("random", 0) != 0 && std::get<0>(key) != "cutoff_sum";
        for (std::size_t k = 0; k < pts.size(); ++k) {
          std::string d;
          if (k > 0) {
            const double a = pts[k - 1].second, b = pts[k].second;
            const double dr = a == 0.0 && b == 0.0 ? 1.0 : drift(a, b);
            if (gated && !(dr < c.tolerance("drift"))) ok = false;
            d = fmt(dr);
          }
          out += std::get<0>(key) + "," + std::get<1>(key) + "," + std::get<2>(key) + "," + std::to_string(pts[k].first) + "," + fmt(pts[k].second) + "," + d + "," +
                 (gated ? "true" : "false") + "\n";
        }
      }
      passed = ok;
      write_text(root / "summary/stability.csv", out);
      return std::vector<std::string>{"summary/stability.csv"};
    });
  }

  if (std::count(c.inequalities.begin(), c.inequalities.end(), "continuity")) {
    std::vector<std::string> deps;
    for (int m : c.levels) deps.push_back("spectrum:" + std::to_string(m));
    stage("continuity", deps, [&](std::optional<bool>& passed) {
      std::vector<LevelData> levels;
      for (int m : c.levels) levels.push_back({&graph_of(m), &spectrum_of(m)});
      std::vector<double> ps;
      for (double p : c.ps)
        if (p > 1.0) ps.push_back(p);
      const auto probe = continuity_probe(levels, ps, c.tolerance("growth_limit"));
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : probe.rows) rows.push_back({{"p", r.p}, {"lambda", r.lambda}, {"holder", r.holder}, {"growth", json_number(r.growth)}, {"bounded", r.bounded}});
      nlohmann::json j{{"model", probe.model}, {"levels", probe.levels}, {"rows", rows}, {"threshold", probe.threshold}, {"delta_E", flagged_json(probe.delta)}};
      passed = probe.threshold <= probe.delta.value;
      write_json(root / "reports/continuity.json", j);
      return std::vector<std::string>{"reports/continuity.json"};
    });
  }

  man.updated = detail::utc_now();
  write_json(manifest_path, to_json(man));
  return man;
}

// ---- plot data ----

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> v{"besov_curve", "fit_residuals", "stability", "holder_scatter"};
  return v;
}

namespace detail {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t col(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::IoError, "missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable read_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::IoError, path.string() + ": empty");
  t.header = split(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

inline std::vector<fs::path> artifacts_matching(const RunManifest& man, const std::string& prefix) {
  std::vector<fs::path> out;
  for (const auto& s : man.stages)
    for (const auto& a : s.artifacts)
      if (a.path.rfind(prefix, 0) == 0) {
        if (!fs::exists(man.root / a.path)) fail(ErrorKind::MissingArtifact, "artifact " + a.path + " is listed but missing");
        out.push_back(man.root / a.path);
      }
  if (out.empty()) fail(ErrorKind::MissingArtifact, "run has no artifacts under " + prefix);
  return out;
}

inline std::string safe_name(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-') ch = '_';
  return s;
}

}  // namespace detail

/// Tidy CSVs for one figure under out_dir; returns the files written.
inline std::vector<fs::path> emit_plot_data(const RunManifest& man, const std::string& figure_id, const fs::path& out_dir) {
  if (std::find(figure_ids().begin(), figure_ids().end(), figure_id) == figure_ids().end())
    fail(ErrorKind::MissingArtifact, "unknown figure '" + figure_id + "'");
  std::map<std::string, std::string> files;  // name -> body, written at the end in key order
  if (figure_id == "besov_curve" || figure_id == "fit_residuals") {
    for (const auto& path : detail::artifacts_matching(man, "profiles/besov_")) {
      const auto t = detail::read_csv(path);
      const auto cm = t.col("model"), cl = t.col("m"), cp = t.col("p"), cf = t.col("function"), ct = t.col("t"), cy = t.col("psi");
      if (figure_id == "besov_curve") {
        for (const auto& r : t.rows) {
          auto& body = files["besov_curve_" + detail::safe_name(r[cf]) + ".csv"];
          if (body.empty()) body = "model,m,p,t,psi\n";
          body += r[cm] + "," + r[cl] + "," + r[cp] + "," + r[ct] + "," + r[cy] + "\n";
        }
      } else {
        // one log-log line per (m, p, function) curve
        std::map<std::tuple<std::string, std::string, std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> curves;
        std::vector<std::tuple<std::string, std::string, std::string, std::string>> order;
        for (const auto& r : t.rows) {
          const double y = std::stod(r[cy]);
          if (!(y > 0.0)) continue;
          const auto key = std::tuple{r[cm], r[cl], r[cp], r[cf]};
          if (!curves.count(key)) order.push_back(key);
          curves[key].first.push_back(std::log(std::stod(r[ct])));
          curves[key].second.push_back(std::log(y));
        }
        auto& body = files["fit_residuals.csv"];
        if (body.empty()) body = "model,m,p,function,log_t,residual,slope\n";
        for (const auto& key : order) {
          const auto& [x, y] = curves[key];
          if (x.size() < 2) continue;
          const auto fit = ols(x, y);
          for (std::size_t k = 0; k < x.size(); ++k)
            body += std::get<0>(key) + "," + std::get<1>(key) + "," + std::get<2>(key) + "," + std::get<3>(key) + "," + fmt(x[k]) + "," + fmt(fit.residuals[k]) + "," +
                    fmt(fit.slope) + "\n";
        }
      }
    }
  } else {
    for (const auto& path : detail::artifacts_matching(man, "reports/")) {
      if (path.filename() == "continuity.json") continue;
      const auto j = read_json(path);
      for (const auto& rj : j.at("reports")) {
        if (rj.contains("not_applicable")) continue;
        const auto rep = report_from_json(rj);
        if (figure_id == "stability") {
          double best = 0.0;
          bool has_family = false;
          for (const auto& r : rep.results)
            if (r.function_id == "family") {
              best = r.best_constant;
              has_family = true;
            }
          if (!has_family)
            for (const auto& r : rep.results) best = std::max(best, r.best_constant);
          auto& body = files["stability_p" + detail::p_tag(rep.p) + ".csv"];
          if (body.empty()) body = "inequality,m,best_constant\n";
          body += rep.inequality_id + "," + std::to_string(rep.level) + "," + fmt(best) + "\n";
        } else if (rep.inequality_id == "morrey" || rep.inequality_id == "morrey_fractional") {
          auto& body = files["holder_scatter.csv"];
          if (body.empty()) body = "inequality,model,m,p,function,holder,ratio\n";
          for (const auto& r : rep.results) {
            const auto h = r.extras.find("holder");
            body += rep.inequality_id + "," + rep.model + "," + std::to_string(rep.level) + "," + fmt(rep.p) + "," + r.function_id + "," +
                    (h == r.extras.end() ? std::string("") : fmt(h->second)) + "," + fmt(r.best_constant) + "\n";
          }
        }
      }
    }
  }
  if (files.empty()) fail(ErrorKind::MissingArtifact, "run has no data for figure '" + figure_id + "'");
  std::vector<fs::path> written;
  for (const auto& [name, body] : files) {
    write_text(out_dir / name, body);
    written.push_back(out_dir / name);
  }
  return written;
}

}  // namespace fractallab
