#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "fractallab/blas_guard.hpp"
#include "fractallab/experiments.hpp"

using namespace fractallab;

namespace {

struct Options {
  std::string model = "vicsek";
  int level = 3;
  std::vector<double> ps{2.0};
  std::string config;
  std::string out;
  std::size_t cap = default_vertex_cap;
  double t = 0.01;
  std::string function = "phi1";
  std::string function_csv;
  std::vector<double> boundary;
  std::string inequality;
  std::string format = "json";
  std::string figure;
  std::string manifest;
};

std::optional<fs::path> cache_dir() {
  if (const char* c = std::getenv("FRACTALLAB_CACHE"); c && *c) return fs::path(c);
  return std::nullopt;
}

struct Loaded {
  ApproxGraph g;
  SpectralDecomposition s;
};

ApproxGraph graph_for(const Options& o) { return build_graph(build_model(o.model), o.level, o.cap); }

Loaded load(const Options& o) {
  Loaded l{graph_for(o), {}};
  const auto cache = cache_dir();
  l.s = cache ? cached_spectrum(*cache, l.g) : decompose(make_form(l.g));
  return l;
}

// Writes to --out when given, else stdout.
void emit(const Options& o, const std::string& body, const std::string& default_name = "") {
  if (o.out.empty()) {
    std::cout << body;
    return;
  }
  fs::path p(o.out);
  if (fs::is_directory(p) && !default_name.empty()) p /= default_name;
  write_text(p, body);
  std::cerr << "wrote " << p.string() << "\n";
}

Eigen::VectorXd pick_function(const Options& o, const Loaded& l) {
  if (!o.function_csv.empty()) return read_function_csv(o.function_csv, l.g.size());
  for (auto& f : test_family(l.g, l.s))
    if (f.id == o.function) return f.values;
  fail(ErrorKind::DomainError, "no test function '" + o.function + "' for model " + o.model);
}

ExperimentConfig single_level_config(const Options& o) {
  ExperimentConfig c;
  c.model = o.model;
  c.levels = {o.level};
  c.vertex_cap = o.cap;
  c.ps = o.ps;
  c.inequalities = {o.inequality};
  return c;
}

int cmd_build_graph(const Options& o) {
  emit(o, graph_json(graph_for(o)).dump(2) + "\n", o.model + "_m" + std::to_string(o.level) + ".json");
  return 0;
}

int cmd_spectrum(const Options& o) {
  const auto l = load(o);
  if (!o.out.empty() && fs::is_directory(o.out)) save_spectrum(fs::path(o.out) / (o.model + "_m" + std::to_string(o.level) + ".spec"), l.s);
  emit(o, spectrum_csv(l.s), o.model + "_m" + std::to_string(o.level) + "_spectrum.csv");
  return 0;
}

int cmd_heat_kernel(const Options& o) {
  const auto l = load(o);
  const auto k = heat_kernel(l.s, o.t);
  const std::string stem = o.model + "_m" + std::to_string(o.level) + "_t" + fmt(o.t);
  if (!o.out.empty() && fs::is_directory(o.out)) write_matrix(fs::path(o.out) / (stem + ".bin"), k.values);
  emit(o, kernel_csv(k), stem + ".csv");
  return 0;
}

int cmd_besov(const Options& o) {
  const auto l = load(o);
  const auto grid = window_grid(resolved_window(l.g.model, l.g.level));
  const Eigen::VectorXd f = pick_function(o, l);
  nlohmann::json j = nlohmann::json::array();
  std::string csv = "p,t,psi\n";
  for (double p : o.ps) {
    const auto pr = besov_profile(l.s, l.g, f, p, grid, o.function);
    for (std::size_t k = 0; k < pr.t.size(); ++k) csv += fmt(p) + "," + fmt(pr.t[k]) + "," + fmt(pr.psi[k]) + "\n";
    j.push_back(to_json(critical_exponent({pr}, p)));
  }
  emit(o, csv, o.function + "_profile.csv");
  std::cerr << j.dump(2) << "\n";
  return 0;
}

int cmd_harmonic(const Options& o) {
  const auto g = graph_for(o);
  const auto form = make_form(g);
  Eigen::VectorXd h;
  const auto b = level_vertices(g, 0);
  if (o.boundary.empty()) {
    h = o.model == "vicsek" ? vicsek_harmonic_0(g, 0.0, 1.0).values : harmonic_extension(form, b, Eigen::VectorXd::Unit(static_cast<Eigen::Index>(b.size()), 0)).values;
  } else {
    if (o.boundary.size() != b.size()) fail(ErrorKind::DomainError, "expected " + std::to_string(b.size()) + " boundary values");
    h = harmonic_extension(form, b, Eigen::Map<const Eigen::VectorXd>(o.boundary.data(), static_cast<Eigen::Index>(o.boundary.size()))).values;
  }
  emit(o, function_csv(h), o.model + "_m" + std::to_string(o.level) + "_harmonic.csv");
  return 0;
}

int cmd_check(const Options& o) {
  const auto c = single_level_config(o);
  if (o.inequality == "continuity") fail(ErrorKind::ConfigError, "continuity needs several levels; use `run` with a config");
  if (std::find(known_inequalities().begin(), known_inequalities().end(), o.inequality) == known_inequalities().end())
    fail(ErrorKind::ConfigError, "unknown inequality '" + o.inequality + "'");
  const auto l = load(o);
  const auto j = run_check(c, o.inequality, l.g, l.s);
  emit(o, j.dump(2) + "\n", o.inequality + "_m" + std::to_string(o.level) + ".json");
  return j["passed"].get<bool>() ? 0 : 1;
}

int cmd_exponents(const Options& o) {
  const auto t = exponent_table(o.model, o.ps);
  if (o.format == "csv") emit(o, exponent_csv(t), o.model + "_exponents.csv");
  else emit(o, to_json(t).dump(2) + "\n", o.model + "_exponents.json");
  return 0;
}

int cmd_run(const Options& o) {
  if (o.config.empty()) fail(ErrorKind::ConfigError, "run needs --config");
  auto c = load_config(o.config);
  if (!o.out.empty()) c.output = o.out;
  const auto man = run(c, cache_dir());
  for (const auto& s : man.stages) {
    std::cout << s.id << ": " << s.status << (s.reused ? " (reused)" : "");
    if (s.passed) std::cout << (*s.passed ? " pass" : " FAIL");
    if (!s.error_message.empty()) std::cout << " " << s.error_message;
    std::cout << "\n";
  }
  std::cout << "manifest: " << (c.output / "manifest.json").string() << "\n";
  return man.exit_code();
}

int cmd_emit_plot_data(const Options& o) {
  fs::path mpath = o.manifest;
  if (mpath.empty()) {
    if (o.config.empty()) fail(ErrorKind::ConfigError, "emit-plot-data needs --manifest or --config");
    mpath = load_config(o.config).output / "manifest.json";
  }
  if (!fs::exists(mpath)) fail(ErrorKind::MissingArtifact, "no manifest at " + mpath.string());
  const auto man = load_manifest(mpath);
  const fs::path out = o.out.empty() ? man.root / "plots" : fs::path(o.out);
  for (const auto& p : emit_plot_data(man, o.figure, out)) std::cout << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  ensure_reliable_blas(argv);
  Options o;
  CLI::App app{"Numerical laboratory for Dirichlet forms and Sobolev inequalities on fractals"};
  app.require_subcommand(1);
  auto common = [&](CLI::App* sc) {
    sc->add_option("--model", o.model, "vicsek | gasket | interval (carpet: exponents only)");
    sc->add_option("--level", o.level, "approximation level m");
    sc->add_option("--cap", o.cap, "vertex cap");
    sc->add_option("--out", o.out, "output file or directory (default stdout)");
  };
  auto* bg = app.add_subcommand("build-graph", "export the level-m graph as JSON");
  common(bg);
  auto* sp = app.add_subcommand("spectrum", "eigenvalues as CSV; binary dump when --out is a directory");
  common(sp);
  auto* hk = app.add_subcommand("heat-kernel", "kernel p_t as CSV (t,i,j,value); binary dump when --out is a directory");
  common(hk);
  hk->add_option("--t", o.t, "time")->required();
  auto* bs = app.add_subcommand("besov", "Besov profile (t, psi) and slope estimate");
  common(bs);
  bs->add_option("--p", o.ps, "exponents p");
  bs->add_option("--function", o.function, "test-function id");
  bs->add_option("--function-csv", o.function_csv, "function file (vertex_id,value)");
  auto* hm = app.add_subcommand("harmonic", "harmonic extension of boundary data as CSV");
  common(hm);
  hm->add_option("--boundary", o.boundary, "values on the level-0 vertices");
  auto* ck = app.add_subcommand("check", "run one inequality check on the test family");
  common(ck);
  ck->add_option("--inequality", o.inequality, "inequality id")->required();
  ck->add_option("--p", o.ps, "exponents p");
  auto* ex = app.add_subcommand("exponents", "exponent table");
  ex->add_option("--model", o.model);
  ex->add_option("--p", o.ps, "exponents p");
  ex->add_option("--format", o.format)->check(CLI::IsMember({"json", "csv"}));
  ex->add_option("--out", o.out);
  auto* rn = app.add_subcommand("run", "run an experiment config");
  rn->add_option("--config", o.config)->required();
  rn->add_option("--out", o.out, "override the config's output directory");
  auto* ep = app.add_subcommand("emit-plot-data", "tidy CSVs for one figure");
  ep->add_option("--figure", o.figure, "besov_curve | fit_residuals | stability | holder_scatter")->required();
  ep->add_option("--manifest", o.manifest);
  ep->add_option("--config", o.config);
  ep->add_option("--out", o.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (*bg) return cmd_build_graph(o);
    if (*sp) return cmd_spectrum(o);
    if (*hk) return cmd_heat_kernel(o);
    if (*bs) return cmd_besov(o);
    if (*hm) return cmd_harmonic(o);
    if (*ck) return cmd_check(o);
    if (*ex) return cmd_exponents(o);
    if (*rn) return cmd_run(o);
    if (*ep) return cmd_emit_plot_data(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
