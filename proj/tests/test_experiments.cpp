#include <gtest/gtest.h>

#include <unistd.h>

#include "fractallab/experiments.hpp"

using namespace fractallab;

namespace {

fs::path scratch_root() { return fs::temp_directory_path() / ("fractallab_test_" + std::to_string(getpid())); }

struct ScratchCleanup : ::testing::Environment {
  void TearDown() override { fs::remove_all(scratch_root()); }
};
const auto* const cleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

fs::path scratch(const std::string& name) {
  const fs::path p = scratch_root() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

template <class F>
void expect_error(ErrorKind kind, F&& f) {
  try {
    f();
    FAIL() << "no error raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

ExperimentConfig minimal(const fs::path& out) {
  auto c = parse_config(YAML::Load("{model: interval, levels: [3], p: [2], inequalities: [ppi]}"));
  c.output = out;
  return c;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST(Config, ParsesAndNormalizes) {
  const auto c = parse_config(YAML::Load(R"(
model: vicsek
levels: [4, 3, 4]
t_grid: {window: resolved, per_decade: 8}
p: [1, 2]
functions: {family: [vicsek_h, phi1], random: {count: 2, seed: 7}}
inequalities: [ppi, gn]
tolerances: {drift: 1.5}
)"));
  EXPECT_EQ(c.levels, (std::vector<int>{3, 4}));
  EXPECT_EQ(c.t_grid.per_decade, 8);
  EXPECT_EQ(c.functions.size(), 2u);
  EXPECT_EQ(c.random_count, 2);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.tolerance("drift"), 1.5);
  EXPECT_EQ(c.tolerance("stability"), 10.0);
}

TEST(Config, SchemaErrors) {
  for (const char* bad : {
           "{model: vicsek, levels: [3], p: [2], inequalities: [ppi], colour: red}",
           "{model: koch, levels: [3], p: [2], inequalities: [ppi]}",
           "{model: vicsek, levels: [5], p: [2], inequalities: [ppi]}",
           "{model: vicsek, levels: [], p: [2], inequalities: [ppi]}",
           "{model: vicsek, levels: [3], p: [0.5], inequalities: [ppi]}",
           "{model: vicsek, levels: [3], p: [two], inequalities: [ppi]}",
           "{model: vicsek, levels: [3], p: [2], inequalities: [nash_moser]}",
           "{model: gasket, levels: [3], p: [2], inequalities: [ppi], functions: {family: [vicsek_h]}}",
           "{model: vicsek, levels: [3], p: [2], inequalities: [continuity]}",
           "{model: vicsek, levels: [3], p: [2], inequalities: [ppi], tolerances: {drift: -1}}",
           "{model: vicsek, levels: [3], p: [2]}",
       })
    expect_error(ErrorKind::ConfigError, [&] { parse_config(YAML::Load(bad)); });
  // the cap can be raised explicitly
  EXPECT_EQ(parse_config(YAML::Load("{model: vicsek, levels: [5], vertex_cap: 20000, p: [2], inequalities: [ppi]}")).levels[0], 5);
  expect_error(ErrorKind::ConfigError, [] { load_config("/nonexistent/config.yaml"); });
}

TEST(Config, HashIgnoresOutputDirectory) {
  auto a = minimal("a"), b = minimal("b");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
  b.ps = {2, 4};
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, VertexCountsMatchGraphs) {
  for (const std::string name : {"interval", "vicsek", "gasket"})
    for (int m = 1; m <= 4; ++m) EXPECT_EQ(vertex_count(name, m), static_cast<std::size_t>(build_graph(build_model(name), m).size())) << name << m;
  EXPECT_EQ(vertex_count("vicsek", 5), 12501u);
}

TEST(Io, RoundTrips) {
  const auto dir = scratch("io");
  const auto g = build_graph(build_model("gasket"), 2);
  const auto s = decompose(make_form(g));
  save_spectrum(dir / "s.bin", s);
  const auto s2 = load_spectrum(dir / "s.bin");
  EXPECT_EQ(s2.eigenvalues, s.eigenvalues);
  EXPECT_EQ(s2.eigenvectors, s.eigenvectors);
  EXPECT_EQ(s2.measure, s.measure);

  write_text(dir / "f.csv", function_csv(s.eigenvectors.col(3)));
  EXPECT_EQ(read_function_csv(dir / "f.csv", g.size()), s.eigenvectors.col(3));
  write_text(dir / "short.csv", "vertex_id,value\n0,1\n");
  expect_error(ErrorKind::IoError, [&] { read_function_csv(dir / "short.csv", g.size()); });
  write_text(dir / "dup.csv", "vertex_id,value\n0,1\n0,2\n");
  expect_error(ErrorKind::IoError, [&] { read_function_csv(dir / "dup.csv", 2); });
  expect_error(ErrorKind::MissingArtifact, [&] { read_function_csv(dir / "none.csv", 2); });

  const auto k = heat_kernel(s, 0.01);
  write_matrix(dir / "k.bin", k.values);
  EXPECT_EQ(read_matrix(dir / "k.bin"), k.values);
  write_text(dir / "junk.bin", "not a matrix");
  expect_error(ErrorKind::IoError, [&] { read_matrix(dir / "junk.bin"); });
  const auto csv = kernel_csv(k);
  EXPECT_EQ(csv.substr(0, 12), "t,i,j,value\n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + g.size() * g.size());

  const auto j = graph_json(g);
  EXPECT_EQ(j["model"], "gasket");
  EXPECT_EQ(j["vertices"].size(), static_cast<std::size_t>(g.size()));
  EXPECT_EQ(j["edges"].size(), g.edges.size());
  EXPECT_EQ(j["vertices"][4]["measure"].get<double>(), g.measure(4));

  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) EXPECT_EQ(std::strtod(fmt(x).c_str(), nullptr), x);
}

TEST(Io, ReportJsonRoundTrip) {
  const auto g = build_graph(build_model("vicsek"), 3);
  const auto s = decompose(make_form(g));
  const auto rep = gn_check(s, g, test_family(g, s), 4.0);
  const auto j = to_json(rep);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["exponents"]["alpha_p"]["provenance"], "theorem");
  const auto back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.results.size(), rep.results.size());
  for (std::size_t k = 0; k < rep.results.size(); ++k) {
    EXPECT_EQ(back.results[k].best_constant, rep.results[k].best_constant);
    EXPECT_EQ(back.results[k].verdict, rep.results[k].verdict);
  }
  EXPECT_EQ(back.exponents, rep.exponents);
}

TEST(Io, SpectrumCache) {
  const auto dir = scratch("cache");
  const auto g = build_graph(build_model("vicsek"), 2);
  const auto a = cached_spectrum(dir, g);
  EXPECT_TRUE(fs::exists(dir / "vicsek_m2.spec"));
  const auto b = cached_spectrum(dir, g);
  EXPECT_EQ(a.eigenvectors, b.eigenvectors);
}

TEST(Run, MinimalPipelineAndIdempotence) {
  const auto dir = scratch("minimal");
  const auto c = minimal(dir / "out");
  const auto m1 = run(c);
  EXPECT_EQ(m1.artifacts().size(), 4u);
  EXPECT_EQ(m1.exit_code(), 0);
  for (const auto& a : m1.artifacts()) EXPECT_TRUE(fs::exists(c.output / a)) << a;
  EXPECT_TRUE(fs::exists(c.output / "manifest.json"));
  const auto m2 = run(c);
  EXPECT_EQ(m2.computed(), 0);
  for (std::size_t k = 0; k < m1.stages.size(); ++k) {
    EXPECT_TRUE(m2.stages[k].reused);
    ASSERT_EQ(m1.stages[k].artifacts.size(), m2.stages[k].artifacts.size());
    for (std::size_t a = 0; a < m1.stages[k].artifacts.size(); ++a) EXPECT_EQ(m1.stages[k].artifacts[a].sha256, m2.stages[k].artifacts[a].sha256);
  }
  // a damaged artifact is recomputed, the rest reused
  fs::remove(c.output / "profiles/besov_m3.csv");
  const auto m3 = run(c);
  EXPECT_EQ(m3.computed(), 1);
  EXPECT_FALSE(m3.stage("profiles:3")->reused);
  EXPECT_EQ(m3.stage("profiles:3")->artifacts[0].sha256, m1.stage("profiles:3")->artifacts[0].sha256);
  // a changed config recomputes everything
  auto c2 = c;
  c2.t_grid.per_decade = 6;
  const auto m4 = run(c2);
  EXPECT_EQ(m4.computed(), static_cast<int>(m4.stages.size()));
}

TEST(Run, StageErrorsRecorded) {
  const auto dir = scratch("errors");
  auto c = parse_config(YAML::Load("{model: interval, levels: [3], t_grid: {window: resolved}, p: [2], inequalities: [ppi]}"));
  c.output = dir;
  const auto man = run(c);
  EXPECT_EQ(man.stage("graph:3")->status, "done");
  EXPECT_EQ(man.stage("spectrum:3")->status, "done");
  EXPECT_EQ(man.stage("profiles:3")->status, "error");
  EXPECT_EQ(man.stage("profiles:3")->error_kind, "InsufficientGrid");
  EXPECT_EQ(man.stage("check:ppi:3")->status, "error");
  EXPECT_EQ(man.exit_code(), 2);
  EXPECT_TRUE(fs::exists(dir / "spectra/spectrum_m3.bin"));
  const auto j = read_json(dir / "manifest.json");
  EXPECT_EQ(j["stages"][2]["error"]["kind"], "InsufficientGrid");
}

TEST(Run, DeterministicAcrossDirectories) {
  const auto dir = scratch("determinism");
  auto c = parse_config(YAML::Load(R"(
model: vicsek
levels: [2, 3]
t_grid: {per_decade: 6}
r_grid: {count: 3}
p: [1, 2, 4]
functions: {family: [vicsek_h, phi1, harmonic2, cell1], random: {count: 1, seed: 3}}
inequalities: [ppi, gn, trudinger_moser, morrey, morrey_fractional, bakry_emery, cutoff_sum, continuity]
)"));
  c.output = dir / "a";
  const auto a = run(c);
  c.output = dir / "b";
  const auto b = run(c);
  EXPECT_FALSE(a.has_errors());
  for (const auto& s : a.stages) EXPECT_EQ(s.status, "done") << s.id << " " << s.error_message;
  ASSERT_EQ(a.artifacts(), b.artifacts());
  for (const auto& p : a.artifacts()) EXPECT_EQ(read_text(dir / "a" / p), read_text(dir / "b" / p)) << p;
  // trudinger_moser is only critical at p = 1 on the Vicsek set
  const auto tm = read_json(dir / "a/reports/trudinger_moser_m3.json");
  int na = 0;
  for (const auto& r : tm["reports"]) na += r.contains("not_applicable");
  EXPECT_EQ(na, 2);
  EXPECT_TRUE(fs::exists(dir / "a/summary/stability.csv"));
  EXPECT_TRUE(fs::exists(dir / "a/reports/continuity.json"));

  const auto plots = dir / "plots";
  const auto curves = emit_plot_data(a, "besov_curve", plots);
  EXPECT_EQ(curves.size(), 5u);
  for (const auto& f : curves) EXPECT_EQ(first_line(f), "model,m,p,t,psi");
  const auto stab = emit_plot_data(a, "stability", plots);
  for (const auto& f : stab) EXPECT_EQ(first_line(f), "inequality,m,best_constant");
  EXPECT_EQ(first_line(emit_plot_data(a, "fit_residuals", plots)[0]), "model,m,p,function,log_t,residual,slope");
  EXPECT_EQ(first_line(emit_plot_data(a, "holder_scatter", plots)[0]), "inequality,model,m,p,function,holder,ratio");
  expect_error(ErrorKind::MissingArtifact, [&] { emit_plot_data(a, "spaghetti", plots); });
  const auto loaded = load_manifest(dir / "a/manifest.json");
  EXPECT_EQ(loaded.artifacts(), a.artifacts());
  fs::remove(dir / "a/profiles/besov_m2.csv");
  expect_error(ErrorKind::MissingArtifact, [&] { emit_plot_data(loaded, "besov_curve", plots); });
}
