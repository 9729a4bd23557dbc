#include <gtest/gtest.h>

#include <map>
#include <memory>
#include <random>

#include "fractallab/besov_sobolev.hpp"

using namespace fractallab;

namespace {

struct Fixture {
  ApproxGraph g;
  SpectralDecomposition s;
};

const Fixture& fixture(const std::string& name, int m) {
  static std::map<std::pair<std::string, int>, std::unique_ptr<Fixture>> cache;
  auto& slot = cache[{name, m}];
  if (!slot) {
    slot = std::make_unique<Fixture>();
    slot->g = build_graph(build_model(name), m, 20000);
    slot->s = decompose(make_form(slot->g));
  }
  return *slot;
}

Eigen::VectorXd random_function(int n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd f(n);
  for (int i = 0; i < n; ++i) f(i) = u(rng);
  return f;
}

double lp_norm(const ApproxGraph& g, const Eigen::VectorXd& f, double p) {
  return std::pow(g.measure.dot(f.cwiseAbs().array().pow(p).matrix()), 1.0 / p);
}

double beta_p(const FractalModel& m, double p) {
  return (1.0 - 2.0 / p) * (1.0 - m.hausdorff_dim / m.walk_dim) + 1.0 / p;
}

double mid_window(const ApproxGraph& g) {
  const auto w = resolved_window(g.model, g.level);
  return std::sqrt(w.t_min * w.t_max);
}

}  // namespace

TEST(Profile, ConstantIsZero) {
  const auto& fx = fixture("vicsek", 3);
  auto pr = besov_profile(fx.s, fx.g, Eigen::VectorXd::Constant(fx.g.size(), 1.7), 2.0, window_grid(resolved_window(fx.g.model, 3)));
  for (double v : pr.psi) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(seminorm(pr, 0.5), 0.0);
  EXPECT_EQ(p_variation(pr, 0.5).value, 0.0);
}

TEST(Profile, RejectsSmallP) {
  const auto& fx = fixture("interval", 4);
  try {
    besov_profile(fx.s, fx.g, Eigen::VectorXd::Zero(fx.g.size()), 0.5, {1e-2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainError);
  }
}

TEST(Profile, CoefficientRoutesMatchDoubleSum) {
  std::mt19937_64 rng(2);
  const auto& fx = fixture("vicsek", 3);
  const int n = fx.g.size();
  Eigen::VectorXd rough = random_function(n, rng);
  Eigen::VectorXd levels(n);  // few distinct values: level-set route
  for (int i = 0; i < n; ++i) levels(i) = std::floor(4.0 * fx.g.coords(i, 0)) - 0.5 * std::floor(3.0 * fx.g.coords(i, 1));
  for (double p : {1.0, 2.0, 3.5}) {
    for (const auto* f : {&rough, &levels}) {
      const Eigen::VectorXd c = besov_coefficients(fx.s, *f, p);
      EXPECT_LT(std::abs(c.sum()), 1e-10 * c.cwiseAbs().sum());
      for (double t : {1e-4, 3e-3, 0.05}) {
        const double direct = besov_functional_quadrature(heat_kernel(fx.s, t), *f, p);
        EXPECT_NEAR(besov_functional(fx.s, c, t), direct, 1e-9 * direct) << "p=" << p << " t=" << t;
      }
    }
  }
}

TEST(Profile, SpectralIdentityP2) {
  std::mt19937_64 rng(4);
  for (const std::string name : {"interval", "vicsek"}) {
    const auto& fx = fixture(name, 4);
    const double t = mid_window(fx.g);
    const auto k = heat_kernel(fx.s, t);
    for (int r = 0; r < 20; ++r) {
      Eigen::VectorXd f = random_function(fx.g.size(), rng);
      const double q = besov_functional_quadrature(k, f, 2.0);
      EXPECT_NEAR(q, besov_functional_spectral_p2(fx.s, f, t), 1e-8 * q);
    }
  }
}

TEST(Profile, BoundedByTwiceLpNorm) {
  std::mt19937_64 rng(8);
  const auto& fx = fixture("gasket", 3);
  for (double p : {1.0, 2.0, 4.0}) {
    Eigen::VectorXd f = random_function(fx.g.size(), rng);
    auto pr = besov_profile(fx.s, fx.g, f, p, log_grid(1e-5, 10.0, 4));
    for (double v : pr.psi) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 2.0 * lp_norm(fx.g, f, p));
    }
  }
}

TEST(Profile, IntervalHalfIndicatorScaling) {
  const auto& fx = fixture("interval", 8);
  Eigen::VectorXd f(fx.g.size());
  for (int i = 0; i < fx.g.size(); ++i) f(i) = fx.g.coords(i, 0) < 0.5 - 1e-12 ? 1.0 : 0.0;
  const auto w = resolved_window(fx.g.model, 8);
  auto pr = besov_profile(fx.s, fx.g, f, 1.0, log_grid(w.t_min, w.t_min * 100.0));
  EXPECT_NEAR(profile_fit(pr).slope, 0.5, 0.05);
  // continuum oracle: two half-lines exchange 2 sqrt(t/pi)
  const std::size_t mid = pr.t.size() / 2;
  EXPECT_NEAR(pr.psi[mid] / (2.0 * std::sqrt(pr.t[mid] / M_PI)), 1.0, 0.1);
}

TEST(Seminorm, Properties) {
  std::mt19937_64 rng(5);
  const auto& fx = fixture("vicsek", 3);
  Eigen::VectorXd f = random_function(fx.g.size(), rng);
  const auto w = resolved_window(fx.g.model, 3);
  const double p = 2.0;
  auto pr = besov_profile(fx.s, fx.g, f, p, window_grid(w));
  const double alpha = 0.5;
  const double full = seminorm(pr, alpha);
  for (double r : {w.t_min * 2, std::sqrt(w.t_min * w.t_max), w.t_max}) {
    const double loc = seminorm(pr, alpha, r);
    EXPECT_LE(loc, full);
    EXPECT_LE(full, 2.0 / std::pow(r, alpha) * lp_norm(fx.g, f, p) + loc + 1e-12);
    // heavier weight on small t
    EXPECT_GE(seminorm(pr, 0.7, r), std::pow(r, alpha - 0.7) * loc * (1 - 1e-12));
  }
  EXPECT_LE(seminorm(pr, alpha, w.t_min * 3), seminorm(pr, alpha, w.t_min * 30));
  try {
    seminorm(pr, alpha, w.t_min);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientGrid);
  }
  try {
    seminorm(pr, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainError);
  }
}

TEST(Variation, IntervalEnergy) {
  std::mt19937_64 rng(6);
  const auto& fx = fixture("interval", 4);
  auto form = make_form(fx.g);
  for (int r = 0; r < 5; ++r) {
    Eigen::VectorXd f = random_function(fx.g.size(), rng);
    auto pr = besov_profile(fx.s, fx.g, f, 2.0, window_grid(graph_limit_window(fx.s)));
    const double v = p_variation(pr, 0.5).value;
    const double e = energy(form, f);
    EXPECT_GE(v * v, 1.9 * e);
    EXPECT_LE(v * v, 2.1 * e);
  }
}

TEST(Variation, P2ChainAllModels) {
  std::mt19937_64 rng(9);
  for (const std::string name : {"interval", "vicsek", "gasket"}) {
    for (int m : {3, 4}) {
      const auto& fx = fixture(name, m);
      Eigen::VectorXd f = random_function(fx.g.size(), rng);
      auto pr = besov_profile(fx.s, fx.g, f, 2.0, window_grid(graph_limit_window(fx.s)));
      const auto v = p_variation(pr, 0.5);
      const double ratio = v.value * v.value / (2.0 * energy(make_form(fx.g), f));
      EXPECT_GE(ratio, 0.8) << name << m;
      EXPECT_LE(ratio, 1.25) << name << m;
      EXPECT_LE(v.value, v.half_decade_sup);
      EXPECT_LE(v.half_decade_sup, v.window_sup);
    }
  }
}

TEST(Variation, Homogeneity) {
  std::mt19937_64 rng(10);
  const auto& fx = fixture("gasket", 3);
  Eigen::VectorXd f = random_function(fx.g.size(), rng);
  const auto grid = window_grid(resolved_window(fx.g.model, 3));
  for (double p : {1.0, 2.0, 4.0}) {
    const double a = p_variation(besov_profile(fx.s, fx.g, f, p, grid), 0.5).value;
    for (double c : {-2.0, 3.0}) {
      const double b = p_variation(besov_profile(fx.s, fx.g, Eigen::VectorXd(c * f), p, grid), 0.5).value;
      EXPECT_NEAR(b, std::abs(c) * a, 1e-12 * b);
    }
  }
}

TEST(KorevaarSchoen, ExamplesAndErrors) {
  std::mt19937_64 rng(12);
  const auto& g = fixture("vicsek", 3).g;
  EXPECT_EQ(korevaar_schoen(g, Eigen::VectorXd::Constant(g.size(), 2.0), 2.0, 0.5, 0.2), 0.0);
  Eigen::VectorXd f = random_function(g.size(), rng);
  const double a = korevaar_schoen(g, f, 2.0, 0.5, 0.2);
  EXPECT_NEAR(korevaar_schoen(g, Eigen::VectorXd(-3.0 * f), 2.0, 0.5, 0.2), 3.0 * a, 1e-12 * a);
  try {
    korevaar_schoen(g, f, 2.0, 0.5, 0.5 * min_spacing(g));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateBall);
  }
  try {
    korevaar_schoen(g, f, 2.0, 0.5, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainError);
  }
}

TEST(KorevaarSchoen, ComparableToHeatFunctional) {
  std::mt19937_64 rng(13);
  std::vector<double> lo, hi;
  for (int m : {3, 4, 5}) {
    const auto& fx = fixture("vicsek", m);
    Eigen::VectorXd f = random_function(fx.g.size(), rng);
    const auto grid = window_grid(resolved_window(fx.g.model, m), 4);
    auto pr = besov_profile(fx.s, fx.g, f, 2.0, grid);
    double rmin = 1e300, rmax = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double r = std::pow(grid[i], 1.0 / fx.g.model.walk_dim);
      const double ratio = korevaar_schoen(fx.g, f, 2.0, 0.5, r) / (std::pow(grid[i], -0.5) * pr.psi[i]);
      EXPECT_GT(ratio, 1.0 / 50) << "m=" << m << " r=" << r;
      EXPECT_LT(ratio, 50.0) << "m=" << m << " r=" << r;
      rmin = std::min(rmin, ratio);
      rmax = std::max(rmax, ratio);
    }
    lo.push_back(rmin);
    hi.push_back(rmax);
  }
  EXPECT_LT(*std::max_element(lo.begin(), lo.end()) / *std::min_element(lo.begin(), lo.end()), 3.0);
  EXPECT_LT(*std::max_element(hi.begin(), hi.end()) / *std::min_element(hi.begin(), hi.end()), 3.0);
}

TEST(KorevaarSchoen, VicsekHarmonicBallBoundUniformInLevel) {
  for (double p : {2.0, 4.0}) {
    std::vector<double> sups;
    for (int m : {3, 4, 5}) {
      const auto& g = fixture("vicsek", m).g;
      const auto h = vicsek_harmonic_0(g, 0.0, 1.0).values;
      const double ex = p * beta_p(g.model, p) * g.model.walk_dim + g.model.hausdorff_dim;
      double sup = 0.0;
      for (int j = 1; j < m; ++j) {
        const double r = std::pow(3.0, -j);
        sup = std::max(sup, std::pow(r, -ex) * ball_difference_sum(g, h, p, r, false));
      }
      sups.push_back(sup);
    }
    EXPECT_LT(*std::max_element(sups.begin(), sups.end()) / *std::min_element(sups.begin(), sups.end()), 2.0) << "p=" << p;
  }
}

TEST(CriticalExponent, IntervalEigenfunction) {
  const auto& fx = fixture("interval", 8);
  const auto grid = window_grid(resolved_window(fx.g.model, 8));
  Eigen::VectorXd phi1 = fx.s.eigenvectors.col(1);
  auto e = critical_exponent({besov_profile(fx.s, fx.g, phi1, 2.0, grid, "phi1")}, 2.0);
  EXPECT_NEAR(e.alpha_hat, 0.5, 0.05);
  EXPECT_GT(e.stderr_alpha, 0.0);
  EXPECT_EQ(e.family[0], "phi1");
}

TEST(CriticalExponent, VicsekHarmonic) {
  const auto& fx = fixture("vicsek", 4);
  const auto grid = window_grid(resolved_window(fx.g.model, 4));
  const auto h = vicsek_harmonic_0(fx.g, 0.0, 1.0).values;
  const double dh = fx.g.model.hausdorff_dim, dw = fx.g.model.walk_dim;
  EXPECT_NEAR(critical_exponent({besov_profile(fx.s, fx.g, h, 1.0, grid)}, 1.0).alpha_hat, dh / dw, 0.06);
  EXPECT_NEAR(critical_exponent({besov_profile(fx.s, fx.g, h, 4.0, grid)}, 4.0).alpha_hat, beta_p(fx.g.model, 4.0), 0.06);
}

TEST(CriticalExponent, DegenerateFamily) {
  const auto& fx = fixture("interval", 4);
  auto c = besov_profile(fx.s, fx.g, Eigen::VectorXd::Ones(fx.g.size()), 2.0, {1e-2, 2e-2});
  try {
    critical_exponent({c, c}, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateFamily);
  }
}

TEST(Cutoff, FamilyExamples) {
  const double rho = 2.0;
  const int k = -1;
  Eigen::VectorXd a = Eigen::VectorXd::Constant(5, std::pow(rho, k));
  EXPECT_EQ(cutoff_family(a, rho, k).cwiseAbs().maxCoeff(), 0.0);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(5, std::pow(rho, k + 1));
  EXPECT_LT((cutoff_family(b, rho, k).array() - std::pow(rho, k) * (rho - 1)).abs().maxCoeff(), 1e-15);
  std::mt19937_64 rng(14);
  Eigen::VectorXd f = random_function(200, rng, 0.01, 5.0);
  for (double r : {1.5, 2.0, 4.0}) {
    const int kk = 30;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(f.size());
    for (int j = -kk; j <= kk; ++j) {
      Eigen::VectorXd fk = cutoff_family(f, r, j);
      EXPECT_GE(fk.minCoeff(), 0.0);
      EXPECT_LE(fk.maxCoeff(), std::pow(r, j) * (r - 1) * (1 + 1e-15));
      sum += fk;
    }
    EXPECT_LT((sum - f).cwiseAbs().maxCoeff(), std::pow(r, -kk) * r);
  }
  try {
    cutoff_family(Eigen::VectorXd::Constant(3, -1.0), 2.0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainError);
  }
}

TEST(Cutoff, PairSumMatchesTruncatedSeries) {
  for (double rho : {1.5, 2.0, 4.0})
    for (double p : {1.0, 2.0, 4.0})
      for (auto [a, b] : {std::pair{0.0, 0.7}, std::pair{0.3, 2.9}, std::pair{1.0, 1.0}, std::pair{2.5, 0.0}, std::pair{0.125, 0.5}}) {
        double brute = 0.0;
        Eigen::VectorXd v(2);
        v << a, b;
        for (int k = -200; k <= 10; ++k) {
          Eigen::VectorXd c = cutoff_family(v, rho, k);
          brute += std::pow(std::abs(c(0) - c(1)), p);
        }
        EXPECT_NEAR(cutoff_pair_sum(a, b, rho, p), brute, 1e-14 * std::max(1.0, brute));
        if (p == 1.0) EXPECT_NEAR(cutoff_pair_sum(a, b, rho, p), std::abs(a - b), 1e-14);
      }
}

TEST(Cutoff, SumCheck) {
  std::mt19937_64 rng(15);
  const auto& fx = fixture("vicsek", 4);
  auto c = cutoff_sum_check(fx.s, fx.g, Eigen::VectorXd::Constant(fx.g.size(), 0.4), 2.0, 2.0, 1e-3);
  EXPECT_TRUE(c.passed());
  EXPECT_EQ(c.results[0].extras.at("lhs"), 0.0);
  EXPECT_EQ(c.results[0].extras.at("rhs"), 0.0);

  const auto h = vicsek_harmonic_0(fx.g, 0.0, 1.0).values;
  auto rep = cutoff_sum_check(fx.s, fx.g, h, 2.0, 2.0, mid_window(fx.g));
  EXPECT_TRUE(rep.passed());
  EXPECT_LE(rep.results[0].best_constant, 1.0);

  Eigen::VectorXd f = random_function(fx.g.size(), rng, 0.0, 1.0);
  const auto w = resolved_window(fx.g.model, 4);
  for (double t : log_grid(w.t_min, w.t_max, 1)) {
    const auto k = heat_kernel(fx.s, t);
    for (double rho : {1.5, 2.0, 4.0}) EXPECT_EQ(cutoff_sum_result(k, f, 1.0, rho).verdict, Verdict::Pass) << t << " " << rho;
  }
}
