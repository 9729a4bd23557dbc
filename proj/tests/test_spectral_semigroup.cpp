#include <gtest/gtest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <map>
#include <memory>
#include <random>

#include "fractallab/spectral_semigroup.hpp"

using namespace fractallab;

namespace {

struct Fixture {
  ApproxGraph g;
  SpectralDecomposition s;
};

// decompositions are reused across tests
const Fixture& fixture(const std::string& name, int m) {
  static std::map<std::pair<std::string, int>, std::unique_ptr<Fixture>> cache;
  auto& slot = cache[{name, m}];
  if (!slot) {
    slot = std::make_unique<Fixture>();
    slot->g = build_graph(build_model(name), m);
    slot->s = decompose(make_form(slot->g));
  }
  return *slot;
}

Eigen::VectorXd random_function(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd f(n);
  for (int i = 0; i < n; ++i) f(i) = u(rng);
  return f;
}

}  // namespace

TEST(Decompose, Invariants) {
  for (auto [name, m] : {std::pair{"vicsek", 3}, std::pair{"gasket", 4}, std::pair{"interval", 5}}) {
    const auto& fx = fixture(name, m);
    const auto& s = fx.s;
    EXPECT_EQ(s.eigenvalues(0), 0.0);
    EXPECT_LT((s.eigenvectors.col(0).array() - 1.0).abs().maxCoeff(), 1e-15);
    EXPECT_GT(s.eigenvalues(1), 0.0);
    for (int j = 1; j < s.size(); ++j) EXPECT_LE(s.eigenvalues(j - 1), s.eigenvalues(j));
    EXPECT_LT(orthonormality_error(s), 1e-9) << name;
    EXPECT_LT(reconstruction_error(s, generator(make_form(fx.g))), 1e-8) << name;
  }
}

TEST(Decompose, SymmetryBlocksMatchPlainSolve) {
  for (auto [name, m] : {std::pair{"vicsek", 2}, std::pair{"gasket", 3}, std::pair{"interval", 4}}) {
    auto g = build_graph(build_model(name), m);
    auto form = make_form(g);
    ASSERT_FALSE(g.automorphisms.empty());
    auto blocked = decompose(form);
    auto plain = decompose(generator(form), g.measure);
    EXPECT_LT((blocked.eigenvalues - plain.eigenvalues).cwiseAbs().maxCoeff(), 1e-9 * plain.eigenvalues.maxCoeff());
    // spectral projector onto a simple eigenvalue agrees
    for (int j = 1; j < g.size() - 1; ++j) {
      if (plain.eigenvalues(j + 1) - plain.eigenvalues(j) < 1e-6 * plain.eigenvalues(j)) continue;
      if (plain.eigenvalues(j) - plain.eigenvalues(j - 1) < 1e-6 * plain.eigenvalues(j)) continue;
      Eigen::MatrixXd pa = blocked.eigenvectors.col(j) * blocked.eigenvectors.col(j).transpose();
      Eigen::MatrixXd pb = plain.eigenvectors.col(j) * plain.eigenvectors.col(j).transpose();
      EXPECT_LT((pa - pb).cwiseAbs().maxCoeff(), 1e-7);
      break;
    }
  }
}

TEST(Decompose, IntervalNeumannSpectrum) {
  const auto& s = fixture("interval", 3).s;
  EXPECT_NEAR(s.eigenvalues(1), M_PI * M_PI, 0.1 * M_PI * M_PI);
}

TEST(Decompose, GasketTimeFactor) {
  // the renormalized gap converges; the unscaled graph gap shrinks by tau per level
  const auto& mdl = fixture("gasket", 3).g.model;
  const double l3 = fixture("gasket", 3).s.eigenvalues(1), l4 = fixture("gasket", 4).s.eigenvalues(1);
  EXPECT_NEAR(l4 / l3, 1.0, 0.05);
  const double raw3 = l3 / std::pow(mdl.time_factor, 3), raw4 = l4 / std::pow(mdl.time_factor, 4);
  EXPECT_NEAR(raw3 / raw4, 5.0, 0.25);
}

TEST(Decompose, PoincareInequality) {
  std::mt19937_64 rng(5);
  for (auto [name, m] : {std::pair{"vicsek", 3}, std::pair{"gasket", 4}, std::pair{"interval", 5}}) {
    const auto& fx = fixture(name, m);
    auto form = make_form(fx.g);
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXd f = random_function(fx.g.size(), rng);
      const double mean = fx.g.measure.dot(f);
      const double var = fx.g.measure.dot((f.array() - mean).square().matrix());
      EXPECT_LE(var, energy(form, f) / fx.s.eigenvalues(1) * (1 + 1e-10));
    }
    // equality for the first eigenfunction
    Eigen::VectorXd phi = fx.s.eigenvectors.col(1);
    EXPECT_NEAR(fx.g.measure.dot(phi.cwiseAbs2()), energy(form, phi) / fx.s.eigenvalues(1), 1e-10);
  }
}

TEST(Semigroup, ConservativeAndContractive) {
  std::mt19937_64 rng(1);
  const auto& s = fixture("vicsek", 3).s;
  for (double t : {0.0, 1e-4, 0.01, 1.0}) {
    Eigen::VectorXd one = semigroup_apply(s, Eigen::VectorXd::Ones(s.size()), t);
    EXPECT_LT((one.array() - 1.0).abs().maxCoeff(), 1e-10);
    Eigen::VectorXd f = random_function(s.size(), rng);
    EXPECT_LE(semigroup_apply(s, f, t).cwiseAbs().maxCoeff(), f.cwiseAbs().maxCoeff() + 1e-12);
  }
  Eigen::VectorXd f = random_function(s.size(), rng);
  EXPECT_EQ(semigroup_apply(s, f, 0.0), f);
  const double t = 5.0;
  const double mean = s.measure.dot(f);
  const double l2 = std::sqrt(s.measure.dot(f.cwiseAbs2()));
  EXPECT_LE((semigroup_apply(s, f, t).array() - mean).abs().maxCoeff(),
            std::exp(-s.eigenvalues(1) * t) * l2 * std::sqrt(1.0 / s.measure.minCoeff()));
  try {
    semigroup_apply(s, f, -1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainError);
  }
}

TEST(Semigroup, LawAgainstMatrixExponential) {
  std::mt19937_64 rng(2);
  const auto& fx = fixture("gasket", 3);
  Eigen::MatrixXd D(generator(make_form(fx.g)));
  std::uniform_real_distribution<double> ut(1e-3, 5e-2);
  for (int k = 0; k < 5; ++k) {
    Eigen::VectorXd f = random_function(fx.g.size(), rng);
    const double s = ut(rng), t = ut(rng);
    Eigen::VectorXd a = semigroup_apply(fx.s, semigroup_apply(fx.s, f, t), s);
    Eigen::VectorXd b = semigroup_apply(fx.s, f, s + t);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
    Eigen::MatrixXd E = (D * (s + t)).exp();
    EXPECT_LT((E * f - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(HeatKernel, Properties) {
  const auto& s = fixture("vicsek", 3).s;
  const double t = 1e-3;
  auto k = heat_kernel(s, t);
  EXPECT_EQ((k.values - k.values.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LT(((k.values * s.measure).array() - 1.0).abs().maxCoeff(), 1e-8);
  EXPECT_GE(k.values.minCoeff(), -1e-8);
  auto k2 = heat_kernel(s, 2 * t);
  Eigen::MatrixXd ck = k.values * s.measure.asDiagonal() * k.values;
  EXPECT_LT((ck - k2.values).cwiseAbs().maxCoeff(), 1e-8 * k2.values.cwiseAbs().maxCoeff());
  EXPECT_NEAR(kernel_sup(s, t), k.values.maxCoeff(), 1e-10 * k.values.maxCoeff());
  for (double bad : {0.0, -1.0}) {
    try {
      heat_kernel(s, bad);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::DomainError);
    }
  }
}

TEST(Fractional, Examples) {
  std::mt19937_64 rng(4);
  const auto& fx = fixture("gasket", 3);
  const auto& s = fx.s;
  EXPECT_LT(fractional_apply(s, Eigen::VectorXd::Constant(s.size(), 2.0), 0.5).cwiseAbs().maxCoeff(), 1e-9);
  Eigen::VectorXd f = random_function(s.size(), rng);
  f.array() -= s.measure.dot(f);
  Eigen::VectorXd lap = -(generator(make_form(fx.g)) * f);
  EXPECT_LT((fractional_apply(s, f, 1.0) - lap).cwiseAbs().maxCoeff(), 1e-9 * lap.cwiseAbs().maxCoeff());
  Eigen::VectorXd half = fractional_apply(s, fractional_apply(s, f, 0.5), 0.5);
  EXPECT_LT((half - lap).cwiseAbs().maxCoeff(), 1e-8 * lap.cwiseAbs().maxCoeff());
}

TEST(Product, TensorIdentities) {
  const auto& a = fixture("interval", 3).s;
  auto p = product_decomposition(a, a);
  EXPECT_EQ(p.eigenvalues(0), 0.0);
  EXPECT_GT(p.eigenvalues(1), 1e-9);
  EXPECT_NEAR(p.eigenvalues(1), M_PI * M_PI, 0.1 * M_PI * M_PI);
  EXPECT_NEAR(p.eigenvalues(2), p.eigenvalues(1), 1e-9);
  EXPECT_GT(p.eigenvalues(3), p.eigenvalues(2) + 1.0);
  EXPECT_LT(orthonormality_error(p), 1e-9);
  const double t = 0.01;
  auto kp = heat_kernel(p, t);
  auto ka = heat_kernel(a, t);
  const int n = a.size();
  double err = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          err = std::max(err, std::abs(kp.values(i * n + j, k * n + l) - ka.values(i, k) * ka.values(j, l)));
  EXPECT_LT(err, 1e-9);
  const auto& v = fixture("vicsek", 3).s;
  try {
    product_decomposition(v, v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GraphTooLarge);
  }
}

TEST(Ultracontractivity, Exponents) {
  struct Case {
    const char* name;
    double target, tol;
  };
  for (auto c : {Case{"interval", 0.5, 0.05}, Case{"vicsek", std::log(5.0) / std::log(15.0), 0.06},
                 Case{"gasket", std::log(3.0) / std::log(5.0), 0.07}}) {
    const auto& fx = fixture(c.name, 4);
    auto fit = ultracontractivity_fit(fx.s, window_grid(resolved_window(fx.g.model, 4)));
    EXPECT_NEAR(fit.beta, c.target, c.tol) << c.name;
    EXPECT_GT(fit.c_h, 0.0);
  }
  try {
    ultracontractivity_fit(fixture("interval", 4).s, {0.01, 0.02, 0.03});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientGrid);
  }
}

TEST(SubGaussian, VicsekFeasible) {
  const auto& fx = fixture("vicsek", 4);
  auto rep = sub_gaussian_check(fx.g, fx.s, window_grid(resolved_window(fx.g.model, 4)));
  const auto& two = rep.result("two_sided");
  EXPECT_EQ(two.verdict, Verdict::Pass);
  EXPECT_LT(two.best_constant, 1e3);
  EXPECT_GT(two.extras.at("c2"), 0.0);
  EXPECT_LE(two.extras.at("c1"), two.extras.at("diagonal_c1"));
  EXPECT_EQ(rep.result("weak_harnack_kappa1").verdict, Verdict::Pass);
  EXPECT_EQ(rep.result("weak_harnack_kappa2").verdict, Verdict::Pass);
}

TEST(SubGaussian, WeakHarnackKappaZero) {
  const auto& fx = fixture("vicsek", 3);
  SubGaussianOptions opt;
  opt.kappas = {0.0};
  auto rep = sub_gaussian_check(fx.g, fx.s, window_grid(resolved_window(fx.g.model, 3), 6), opt);
  const auto& r = rep.result("weak_harnack_kappa0");
  EXPECT_EQ(r.extras.at("c"), 1.0);
  EXPECT_DOUBLE_EQ(r.best_constant, 1.0);
}

TEST(TimeExtension, HolderBoundDoublingConstant) {
  const auto& fx = fixture("vicsek", 3);
  const double dw = fx.g.model.walk_dim;
  const double R = 0.01;
  for (double kappa : {1.0, 2.0}) {
    double below = 0.0, above = 0.0;
    for (int k = -12; k < 4; ++k) {
      const double t = R * std::pow(2.0, k / 4.0);
      const double h = semigroup_holder_bound(fx.g, fx.s, t, kappa);
      (t < R ? below : above) = std::max(t < R ? below : above, h);
    }
    EXPECT_LE(above, std::pow(2.0, kappa / dw) * below * (1 + 1e-12)) << kappa;
  }
}
