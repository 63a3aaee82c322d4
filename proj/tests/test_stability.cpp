#include <gtest/gtest.h>

#include <okpattern/stability.hpp>
#include <random>

using namespace okpattern;

namespace {
const Lamella lam{0, 0.5, 0.25};

// s_side * cos(2 pi q y) on the two interfaces; side 0 is the left one.
std::vector<double> lamella_mode(const InterfaceMesh& M, int q, double s_left, double s_right) {
  std::vector<double> phi(M.size());
  for (std::size_t i = 0; i < M.size(); ++i)
    phi[i] = (M.normals[i][0] < 0 ? s_left : s_right) * std::cos(2 * pi * q * M.points[i][1]);
  return phi;
}

std::vector<double> normal_component(const InterfaceMesh& M, int a) {
  std::vector<double> phi(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) phi[i] = M.normals[i][a];
  return phi;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }
}  // namespace

TEST(SurfaceFunction, ZeroMeanFlag) {
  auto M = interface_mesh(lam, 2, 16);
  EXPECT_TRUE(make_surface_function(M, lamella_mode(M, 1, 1, 1)).zero_mean);
  EXPECT_FALSE(make_surface_function(M, std::vector<double>(M.size(), 1.0)).zero_mean);
  EXPECT_TRUE(project_zero_mean(M, std::vector<double>(M.size(), 1.0)).zero_mean);
  EXPECT_THROW(make_surface_function(M, {1.0}), ConfigError);
}

TEST(QuadForm, FlatModeAtZeroGamma) {
  GridSpec g({64, 64});
  SpectralWorkspace ws(g);
  auto M = interface_mesh(lam, 2, 32);
  SecondVariation sv(M, rasterize(lam, g), 0.0, ws);
  auto r = sv.quad_form(make_surface_function(M, lamella_mode(M, 1, 1, 1)));
  EXPECT_NEAR(r.total, 4 * pi * pi, 1e-10);
  EXPECT_EQ(r.term_potential, 0.0);
  EXPECT_EQ(r.term_green, 0.0);
  EXPECT_EQ(r.total, r.term_perimeter + r.term_potential + r.term_green);
}

TEST(QuadForm, RejectsNonZeroMeanAndMismatch) {
  GridSpec g({32, 32});
  SpectralWorkspace ws(g);
  auto M = interface_mesh(lam, 2, 16);
  SecondVariation sv(M, rasterize(lam, g), 1.0, ws);
  EXPECT_THROW(sv.quad_form(make_surface_function(M, std::vector<double>(M.size(), 1.0))), ConfigError);
  auto other = interface_mesh(lam, 2, 8);
  EXPECT_THROW(sv.quad_form(make_surface_function(other, lamella_mode(other, 1, 1, 1))), ConfigError);
  EXPECT_THROW(SecondVariation(M, rasterize(lam, GridSpec({16, 16})), 1.0, ws), ConfigError);
  EXPECT_THROW(SecondVariation(M, rasterize(lam, g), -1.0, ws), ConfigError);
}

TEST(QuadForm, TranslationNullSpaceOnCriticalLamella) {
  for (double w : {0.25, 0.15})
    for (double gamma : {0.0, 1.0, 10.0}) {
      GridSpec g({80, 64});
      SpectralWorkspace ws(g);
      Lamella L{0, 0.5, w};
      auto M = interface_mesh(L, 2, 32);
      SecondVariation sv(M, rasterize(L, g), gamma, ws);
      auto r = sv.quad_form(make_surface_function(M, normal_component(M, 0)));
      EXPECT_LE(std::abs(r.total), 1e-6 * (r.scale() + 1e-12)) << w << " " << gamma;
      // Tangential translations are trivially null on flat interfaces.
      auto rp = sv.penalized_quad_form(make_surface_function(M, normal_component(M, 0)));
      EXPECT_NEAR(rp.penalty, 8.0, 1e-12);
      EXPECT_NEAR(rp.total, 8.0, 1e-6);
    }
}

TEST(QuadForm, DiscDegreeOneAtZeroGamma) {
  GridSpec g({64, 64});
  SpectralWorkspace ws(g);
  Ball b{{0.5, 0.5, 0}, 0.25};
  auto M = interface_mesh(b, 2, 32);
  SecondVariation sv(M, rasterize(b, g), 0.0, ws);
  for (int a : {0, 1}) {
    auto r = sv.quad_form(make_surface_function(M, normal_component(M, a)));
    EXPECT_NEAR(r.total, 0.0, 1e-10);
  }
  auto S = interface_mesh(Ball{{0.5, 0.5, 0.5}, 0.25}, 3, 16);
  SpectralWorkspace ws3(GridSpec({16, 16, 16}));
  SecondVariation sv3(S, rasterize(Ball{{0.5, 0.5, 0.5}, 0.25}, ws3.spec()), 0.0, ws3);
  for (int a : {0, 1, 2}) EXPECT_NEAR(sv3.quad_form(make_surface_function(S, normal_component(S, a))).total, 0.0, 1e-9);
}

TEST(QuadForm, PenalizationExactnessAndGreenPositivity) {
  GridSpec g({64, 64});
  SpectralWorkspace ws(g);
  Ball b{{0.4, 0.55, 0}, 0.2};
  auto M = interface_mesh(b, 2, 32);
  SecondVariation sv(M, rasterize(b, g), 20.0, ws);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> phi(M.size());
    for (auto& x : phi) x = N(rng);
    auto f = project_zero_mean(M, phi);
    auto plain = sv.quad_form(f);
    auto pen = sv.penalized_quad_form(f);
    auto m = sv.normal_moment(f.values);
    double expect = 2 * (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]);
    EXPECT_NEAR(pen.total - plain.total, expect, 1e-12 * (1 + std::abs(plain.total)));
    EXPECT_GE(pen.total, plain.total);
    EXPECT_GE(plain.term_green, 0.0);
  }
  // For phi in T-perp the penalty vanishes.
  std::vector<double> c2(M.size());
  for (std::size_t i = 0; i < M.size(); ++i) c2[i] = M.normals[i][0] * M.normals[i][0] - M.normals[i][1] * M.normals[i][1];
  auto t = make_surface_function(M, c2);
  ASSERT_TRUE(t.zero_mean);
  EXPECT_NEAR(sv.penalized_quad_form(t).penalty, 0.0, 1e-24);
  EXPECT_EQ(sv.penalized_quad_form(t).total, sv.quad_form(t).total);
}

TEST(ModeMatrix, ZeroGammaAndSymmetry) {
  for (int q : {1, 2, 5}) {
    auto mm = lamella_mode_matrix({q}, 0.0, 0.3);
    EXPECT_DOUBLE_EQ(mm.M(0, 0), 4 * pi * pi * q * q);
    EXPECT_EQ(mm.M(1, 1), mm.M(0, 0));
    EXPECT_EQ(mm.M(0, 1), 0.0);
  }
  auto mm = lamella_mode_matrix({1, 2}, 3.0, 0.2);
  EXPECT_EQ(mm.M(0, 1), mm.M(1, 0));
  EXPECT_EQ(mm.M(0, 0), mm.M(1, 1));
  EXPECT_THROW(lamella_mode_matrix({0}, 1.0, 0.25), ConfigError);
  EXPECT_THROW(lamella_mode_matrix({1}, 1.0, 0.5), ConfigError);
  // The admissible q = 0 entry is the translation: exactly zero.
  EXPECT_NEAR(lamella_mode_matrix({0}, 10.0, 0.25, true).zigzag(), 0.0, 1e-12);
}

TEST(ModeMatrix, ScreenedGreenSolvesItsEquation) {
  // -g'' + kappa^2 g = delta: the jump of g' at 0 is -1 and g'' = kappa^2 g elsewhere.
  for (double q : {1.0, 2.5}) {
    const double k = 2 * pi * q, h = 1e-4;
    double d = 0.3;
    double g2 = (screened_green(q, d + h) - 2 * screened_green(q, d) + screened_green(q, d - h)) / (h * h);
    EXPECT_NEAR(g2, k * k * screened_green(q, d), 1e-4 * k * k * screened_green(q, d));
    double jump = (screened_green(q, h) - screened_green(q, 0)) / h - (screened_green(q, 0) - screened_green(q, -h)) / h;
    EXPECT_NEAR(jump, -1.0, 1e-3);
  }
  EXPECT_NEAR(screened_green(0.0, 0.0), 1.0 / 12, 1e-15);
  EXPECT_TRUE(std::isfinite(screened_green(500.0, 0.0)));
}

TEST(ModeMatrix, AgreesWithGridQuadForm) {
  GridSpec g({80, 64});
  SpectralWorkspace ws(g);
  for (double w : {0.15, 0.25, 0.35}) {
    Lamella L{0, 0.5, w};
    auto M = interface_mesh(L, 2, 64);
    auto u = rasterize(L, g);
    for (double gamma : {0.0, 1.0, 10.0}) {
      SecondVariation sv(M, u, gamma, ws);
      for (int q : {1, 2, 3}) {
        auto mm = lamella_mode_matrix({q}, gamma, w);
        double zig = sv.quad_form(make_surface_function(M, lamella_mode(M, q, -1, 1))).total;
        double var = sv.quad_form(make_surface_function(M, lamella_mode(M, q, 1, 1))).total;
        EXPECT_LE(rel(zig, mm.zigzag()), 1e-3) << w << " " << gamma << " " << q;
        EXPECT_LE(rel(var, mm.varicose()), 1e-3) << w << " " << gamma << " " << q;
      }
    }
  }
}

TEST(Threshold, PositiveAndContinuousInW) {
  double prev = 0.0;
  for (int i = 0; i <= 40; ++i) {
    double w = 0.15 + 0.005 * i;
    auto t = lamella_threshold(w);
    ASSERT_TRUE(t.found) << w;
    EXPECT_GT(t.gamma, 0.0);
    if (i > 0) {
      EXPECT_LE(rel(t.gamma, prev), 0.05) << w;
    }
    prev = t.gamma;
  }
  auto t = lamella_threshold(0.25);
  EXPECT_NEAR(t.gamma, 94.872, 1e-3);
  EXPECT_EQ(t.q_abs, 1.0);
  EXPECT_TRUE(t.zigzag);
  // Symmetric under w -> 1/2 - w (the complement is a lamella of halfwidth 1/2 - w).
  EXPECT_NEAR(lamella_threshold(0.15).gamma, lamella_threshold(0.35).gamma, 1e-3);
}

TEST(Threshold, OpenBelowCap) {
  auto t = lamella_threshold(0.25, 2, 16, 50.0);
  EXPECT_FALSE(t.found);
  EXPECT_THROW(lamella_threshold(0.0), ConfigError);
}

TEST(Threshold, ThreeDimensionalLamellaMatchesTwoDimensional) {
  // Wave vectors (q, 0) are included, and |q| = 1 is the least nonzero norm.
  EXPECT_NEAR(lamella_threshold(0.25, 3, 3).gamma, lamella_threshold(0.25, 2, 3).gamma, 1e-3);
}

TEST(MinEigenvalue, LamellaMatchesModeScan) {
  GridSpec g({80, 32});
  SpectralWorkspace ws(g);
  auto M = interface_mesh(lam, 2, 32);
  auto u = rasterize(lam, g);
  SecondVariation sv0(M, u, 0.0, ws);
  auto e0 = min_eigenvalue(sv0);
  EXPECT_GT(e0.value, 0.0);
  EXPECT_LE(rel(e0.value, lamella_mode_scan(0.0, 0.25, 8)), 1e-3);
  const double gs = lamella_threshold(0.25).gamma;
  SecondVariation below(M, u, 0.99 * gs, ws), above(M, u, 1.01 * gs, ws);
  EXPECT_GT(min_eigenvalue(below).value, 0.0);
  EXPECT_LT(min_eigenvalue(above).value, 0.0);
  SecondVariation half(M, u, 0.5 * gs, ws);
  EXPECT_LE(rel(min_eigenvalue(half).value, lamella_mode_scan(0.5 * gs, 0.25, 8)), 1e-2);
  EXPECT_THROW(min_eigenvalue(lam, 0.0, g, 8), ConfigError);
}

TEST(MinEigenvalue, ApproachesZeroAtThreshold) {
  GridSpec g({80, 32});
  SpectralWorkspace ws(g);
  auto M = interface_mesh(lam, 2, 32);
  auto u = rasterize(lam, g);
  const double gs = lamella_threshold(0.25).gamma;
  double prev = std::numeric_limits<double>::infinity();
  for (double f : {0.5, 0.8, 0.9, 0.95, 0.99}) {
    SecondVariation sv(M, u, f * gs, ws);
    double e = min_eigenvalue(sv).value;
    EXPECT_GT(e, 0.0);
    EXPECT_LT(e, prev);
    prev = e;
  }
  EXPECT_LT(prev, 0.02);
}

TEST(MinEigenvalue, StrictStabilityBelowHalfThreshold) {
  GridSpec g({80, 32});
  const double gl = lamella_threshold(0.25).gamma;
  for (int i = 1; i <= 8; ++i) EXPECT_GT(min_eigenvalue(lam, gl / 2 * i / 8, g, 32).value, 0.0);

  GridSpec gd({128, 128});
  Ball disc{{0.5, 0.5, 0}, 0.25};
  auto td = eigen_threshold(disc, gd, 64, 1e3);
  ASSERT_TRUE(td.found);
  EXPECT_GT(td.gamma, 0.0);
  for (int i = 1; i <= 8; ++i) EXPECT_GT(min_eigenvalue(disc, td.gamma / 2 * i / 8, gd, 64).value, 0.0);
  EXPECT_GT(min_eigenvalue(disc, 0.0, gd, 64).value, 0.0);
}

TEST(MinEigenvalue, EigenvectorIsInTPerp) {
  GridSpec g({64, 64});
  SpectralWorkspace ws(g);
  Ball b{{0.5, 0.5, 0}, 0.25};
  auto M = interface_mesh(b, 2, 32);
  SecondVariation sv(M, rasterize(b, g), 10.0, ws);
  auto e = min_eigenvalue(sv);
  auto f = make_surface_function(M, e.vector);
  EXPECT_TRUE(f.zero_mean);
  auto m = sv.normal_moment(e.vector);
  EXPECT_LE(std::hypot(m[0], m[1]), 1e-8 * std::sqrt(M.area()));
  // Same sign under the gradient-only normalisation.
  auto eg = min_eigenvalue(sv, Norm::gradient);
  EXPECT_GT(eg.value, 0.0);
}
