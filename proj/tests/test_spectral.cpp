#include <gtest/gtest.h>

#include <random>

#include "okpattern/spectral.hpp"

using namespace okpattern;

namespace {
ScalarField cos_mode(const GridSpec& g, int axis, int q) {
  ScalarField u(g);
  for (std::size_t i = 0; i < g.size(); ++i) u[i] = std::cos(2 * pi * q * g.center(i)[axis]);
  return u;
}
double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}
// closed-form NL of a centred slab of halfwidth w (one active axis)
double lamella_nl(double w) {
  double L = 0.5 - w;
  return 16.0 / 3.0 * w * w * L * L;
}
}  // namespace

TEST(Poisson, ConstantGivesZero) {
  GridSpec g({16, 16});
  SpectralWorkspace ws(g);
  auto v = ws.poisson_zero_mean(ScalarField(g, FieldKind::generic, 3.7));
  for (double x : v.values) EXPECT_EQ(x, 0.0);
}

TEST(Poisson, SingleMode) {
  GridSpec g({256, 256});
  SpectralWorkspace ws(g);
  auto u = cos_mode(g, 0, 1);
  auto v = ws.poisson_zero_mean(u);
  std::vector<double> expect(u.values);
  for (auto& x : expect) x /= 4 * pi * pi;
  EXPECT_LE(max_abs_diff(v.values, expect), 1e-12);
}

TEST(Poisson, LamellaPotentialRange) {
  GridSpec g({512, 4});
  SpectralWorkspace ws(g);
  auto u = rasterize(Lamella{0, 0.5, 0.25}, g);
  // voxel potential: cell averages of the exact piecewise quadratic
  auto v = ws.potential(u);
  auto [lo, hi] = std::minmax_element(v.values.begin(), v.values.end());
  // exact range 1/16, the extremes are attained at cell centres up to h^2/8 * |v''|
  double h = 1.0 / 512;
  EXPECT_NEAR(*hi - *lo, 1.0 / 16.0 - 2 * h * h / 8 - 2 * h * h / 24, 1e-12);
}

TEST(Poisson, LaplacianResidualRandomFields) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0, 1);
  GridSpec g({32, 48});
  SpectralWorkspace ws(g);
  for (int rep = 0; rep < 20; ++rep) {
    ScalarField u(g);
    for (auto& x : u.values) x = N(rng) + 0.3;
    auto v = ws.poisson_zero_mean(u);
    double mv = v.mean();
    EXPECT_LE(std::abs(mv), 1e-12);
    auto lap = ws.laplacian(v);
    double m = u.mean(), num = 0, den = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      num = std::max(num, std::abs(-lap[i] - (u[i] - m)));
      den = std::max(den, std::abs(u[i] - m));
    }
    EXPECT_LE(num / den, 1e-10);
  }
}

TEST(NonlocalEnergy, ConstantAndCosine) {
  GridSpec g({64, 64});
  SpectralWorkspace ws(g);
  EXPECT_EQ(ws.nonlocal_energy(ScalarField(g, FieldKind::generic, 0.4)), 0.0);
  EXPECT_NEAR(ws.nonlocal_energy(cos_mode(g, 0, 1)), 1.0 / (8 * pi * pi), 1e-15);
}

TEST(NonlocalEnergy, LamellaClosedForm) {
  for (auto sizes : {std::vector<std::size_t>{512}, {512, 4}, {256, 256}, {64, 64}, {40, 8, 8}}) {
    GridSpec g(sizes);
    SpectralWorkspace ws(g);
    EXPECT_NEAR(ws.nonlocal_energy(rasterize(Lamella{0, 0.5, 0.25}, g)), 1.0 / 48.0, 1e-14);
  }
  GridSpec g({40, 8});
  SpectralWorkspace ws(g);
  for (double w : {0.1, 0.15, 0.35}) EXPECT_NEAR(ws.nonlocal_energy(rasterize(Lamella{0, 0.5, w}, g)), lamella_nl(w), 1e-14);
  // transverse slab uses the other axis
  GridSpec gt({8, 40});
  SpectralWorkspace wt(gt);
  EXPECT_NEAR(wt.nonlocal_energy(rasterize(Lamella{1, 0.5, 0.25}, gt)), 1.0 / 48.0, 1e-14);
  EXPECT_THROW(ws.nonlocal_energy(rasterize(Lamella{1, 0.5, 0.25}, gt)), ConfigError);
}

TEST(NonlocalEnergy, TrigonometricModelIsFirstOrderOnSteps) {
  GridSpec g({512, 4});
  SpectralWorkspace ws(g);
  double e = ws.nonlocal_energy(rasterize(Lamella{0, 0.5, 0.25}, g), GreenModel::trigonometric);
  EXPECT_GT(std::abs(e - 1.0 / 48.0), 1e-8);
  EXPECT_LT(std::abs(e - 1.0 / 48.0), 1e-5);
}

TEST(NonlocalEnergy, ParsevalAgainstGradientEnergy) {
  GridSpec g({32, 32});
  SpectralWorkspace ws(g);
  ScalarField u(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto x = g.center(i);
    u[i] = std::exp(std::sin(2 * pi * x[0]) + 0.5 * std::cos(4 * pi * x[1])) * std::cos(2 * pi * (x[0] - x[1]));
  }
  auto v = ws.poisson_zero_mean(u);
  auto grad = ws.gradient(v);
  double dir = 0;
  for (const auto& gc : grad)
    for (double x : gc.values) dir += x * x;
  dir *= g.cell_volume();
  double nl = ws.nonlocal_energy(u);
  EXPECT_NEAR(dir, nl, 1e-10 * nl);
}

TEST(NonlocalEnergy, PositiveAndZeroOnlyForConstants) {
  std::mt19937 rng(5);
  GridSpec g({16, 16});
  SpectralWorkspace ws(g);
  for (int rep = 0; rep < 10; ++rep) {
    ScalarField u(g, FieldKind::indicator, 1.0);
    for (auto& x : u.values) x = rng() % 3 ? 1.0 : -1.0;
    EXPECT_GT(ws.nonlocal_energy(u), 0.0);
    EXPECT_GT(ws.nonlocal_energy(u, GreenModel::trigonometric), 0.0);
  }
  EXPECT_EQ(ws.nonlocal_energy(ScalarField(g, FieldKind::indicator, -1.0)), 0.0);
}

TEST(Gradient, SineAndConstant) {
  GridSpec g({16, 16});
  SpectralWorkspace ws(g);
  auto g0 = ws.gradient(ScalarField(g, FieldKind::generic, 2.0));
  for (const auto& c : g0)
    for (double x : c.values) EXPECT_NEAR(x, 0.0, 1e-15);
  ScalarField u(g);
  for (std::size_t i = 0; i < g.size(); ++i) u[i] = std::sin(2 * pi * g.center(i)[1]);
  auto gr = ws.gradient(u);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(gr[0][i], 0.0, 1e-13);
    EXPECT_NEAR(gr[1][i], 2 * pi * std::cos(2 * pi * g.center(i)[1]), 1e-13);
  }
}

TEST(Gradient, NyquistZeroed) {
  GridSpec g({8});
  SpectralWorkspace ws(g);
  ScalarField u(g);
  for (std::size_t i = 0; i < 8; ++i) u[i] = (i % 2) ? 1.0 : -1.0;
  auto gr = ws.gradient(u);
  for (double x : gr[0].values) EXPECT_NEAR(x, 0.0, 1e-14);
}

// Frozen reference values of the cell-average multiplier from an independent
// high-precision evaluation (per-row closed form of the lattice sum).
TEST(VoxelMultiplier, FrozenReferenceValues) {
  struct Case {
    std::array<long, 3> xi;
    std::array<std::size_t, 3> n;
    double ref;
  };
  for (auto c : {Case{{1, 1, 0}, {8, 8, 1}, 0.01144934614681449128}, Case{{3, -2, 0}, {16, 8, 1}, 0.0014683729533591831453},
                 Case{{4, 4, 0}, {8, 8, 1}, 0.00054912896466856920152},
                 Case{{1, 5, 0}, {4, 32, 1}, 0.00081690484024684127829},
                 Case{{7, 1, 0}, {64, 64, 1}, 0.00048676295934205299291}}) {
    EXPECT_NEAR(detail::voxel_multiplier(c.xi, c.n, 2), c.ref, 1e-15 * c.ref + 1e-18);
  }
}

// Reference sums at s = pi from a high-precision direct lattice evaluation.
TEST(VoxelMultiplier, AxisFactorBranchesAgree) {
  const double ref[3][2] = {{0.03, 0.994307343170001946591709002611},
                            {0.25, 0.681690193268658466838578798558},
                            {0.5, 0.369646209604707998797037497344}};
  for (auto& r : ref) {
    EXPECT_NEAR(detail::voxel_axis_factor(r[0], pi), r[1], 2e-15);
    EXPECT_NEAR(detail::voxel_axis_factor(r[0], std::nextafter(pi, 4.0)), r[1], 2e-15);
  }
}

TEST(VoxelMultiplier, TilingLawExact) {
  std::mt19937 rng(2);
  GridSpec g({12, 16});
  ScalarField u(g, FieldKind::indicator, 1.0);
  for (auto& x : u.values) x = rng() % 2 ? 1.0 : -1.0;
  SpectralWorkspace ws(g);
  double base = ws.nonlocal_energy(u);
  for (std::size_t k : {2, 4}) {
    auto t = tile(u, k);
    SpectralWorkspace wt(t.spec);
    double nl = wt.nonlocal_energy(t);
    EXPECT_NEAR(nl, base / double(k * k), 1e-12 * base);
    double nt = wt.nonlocal_energy(t, GreenModel::trigonometric);
    EXPECT_NEAR(nt, ws.nonlocal_energy(u, GreenModel::trigonometric) / double(k * k), 1e-12 * base);
  }
}

TEST(VoxelMultiplier, ThreeDimensionalSymmetry) {
  std::array<std::size_t, 3> n{8, 8, 8};
  double a = detail::voxel_multiplier({1, 2, 3}, n, 3);
  EXPECT_NEAR(a, detail::voxel_multiplier({3, 1, 2}, n, 3), 1e-17);
  EXPECT_NEAR(a, detail::voxel_multiplier({-1, 2, -3}, n, 3), 1e-17);
  // a zero component reduces to the lower-dimensional value
  EXPECT_NEAR(detail::voxel_multiplier({1, 1, 0}, n, 3), detail::voxel_multiplier({1, 1, 0}, {8, 8, 1}, 2), 1e-17);
  EXPECT_LT(a, 1.0 / (4 * pi * pi * 14));
}

TEST(Lipschitz, ExactIdentityAndBound) {
  std::mt19937 rng(9);
  GridSpec g({16, 16});
  SpectralWorkspace ws(g);
  for (int rep = 0; rep < 20; ++rep) {
    ScalarField a(g, FieldKind::indicator, 1.0), b(g, FieldKind::indicator, 1.0);
    for (auto& x : a.values) x = rng() % 2 ? 1.0 : -1.0;
    b = a;
    for (int s = 0; s < 10; ++s) b[rng() % g.size()] *= -1.0;
    auto va = ws.potential(a), vb = ws.potential(b);
    double dnl = ws.nonlocal_energy(a) - ws.nonlocal_energy(b);
    double ident = 0, sym = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ident += (a[i] - b[i]) * (va[i] + vb[i]);
      sym += a[i] != b[i];
    }
    ident *= g.cell_volume();
    sym *= g.cell_volume();
    EXPECT_NEAR(dnl, ident, 1e-14);
    double sup = 0;
    for (std::size_t i = 0; i < g.size(); ++i) sup = std::max(sup, std::abs(va[i])), sup = std::max(sup, std::abs(vb[i]));
    EXPECT_LE(std::abs(dnl), 4 * sup * sym + 1e-15);
  }
}

TEST(Interpolation, TrigonometricReproducesGridAndModes) {
  GridSpec g({16, 12});
  SpectralWorkspace ws(g);
  ScalarField u(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    auto x = g.center(i);
    u[i] = std::cos(2 * pi * 3 * x[0] + 0.4) * std::sin(2 * pi * 2 * x[1]) + 0.2;
  }
  std::vector<std::array<double, 3>> pts{{0.123, 0.777, 0}, {0.5, 0.01, 0}, g.center(37)};
  auto r = ws.interpolate(u, pts);
  for (std::size_t p = 0; p < pts.size(); ++p)
    EXPECT_NEAR(r[p], std::cos(2 * pi * 3 * pts[p][0] + 0.4) * std::sin(2 * pi * 2 * pts[p][1]) + 0.2, 1e-13);
  // Nyquist content reproduced at the nodes
  ScalarField z(g);
  for (std::size_t i = 0; i < g.size(); ++i) z[i] = ((g.unravel(i)[0] + g.unravel(i)[1]) % 2) ? 1.0 : -1.0;
  EXPECT_NEAR(ws.interpolate(z, {g.center(5)})[0], z[5], 1e-13);
}

TEST(Transfer, SplatIsAdjointOfInterpolation) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0, 1);
  GridSpec g({8, 10, 6});
  ScalarField f(g);
  for (auto& x : f.values) x = U(rng) - 0.5;
  std::vector<std::array<double, 3>> pts(7);
  std::vector<double> m(7);
  for (int p = 0; p < 7; ++p) pts[p] = {U(rng), U(rng), U(rng)}, m[p] = U(rng);
  auto s = splat(g, pts, m);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < g.size(); ++i) lhs += f[i] * s[i];
  lhs *= g.cell_volume();
  for (int p = 0; p < 7; ++p) rhs += m[p] * interpolate_linear(f, pts[p]);
  EXPECT_NEAR(lhs, rhs, 1e-14);
  double total = 0;
  for (double x : s.values) total += x;
  EXPECT_NEAR(total * g.cell_volume(), std::accumulate(m.begin(), m.end(), 0.0), 1e-14);
}
