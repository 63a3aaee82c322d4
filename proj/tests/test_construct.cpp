#include <gtest/gtest.h>

#include <okpattern/construct.hpp>
#include <sstream>

using namespace okpattern;

namespace {
const Lamella seed_lam{0, 0.5, 0.1875};

FlowConfig coarse_flow() {
  FlowConfig f;
  f.eps = 0.04;
  f.dt = 1e-2;
  f.max_steps = 4000;
  f.energy_tolerance = 1e-13;
  return f;
}
}  // namespace

TEST(ConstructConfig, Validation) {
  ConstructConfig c;
  EXPECT_NO_THROW(c.validate());
  c.ks = {3};
  EXPECT_THROW(c.validate(), ConfigError);
  c.ks = {1, 8};  // parent grid 32^2 cannot resolve eps = 0.04
  EXPECT_THROW(c.validate(), ConfigError);
  c = ConstructConfig{};
  c.gamma_bar = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ConstructConfig{};
  c.seed = Cylinder{};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Family, ZeroGammaReproducesSeed) {
  GridSpec g({64, 64});
  SpectralWorkspace ws(g);
  for (ShapeCandidate s : {ShapeCandidate{seed_lam}, ShapeCandidate{Ball{{0.5, 0.5, 0}, 0.25}}}) {
    auto fam = continue_family(s, {0.0}, coarse_flow(), ws);
    ASSERT_EQ(fam.members.size(), 1u);
    EXPECT_EQ(fam.status, FamilyStatus::complete);
    EXPECT_LE(fam.members[0].alpha_seed, 10.0 / 64);
    EXPECT_NEAR(volume_of(fam.members[0].set), shape_volume(s, 2), 1.0 / g.size());
  }
}

TEST(Family, RejectsBadGammaLists) {
  SpectralWorkspace ws(GridSpec({64, 64}));
  EXPECT_THROW(continue_family(seed_lam, {}, coarse_flow(), ws), ConfigError);
  EXPECT_THROW(continue_family(seed_lam, {1.0, 2.0}, coarse_flow(), ws), ConfigError);
  EXPECT_THROW(continue_family(seed_lam, {0.0, 2.0, 2.0}, coarse_flow(), ws), ConfigError);
}

TEST(Family, NeighbourDistancesShrinkUnderRefinement) {
  GridSpec g({64, 64});
  SpectralWorkspace ws(g);
  Ball disc{{0.5, 0.5, 0}, 0.2};
  auto step_max = [&](int n) {
    std::vector<double> gs;
    for (int j = 0; j <= n; ++j) gs.push_back(20.0 * j / n);
    auto fam = continue_family(disc, gs, coarse_flow(), ws);
    EXPECT_EQ(fam.status, FamilyStatus::complete);
    double m = 0.0;
    for (const auto& mem : fam.members) m = std::max(m, mem.phase_step);
    return m;
  };
  double coarse = step_max(2), fine = step_max(4);
  EXPECT_GT(coarse, 0.0);
  EXPECT_LT(fine, 0.75 * coarse);
}

TEST(Family, TruncatesBeyondLamellaThreshold) {
  GridSpec g({64, 64});
  SpectralWorkspace ws(g);
  const double gs = lamella_threshold(0.25).gamma;
  auto fam = continue_family(Lamella{0, 0.5, 0.25}, {0.0, 0.5 * gs, 3 * gs}, coarse_flow(), ws);
  EXPECT_EQ(fam.status, FamilyStatus::escaped);
  EXPECT_EQ(fam.truncated_at, 3 * gs);
  EXPECT_EQ(fam.members.size(), 2u);
}

TEST(FitCandidate, RecoversRasterizedShapes) {
  GridSpec g({64, 64});
  auto l = std::get<Lamella>(fit_candidate(seed_lam, rasterize(Lamella{0, 0.3125, 0.125}, g)));
  EXPECT_NEAR(l.c, 0.3125, 1e-12);
  EXPECT_NEAR(l.w, 0.125, 1e-12);
  auto b = std::get<Ball>(fit_candidate(Ball{}, rasterize(Ball{{0.4, 0.6, 0}, 0.2}, g)));
  EXPECT_NEAR(b.center[0], 0.4, 1e-3);
  EXPECT_NEAR(b.center[1], 0.6, 1e-3);
  EXPECT_NEAR(b.r, 0.2, 2e-3);
}

TEST(BuildPeriodic, CertificatesOnSmallGrid) {
  ConstructConfig c;
  c.grid = GridSpec({128, 128});
  c.ks = {1, 2};
  c.gamma_bar = 40.0;
  auto r = build_periodic(c);
  EXPECT_GT(r.seed_min_eigenvalue, 0.0);
  ASSERT_EQ(r.certificates.size(), 2u);
  for (const auto& cert : r.certificates) {
    EXPECT_EQ(cert.status, "ok");
    EXPECT_DOUBLE_EQ(cert.gamma_k, 40.0 / (cert.k * cert.k * cert.k));
    EXPECT_GE(cert.alpha, 0.0);
    EXPECT_GE(cert.c0_proxy, 0.0);
    EXPECT_TRUE(std::isfinite(cert.c0_proxy));
    EXPECT_LE(cert.rel_err, 1e-3);
    EXPECT_LE(cert.nl_rel_err, 1e-12);
    EXPECT_LE(cert.residual_sup, 1e-8);  // flat and symmetric: critical
    EXPECT_EQ(cert.tiled.spec, c.grid);
    EXPECT_EQ(cert.set.spec, c.grid.divided(cert.k));
  }
  // k = 1: F is E itself and the identity is exact.
  EXPECT_EQ(r.certificates[0].energy_lhs, r.certificates[0].energy_rhs);
  EXPECT_LT(r.certificates[1].c0_proxy, r.certificates[0].c0_proxy);
  std::ostringstream os;
  r.certificates[0].write_csv_row(os);
  EXPECT_EQ(os.str().substr(0, 5), "1,40,");
}

TEST(BuildPeriodic, StageFailureIsRecordedPerK) {
  ConstructConfig c;
  c.grid = GridSpec({128, 128});
  auto cert = build_one(c, 3);
  EXPECT_EQ(cert.status.rfind("config_error", 0), 0u);
}

TEST(Probe, ZeroAmplitudeGivesZeroGap) {
  auto F = rasterize(seed_lam, GridSpec({64, 64}), 2);
  auto r = local_minimality_probe(F, 40.0, 2, 5, 0);
  EXPECT_EQ(r.evaluated, 5);
  for (double gap : r.gaps) EXPECT_EQ(gap, 0.0);
}

TEST(Probe, ExhaustiveDepthOneScanAtCoarseResolution) {
  GridSpec g({32, 32});
  auto F = rasterize(seed_lam, g, 2);
  SpectralWorkspace ws(g);
  const double base = sharp_energy(F, 40.0, ws).total;
  auto E = detail::restrict_cell(F, 2);
  auto [in, out] = detail::swap_band(E, 1);
  ASSERT_FALSE(in.empty());
  ASSERT_FALSE(out.empty());
  double worst = std::numeric_limits<double>::infinity();
  for (auto a : in)
    for (auto b : out) worst = std::min(worst, swap_gap(F, 40.0, 2, a, b, ws, base));
  EXPECT_GE(worst, -1e-12);
}

TEST(Probe, RandomProbesAreNonNegative) {
  auto F = rasterize(seed_lam, GridSpec({64, 64}), 2);
  for (int amp : {1, 2, 3}) {
    auto r = local_minimality_probe(F, 40.0, 2, 20, amp, 11 + amp);
    EXPECT_EQ(r.evaluated, 20);
    EXPECT_GE(r.min_gap, -1e-12);
  }
}

TEST(Probe, Rejections) {
  GridSpec g({64, 64});
  EXPECT_THROW(local_minimality_probe(rasterize(Ball{{0.5, 0.5, 0}, 0.2}, g), 1.0, 2, 3, 1), ConfigError);
  EXPECT_THROW(local_minimality_probe(rasterize(seed_lam, g, 2), 1.0, 2, 3, 4), ConfigError);
  EXPECT_THROW(local_minimality_probe(tanh_profile(seed_lam, g, 0.05), 1.0, 1, 3, 1), ConfigError);
}

TEST(Probe, NoCandidatesMeansSkipped) {
  auto F = ScalarField(GridSpec({16, 16}), FieldKind::indicator, 1.0);
  auto r = local_minimality_probe(F, 1.0, 1, 4, 1);
  EXPECT_EQ(r.skipped, 4);
  EXPECT_EQ(r.evaluated, 0);
}

TEST(GraphProbe, LatticeSumAndArcLength) {
  EXPECT_NEAR(graph_lamella_nonlocal(0.25, 0.0, 1), 1.0 / 48, 1e-8);
  const double L = 0.5 - 0.1875;
  EXPECT_NEAR(graph_lamella_nonlocal(0.1875, 0.0, 1), 16.0 / 3 * 0.1875 * 0.1875 * L * L, 1e-8);
  EXPECT_DOUBLE_EQ(graph_lamella_perimeter(0.0, 1), 2.0);
  const double eta = 1e-3, a = 2 * pi * eta;
  EXPECT_NEAR(graph_lamella_perimeter(eta, 1), 2 * (1 + a * a / 4 - 3 * a * a * a * a / 64), 1e-14);
}

TEST(GraphProbe, QuadraticGrowthBelowThreshold) {
  auto g = graph_probe_growth(0.25, 40.0, {0.002, 0.004, 0.008, 0.016});
  for (const auto& r : g.rows) EXPECT_GT(r.gap, 0.0);
  EXPECT_NEAR(g.exponent, 2.0, 0.3);
  // Leading term: half the second variation along the zigzag displacement.
  const double mm = lamella_mode_matrix({1}, 40.0, 0.25).zigzag();
  EXPECT_NEAR(g.rows[0].gap / (0.002 * 0.002), 0.5 * mm, 0.02 * mm);
}

TEST(GraphProbe, NegativeGapAboveThreshold) {
  const double gs = lamella_threshold(0.25).gamma;
  auto g = graph_probe_growth(0.25, 1.3 * gs, {0.001, 0.002});
  for (const auto& r : g.rows) EXPECT_LT(r.gap, 0.0);
}
