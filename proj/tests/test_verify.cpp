#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gnls/presets.hpp"
#include "gnls/verify.hpp"

using namespace gnls;

namespace {
constexpr double kTau = 2.0 * std::numbers::pi;
}

TEST(FitOrder, ExactPowerLaw) {
    std::vector<RefinementLevel> lv;
    for (double h : {0.1, 0.05, 0.025})
        lv.push_back({h, 3.0 * h * h});
    const OrderFit f = fit_order(lv);
    EXPECT_NEAR(f.order, 2.0, 1e-12);
    EXPECT_NEAR(f.stderr_order, 0.0, 1e-10);
}

TEST(FitOrder, NoisyDataHasStderr) {
    const OrderFit f = fit_order({{0.1, 1e-2}, {0.05, 3e-3}, {0.025, 6e-4}});
    EXPECT_GT(f.order, 1.5);
    EXPECT_GT(f.stderr_order, 0.0);
    EXPECT_TRUE(std::isnan(fit_order({{0.1, 1.0}}).order));
}

TEST(RefinementTable, NeedsThreeLevelsAndWindow) {
    RefinementTable t;
    t.levels = {{0.1, 1e-2}, {0.05, 2.5e-3}};
    t.evaluate();
    EXPECT_FALSE(t.pass);
    t.levels.push_back({0.025, 6.25e-4});
    t.evaluate();
    EXPECT_TRUE(t.pass);
    t.max_order = 1.9;
    t.evaluate();
    EXPECT_FALSE(t.pass);
}

TEST(AlignedDiscrepancy, RemovesGlobalPhase) {
    const Lattice lat = Lattice::line(kTau, 32);
    const WaveField w = recompose(random_smooth_hydro(lat, 1));
    ComplexField b = w.psi;
    b *= std::polar(1.0, 2.1);
    EXPECT_LE(aligned_discrepancy(w.psi, b), 1e-15);
    b[3] += Complex(0.1, 0.0);
    EXPECT_GT(aligned_discrepancy(w.psi, b), 1e-3);
}

TEST(RefinedConfig, IntegerStepCount) {
    const Lattice lat = Lattice::line(kTau, 100);
    const IntegratorConfig cfg = refined_config(lat, 0.1, 0.1);
    const double dx = lat.spacing(0);
    EXPECT_LE(cfg.dt, 0.1 * dx * dx);
    EXPECT_NEAR(cfg.dt * static_cast<double>(cfg.steps()), 0.1, 1e-14);
}

TEST(Commuting, NuZeroPathsAgreeToRoundoff) {
    const EvolutionState st = initial_state("cosine-density", "static-sine-A0", Lattice::line(kTau, 64));
    const IntegratorConfig cfg = refined_config(st.lattice(), 0.01, 0.1, {}, 5);
    for (Route r : {Route::A, Route::B}) {
        const CommutingResult c = commuting_discrepancy(st, PotentialSpec::dg_gauged(0.0, 0.2), cfg, r);
        EXPECT_LE(c.max_density, 1e-12);
        EXPECT_LE(c.field, 1e-12);
        EXPECT_GE(c.density.size(), 3u);
    }
}

TEST(Commuting, DiscrepancySmallAndShrinking) {
    const PotentialSpec p = PotentialSpec::dg_gauged(0.05, 0.1);
    std::vector<double> e;
    for (int n : {32, 64}) {
        const EvolutionState st = initial_state("cosine-density", "zero", Lattice::line(kTau, n));
        e.push_back(commuting_discrepancy(st, p, refined_config(st.lattice(), 0.02, 0.1), Route::A).max_density);
    }
    EXPECT_LE(e[1], 1e-3);
    EXPECT_GT(e[0] / e[1], 3.0);
}

TEST(Invariance, DensityUnchangedByRouteA) {
    const Lattice lat = Lattice::line(kTau, 64);
    const HydroState hs = random_smooth_state(lat, 4);
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.1, 0.1), hs, {});
    const VerificationReport rep = density_equivalence(recompose(hs.hydro), g);
    EXPECT_TRUE(rep.all_pass());
}

TEST(Invariance, StaticFieldStrengthIsMagneticOnly) {
    const Lattice lat = Lattice::plane(kTau, kTau, 32, 32);
    const HydroState hs = random_smooth_state(lat, 5, true);
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.1, 0.0), hs, {});
    const VerificationReport rep = f_invariance(hs.gauge, g, 10.0);
    ASSERT_EQ(rep.records().size(), 1u);
    EXPECT_EQ(rep.records()[0].name, "f_invariance.magnetic");
    EXPECT_GT(rep.records()[0].measured, 0.0); // ∇ρ/ρ is not an exact lattice gradient
    EXPECT_TRUE(rep.all_pass());
    EXPECT_FALSE(f_invariance(hs.gauge, g, 0.0).all_pass());
}

TEST(Conservation, SuiteNeedsSnapshots) {
    const EvolutionState st = initial_state("uniform", "zero", Lattice::line(kTau, 16));
    const VerificationReport rep = conservation_suite({st}, PotentialSpec::dg_gauged(0.1, 0.0), Equation::Original);
    EXPECT_FALSE(rep.all_pass());
}

TEST(Conservation, ContinuityResidualNaNAtEnds) {
    const EvolutionState st = initial_state("cosine-density", "zero", Lattice::line(kTau, 32));
    const PotentialSpec p = PotentialSpec::dg_gauged(0.1, 0.1);
    const auto traj = trajectory(st, make_rhs(Equation::Original, p, {}), refined_config(st.lattice(), 0.004, 0.1));
    EXPECT_TRUE(std::isnan(continuity_residual(traj, 0, p, Equation::Original)));
    EXPECT_TRUE(std::isnan(continuity_residual(traj, traj.size() - 1, p, Equation::Original)));
    EXPECT_TRUE(std::isfinite(continuity_residual(traj, 1, p, Equation::Original)));
    const ConservationResult c = conservation_measure(traj, p, Equation::Original);
    EXPECT_LE(c.max_drift, 1e-12);
}

TEST(Oracle, AllSlotsAgree) {
    const HydroState hs = random_smooth_state(Lattice::plane(kTau, kTau, 16, 16), 8, true);
    const auto cmp = derivative_oracle(PotentialSpec::dg_gauged(0.1, 0.2), hs);
    ASSERT_EQ(cmp.size(), 6u);
    EXPECT_EQ(cmp[2].slot, "dS_axis_0");
    for (const auto& c : cmp)
        EXPECT_LE(c.relative, 1e-6) << c.slot;
}

TEST(Report, CollectsThenReports) {
    VerificationReport rep;
    rep.add_check("a", 1.0, 2.0, "fine");
    rep.add_check("b", 3.0, 2.0, "too big");
    rep.add_check("c", std::nan(""), 2.0, "nan never passes");
    rep.calibrate("C", 0.5);
    RefinementTable t;
    t.name = "demo";
    t.resolution = {32, 64, 128};
    t.levels = {{0.2, 4e-2}, {0.1, 1e-2}, {0.05, 2.5e-3}};
    t.evaluate();
    rep.add_table(t);
    EXPECT_FALSE(rep.all_pass());
    EXPECT_EQ(rep.failures(), 2u);
    const std::string text = rep.to_text();
    EXPECT_NE(text.find("status: FAIL"), std::string::npos);
    EXPECT_NE(text.find("FAIL b measured=3.000000e+00"), std::string::npos);
    EXPECT_NE(text.find("[refinement demo]"), std::string::npos);
    EXPECT_NE(text.find("order = 2.0000 +/- 0.0000  required [1.80, inf]  PASS"), std::string::npos);
    EXPECT_NE(text.find("C = 5.000000e-01"), std::string::npos);
    EXPECT_EQ(text, rep.to_text());

    VerificationReport merged;
    merged.merge(rep);
    EXPECT_EQ(merged.records().size(), 3u);
    EXPECT_EQ(merged.tables().size(), 1u);
}
