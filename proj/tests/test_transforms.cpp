#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gnls/presets.hpp"
#include "gnls/transforms.hpp"

using namespace gnls;

namespace {
constexpr double kTau = 2.0 * std::numbers::pi;

HydroState exp_sine_state(int n) {
    const Lattice lat = Lattice::line(kTau, n);
    return {{ScalarField::sample(lat, [](double x) { return std::exp(-std::sin(x)); }), ScalarField(lat)},
            GaugeField::zero(lat)};
}

double log2_ratio(double coarse, double fine) { return std::log2(coarse / fine); }
} // namespace

TEST(Generator, DGClosedForm) {
    const HydroState st = exp_sine_state(64);
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.1, 0.3), st, {});
    const ScalarField exact = ScalarField::sample(st.lattice(), [](double x) { return 0.1 * std::sin(x); });
    EXPECT_LE(max_abs(g.sigma - exact), 1e-14);
    EXPECT_FALSE(g.depends_on_phase);
}

TEST(Generator, NuZeroVanishes) {
    const HydroState st = random_smooth_state(Lattice::plane(kTau, kTau, 16, 16), 9, true);
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.0, 0.4), st, {});
    EXPECT_EQ(max_abs(g.sigma), 0.0);
    EXPECT_EQ(max_abs(g.grad_sigma), 0.0);
    EXPECT_EQ(max_abs(g.dsigma_dt), 0.0);
}

TEST(Generator, LineIntegrationConvergesToClosedForm) {
    double prev = 0.0;
    for (int n : {32, 64, 128}) {
        const HydroState st = exp_sine_state(n);
        GeneratorOptions o;
        o.method = DerivativeMethod::Numeric;
        o.engine.h_rel = 1e-6;
        const Generator num = build_generator(PotentialSpec::dg_gauged(0.1, 0.0), st, {}, o);
        const Generator closed = build_generator(PotentialSpec::dg_gauged(0.1, 0.0), st, {});
        const double err = max_abs(num.sigma - closed.sigma);
        if (prev > 0.0) {
            EXPECT_GE(log2_ratio(prev, err), 1.8);
        }
        prev = err;
    }
}

TEST(Generator, CycleIntegralsSmallForDG) {
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.1, 0.0), exp_sine_state(128), {});
    ASSERT_EQ(g.cycle_mismatch.size(), 1u);
    EXPECT_LE(std::abs(g.cycle_mismatch[0]), 1e-12);
}

TEST(Generator, TimeDerivativeFollowsContinuity) {
    const HydroState st = random_smooth_state(Lattice::line(kTau, 64), 14, true);
    const PotentialSpec p = PotentialSpec::dg_gauged(0.1, 0.2);
    const Generator g = build_generator(p, st, {});
    const CurrentSet c = currents(p, st, {});
    const ScalarField rate = -1.0 * divergence(c.j_full);
    for (std::size_t s = 0; s < st.lattice().size(); ++s)
        EXPECT_NEAR(g.dsigma_dt[s], -0.1 * rate[s] / st.hydro.rho[s], 1e-13);
}

TEST(Condition, VacuousInOneDimension) {
    const ConditionReport r = check_condition(generic_potential("rho_squared_phase_x"), exp_sine_state(32), 0.0);
    EXPECT_TRUE(r.vacuous);
    EXPECT_TRUE(r.pass);
    EXPECT_TRUE(r.residuals.empty());
}

TEST(Condition, DGResidualIsDiscretizationError) {
    std::vector<double> e;
    for (int n : {32, 64, 128}) {
        const Lattice lat = Lattice::plane(kTau, kTau, n, n);
        const ConditionReport r = check_condition(PotentialSpec::dg_gauged(0.1, 0.2), condition_reference_state(lat),
                                                  calibrate_condition_tolerance(lat));
        EXPECT_TRUE(r.pass);
        e.push_back(r.max_abs);
    }
    EXPECT_GE(log2_ratio(e[0], e[1]), 1.8);
    EXPECT_GE(log2_ratio(e[1], e[2]), 1.8);
}

TEST(Condition, CounterexampleResidualIsMinusDyRho) {
    const Lattice lat = Lattice::plane(kTau, kTau, 64, 64);
    const HydroState st = condition_reference_state(lat);
    const ConditionReport r = check_condition(generic_potential("rho_squared_phase_x"), st,
                                              calibrate_condition_tolerance(lat), {}, DerivativeMethod::Auto,
                                              EngineOptions{1e-6});
    EXPECT_FALSE(r.pass);
    ASSERT_EQ(r.residuals.size(), 1u);
    // -∂_y ρ of the reference density, analytically
    const ScalarField exact = ScalarField::sample(lat, [](double x, double y) {
        const double e = 0.4 * std::sin(x) * std::cos(y) + 0.2 * std::cos(x + 2.0 * y);
        return -std::exp(e) * (-0.4 * std::sin(x) * std::sin(y) - 0.4 * std::sin(x + 2.0 * y));
    });
    EXPECT_LE(relative_l2(r.residuals[0].residual, exact), 0.05);
}

TEST(Condition, BuildGeneratorRejectsPathDependence) {
    const Lattice lat = Lattice::plane(kTau, kTau, 32, 32);
    GeneratorOptions o;
    o.condition_tolerance = calibrate_condition_tolerance(lat);
    EXPECT_THROW(build_generator(generic_potential("rho_squared_phase_x"), condition_reference_state(lat), {}, o),
                 ConditionViolated);
    EXPECT_NO_THROW(build_generator(PotentialSpec::dg_gauged(0.1, 0.0), condition_reference_state(lat), {}, o));
}

TEST(RouteA, IdentityWhenSigmaVanishes) {
    const HydroState st = random_smooth_state(Lattice::line(kTau, 32), 2);
    const WaveField w = recompose(st.hydro);
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.0, 0.1), st, {});
    const WaveField phi = route_a_transform(w, g);
    for (std::size_t s = 0; s < w.psi.size(); ++s)
        EXPECT_EQ(phi.psi[s], w.psi[s]);
}

TEST(RouteA, PhaseShiftAndInverse) {
    const HydroState st = exp_sine_state(64);
    PhysicalConstants k;
    k.charge = 2.0;
    const WaveField w = recompose(st.hydro, k);
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.1, 0.0), st, k);
    const WaveField phi = route_a_transform(w, g, k);
    for (std::size_t s = 0; s < w.psi.size(); ++s) {
        const double x = st.lattice().coordinate(s, 0);
        // σ = (mcν/e) sin x, qσ = (e/ħc)(mcν/e) sin x = 0.1 sin x
        const std::complex<double> expected = w.psi[s] * std::polar(1.0, 0.1 * std::sin(x));
        EXPECT_LE(std::abs(phi.psi[s] - expected), 1e-14);
        EXPECT_NEAR(std::norm(phi.psi[s]), std::norm(w.psi[s]), 1e-14);
    }
    const WaveField back = route_a_inverse(phi, g, k);
    for (std::size_t s = 0; s < w.psi.size(); ++s)
        EXPECT_LE(std::abs(back.psi[s] - w.psi[s]), 1e-14);
    EXPECT_NEAR(total_charge(phi, k), total_charge(w, k), 1e-13);
}

TEST(RouteB, NuZeroIdentity) {
    const HydroState st = random_smooth_state(Lattice::plane(kTau, kTau, 16, 16), 3, true);
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.0, 0.1), st, {});
    const GaugeField chi = route_b_transform(st.gauge, g);
    EXPECT_EQ(max_abs(chi.avec - st.gauge.avec), 0.0);
    EXPECT_EQ(max_abs(chi.a0 - st.gauge.a0), 0.0);
}

TEST(RouteB, ChiFormulas) {
    const HydroState st = random_smooth_state(Lattice::plane(kTau, kTau, 24, 24), 6, true);
    const PotentialSpec p = PotentialSpec::dg_gauged(0.1, 0.2);
    const Generator g = build_generator(p, st, {});
    const GaugeField chi = route_b_transform(st.gauge, g);
    const VectorField grad_rho = gradient(st.hydro.rho);
    for (int i = 0; i < 2; ++i)
        for (std::size_t s = 0; s < st.lattice().size(); ++s)
            EXPECT_NEAR(chi.avec[i][s], st.gauge.avec[i][s] + 0.1 * grad_rho[i][s] / st.hydro.rho[s], 1e-14);
    const ScalarField chi0 = dg_chi0(p, st.hydro, st.gauge, chi.avec);
    EXPECT_LE(max_abs(chi0 - chi.a0), 1e-12);
}

TEST(RouteB, FieldStrengthUnchanged) {
    const HydroState st = random_smooth_state(Lattice::plane(kTau, kTau, 32, 32), 7, true);
    const Generator g = build_generator(PotentialSpec::dg_gauged(0.1, 0.0), st, {});
    const GaugeField chi = route_b_transform(st.gauge, g);
    const FieldStrength a = field_strength(st.gauge);
    const FieldStrength b = field_strength(chi);
    // ∇σ is ∇ρ/ρ, a discrete gradient only up to O(dx²)
    EXPECT_LE(max_abs(*a.magnetic - *b.magnetic), 0.05);
}

TEST(TransformedNonlinearity, ZeroAtUniformDensity) {
    const Lattice lat = Lattice::plane(kTau, kTau, 16, 16);
    HydroState st{{ScalarField(lat, 1.3), ScalarField::sample(lat, [](double x, double y) {
                       return 0.4 * std::sin(x) * std::cos(y);
                   })},
                  GaugeField::zero(lat)};
    st.gauge.avec[0] = ScalarField::sample(lat, [](double, double y) { return 0.2 * std::sin(y); });
    const PotentialSpec p = PotentialSpec::dg_gauged(0.2, 0.3);
    const Generator g = build_generator(p, st, {});
    HydroState transformed = st;
    transformed.hydro.phase = st.hydro.phase + g.sigma;
    EXPECT_LE(max_abs(transformed_nonlinearity(p, transformed, g, Route::A, {})), 1e-12);
    HydroState rb = st;
    rb.gauge = route_b_transform(st.gauge, g);
    EXPECT_LE(max_abs(transformed_nonlinearity(p, rb, g, Route::B, {})), 1e-12);
}

TEST(TransformedNonlinearity, ConvergesToClosedBracket) {
    for (Route route : {Route::A, Route::B}) {
        double prev = 0.0;
        for (int n : {64, 128, 256}) {
            const Lattice lat = Lattice::line(kTau, n);
            HydroState st{initial_hydro("cosine-density", lat, {}), GaugeField::zero(lat)};
            st.hydro.phase = ScalarField::sample(lat, [](double x) { return 0.3 * std::cos(2.0 * x); });
            const PotentialSpec p = PotentialSpec::dg_gauged(0.1, 0.3);
            const Generator g = build_generator(p, st, {});
            HydroState t = st;
            if (route == Route::A)
                t.hydro.phase = st.hydro.phase + g.sigma;
            else
                t.gauge = route_b_transform(st.gauge, g);
            const ScalarField w = transformed_nonlinearity(p, t, g, route, {});
            const double err = relative_l2(w, dg_transformed_bracket(p, st.hydro.rho));
            if (prev > 0.0) {
                EXPECT_GE(log2_ratio(prev, err), 1.8) << route_name(route);
            }
            prev = err;
        }
        EXPECT_LE(prev, 1e-3);
    }
}

TEST(TransformedNonlinearity, SpecialPointIsSmall) {
    const PotentialSpec p = PotentialSpec::dg_gauged(0.1, 0.005);
    std::vector<double> e;
    for (int n : {64, 128}) {
        const Lattice lat = Lattice::line(kTau, n);
        const HydroState st{initial_hydro("two-bump", lat, {}), GaugeField::zero(lat)};
        const Generator g = build_generator(p, st, {});
        HydroState t = st;
        t.hydro.phase = st.hydro.phase + g.sigma;
        e.push_back(max_abs(transformed_nonlinearity(p, t, g, Route::A, {})));
        EXPECT_LE(max_abs(dg_transformed_bracket(p, st.hydro.rho)), 1e-15); // mν² = 2αħ²/m up to rounding
    }
    EXPECT_GE(log2_ratio(e[0], e[1]), 1.8);
}

TEST(TransformedNonlinearity, PhaseDependentGeneratorNotInvertible) {
    const Lattice lat = Lattice::line(kTau, 32);
    const HydroState st = random_smooth_state(lat, 12);
    const PotentialSpec p = generic_potential("rho_phase_x_squared");
    const Generator g = build_generator(p, st, {});
    EXPECT_TRUE(g.depends_on_phase);
    EXPECT_THROW(transformed_nonlinearity(p, st, g, Route::A, {}), InversionUnavailable);
    EXPECT_THROW(original_hydro(p, st.hydro, st.gauge, {}), InversionUnavailable);
    EXPECT_NO_THROW(transformed_nonlinearity(p, st, g, Route::B, {}));
}

TEST(TransformedNonlinearity, OriginalHydroRecoversPhase) {
    const HydroState st = random_smooth_state(Lattice::line(kTau, 32), 13);
    const PotentialSpec p = PotentialSpec::dg_gauged(0.1, 0.0);
    const Generator g = build_generator(p, st, {});
    HydroFields t = st.hydro;
    t.phase = st.hydro.phase + g.sigma;
    const HydroFields back = original_hydro(p, t, st.gauge, {});
    EXPECT_LE(max_abs(back.phase - st.hydro.phase), 1e-14);
}
