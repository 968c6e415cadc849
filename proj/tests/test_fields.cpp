#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "gnls/fields.hpp"
#include "gnls/presets.hpp"

using namespace gnls;

namespace {
constexpr double kTau = 2.0 * std::numbers::pi;

WaveField wave_of(const Lattice& lat, auto&& f) {
    WaveField w{ComplexField(lat)};
    for (std::size_t s = 0; s < lat.size(); ++s)
        w.psi[s] = f(lat.coordinate(s, 0), lat.dim() > 1 ? lat.coordinate(s, 1) : 0.0);
    return w;
}
} // namespace

TEST(Decompose, UnitField) {
    const Lattice lat = Lattice::line(kTau, 32);
    const HydroFields h = decompose(wave_of(lat, [](double, double) { return Complex(1.0, 0.0); }));
    EXPECT_EQ(max_abs(h.rho - ScalarField(lat, 1.0)), 0.0);
    EXPECT_EQ(max_abs(h.phase), 0.0);
}

TEST(Decompose, FullWindingIsRejected) {
    const Lattice lat = Lattice::line(kTau, 64);
    const WaveField w = wave_of(lat, [](double x, double) { return std::polar(1.0, x); });
    EXPECT_THROW(decompose(w), WindingDetected);
}

TEST(Decompose, SineExponentHasPhaseSine) {
    const Lattice lat = Lattice::line(kTau, 64);
    const WaveField w = wave_of(lat, [](double x, double) { return std::polar(1.0, std::sin(x)); });
    const HydroFields h = decompose(w);
    const ScalarField expect = ScalarField::sample(lat, [](double x) { return std::sin(x); });
    EXPECT_LE(max_abs(h.phase - expect), 1e-13);
}

TEST(Decompose, LargeSmoothPhaseUnwrapsPastPi) {
    const Lattice lat = Lattice::line(kTau, 128);
    const WaveField w = wave_of(lat, [](double x, double) { return std::polar(1.0, 5.0 * std::sin(x)); });
    const HydroFields h = decompose(w);
    EXPECT_LE(max_abs(h.phase - ScalarField::sample(lat, [](double x) { return 5.0 * std::sin(x); })), 1e-12);
}

TEST(Decompose, PhaseScalesWithCoupling) {
    PhysicalConstants k;
    k.charge = 2.0;
    k.light = 3.0;
    const Lattice lat = Lattice::line(kTau, 32);
    const WaveField w = wave_of(lat, [](double x, double) { return std::polar(1.0, 0.4 * std::cos(x)); });
    const HydroFields h = decompose(w, k);
    const double c0 = std::cos(0.0);
    EXPECT_NEAR(h.phase[0], 0.4 * c0 / k.coupling(), 1e-13);
}

TEST(Decompose, VortexPlaquetteIsRejected) {
    const Lattice lat = Lattice::plane(2.0, 2.0, 16, 16);
    const WaveField w = wave_of(lat, [](double x, double y) {
        return Complex(x - 1.03, y - 0.97) + Complex(0.0, 0.0);
    });
    EXPECT_THROW(decompose(w, {}, 0.0), WindingDetected);
}

TEST(Decompose, DensityFloor) {
    const Lattice lat = Lattice::line(kTau, 16);
    WaveField w = wave_of(lat, [](double, double) { return Complex(1.0, 0.0); });
    w.psi[5] = Complex(1e-8, 0.0);
    try {
        decompose(w, {}, 1e-12);
        FAIL() << "expected DensityBelowFloor";
    } catch (const DensityBelowFloor& e) {
        EXPECT_EQ(e.site(), 5u);
    }
    EXPECT_NO_THROW(decompose(w, {}, 1e-17));
}

TEST(Decompose, RoundTripRandomSmooth) {
    for (const Lattice& lat : {Lattice::line(kTau, 96), Lattice::plane(kTau, kTau, 24, 24)}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const HydroFields h0 = random_smooth_hydro(lat, seed);
            const WaveField w = recompose(h0);
            const WaveField back = recompose(decompose(w));
            double worst = 0.0;
            for (std::size_t s = 0; s < lat.size(); ++s)
                worst = std::max(worst, std::abs(back.psi[s] - w.psi[s]));
            EXPECT_LE(worst, 1e-12);
            // rho exactly |psi|^2
            const HydroFields h = decompose(w);
            for (std::size_t s = 0; s < lat.size(); ++s)
                EXPECT_EQ(h.rho[s], std::norm(w.psi[s]));
        }
    }
}

TEST(Recompose, ClosedForms) {
    const Lattice lat = Lattice::line(1.0, 8);
    const WaveField one = recompose({ScalarField(lat, 1.0), ScalarField(lat)});
    const WaveField two = recompose({ScalarField(lat, 4.0), ScalarField(lat)});
    for (std::size_t s = 0; s < lat.size(); ++s) {
        EXPECT_EQ(one.psi[s], Complex(1.0, 0.0));
        EXPECT_EQ(two.psi[s], Complex(2.0, 0.0));
    }
}

TEST(Recompose, NonpositiveDensity) {
    const Lattice lat = Lattice::line(1.0, 8);
    ScalarField rho(lat, 1.0);
    rho[3] = 0.0;
    EXPECT_THROW(recompose({rho, ScalarField(lat)}), NonpositiveDensity);
}

TEST(Recompose, DecomposeInverseUpToGlobalPhaseConstant) {
    const Lattice lat = Lattice::line(kTau, 64);
    HydroFields h{ScalarField::sample(lat, [](double x) { return 1.0 + 0.3 * std::cos(x); }),
                  ScalarField::sample(lat, [](double x) { return 2.0 + 0.5 * std::sin(2.0 * x); })};
    const HydroFields back = decompose(recompose(h));
    EXPECT_LE(max_abs(back.rho - h.rho), 1e-14);
    const double shift = back.phase[0] - h.phase[0];
    for (std::size_t s = 0; s < lat.size(); ++s)
        EXPECT_NEAR(back.phase[s] - h.phase[s], shift, 1e-12);
}

TEST(GaugeInvariance, DensityUnchangedByLocalPhase) {
    const Lattice lat = Lattice::plane(kTau, kTau, 16, 16);
    const WaveField w = recompose(random_smooth_hydro(lat, 9));
    WaveField moved = w;
    for (std::size_t s = 0; s < lat.size(); ++s)
        moved.psi[s] *= std::polar(1.0, 3.0 * std::sin(lat.coordinate(s, 0) + 2.0 * lat.coordinate(s, 1)));
    EXPECT_LE(max_abs(moved.density() - w.density()), 1e-14);
}

TEST(FieldStrength, PureConstantGaugeIsZero) {
    const Lattice lat = Lattice::plane(kTau, kTau, 16, 16);
    GaugeField g = GaugeField::zero(lat);
    g.avec[0] = ScalarField(lat, 0.7);
    g.avec[1] = ScalarField(lat, -1.3);
    const FieldStrength f = field_strength(g);
    EXPECT_EQ(max_abs(f.electric), 0.0);
    ASSERT_TRUE(f.magnetic.has_value());
    EXPECT_EQ(max_abs(*f.magnetic), 0.0);
}

TEST(FieldStrength, StaticElectricFromSinePotential) {
    const Lattice lat = Lattice::line(kTau, 128);
    const double e0 = 0.8;
    GaugeField g = GaugeField::zero(lat);
    g.a0 = ScalarField::sample(lat, [&](double x) { return -e0 * std::sin(x); });
    const FieldStrength f = field_strength(g);
    const double dx = lat.spacing(0);
    EXPECT_LE(max_abs(f.electric[0] - ScalarField::sample(lat, [&](double x) { return e0 * std::cos(x); })),
              e0 * dx * dx / 6.0 * 1.01);
    EXPECT_FALSE(f.magnetic.has_value());
}

TEST(FieldStrength, SymmetricGaugeUniformMagnetic) {
    const Lattice lat = Lattice::plane(4.0, 4.0, 32, 32);
    const double b0 = 0.6;
    GaugeField g = GaugeField::zero(lat);
    g.avec[0] = ScalarField::sample(lat, [&](double, double y) { return -0.5 * b0 * y; });
    g.avec[1] = ScalarField::sample(lat, [&](double x, double) { return 0.5 * b0 * x; });
    const FieldStrength f = field_strength(g);
    // interior, away from the periodic seam
    for (int ix = 2; ix < 30; ++ix)
        for (int iy = 2; iy < 30; ++iy)
            EXPECT_NEAR((*f.magnetic)[lat.index(ix, iy)], b0, 1e-12);
}

TEST(FieldStrength, TimeDependentNeedsPositiveDt) {
    const Lattice lat = Lattice::line(kTau, 16);
    GaugeField a = GaugeField::zero(lat);
    GaugeField b = a;
    b.avec[0] = ScalarField(lat, 0.1);
    EXPECT_THROW(field_strength(b, a, 0.0), InvalidArgument);
    const FieldStrength f = field_strength(b, a, 0.05);
    EXPECT_NEAR(f.electric[0][3], -0.1 / 0.05, 1e-14);
}

TEST(FieldStrength, AntisymmetricTensor) {
    const Lattice lat = Lattice::plane(kTau, kTau, 16, 16);
    GaugeField g = GaugeField::zero(lat);
    g.a0 = ScalarField::sample(lat, [](double x, double y) { return std::sin(x) * std::cos(y); });
    g.avec[0] = ScalarField::sample(lat, [](double, double y) { return std::sin(y); });
    g.avec[1] = ScalarField::sample(lat, [](double x, double) { return std::cos(2.0 * x); });
    const FieldStrength f = field_strength(g);
    for (int mu = 0; mu <= 2; ++mu)
        for (int nu = 0; nu <= 2; ++nu)
            EXPECT_EQ(max_abs(f.component(mu, nu) + f.component(nu, mu)), 0.0);
    EXPECT_EQ(max_abs(f.component(1, 2) + *f.magnetic), 0.0);
    EXPECT_THROW(f.component(0, 3), InvalidArgument);
}

TEST(FieldStrength, GaugeShiftInvariance) {
    for (int n : {32, 64}) {
        const Lattice lat = Lattice::plane(kTau, kTau, n, n);
        GaugeField g = GaugeField::zero(lat);
        g.a0 = ScalarField::sample(lat, [](double x, double y) { return 0.3 * std::sin(x + y); });
        g.avec[0] = ScalarField::sample(lat, [](double, double y) { return std::sin(y); });
        const ScalarField lambda =
            ScalarField::sample(lat, [](double x, double y) { return std::exp(0.5 * std::cos(x)) * std::sin(2.0 * y); });
        const GaugeField moved = gauge_shift(g, gradient(lambda), ScalarField(lat));
        const FieldStrength a = field_strength(g);
        const FieldStrength b = field_strength(moved);
        // central differences commute on the periodic box
        EXPECT_LE(max_abs(*a.magnetic - *b.magnetic), 1e-12);
        EXPECT_LE(max_abs(a.electric - b.electric), 1e-12);
    }
}
