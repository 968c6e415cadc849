#pragma once

// Matter field, hydrodynamic (density/phase) representation, gauge field
// and the field-strength tensor.

#include <cmath>
#include <numbers>
#include <optional>

#include "gnls/grid.hpp"

namespace gnls {

struct WaveField {
    ComplexField psi;

    const Lattice& lattice() const { return psi.lattice(); }

    ScalarField density() const {
        ScalarField rho(psi.lattice());
        for (std::size_t s = 0; s < psi.size(); ++s)
            rho[s] = std::norm(psi[s]);
        return rho;
    }
};

/// ψ = ρ^{1/2} exp[(ie/ħc) S]. `phase` holds S in action·velocity/charge
/// units, i.e. S = (ħc/e) arg ψ, unwrapped to a single-valued representative.
struct HydroFields {
    ScalarField rho;
    ScalarField phase;

    const Lattice& lattice() const { return rho.lattice(); }
};

/// A_μ = (A₀, **A**). `avec` stores the components of the spatial vector
/// potential **A** entering **D** = ∇ − (ie/ħc)**A**; with the metric
/// diag(1, −1, …, −1) the covariant spatial components are A_i = −avec_i.
struct GaugeField {
    ScalarField a0;
    VectorField avec;

    static GaugeField zero(const Lattice& lattice) { return {ScalarField(lattice), VectorField(lattice)}; }

    const Lattice& lattice() const { return a0.lattice(); }

    bool all_finite() const { return a0.all_finite() && avec.all_finite(); }
};

/// Independent components of F_μν = ∂_μA_ν − ∂_νA_μ.
///
/// electric[i] = F_{0i} = −(1/c)∂_t avec_i − ∂_i A₀ (the electric field).
/// magnetic    = ∂₁avec₂ − ∂₂avec₁ (n = 2 only), so F_{12} = −magnetic.
struct FieldStrength {
    VectorField electric;
    std::optional<ScalarField> magnetic;

    /// Full antisymmetric tensor component F_{μν}, μ, ν ∈ {0, …, n}.
    ScalarField component(int mu, int nu) const {
        const Lattice& lat = electric.lattice();
        if (mu < 0 || nu < 0 || mu > lat.dim() || nu > lat.dim())
            throw InvalidArgument("field-strength index out of range");
        if (mu == nu)
            return ScalarField(lat);
        if (mu == 0)
            return electric[nu - 1];
        if (nu == 0)
            return -1.0 * electric[mu - 1];
        // only (1,2) and (2,1) remain
        return (mu == 1 ? -1.0 : 1.0) * *magnetic;
    }
};

/// Default density floor: 1e−12 of the largest site density.
inline double default_density_floor(const ScalarField& rho) {
    double m = 0.0;
    for (double v : rho)
        m = std::max(m, v);
    return 1e-12 * m;
}

inline void require_density_floor(const ScalarField& rho, double floor) {
    for (std::size_t s = 0; s < rho.size(); ++s)
        if (!(rho[s] >= floor) || !(rho[s] > 0.0))
            throw DensityBelowFloor(s, rho[s], floor);
}

namespace detail {

inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::remainder(a, two_pi);
    return a;
}

inline int winding_of(double accumulated) {
    return static_cast<int>(std::lround(accumulated / (2.0 * std::numbers::pi)));
}

} // namespace detail

/// Density and unwrapped phase of `w`.
///
/// The phase is integrated along axis-ordered paths from site 0: first along
/// x on row 0, then along y up every column. Every elementary plaquette
/// (n = 2) and the periodic cycle of each axis through site 0 must carry
/// zero winding, otherwise WindingDetected is raised. A negative `floor`
/// selects default_density_floor.
inline HydroFields decompose(const WaveField& w, const PhysicalConstants& k = {}, double floor = -1.0) {
    const Lattice& lat = w.lattice();
    HydroFields h{w.density(), ScalarField(lat)};
    require_density_floor(h.rho, floor < 0.0 ? default_density_floor(h.rho) : floor);

    ScalarField wrapped(lat);
    for (std::size_t s = 0; s < lat.size(); ++s)
        wrapped[s] = std::arg(w.psi[s]);
    auto step = [&](std::size_t from, std::size_t to) { return detail::wrap_angle(wrapped[to] - wrapped[from]); };

    for (int a = 0; a < lat.dim(); ++a) {
        double cycle = 0.0;
        for (int i = 0; i < lat.points(a); ++i) {
            const std::size_t s = a == 0 ? lat.index(i, 0) : lat.index(0, i);
            cycle += step(s, lat.neighbor(s, a, 1));
        }
        if (int n = detail::winding_of(cycle); n != 0)
            throw WindingDetected(0, n);
    }
    if (lat.dim() == 2) {
        for (std::size_t s = 0; s < lat.size(); ++s) {
            const std::size_t r = lat.neighbor(s, 0, 1);
            const std::size_t ru = lat.neighbor(r, 1, 1);
            const std::size_t u = lat.neighbor(s, 1, 1);
            const double loop = step(s, r) + step(r, ru) + step(ru, u) + step(u, s);
            if (int n = detail::winding_of(loop); n != 0)
                throw WindingDetected(s, n);
        }
    }

    ScalarField theta(lat);
    theta[0] = wrapped[0];
    for (int ix = 1; ix < lat.points(0); ++ix)
        theta[lat.index(ix, 0)] = theta[lat.index(ix - 1, 0)] + step(lat.index(ix - 1, 0), lat.index(ix, 0));
    if (lat.dim() == 2) {
        for (int ix = 0; ix < lat.points(0); ++ix)
            for (int iy = 1; iy < lat.points(1); ++iy)
                theta[lat.index(ix, iy)] =
                    theta[lat.index(ix, iy - 1)] + step(lat.index(ix, iy - 1), lat.index(ix, iy));
    }

    const double scale = 1.0 / k.coupling();
    for (std::size_t s = 0; s < lat.size(); ++s)
        h.phase[s] = scale * theta[s];
    return h;
}

/// ψ = ρ^{1/2} exp[(ie/ħc) S], evaluated pointwise.
inline WaveField recompose(const HydroFields& h, const PhysicalConstants& k = {}) {
    WaveField w{ComplexField(h.lattice())};
    const double q = k.coupling();
    for (std::size_t s = 0; s < h.rho.size(); ++s) {
        if (!(h.rho[s] > 0.0))
            throw NonpositiveDensity(s);
        w.psi[s] = std::polar(std::sqrt(h.rho[s]), q * h.phase[s]);
    }
    return w;
}

/// F_μν from the current gauge field and the one a time `dt` earlier.
///
/// The time derivative is a backward difference; `dt <= 0` is accepted only
/// when the vector potential did not change (static field).
inline FieldStrength field_strength(const GaugeField& g, const GaugeField& g_prev, double dt,
                                    const PhysicalConstants& k = {}) {
    const Lattice& lat = g.lattice();
    FieldStrength f{VectorField(lat), std::nullopt};
    for (int i = 0; i < lat.dim(); ++i) {
        ScalarField e = -1.0 * partial(g.a0, i);
        ScalarField da = g.avec[i] - g_prev.avec[i];
        if (dt > 0.0) {
            e -= (1.0 / (k.light * dt)) * da;
        } else if (max_abs(da) != 0.0) {
            throw InvalidArgument("field_strength: time-dependent vector potential needs dt > 0");
        }
        f.electric[i] = std::move(e);
    }
    if (lat.dim() == 2)
        f.magnetic = partial(g.avec[1], 0) - partial(g.avec[0], 1);
    return f;
}

inline FieldStrength field_strength(const GaugeField& g, const PhysicalConstants& k = {}) {
    return field_strength(g, g, 0.0, k);
}

/// A_μ → A_μ + ∂_μλ in covariant components:
/// A₀ → A₀ + (1/c)∂_tλ and **A** → **A** − ∇λ. F_μν is unchanged.
inline GaugeField gauge_shift(const GaugeField& g, const VectorField& grad_lambda, const ScalarField& dlambda_dt,
                              const PhysicalConstants& k = {}) {
    GaugeField out = g;
    out.a0 += (1.0 / k.light) * dlambda_dt;
    out.avec -= grad_lambda;
    return out;
}

} // namespace gnls
