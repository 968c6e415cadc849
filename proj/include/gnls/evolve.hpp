#pragma once

// Method-of-lines time integration (classical RK4) of the gauged NLSE with
// complex nonlinearity, of its two linearized forms, and of the 1+1D
// self-consistent electrostatic mode; Maxwell-source residual diagnostics.

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "gnls/transforms.hpp"

namespace gnls {

struct EvolutionState {
    WaveField wave;
    GaugeField gauge;
    double time = 0.0;
    long step_count = 0;

    const Lattice& lattice() const { return wave.lattice(); }
};

enum class Scheme { RK4 };

struct IntegratorConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::RK4;
    double t_final = 0.0;
    int snapshot_stride = 1;
    /// dt must satisfy dt ≤ stability_factor · Δx_min² · m/ħ.
    double stability_factor = 0.2;
    double density_floor = -1.0;

    long steps() const { return std::lround(t_final / dt); }
};

using RhsFn = std::function<ComplexField(const EvolutionState&)>;

inline void check_stability(const IntegratorConfig& cfg, const Lattice& lat, const PhysicalConstants& k) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt))
        throw StabilityViolation("dt must be positive and finite");
    const double h = lat.min_spacing();
    const double limit = cfg.stability_factor * h * h * k.mass / k.hbar;
    if (cfg.dt > limit)
        throw StabilityViolation("dt = " + std::to_string(cfg.dt) + " exceeds stability limit " +
                                 std::to_string(limit) + " (factor " + std::to_string(cfg.stability_factor) + ")");
}

/// −(ħ²/2m) **D**²ψ with **D** = ∇ − (ie/ħc)**A**, discretized as
///   **D**²ψ = Δψ − iq[**A**·∇ψ + ∇·(**A**ψ)] − q²A²ψ,   q = e/ħc,
/// which equals Δψ − 2iq**A**·∇ψ − iq(∇·**A**)ψ − q²A²ψ in the continuum and
/// is a Hermitian lattice operator (exact semi-discrete charge conservation).
inline ComplexField kinetic_term(const ComplexField& psi, const VectorField& avec, const PhysicalConstants& k) {
    const Lattice& lat = psi.lattice();
    const double q = k.coupling();
    ComplexField d2 = laplacian(psi);
    const Complex iq(0.0, q);
    for (int i = 0; i < lat.dim(); ++i) {
        const ScalarField& a = avec[i];
        if (max_abs(a) == 0.0)
            continue;
        const ComplexField dpsi = partial(psi, i);
        ComplexField apsi(lat);
        for (std::size_t s = 0; s < lat.size(); ++s)
            apsi[s] = a[s] * psi[s];
        const ComplexField div_apsi = partial(apsi, i);
        for (std::size_t s = 0; s < lat.size(); ++s)
            d2[s] -= iq * (a[s] * dpsi[s] + div_apsi[s]) + q * q * a[s] * a[s] * psi[s];
    }
    d2 *= Complex(-k.hbar * k.hbar / (2.0 * k.mass), 0.0);
    return d2;
}

/// (iħ)⁻¹ [ −(ħ²/2m)**D**²ψ + Vψ + e A₀ψ ] for a complex site potential V.
inline ComplexField assemble_rhs(const ComplexField& psi, const GaugeField& gauge, const ComplexField& potential,
                                 const PhysicalConstants& k) {
    ComplexField out = kinetic_term(psi, gauge.avec, k);
    const Complex inv(0.0, -1.0 / k.hbar);
    for (std::size_t s = 0; s < psi.size(); ++s)
        out[s] = inv * (out[s] + (potential[s] + k.charge * gauge.a0[s]) * psi[s]);
    return out;
}

inline ComplexField real_potential(const ScalarField& v) {
    ComplexField out(v.lattice());
    for (std::size_t s = 0; s < v.size(); ++s)
        out[s] = Complex(v[s], 0.0);
    return out;
}

/// ∂ψ/∂t of the gauged NLSE with nonlinearity W + i𝒲.
inline ComplexField rhs_original(const EvolutionState& st, const PotentialSpec& p, const PhysicalConstants& k,
                                 double floor = -1.0) {
    const HydroState hs{decompose(st.wave, k, floor), st.gauge};
    const NonlinearitySplit split = nonlinearity_split(p, hs, k, DerivativeMethod::Auto, {}, floor);
    ComplexField v(st.lattice());
    for (std::size_t s = 0; s < v.size(); ++s)
        v[s] = Complex(split.w_real[s], split.w_imag[s]);
    return assemble_rhs(st.wave.psi, st.gauge, v, k);
}

/// ∂ψ/∂t of the free gauged Schrödinger equation (no nonlinearity).
inline ComplexField rhs_free(const EvolutionState& st, const PhysicalConstants& k) {
    return assemble_rhs(st.wave.psi, st.gauge, ComplexField(st.lattice()), k);
}

/// Transformed equation with a given generator.
///
/// Route A: `st.wave` is φ in the original gauge field; the nonlinearity is W̃.
/// Route B: `st.wave` is ψ and `st.gauge` the original A_μ; the equation is
/// evaluated in χ_μ (from `g`) with nonlinearity W̄.
inline ComplexField rhs_transformed(const EvolutionState& st, const PotentialSpec& p, const Generator& g, Route route,
                                    const PhysicalConstants& k, double floor = -1.0) {
    const HydroFields h = decompose(st.wave, k, floor);
    if (route == Route::A) {
        const ScalarField w = transformed_nonlinearity(p, {h, st.gauge}, g, Route::A, k);
        return assemble_rhs(st.wave.psi, st.gauge, real_potential(w), k);
    }
    const GaugeField chi = route_b_transform(st.gauge, g, k);
    const ScalarField w = transformed_nonlinearity(p, {h, chi}, g, Route::B, k);
    return assemble_rhs(st.wave.psi, chi, real_potential(w), k);
}

/// Generator of the original (ρ, S, A) state underlying an evolution state
/// of the given equation.
inline Generator generator_for(const EvolutionState& st, const PotentialSpec& p, Route route,
                               const PhysicalConstants& k, double floor = -1.0) {
    GeneratorOptions opt;
    opt.floor = floor;
    HydroFields h = decompose(st.wave, k, floor);
    if (route == Route::A)
        h = original_hydro(p, h, st.gauge, k, opt);
    return build_generator(p, {h, st.gauge}, k, opt);
}

/// Self-updating transformed right-hand side: σ is rebuilt from the state at
/// every evaluation.
inline ComplexField rhs_transformed(const EvolutionState& st, const PotentialSpec& p, Route route,
                                    const PhysicalConstants& k, double floor = -1.0) {
    return rhs_transformed(st, p, generator_for(st, p, route, k, floor), route, k, floor);
}

/// The equations the integrator knows how to advance. The *Free variants
/// drop the transformed real nonlinearity (route B keeps χ_μ).
enum class Equation { Original, RouteA, RouteB, RouteAFree, RouteBFree };

inline const char* equation_name(Equation e) {
    switch (e) {
    case Equation::Original:
        return "original";
    case Equation::RouteA:
        return "transformed-A";
    case Equation::RouteB:
        return "transformed-B";
    case Equation::RouteAFree:
        return "free-A";
    case Equation::RouteBFree:
        return "free-B";
    }
    return "?";
}

inline Route route_of(Equation e) {
    return e == Equation::RouteB || e == Equation::RouteBFree ? Route::B : Route::A;
}

inline RhsFn make_rhs(Equation e, const PotentialSpec& p, const PhysicalConstants& k, double floor = -1.0) {
    switch (e) {
    case Equation::Original:
        return [p, k, floor](const EvolutionState& s) { return rhs_original(s, p, k, floor); };
    case Equation::RouteA:
    case Equation::RouteB: {
        const Route r = route_of(e);
        return [p, k, floor, r](const EvolutionState& s) { return rhs_transformed(s, p, r, k, floor); };
    }
    case Equation::RouteAFree:
        return [k](const EvolutionState& s) { return rhs_free(s, k); };
    case Equation::RouteBFree:
        return [p, k, floor](const EvolutionState& s) {
            const Generator g = generator_for(s, p, Route::B, k, floor);
            const GaugeField chi = route_b_transform(s.gauge, g, k);
            return assemble_rhs(s.wave.psi, chi, ComplexField(s.lattice()), k);
        };
    }
    throw InvalidArgument("unknown equation");
}

/// The current whose divergence balances ∂ρ/∂t for the given equation:
/// J_full for the original, 𝒥 = (e/mc)(∇s − A)ρ for route A and
/// ℐ = (e/mc)(∇S − χ)ρ for route B.
inline VectorField continuity_current(const EvolutionState& st, const PotentialSpec& p, Equation e,
                                      const PhysicalConstants& k, double floor = -1.0) {
    const HydroFields h = decompose(st.wave, k, floor);
    switch (e) {
    case Equation::Original:
        return currents(p, {h, st.gauge}, k, DerivativeMethod::Auto, {}, floor).j_full;
    case Equation::RouteA:
    case Equation::RouteAFree:
        return bilinear_current(h, st.gauge.avec, k);
    case Equation::RouteB:
    case Equation::RouteBFree: {
        const Generator g = generator_for(st, p, Route::B, k, floor);
        return bilinear_current(h, route_b_transform(st.gauge, g, k).avec, k);
    }
    }
    throw InvalidArgument("unknown equation");
}

/// ∂ρ/∂t = 2 Re(ψ* ∂ψ/∂t) of the semi-discrete system.
inline ScalarField density_rate(const ComplexField& psi, const ComplexField& rhs) {
    ScalarField out(psi.lattice());
    for (std::size_t s = 0; s < psi.size(); ++s)
        out[s] = 2.0 * std::real(std::conj(psi[s]) * rhs[s]);
    return out;
}

namespace detail {

inline void require_finite(const ComplexField& f, long step) {
    for (std::size_t s = 0; s < f.size(); ++s)
        if (!std::isfinite(f[s].real()) || !std::isfinite(f[s].imag()))
            throw NonFiniteDetected(step, s);
}

inline EvolutionState axpy(const EvolutionState& base, double h, const ComplexField& k) {
    EvolutionState out = base;
    for (std::size_t s = 0; s < k.size(); ++s)
        out.wave.psi[s] += h * k[s];
    return out;
}

} // namespace detail

/// One classical RK4 step. The gauge field is carried unchanged.
inline EvolutionState step(const EvolutionState& st, const RhsFn& rhs, const IntegratorConfig& cfg) {
    const double dt = cfg.dt;
    const long next = st.step_count + 1;
    const ComplexField k1 = rhs(st);
    detail::require_finite(k1, next);
    const ComplexField k2 = rhs(detail::axpy(st, 0.5 * dt, k1));
    detail::require_finite(k2, next);
    const ComplexField k3 = rhs(detail::axpy(st, 0.5 * dt, k2));
    detail::require_finite(k3, next);
    const ComplexField k4 = rhs(detail::axpy(st, dt, k3));
    detail::require_finite(k4, next);

    EvolutionState out = st;
    for (std::size_t s = 0; s < out.wave.psi.size(); ++s)
        out.wave.psi[s] += (dt / 6.0) * (k1[s] + 2.0 * k2[s] + 2.0 * k3[s] + k4[s]);
    detail::require_finite(out.wave.psi, next);
    out.step_count = next;
    out.time = static_cast<double>(next) * dt;
    const ScalarField rho = out.wave.density();
    require_density_floor(rho, cfg.density_floor < 0.0 ? default_density_floor(rho) : cfg.density_floor);
    return out;
}

using Observer = std::function<void(const EvolutionState&)>;

/// Integrates to cfg.t_final, calling `observe` on the initial state, every
/// `snapshot_stride` steps and on the final state.
inline EvolutionState integrate(EvolutionState st, const RhsFn& rhs, const IntegratorConfig& cfg,
                                const Observer& observe = {}, const PhysicalConstants& k = {}) {
    check_stability(cfg, st.lattice(), k);
    const long n = cfg.steps();
    const int stride = std::max(1, cfg.snapshot_stride);
    if (observe)
        observe(st);
    for (long i = 0; i < n; ++i) {
        st = step(st, rhs, cfg);
        if (observe && (st.step_count % stride == 0 || i + 1 == n))
            observe(st);
    }
    return st;
}

inline std::vector<EvolutionState> trajectory(const EvolutionState& initial, const RhsFn& rhs,
                                              const IntegratorConfig& cfg, const PhysicalConstants& k = {}) {
    std::vector<EvolutionState> out;
    integrate(initial, rhs, cfg, [&](const EvolutionState& s) { out.push_back(s); }, k);
    return out;
}

enum class CurrentChoice { Full, Bilinear };

/// ∂^μF_μν − (e/c)J_ν with J_ν = (cρ, −**J**).
///   gauss  = ∇·**E** − e ρ_src            (ν = 0)
///   ampere = (1/c)∂_t E_i − ∂_jF_ji + (e/c)J_i   (ν = i)
/// ∇·**E** uses −laplacian(A₀) − (1/c)∂_t ∇·**A**. With background
/// subtraction ρ_src = ρ − ρ̄ (periodic domains hold no net charge).
struct MaxwellResidual {
    ScalarField gauss;
    VectorField ampere;
};

inline MaxwellResidual maxwell_residual(const EvolutionState& prev, const EvolutionState& cur,
                                        const PotentialSpec& p, const PhysicalConstants& k,
                                        CurrentChoice choice = CurrentChoice::Full, bool subtract_background = false) {
    const Lattice& lat = cur.lattice();
    const double dt = cur.time - prev.time;
    MaxwellResidual r{ScalarField(lat), VectorField(lat)};

    const HydroFields h = decompose(cur.wave, k);
    ScalarField rho_src = h.rho;
    if (subtract_background) {
        const double mean = integrate(h.rho) / (lat.cell_volume() * static_cast<double>(lat.size()));
        for (auto& v : rho_src)
            v -= mean;
    }
    r.gauss = -1.0 * laplacian(cur.gauge.a0);
    if (dt > 0.0)
        r.gauss -= (1.0 / (k.light * dt)) * (divergence(cur.gauge.avec) - divergence(prev.gauge.avec));
    r.gauss -= k.charge * rho_src;

    const FieldStrength f = field_strength(cur.gauge, prev.gauge, dt, k);
    const HydroState hs{h, cur.gauge};
    const VectorField j =
        choice == CurrentChoice::Full ? currents(p, hs, k).j_full : bilinear_current(h, cur.gauge.avec, k);
    for (int i = 0; i < lat.dim(); ++i) {
        ScalarField res = (k.charge / k.light) * j[i];
        if (dt > 0.0)
            res += (-1.0 / (k.light * dt)) * partial(cur.gauge.a0 - prev.gauge.a0, i);
        if (f.magnetic) {
            // −∂_jF_ji with F_12 = −B: i = x gives −∂_y B, i = y gives +∂_x B
            res += i == 0 ? -1.0 * partial(*f.magnetic, 1) : partial(*f.magnetic, 0);
        }
        r.ampere[i] = std::move(res);
    }
    return r;
}

/// Periodic 1D Poisson problem −Δ_h A₀ = e(ρ − ρ̄) with the compact stencil,
/// solved directly by cumulative sums. Returns the zero-mean solution.
inline ScalarField solve_gauss_1d(const ScalarField& rho, const PhysicalConstants& k, double tolerance = 1e-10) {
    const Lattice& lat = rho.lattice();
    if (lat.dim() != 1)
        throw SolverFailure("electrostatic solve is implemented for n = 1 only");
    const std::size_t n = lat.size();
    const double dx = lat.spacing(0);
    double mean = 0.0;
    for (double v : rho)
        mean += v;
    mean /= static_cast<double>(n);
    std::vector<double> f(n);
    double scale = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        f[j] = k.charge * (rho[j] - mean);
        scale += std::abs(f[j]);
    }
    // d_j = A_{j+1} − A_j satisfies d_j − d_{j−1} = −dx² f_j
    std::vector<double> partial_sums(n, 0.0);
    for (std::size_t j = 1; j < n; ++j)
        partial_sums[j] = partial_sums[j - 1] + f[j];
    double total = 0.0;
    for (double v : partial_sums)
        total += v;
    const double d0 = dx * dx * total / static_cast<double>(n);
    ScalarField a0(lat);
    for (std::size_t j = 0; j + 1 < n; ++j)
        a0[j + 1] = a0[j] + (d0 - dx * dx * partial_sums[j]);
    double a_mean = 0.0;
    for (double v : a0)
        a_mean += v;
    a_mean /= static_cast<double>(n);
    for (auto& v : a0)
        v -= a_mean;

    if (!a0.all_finite())
        throw SolverFailure("electrostatic solve produced non-finite values");
    const ScalarField lap = laplacian(a0);
    double worst = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        worst = std::max(worst, std::abs(-lap[j] - f[j]));
    if (worst > tolerance * std::max(1.0, scale / static_cast<double>(n)))
        throw SolverFailure("electrostatic residual " + std::to_string(worst) + " above tolerance");
    return a0;
}

struct SelfConsistentRun {
    std::vector<EvolutionState> snapshots;
    std::vector<double> gauss_residual; // max |Gauss residual| after each step (index 0: initial)
    std::vector<double> charge;         // total charge after each step (index 0: initial)
};

/// 1+1D electrostatic self-consistent evolution: **A** ≡ 0 and A₀ solves
/// the background-subtracted Gauss law at every right-hand-side evaluation.
inline SelfConsistentRun run_selfconsistent_1d(EvolutionState st, const PotentialSpec& p, const IntegratorConfig& cfg,
                                               const PhysicalConstants& k) {
    if (st.lattice().dim() != 1)
        throw InvalidArgument("self-consistent mode requires n = 1");
    check_stability(cfg, st.lattice(), k);
    st.gauge.avec = VectorField(st.lattice());
    st.gauge.a0 = solve_gauss_1d(st.wave.density(), k);

    auto rhs = [&](const EvolutionState& s) {
        EvolutionState coupled = s;
        coupled.gauge.a0 = solve_gauss_1d(s.wave.density(), k);
        return rhs_original(coupled, p, k, cfg.density_floor);
    };
    auto gauss_of = [&](const EvolutionState& s) {
        const MaxwellResidual r = maxwell_residual(s, s, p, k, CurrentChoice::Full, true);
        return max_abs(r.gauss);
    };

    SelfConsistentRun out;
    const int stride = std::max(1, cfg.snapshot_stride);
    out.snapshots.push_back(st);
    out.gauss_residual.push_back(gauss_of(st));
    out.charge.push_back(total_charge(st.wave, k));
    const long n = cfg.steps();
    for (long i = 0; i < n; ++i) {
        st = step(st, rhs, cfg);
        st.gauge.a0 = solve_gauss_1d(st.wave.density(), k);
        out.gauss_residual.push_back(gauss_of(st));
        out.charge.push_back(total_charge(st.wave, k));
        if (st.step_count % stride == 0 || i + 1 == n)
            out.snapshots.push_back(st);
    }
    return out;
}

} // namespace gnls
