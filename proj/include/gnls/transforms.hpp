#pragma once

// The linearizing transformation: generator σ with
//     ∂_iσ = (mc²/e²ρ) δ∫U/δ(∂_iS),
// its integrability condition, the matter-field route (φ = e^{ieσ/ħc} ψ)
// and the gauge-field route (χ_μ = A_μ + ∂_μσ, i.e. **χ** = **A** − ∇σ,
// χ₀ = A₀ + (1/c)∂_tσ), plus the real nonlinearity each route produces.

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "gnls/potentials.hpp"

namespace gnls {

struct Generator {
    ScalarField sigma;
    VectorField grad_sigma;
    ScalarField dsigma_dt;
    /// Largest plaquette curl of grad_sigma, in the units of the condition residual (n = 2; 0 otherwise).
    double path_dependence = 0.0;
    /// ∮ grad_sigma along the periodic cycle of each axis through site 0.
    std::vector<double> cycle_mismatch;
    /// True when σ changes under a non-constant perturbation of S.
    bool depends_on_phase = false;
};

struct PairResidual {
    int i = 0;
    int j = 1;
    ScalarField residual;
};

struct ConditionReport {
    std::vector<PairResidual> residuals; // one per axis pair i < j
    double max_abs = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    bool vacuous = false;
};

struct GeneratorOptions {
    DerivativeMethod method = DerivativeMethod::Auto;
    EngineOptions engine{};
    /// Path-dependence tolerance in condition-residual units; negative disables the check.
    double condition_tolerance = -1.0;
    double floor = -1.0;
    bool with_time_derivative = true;
};

namespace detail {

/// Trapezoidal line integral of `grad` from site 0: along x on row 0, then
/// up each column (or the reverse order when `y_first`).
inline ScalarField line_integrate(const VectorField& grad, bool y_first = false) {
    const Lattice& lat = grad.lattice();
    ScalarField out(lat);
    auto walk = [&](int axis, std::size_t from) {
        const std::size_t to = lat.neighbor(from, axis, 1);
        out[to] = out[from] + 0.5 * lat.spacing(axis) * (grad[axis][from] + grad[axis][to]);
    };
    if (lat.dim() == 1) {
        for (int ix = 0; ix + 1 < lat.points(0); ++ix)
            walk(0, lat.index(ix, 0));
        return out;
    }
    const int first = y_first ? 1 : 0;
    const int second = 1 - first;
    for (int i = 0; i + 1 < lat.points(first); ++i)
        walk(first, first == 0 ? lat.index(i, 0) : lat.index(0, i));
    for (int line = 0; line < lat.points(first); ++line)
        for (int i = 0; i + 1 < lat.points(second); ++i)
            walk(second, second == 1 ? lat.index(line, i) : lat.index(i, line));
    return out;
}

/// Circulation of `grad` around every elementary plaquette divided by its area.
inline ScalarField plaquette_curl(const VectorField& grad) {
    const Lattice& lat = grad.lattice();
    ScalarField out(lat);
    const double dx = lat.spacing(0);
    const double dy = lat.spacing(1);
    for (std::size_t s = 0; s < lat.size(); ++s) {
        const std::size_t r = lat.neighbor(s, 0, 1);
        const std::size_t u = lat.neighbor(s, 1, 1);
        const std::size_t ru = lat.neighbor(r, 1, 1);
        const double circ = 0.5 * dx * (grad[0][s] + grad[0][r]) + 0.5 * dy * (grad[1][r] + grad[1][ru]) -
                            0.5 * dx * (grad[0][u] + grad[0][ru]) - 0.5 * dy * (grad[1][s] + grad[1][u]);
        out[s] = circ / (dx * dy);
    }
    return out;
}

inline std::vector<double> cycle_integrals(const VectorField& grad) {
    const Lattice& lat = grad.lattice();
    std::vector<double> out;
    for (int a = 0; a < lat.dim(); ++a) {
        double sum = 0.0;
        for (int i = 0; i < lat.points(a); ++i) {
            const std::size_t s = a == 0 ? lat.index(i, 0) : lat.index(0, i);
            sum += 0.5 * lat.spacing(a) * (grad[a][s] + grad[a][lat.neighbor(s, a, 1)]);
        }
        out.push_back(sum);
    }
    return out;
}

inline VectorField generator_gradient(const PotentialSpec& p, const HydroState& st, const PhysicalConstants& k,
                                      const GeneratorOptions& opt) {
    const Lattice& lat = st.lattice();
    VectorField grad(lat);
    const double f = k.mass * k.light * k.light / (k.charge * k.charge);
    for (int i = 0; i < lat.dim(); ++i) {
        grad[i] = functional_derivative(p, Slot::phase_gradient(i), st, k, opt.method, opt.engine, opt.floor);
        for (std::size_t s = 0; s < lat.size(); ++s)
            grad[i][s] *= f / st.hydro.rho[s];
    }
    return grad;
}

/// ∂ρ/∂t = −∇·J_full + (c/e)∂U/∂S on the given state.
inline ScalarField density_rate(const PotentialSpec& p, const HydroState& st, const PhysicalConstants& k,
                                const GeneratorOptions& opt) {
    const CurrentSet cur = currents(p, st, k, opt.method, opt.engine, opt.floor);
    ScalarField rate = -1.0 * divergence(cur.j_full);
    rate += continuity_source(p, st, k, opt.engine);
    return rate;
}

} // namespace detail

/// Builds σ, ∇σ and ∂σ/∂t on the given (ρ, S, A) state.
///
/// Doebner–Goldin kinds use σ = −(mcν/e) log ρ; generic potentials integrate
/// ∇σ along lattice lines from site 0 with σ(site 0) = 0. In n = 2 the
/// plaquette curl of ∇σ is compared against `condition_tolerance`.
/// ∂σ/∂t follows the chain rule through ∂ρ/∂t taken from the continuity
/// equation of the current state (S-dependence of σ is not followed; such
/// generators are flagged by `depends_on_phase`).
inline Generator build_generator(const PotentialSpec& p, const HydroState& st, const PhysicalConstants& k,
                                 const GeneratorOptions& opt = {}) {
    const Lattice& lat = st.lattice();
    const ScalarField& rho = st.hydro.rho;
    require_density_floor(rho, opt.floor < 0.0 ? default_density_floor(rho) : opt.floor);

    Generator g;
    g.grad_sigma = detail::generator_gradient(p, st, k, opt);
    g.cycle_mismatch = detail::cycle_integrals(g.grad_sigma);
    if (lat.dim() == 2) {
        const double units = k.charge * k.charge / (k.mass * k.light * k.light);
        g.path_dependence = units * max_abs(detail::plaquette_curl(g.grad_sigma));
        if (opt.condition_tolerance >= 0.0 && g.path_dependence > opt.condition_tolerance)
            throw ConditionViolated(g.path_dependence, opt.condition_tolerance);
    }

    const bool closed = p.is_dg() && opt.method != DerivativeMethod::Numeric;
    const double dg_factor = -k.mass * k.light * p.nu / k.charge;
    if (closed) {
        g.sigma = ScalarField(lat);
        for (std::size_t s = 0; s < lat.size(); ++s)
            g.sigma[s] = dg_factor * std::log(rho[s]);
    } else {
        g.sigma = detail::line_integrate(g.grad_sigma);
        if (p.is_dg()) {
            // same additive constant as the closed form
            const double shift = dg_factor * std::log(rho[0]);
            for (auto& v : g.sigma)
                v += shift;
        }
    }

    if (!p.is_dg()) {
        HydroState moved = st;
        for (std::size_t s = 0; s < lat.size(); ++s) {
            double bump = std::sin(2.0 * std::numbers::pi * lat.coordinate(s, 0) / lat.length(0));
            if (lat.dim() == 2)
                bump += std::cos(2.0 * std::numbers::pi * lat.coordinate(s, 1) / lat.length(1));
            moved.hydro.phase[s] += 1e-3 * (1.0 + max_abs(st.hydro.phase)) * bump;
        }
        GeneratorOptions o = opt;
        o.condition_tolerance = -1.0;
        const VectorField other = detail::generator_gradient(p, moved, k, o);
        const double scale = std::max(max_abs(g.grad_sigma), 1e-300);
        g.depends_on_phase = max_abs(other - g.grad_sigma) > 1e-7 * scale;
    }

    if (!opt.with_time_derivative) {
        g.dsigma_dt = ScalarField(lat);
        return g;
    }
    const ScalarField rate = detail::density_rate(p, st, k, opt);
    if (closed) {
        g.dsigma_dt = ScalarField(lat);
        for (std::size_t s = 0; s < lat.size(); ++s)
            g.dsigma_dt[s] = dg_factor * rate[s] / rho[s];
    } else {
        const double rate_scale = std::max(max_abs(rate), 1e-300);
        const double eps = 1e-5 * max_abs(rho) / rate_scale;
        GeneratorOptions o = opt;
        o.condition_tolerance = -1.0;
        o.with_time_derivative = false;
        HydroState plus = st;
        HydroState minus = st;
        for (std::size_t s = 0; s < lat.size(); ++s) {
            plus.hydro.rho[s] += eps * rate[s];
            minus.hydro.rho[s] -= eps * rate[s];
        }
        const ScalarField sp = build_generator(p, plus, k, o).sigma;
        const ScalarField sm = build_generator(p, minus, k, o).sigma;
        g.dsigma_dt = (1.0 / (2.0 * eps)) * (sp - sm);
    }
    return g;
}

/// Antisymmetrized {∂_i[(1/ρ)δ/δ(∂_jS)] − ∂_j[(1/ρ)δ/δ(∂_iS)]}∫U for every
/// pair i < j. In one dimension there are no pairs and the check passes.
inline ConditionReport check_condition(const PotentialSpec& p, const HydroState& st, double tol,
                                       const PhysicalConstants& k = {},
                                       DerivativeMethod method = DerivativeMethod::Auto, EngineOptions engine = {}) {
    const Lattice& lat = st.lattice();
    ConditionReport rep;
    rep.tolerance = tol;
    if (lat.dim() < 2) {
        rep.vacuous = true;
        return rep;
    }
    std::vector<ScalarField> per_axis;
    for (int i = 0; i < lat.dim(); ++i) {
        ScalarField c = functional_derivative(p, Slot::phase_gradient(i), st, k, method, engine);
        for (std::size_t s = 0; s < lat.size(); ++s)
            c[s] /= st.hydro.rho[s];
        per_axis.push_back(std::move(c));
    }
    for (int i = 0; i < lat.dim(); ++i)
        for (int j = i + 1; j < lat.dim(); ++j) {
            PairResidual r{i, j, partial(per_axis[static_cast<std::size_t>(j)], i) -
                                     partial(per_axis[static_cast<std::size_t>(i)], j)};
            rep.max_abs = std::max(rep.max_abs, max_abs(r.residual));
            rep.residuals.push_back(std::move(r));
        }
    rep.pass = rep.max_abs <= tol;
    return rep;
}

/// Smooth fixed 2D density used to calibrate the condition tolerance.
inline HydroState condition_reference_state(const Lattice& lat) {
    const double lx = lat.length(0);
    const double ly = lat.dim() > 1 ? lat.length(1) : 1.0;
    constexpr double tau = 2.0 * std::numbers::pi;
    HydroState st{{ScalarField::sample(lat,
                                       [&](double x, double y) {
                                           return std::exp(0.4 * std::sin(tau * x / lx) * std::cos(tau * y / ly) +
                                                           0.2 * std::cos(tau * (x / lx + 2.0 * y / ly)));
                                       }),
                   ScalarField::sample(lat, [&](double x, double y) {
                       return 0.3 * std::sin(tau * (x / lx - y / ly));
                   })},
                  GaugeField::zero(lat)};
    return st;
}

/// 10 × the discretization residual of the gauged DG potential (ν = 0.1) on
/// the reference state at this lattice resolution.
inline double calibrate_condition_tolerance(const Lattice& lat, const PhysicalConstants& k = {}) {
    if (lat.dim() < 2)
        return 0.0;
    const auto rep = check_condition(PotentialSpec::dg_gauged(0.1, 0.0), condition_reference_state(lat),
                                     std::numeric_limits<double>::infinity(), k);
    return 10.0 * rep.max_abs;
}

/// φ = exp[(ie/ħc) σ] ψ.
inline WaveField route_a_transform(const WaveField& w, const Generator& g, const PhysicalConstants& k = {}) {
    WaveField out = w;
    const double q = k.coupling();
    for (std::size_t s = 0; s < w.psi.size(); ++s)
        out.psi[s] *= std::polar(1.0, q * g.sigma[s]);
    return out;
}

inline WaveField route_a_inverse(const WaveField& phi, const Generator& g, const PhysicalConstants& k = {}) {
    WaveField out = phi;
    const double q = k.coupling();
    for (std::size_t s = 0; s < phi.psi.size(); ++s)
        out.psi[s] *= std::polar(1.0, -q * g.sigma[s]);
    return out;
}

/// **χ** = **A** − ∇σ, χ₀ = A₀ + (1/c) ∂σ/∂t.
inline GaugeField route_b_transform(const GaugeField& gauge, const Generator& g, const PhysicalConstants& k = {}) {
    return gauge_shift(gauge, g.grad_sigma, g.dsigma_dt, k);
}

/// DG form of the transformed scalar potential:
/// χ₀ = A₀ + (ν/cρ) ∇·[(∇S − **χ**)ρ].
inline ScalarField dg_chi0(const PotentialSpec& p, const HydroFields& h, const GaugeField& original,
                           const VectorField& chi, const PhysicalConstants& k = {}) {
    VectorField flux = gradient(h.phase) - chi;
    for (int i = 0; i < flux.dim(); ++i)
        for (std::size_t s = 0; s < h.rho.size(); ++s)
            flux[i][s] *= h.rho[s];
    ScalarField div = divergence(flux);
    ScalarField out = original.a0;
    for (std::size_t s = 0; s < out.size(); ++s)
        out[s] += p.nu / (k.light * h.rho[s]) * div[s];
    return out;
}

enum class Route { A, B };

inline const char* route_name(Route r) { return r == Route::A ? "A" : "B"; }

/// Original phase S = s − σ behind a route-A field with phase s.
inline HydroFields original_hydro(const PotentialSpec& p, const HydroFields& transformed, const GaugeField& gauge,
                                  const PhysicalConstants& k, const GeneratorOptions& opt = {}) {
    GeneratorOptions o = opt;
    o.with_time_derivative = false;
    o.condition_tolerance = -1.0;
    const Generator g = build_generator(p, {transformed, gauge}, k, o);
    if (g.depends_on_phase)
        throw InversionUnavailable("generator depends on the phase; s = S + σ cannot be inverted automatically");
    return {transformed.rho, transformed.phase - g.sigma};
}

/// W̃ (route A) or W̄ (route B):
///   W + (e²/2mc²)(∇σ)² − (e/c)(K·∇σ)/ρ − (e/c)∂σ/∂t
/// with K the bilinear current of the transformed variables.
///
/// Route A: `transformed` is (ρ, s, **A**); W is evaluated at S = s − σ.
/// Route B: `transformed` is (ρ, S, **χ**); W is evaluated at **A** = **χ** + ∇σ.
inline ScalarField transformed_nonlinearity(const PotentialSpec& p, const HydroState& transformed, const Generator& g,
                                            Route route, const PhysicalConstants& k,
                                            DerivativeMethod method = DerivativeMethod::Auto,
                                            EngineOptions engine = {}) {
    const Lattice& lat = transformed.lattice();
    HydroState original = transformed;
    if (route == Route::A) {
        if (g.depends_on_phase)
            throw InversionUnavailable("route A needs S([ρ],[s],A); the generator depends on S");
        original.hydro.phase = transformed.hydro.phase - g.sigma;
    } else {
        original.gauge.avec = transformed.gauge.avec + g.grad_sigma;
    }
    ScalarField w = functional_derivative(p, Slot::rho(), original, k, method, engine);
    const VectorField bilinear = bilinear_current(transformed.hydro, transformed.gauge.avec, k);
    const double ec = k.charge / k.light;
    const double kinetic = k.charge * k.charge / (2.0 * k.mass * k.light * k.light);
    const ScalarField grad_sq = dot(g.grad_sigma, g.grad_sigma);
    const ScalarField flux = dot(bilinear, g.grad_sigma);
    for (std::size_t s = 0; s < lat.size(); ++s)
        w[s] += kinetic * grad_sq[s] - ec * flux[s] / transformed.hydro.rho[s] - ec * g.dsigma_dt[s];
    return w;
}

/// Closed form of the transformed DG nonlinearity:
/// (mν² − 2αħ²/m) [Δρ/ρ − ½ (∇ρ/ρ)²].
inline ScalarField dg_transformed_bracket(const PotentialSpec& p, const ScalarField& rho,
                                          const PhysicalConstants& k = {}) {
    const double coeff = k.mass * p.nu * p.nu - 2.0 * p.alpha * k.hbar * k.hbar / k.mass;
    const ScalarField lap = laplacian(rho);
    const VectorField grad = gradient(rho);
    ScalarField out(rho.lattice());
    for (std::size_t s = 0; s < out.size(); ++s) {
        double g2 = 0.0;
        for (int i = 0; i < grad.dim(); ++i)
            g2 += grad[i][s] * grad[i][s];
        out[s] = coeff * (lap[s] / rho[s] - 0.5 * g2 / (rho[s] * rho[s]));
    }
    return out;
}

} // namespace gnls
