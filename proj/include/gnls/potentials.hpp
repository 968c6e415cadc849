#pragma once

// Nonlinear potentials U([ρ], [S], A), their functional derivatives, the
// real/imaginary nonlinearity split and the associated currents.
//
// Functional derivatives are the exact gradients of the lattice action
//     A_h = ΔV Σ_sites U(args(site))
// where args are built with the central difference D. Because D is
// antisymmetric, the discrete Euler–Lagrange operator is
//     δA_h/δa = ∂U/∂a − Σ_i D_i ∂U/∂(D_i a) + Σ_ij D_j D_i ∂U/∂(D_j D_i a).
// Two independent routes compute it: the closed forms below (Doebner–Goldin
// potentials only) and a numeric engine that finite-differences A_h site by
// site. They agree to O(h_fd²) plus round-off.

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gnls/fields.hpp"

namespace gnls {

/// Arguments of a potential density at one lattice site. Derivatives are
/// central differences; for the lattice action they may be replaced by
/// independent fields when differentiating with respect to ∂_iS or ∂_iρ.
struct SiteArgs {
    int dim = 1;
    double rho = 0.0;
    std::array<double, 2> drho{};                  // ∂_iρ
    double phase = 0.0;                            // S
    std::array<double, 2> dphase{};                // ∂_iS
    std::array<std::array<double, 2>, 2> ddphase{}; // ddphase[i][j] = ∂_j ∂_i S
    std::array<double, 2> avec{};                  // A_i
    std::array<std::array<double, 2>, 2> davec{};  // davec[i][j] = ∂_j A_i
};

/// Which SiteArgs entries a density reads. `avec` covers davec too.
struct Dependencies {
    bool rho = false;
    bool drho = false;
    bool phase = false;
    bool dphase = false;
    bool ddphase = false;
    bool avec = false;

    static Dependencies all() { return {true, true, true, true, true, true}; }
};

using DensityFn = std::function<double(const SiteArgs&)>;

enum class PotentialKind { DGUngauged, DGGauged, GenericDensity };

struct PotentialSpec {
    PotentialKind kind = PotentialKind::DGGauged;
    double nu = 0.0;    // diffusion coefficient
    double alpha = 0.0; // dimensionless coupling
    DensityFn density;  // GenericDensity only
    Dependencies deps = Dependencies::all();
    std::string label;

    static PotentialSpec dg_gauged(double nu, double alpha) {
        return {PotentialKind::DGGauged, nu, alpha, {}, Dependencies::all(), "dg_gauged"};
    }
    static PotentialSpec dg_ungauged(double nu, double alpha) {
        Dependencies d{true, true, false, true, true, false};
        return {PotentialKind::DGUngauged, nu, alpha, {}, d, "dg_ungauged"};
    }
    static PotentialSpec generic(std::string label, DensityFn fn, Dependencies deps) {
        return {PotentialKind::GenericDensity, 0.0, 0.0, std::move(fn), deps, std::move(label)};
    }

    bool is_dg() const { return kind != PotentialKind::GenericDensity; }
};

/// (ρ, S) together with the gauge field they live in.
struct HydroState {
    HydroFields hydro;
    GaugeField gauge;

    const Lattice& lattice() const { return hydro.lattice(); }
};

enum class SlotKind { Rho, Phase, PhaseGradient, DensityGradient };

struct Slot {
    SlotKind kind = SlotKind::Rho;
    int axis = 0;

    static Slot rho() { return {SlotKind::Rho, 0}; }
    static Slot phase() { return {SlotKind::Phase, 0}; }
    static Slot phase_gradient(int axis) { return {SlotKind::PhaseGradient, axis}; }
    static Slot density_gradient(int axis) { return {SlotKind::DensityGradient, axis}; }

    /// "rho", "S", "dS_axis_<i>", "drho_axis_<i>".
    static Slot parse(const std::string& name) {
        if (name == "rho")
            return rho();
        if (name == "S")
            return phase();
        auto axis_of = [&](const std::string& prefix) -> int {
            const std::string digits = name.substr(prefix.size());
            if (digits.size() != 1 || digits[0] < '0' || digits[0] > '1')
                throw UnknownSlot("unknown slot '" + name + "'");
            return digits[0] - '0';
        };
        if (name.rfind("dS_axis_", 0) == 0)
            return phase_gradient(axis_of("dS_axis_"));
        if (name.rfind("drho_axis_", 0) == 0)
            return density_gradient(axis_of("drho_axis_"));
        throw UnknownSlot("unknown slot '" + name + "'");
    }
};

/// Doebner–Goldin density in the gauged form
///   U = (νe/2c)[ρ ∇·(∇S − A) − ∇ρ·(∇S − A)] + α(ħ²/m)(∇ρ)²/ρ.
/// The ungauged kind is the same expression with A ≡ 0.
inline DensityFn dg_density(const PotentialSpec& p, const PhysicalConstants& k) {
    const double kappa = p.nu * k.charge / (2.0 * k.light);
    const double beta = p.alpha * k.hbar * k.hbar / k.mass;
    const bool gauged = p.kind == PotentialKind::DGGauged;
    return [kappa, beta, gauged](const SiteArgs& a) {
        double div_q = 0.0;
        double drho_dot_q = 0.0;
        double drho_sq = 0.0;
        for (int i = 0; i < a.dim; ++i) {
            const double q = a.dphase[i] - (gauged ? a.avec[i] : 0.0);
            div_q += a.ddphase[i][i] - (gauged ? a.davec[i][i] : 0.0);
            drho_dot_q += a.drho[i] * q;
            drho_sq += a.drho[i] * a.drho[i];
        }
        return kappa * (a.rho * div_q - drho_dot_q) + beta * drho_sq / a.rho;
    };
}

inline DensityFn site_density(const PotentialSpec& p, const PhysicalConstants& k) {
    if (p.is_dg())
        return dg_density(p, k);
    if (!p.density)
        throw InvalidArgument("generic potential '" + p.label + "' has no density evaluator");
    return p.density;
}

/// Lattice action and its site-wise gradient.
class LatticeAction {
public:
    LatticeAction(const PotentialSpec& p, const HydroState& state, const PhysicalConstants& k)
        : lat_(state.lattice()), density_(site_density(p, k)), rho_(state.hydro.rho), phase_(state.hydro.phase),
          avec_(state.gauge.avec), davec_(lat_.dim()) {
        for (int i = 0; i < lat_.dim(); ++i)
            for (int j = 0; j < lat_.dim(); ++j)
                davec_[static_cast<std::size_t>(i)].push_back(partial(avec_[i], j));
    }

    /// ΔV Σ U.
    double value() const {
        double sum = 0.0;
        for (std::size_t s = 0; s < lat_.size(); ++s)
            sum += site_value(s);
        return sum * lat_.cell_volume();
    }

    double site_value(std::size_t s) const { return density_(args(s)); }

    SiteArgs args(std::size_t s) const {
        SiteArgs a;
        a.dim = lat_.dim();
        a.rho = rho_[s];
        a.phase = phase_[s];
        for (int i = 0; i < a.dim; ++i) {
            a.drho[i] = drho(s, i);
            a.dphase[i] = dphase(s, i);
            a.avec[i] = avec_[i][s];
            for (int j = 0; j < a.dim; ++j) {
                a.ddphase[i][j] = (dphase(lat_.neighbor(s, j, 1), i) - dphase(lat_.neighbor(s, j, -1), i)) /
                                  (2.0 * lat_.spacing(j));
                a.davec[i][j] = davec_[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)][s];
            }
        }
        return a;
    }

    /// δA_h/δ(slot) / ΔV at every site, by central differencing A_h with
    /// step `h_rel · max|slot field|` (or `h_rel` when the field vanishes).
    ScalarField gradient(Slot slot, double h_rel, const Dependencies& deps) {
        if (slot.axis < 0 || slot.axis >= lat_.dim())
            throw UnknownSlot("slot axis " + std::to_string(slot.axis) + " out of range");
        ScalarField out(lat_);

        ScalarField* target = nullptr;
        int radius = 0;
        switch (slot.kind) {
        case SlotKind::Rho:
            if (!deps.rho && !deps.drho)
                return out;
            target = &rho_;
            radius = deps.drho ? 1 : 0;
            break;
        case SlotKind::Phase:
            if (!deps.phase && !deps.dphase && !deps.ddphase)
                return out;
            target = &phase_;
            radius = deps.ddphase ? 2 : (deps.dphase ? 1 : 0);
            break;
        case SlotKind::PhaseGradient:
            if (!deps.dphase && !deps.ddphase)
                return out;
            untie_phase_gradient();
            target = &free_dphase_[static_cast<std::size_t>(slot.axis)];
            radius = deps.ddphase ? 1 : 0;
            break;
        case SlotKind::DensityGradient:
            if (!deps.drho)
                return out;
            untie_density_gradient();
            target = &free_drho_[static_cast<std::size_t>(slot.axis)];
            radius = 0;
            break;
        }

        const double h = h_rel * scale_of(*target);
        for (std::size_t s = 0; s < lat_.size(); ++s) {
            const auto box = neighbourhood(s, radius);
            const double saved = (*target)[s];
            (*target)[s] = saved + h;
            double plus = 0.0;
            for (std::size_t b : box)
                plus += site_value(b);
            (*target)[s] = saved - h;
            double minus = 0.0;
            for (std::size_t b : box)
                minus += site_value(b);
            (*target)[s] = saved;
            out[s] = (plus - minus) / (2.0 * h);
        }
        tie();
        return out;
    }

private:
    static double scale_of(const ScalarField& f) {
        const double m = max_abs(f);
        return m > 0.0 ? m : 1.0;
    }

    double drho(std::size_t s, int i) const {
        if (!free_drho_.empty())
            return free_drho_[static_cast<std::size_t>(i)][s];
        return (rho_[lat_.neighbor(s, i, 1)] - rho_[lat_.neighbor(s, i, -1)]) / (2.0 * lat_.spacing(i));
    }

    double dphase(std::size_t s, int i) const {
        if (!free_dphase_.empty())
            return free_dphase_[static_cast<std::size_t>(i)][s];
        return (phase_[lat_.neighbor(s, i, 1)] - phase_[lat_.neighbor(s, i, -1)]) / (2.0 * lat_.spacing(i));
    }

    void untie_phase_gradient() {
        free_dphase_.clear();
        for (int i = 0; i < lat_.dim(); ++i)
            free_dphase_.push_back(partial(phase_, i));
    }

    void untie_density_gradient() {
        free_drho_.clear();
        for (int i = 0; i < lat_.dim(); ++i)
            free_drho_.push_back(partial(rho_, i));
    }

    void tie() {
        free_dphase_.clear();
        free_drho_.clear();
    }

    std::vector<std::size_t> neighbourhood(std::size_t s, int radius) const {
        std::vector<std::size_t> box;
        const int ry = lat_.dim() > 1 ? radius : 0;
        for (int dy = -ry; dy <= ry; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
                box.push_back(lat_.neighbor(lat_.neighbor(s, 0, dx), lat_.dim() > 1 ? 1 : 0, dy));
        return box;
    }

    Lattice lat_;
    DensityFn density_;
    ScalarField rho_;
    ScalarField phase_;
    VectorField avec_;
    std::vector<std::vector<ScalarField>> davec_;
    std::vector<ScalarField> free_dphase_;
    std::vector<ScalarField> free_drho_;
};

struct EngineOptions {
    double h_rel = 1e-5;
};

enum class DerivativeMethod { Auto, ClosedForm, Numeric };

namespace detail {

struct DGPieces {
    double kappa; // νe/2c
    double beta;  // αħ²/m
    VectorField grad_rho;
    VectorField q; // ∇S − A (A ≡ 0 for the ungauged kind)
};

inline DGPieces dg_pieces(const PotentialSpec& p, const HydroState& st, const PhysicalConstants& k) {
    DGPieces d{p.nu * k.charge / (2.0 * k.light), p.alpha * k.hbar * k.hbar / k.mass, gradient(st.hydro.rho),
               gradient(st.hydro.phase)};
    if (p.kind == PotentialKind::DGGauged)
        d.q -= st.gauge.avec;
    return d;
}

} // namespace detail

/// Closed-form discrete Euler–Lagrange derivatives of the DG density.
///   δ/δρ      = (νe/c) ∇·(∇S − A) − (αħ²/m)[ |∇ρ|²/ρ² + 2 ∇·(∇ρ/ρ) ]
///   δ/δS      = (νe/c) ∇·∇ρ
///   δ/δ(∂_iS) = −(νe/c) ∂_iρ
///   δ/δ(∂_iρ) = −(νe/2c)(∂_iS − A_i) + 2(αħ²/m) ∂_iρ/ρ
inline ScalarField dg_functional_derivative(const PotentialSpec& p, Slot slot, const HydroState& st,
                                            const PhysicalConstants& k) {
    const Lattice& lat = st.lattice();
    if (slot.axis < 0 || slot.axis >= lat.dim())
        throw UnknownSlot("slot axis " + std::to_string(slot.axis) + " out of range");
    const auto d = detail::dg_pieces(p, st, k);
    const ScalarField& rho = st.hydro.rho;
    switch (slot.kind) {
    case SlotKind::Rho: {
        ScalarField out = (2.0 * d.kappa) * divergence(d.q);
        VectorField grad_log(lat);
        ScalarField sq(lat);
        for (int i = 0; i < lat.dim(); ++i)
            for (std::size_t s = 0; s < lat.size(); ++s) {
                grad_log[i][s] = d.grad_rho[i][s] / rho[s];
                sq[s] += grad_log[i][s] * grad_log[i][s];
            }
        out -= d.beta * (sq + 2.0 * divergence(grad_log));
        return out;
    }
    case SlotKind::Phase:
        return (2.0 * d.kappa) * divergence(d.grad_rho);
    case SlotKind::PhaseGradient:
        return (-2.0 * d.kappa) * d.grad_rho[slot.axis];
    case SlotKind::DensityGradient: {
        ScalarField out(lat);
        for (std::size_t s = 0; s < lat.size(); ++s)
            out[s] = -d.kappa * d.q[slot.axis][s] + 2.0 * d.beta * d.grad_rho[slot.axis][s] / rho[s];
        return out;
    }
    }
    throw UnknownSlot("unknown slot");
}

/// δ(∫U)/δ(slot) per site. Auto uses the closed form for DG kinds and the
/// numeric engine otherwise.
inline ScalarField functional_derivative(const PotentialSpec& p, Slot slot, const HydroState& st,
                                         const PhysicalConstants& k, DerivativeMethod method = DerivativeMethod::Auto,
                                         EngineOptions opt = {}, double floor = -1.0) {
    require_density_floor(st.hydro.rho, floor < 0.0 ? default_density_floor(st.hydro.rho) : floor);
    const bool closed = method == DerivativeMethod::ClosedForm || (method == DerivativeMethod::Auto && p.is_dg());
    if (closed) {
        if (!p.is_dg())
            throw InvalidArgument("closed-form derivatives exist only for Doebner–Goldin potentials");
        return dg_functional_derivative(p, slot, st, k);
    }
    LatticeAction action(p, st, k);
    return action.gradient(slot, opt.h_rel, p.deps);
}

/// Perturbs every undeclared argument at every site and requires the
/// density to stay unchanged. Throws InvalidArgument naming the first
/// offending argument.
inline void verify_dependencies(const PotentialSpec& p, const HydroState& st, const PhysicalConstants& k) {
    if (p.is_dg())
        return;
    LatticeAction action(p, st, k);
    const DensityFn& u = p.density;
    auto check = [&](bool declared, const char* name, auto&& mutate) {
        if (declared)
            return;
        for (std::size_t s = 0; s < st.lattice().size(); ++s) {
            SiteArgs a = action.args(s);
            const double base = u(a);
            mutate(a);
            const double moved = u(a);
            if (std::abs(moved - base) > 1e-14 * (1.0 + std::abs(base)))
                throw InvalidArgument("potential '" + p.label + "' depends on undeclared argument '" + name + "'");
        }
    };
    auto bump = [](double& v) { v += 1e-3 * (1.0 + std::abs(v)); };
    const int n = st.lattice().dim();
    check(p.deps.rho, "rho", [&](SiteArgs& a) { bump(a.rho); });
    check(p.deps.drho, "drho", [&](SiteArgs& a) {
        for (int i = 0; i < n; ++i)
            bump(a.drho[i]);
    });
    check(p.deps.phase, "phase", [&](SiteArgs& a) { bump(a.phase); });
    check(p.deps.dphase, "dphase", [&](SiteArgs& a) {
        for (int i = 0; i < n; ++i)
            bump(a.dphase[i]);
    });
    check(p.deps.ddphase, "ddphase", [&](SiteArgs& a) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                bump(a.ddphase[i][j]);
    });
    check(p.deps.avec, "avec", [&](SiteArgs& a) {
        for (int i = 0; i < n; ++i) {
            bump(a.avec[i]);
            for (int j = 0; j < n; ++j)
                bump(a.davec[i][j]);
        }
    });
}

/// Real part W and imaginary part 𝒲 of the nonlinearity.
struct NonlinearitySplit {
    ScalarField w_real;
    ScalarField w_imag;
};

/// W = δ∫U/δρ, 𝒲 = (ħc/2eρ) δ∫U/δS.
inline NonlinearitySplit nonlinearity_split(const PotentialSpec& p, const HydroState& st, const PhysicalConstants& k,
                                            DerivativeMethod method = DerivativeMethod::Auto, EngineOptions opt = {},
                                            double floor = -1.0) {
    NonlinearitySplit out{functional_derivative(p, Slot::rho(), st, k, method, opt, floor),
                          functional_derivative(p, Slot::phase(), st, k, method, opt, floor)};
    const double c = k.hbar * k.light / (2.0 * k.charge);
    for (std::size_t s = 0; s < out.w_imag.size(); ++s)
        out.w_imag[s] *= c / st.hydro.rho[s];
    return out;
}

/// (e/mc) ρ (∇S − A) with central differences.
inline VectorField bilinear_current(const HydroFields& h, const VectorField& avec, const PhysicalConstants& k) {
    VectorField j = gradient(h.phase) - avec;
    const double f = k.charge / (k.mass * k.light);
    for (int i = 0; i < j.dim(); ++i)
        for (std::size_t s = 0; s < h.rho.size(); ++s)
            j[i][s] *= f * h.rho[s];
    return j;
}

/// J₀ = −(iħ/2m)[ψ*(∇ − (ie/ħc)A)ψ − c.c.] = (ħ/m) Im(ψ*∇ψ) − (e/mc)A|ψ|².
inline VectorField quantum_current(const WaveField& w, const VectorField& avec, const PhysicalConstants& k) {
    const Lattice& lat = w.lattice();
    VectorField j(lat);
    const double f = k.charge / (k.mass * k.light);
    for (int i = 0; i < lat.dim(); ++i) {
        const ComplexField d = partial(w.psi, i);
        for (std::size_t s = 0; s < lat.size(); ++s)
            j[i][s] = (k.hbar / k.mass) * std::imag(std::conj(w.psi[s]) * d[s]) - f * avec[i][s] * std::norm(w.psi[s]);
    }
    return j;
}

struct CurrentSet {
    VectorField j_full;     // (e/mc)(∇S − A)ρ + (c/e) δ∫U/δ(∂S)
    VectorField j_bilinear; // (e/mc)(∇S − A)ρ of the supplied phase and gauge field
    VectorField j_qm;       // J₀ evaluated from ψ
};

/// Currents of the state. The printed sign of the gauge term in the general
/// current formula is read as (∇S − A), the minimal-coupling choice that all
/// specific currents (bilinear, linearized, DG) share.
inline CurrentSet currents(const PotentialSpec& p, const HydroState& st, const PhysicalConstants& k,
                           DerivativeMethod method = DerivativeMethod::Auto, EngineOptions opt = {},
                           double floor = -1.0) {
    require_density_floor(st.hydro.rho, floor < 0.0 ? default_density_floor(st.hydro.rho) : floor);
    CurrentSet out;
    out.j_bilinear = bilinear_current(st.hydro, st.gauge.avec, k);
    out.j_full = out.j_bilinear;
    for (int i = 0; i < st.lattice().dim(); ++i)
        out.j_full[i] +=
            (k.light / k.charge) * functional_derivative(p, Slot::phase_gradient(i), st, k, method, opt, floor);
    out.j_qm = quantum_current(recompose(st.hydro, k), st.gauge.avec, k);
    return out;
}

/// Q = e ∫ρ dⁿx.
inline double total_charge(const HydroFields& h, const PhysicalConstants& k) { return k.charge * integrate(h.rho); }

inline double total_charge(const WaveField& w, const PhysicalConstants& k) {
    return k.charge * integrate(w.density());
}

/// (c/e) ∂U/∂S: the bare-S partial of the density, no Euler–Lagrange terms.
/// Vanishes identically when U depends on S only through its derivatives.
inline ScalarField continuity_source(const PotentialSpec& p, const HydroState& st, const PhysicalConstants& k,
                                     EngineOptions opt = {}) {
    const Lattice& lat = st.lattice();
    ScalarField out(lat);
    if (p.is_dg() || !p.deps.phase)
        return out;
    LatticeAction action(p, st, k);
    const double h = opt.h_rel * std::max(1.0, max_abs(st.hydro.phase));
    for (std::size_t s = 0; s < lat.size(); ++s) {
        SiteArgs a = action.args(s);
        const double saved = a.phase;
        a.phase = saved + h;
        const double plus = p.density(a);
        a.phase = saved - h;
        const double minus = p.density(a);
        out[s] = (k.light / k.charge) * (plus - minus) / (2.0 * h);
    }
    return out;
}

/// Named generic densities usable from scenario files.
///
///   rho_squared          U = ρ²
///   rho_times_phase      U = ρ S
///   rho_phase_x_squared  U = ρ (∂ₓS)²
///   rho_squared_phase_x  U = ρ² ∂ₓS        (fails the integrability condition in n = 2)
///   dg_clone             U = the gauged DG density, evaluated generically
inline PotentialSpec generic_potential(const std::string& name, double nu = 0.0, double alpha = 0.0,
                                       const PhysicalConstants& k = {}) {
    if (name == "rho_squared")
        return PotentialSpec::generic(name, [](const SiteArgs& a) { return a.rho * a.rho; },
                                      {true, false, false, false, false, false});
    if (name == "rho_times_phase")
        return PotentialSpec::generic(name, [](const SiteArgs& a) { return a.rho * a.phase; },
                                      {true, false, true, false, false, false});
    if (name == "rho_phase_x_squared")
        return PotentialSpec::generic(name, [](const SiteArgs& a) { return a.rho * a.dphase[0] * a.dphase[0]; },
                                      {true, false, false, true, false, false});
    if (name == "rho_squared_phase_x")
        return PotentialSpec::generic(name, [](const SiteArgs& a) { return a.rho * a.rho * a.dphase[0]; },
                                      {true, false, false, true, false, false});
    if (name == "dg_clone") {
        auto fn = dg_density(PotentialSpec::dg_gauged(nu, alpha), k);
        return PotentialSpec::generic(name, fn, {true, true, false, true, true, true});
    }
    throw InvalidArgument("unknown generic density '" + name + "'");
}

inline const std::vector<std::string>& generic_potential_names() {
    static const std::vector<std::string> names{"rho_squared", "rho_times_phase", "rho_phase_x_squared",
                                                "rho_squared_phase_x", "dg_clone"};
    return names;
}

} // namespace gnls
