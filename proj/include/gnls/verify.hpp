#pragma once

// Checks that turn the equivalence, invariance and conservation statements
// into numbers: commuting diagram of the two routes, density and field
// strength invariance, charge and continuity, refinement orders.
// Everything is collected into a VerificationReport; nothing throws on a
// failed check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "gnls/evolve.hpp"

namespace gnls {

struct CheckRecord {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;
};

struct RefinementLevel {
    double h = 0.0; // Δx (or dt)
    double error = 0.0;
};

struct OrderFit {
    double order = std::numeric_limits<double>::quiet_NaN();
    double stderr_order = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares slope of log(error) against log(h), with its standard error.
inline OrderFit fit_order(const std::vector<RefinementLevel>& levels) {
    OrderFit fit;
    const std::size_t n = levels.size();
    if (n < 2)
        return fit;
    double mx = 0.0, my = 0.0;
    for (const auto& l : levels) {
        mx += std::log(l.h);
        my += std::log(std::max(l.error, std::numeric_limits<double>::min()));
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (const auto& l : levels) {
        const double dx = std::log(l.h) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(std::max(l.error, std::numeric_limits<double>::min())) - my);
    }
    if (sxx == 0.0)
        return fit;
    fit.order = sxy / sxx;
    if (n > 2) {
        double ssr = 0.0;
        for (const auto& l : levels) {
            const double pred = my + fit.order * (std::log(l.h) - mx);
            const double r = std::log(std::max(l.error, std::numeric_limits<double>::min())) - pred;
            ssr += r * r;
        }
        fit.stderr_order = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
    } else {
        fit.stderr_order = 0.0;
    }
    return fit;
}

struct RefinementTable {
    std::string name;
    std::string variable = "N";
    std::vector<int> resolution;
    std::vector<RefinementLevel> levels;
    OrderFit fit;
    double min_order = 1.8;
    double max_order = std::numeric_limits<double>::infinity();
    bool pass = false;
    std::string note;

    void evaluate() {
        fit = fit_order(levels);
        pass = levels.size() >= 3 && std::isfinite(fit.order) && fit.order >= min_order && fit.order <= max_order;
    }
};

class VerificationReport {
public:
    void add(CheckRecord r) { records_.push_back(std::move(r)); }

    void add_check(std::string name, double measured, double tolerance, std::string note) {
        const bool ok = std::isfinite(measured) && measured <= tolerance;
        records_.push_back({std::move(name), measured, tolerance, ok, std::move(note)});
    }

    void add_table(RefinementTable t) { tables_.push_back(std::move(t)); }

    void calibrate(std::string name, double value) { calibration_.emplace_back(std::move(name), value); }

    void merge(const VerificationReport& other) {
        records_.insert(records_.end(), other.records_.begin(), other.records_.end());
        tables_.insert(tables_.end(), other.tables_.begin(), other.tables_.end());
        calibration_.insert(calibration_.end(), other.calibration_.begin(), other.calibration_.end());
    }

    const std::vector<CheckRecord>& records() const { return records_; }
    const std::vector<RefinementTable>& tables() const { return tables_; }
    const std::vector<std::pair<std::string, double>>& calibration() const { return calibration_; }

    bool all_pass() const {
        return std::all_of(records_.begin(), records_.end(), [](const auto& r) { return r.pass; }) &&
               std::all_of(tables_.begin(), tables_.end(), [](const auto& t) { return t.pass; });
    }

    std::size_t failures() const {
        std::size_t n = 0;
        for (const auto& r : records_)
            n += r.pass ? 0 : 1;
        for (const auto& t : tables_)
            n += t.pass ? 0 : 1;
        return n;
    }

    std::string to_text() const {
        std::string out = "# verification report\n";
        out += fmt::format("status: {}\n", all_pass() ? "PASS" : "FAIL");
        out += fmt::format("failures: {}\n", failures());
        if (!calibration_.empty()) {
            out += "\n[calibration]\n";
            for (const auto& [name, v] : calibration_)
                out += fmt::format("{} = {:.6e}\n", name, v);
        }
        out += "\n[checks]\n";
        for (const auto& r : records_)
            out += fmt::format("{} {} measured={:.6e} tolerance={:.6e} note=\"{}\"\n", r.pass ? "PASS" : "FAIL",
                               r.name, r.measured, r.tolerance, r.note);
        for (const auto& t : tables_) {
            out += fmt::format("\n[refinement {}]\n", t.name);
            out += fmt::format("{:>8} {:>14} {:>14} {:>8}\n", t.variable, "h", "error", "ratio");
            for (std::size_t i = 0; i < t.levels.size(); ++i) {
                const double ratio = i == 0 ? 0.0 : t.levels[i - 1].error / t.levels[i].error;
                const int res = i < t.resolution.size() ? t.resolution[i] : 0;
                out += fmt::format("{:>8} {:>14.6e} {:>14.6e} {:>8.3f}\n", res, t.levels[i].h, t.levels[i].error,
                                   ratio);
            }
            out += fmt::format("order = {:.4f} +/- {:.4f}  required [{:.2f}, {}]  {}\n", t.fit.order,
                               t.fit.stderr_order, t.min_order,
                               std::isfinite(t.max_order) ? fmt::format("{:.2f}", t.max_order) : std::string("inf"),
                               t.pass ? "PASS" : "FAIL");
            if (!t.note.empty())
                out += fmt::format("note: {}\n", t.note);
        }
        return out;
    }

private:
    std::vector<CheckRecord> records_;
    std::vector<RefinementTable> tables_;
    std::vector<std::pair<std::string, double>> calibration_;
};

/// ‖a − e^{iθ}b‖ / ‖a‖ with θ = arg Σ b*a, the best global phase.
inline double aligned_discrepancy(const ComplexField& a, const ComplexField& b) {
    Complex overlap(0.0, 0.0);
    for (std::size_t s = 0; s < a.size(); ++s)
        overlap += std::conj(b[s]) * a[s];
    const Complex rot = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex(1.0, 0.0);
    double num = 0.0, den = 0.0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        num += std::norm(a[s] - rot * b[s]);
        den += std::norm(a[s]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

/// dt = factor·Δx²·m/ħ, shrunk so that T is an integer number of steps.
inline IntegratorConfig refined_config(const Lattice& lat, double t_final, double dt_factor,
                                       const PhysicalConstants& k = {}, int stride = 1) {
    IntegratorConfig cfg;
    const double h = lat.min_spacing();
    cfg.t_final = t_final;
    cfg.dt = dt_factor * h * h * k.mass / k.hbar;
    cfg.dt = t_final / std::ceil(t_final / cfg.dt - 1e-9);
    cfg.snapshot_stride = stride;
    return cfg;
}

// commuting diagram ----------------------------------------------------------

struct CommutingResult {
    std::vector<double> time;
    std::vector<double> density; // relative L2 of ρ per compared snapshot
    double max_density = 0.0;
    double field = 0.0; // phase-aligned complex-field discrepancy at T
};

/// Path 1: evolve ψ with the original equation, transform each snapshot.
/// Path 2: transform at t = 0, evolve with the transformed (or free) equation.
inline CommutingResult commuting_discrepancy(const EvolutionState& initial, const PotentialSpec& p,
                                             const IntegratorConfig& cfg, Route route,
                                             const PhysicalConstants& k = {}, bool free_path2 = false) {
    const double floor = cfg.density_floor;
    const auto path1 = trajectory(initial, make_rhs(Equation::Original, p, k, floor), cfg, k);

    EvolutionState start = initial;
    if (route == Route::A)
        start.wave = route_a_transform(initial.wave, generator_for(initial, p, Route::B, k, floor), k);
    Equation eq = route == Route::A ? Equation::RouteA : Equation::RouteB;
    if (free_path2)
        eq = route == Route::A ? Equation::RouteAFree : Equation::RouteBFree;
    const auto path2 = trajectory(start, make_rhs(eq, p, k, floor), cfg, k);

    CommutingResult out;
    const std::size_t n = std::min(path1.size(), path2.size());
    for (std::size_t i = 0; i < n; ++i) {
        const double d = relative_l2(path2[i].wave.density(), path1[i].wave.density());
        out.time.push_back(path1[i].time);
        out.density.push_back(d);
        out.max_density = std::max(out.max_density, d);
    }
    if (n > 0) {
        const EvolutionState& last = path1[n - 1];
        WaveField mapped = last.wave;
        if (route == Route::A)
            mapped = route_a_transform(last.wave, generator_for(last, p, Route::B, k, floor), k);
        out.field = aligned_discrepancy(mapped.psi, path2[n - 1].wave.psi);
    }
    return out;
}

inline VerificationReport commuting_diagram(const EvolutionState& initial, const PotentialSpec& p,
                                            const IntegratorConfig& cfg, Route route, const PhysicalConstants& k = {},
                                            double tolerance = std::numeric_limits<double>::infinity(),
                                            bool free_path2 = false) {
    VerificationReport rep;
    const std::string tag = fmt::format("commuting_{}{}", route_name(route), free_path2 ? "_free" : "");
    try {
        const CommutingResult r = commuting_discrepancy(initial, p, cfg, route, k, free_path2);
        rep.add_check(tag + ".density", r.max_density, tolerance, "max over snapshots, relative L2 of rho");
        rep.add_check(tag + ".field", r.field, tolerance, "final field, global phase aligned");
    } catch (const Error& e) {
        rep.add({tag, std::numeric_limits<double>::quiet_NaN(), tolerance, false, e.what()});
    }
    return rep;
}

using StateBuilder = std::function<EvolutionState(int n)>;

struct RefinementPlan {
    std::vector<int> n{128, 256, 512};
    double t_final = 0.1;
    double dt_factor = 0.1;
    int stride = 1;
    double min_order = 1.8;
    double max_order = std::numeric_limits<double>::infinity();
};

/// Joint (Δx, dt ∝ Δx²) refinement of the density discrepancy.
inline RefinementTable commuting_study(const std::string& name, const StateBuilder& build, const PotentialSpec& p,
                                       Route route, const RefinementPlan& plan, const PhysicalConstants& k = {},
                                       bool free_path2 = false) {
    RefinementTable t;
    t.name = name;
    t.min_order = plan.min_order;
    t.max_order = plan.max_order;
    try {
        for (int n : plan.n) {
            const EvolutionState s0 = build(n);
            const IntegratorConfig cfg = refined_config(s0.lattice(), plan.t_final, plan.dt_factor, k, plan.stride);
            const CommutingResult r = commuting_discrepancy(s0, p, cfg, route, k, free_path2);
            t.resolution.push_back(n);
            t.levels.push_back({s0.lattice().min_spacing(), r.max_density});
        }
        t.evaluate();
    } catch (const Error& e) {
        t.pass = false;
        t.note = e.what();
    }
    return t;
}

// invariances -------------------------------------------------------------------

inline double density_change(const WaveField& w, const Generator& g, const PhysicalConstants& k = {}) {
    const ScalarField a = w.density();
    const ScalarField b = route_a_transform(w, g, k).density();
    return max_abs(a - b) / std::max(max_abs(a), std::numeric_limits<double>::min());
}

inline VerificationReport density_equivalence(const WaveField& w, const Generator& g, const PhysicalConstants& k = {}) {
    VerificationReport rep;
    rep.add_check("density_equivalence", density_change(w, g, k), 1e-12, "max |rho_phi - rho_psi| / max rho");
    return rep;
}

struct FieldStrengthChange {
    double electric = 0.0;
    double magnetic = 0.0;
};

/// F_μν of A_μ against F_μν of χ_μ, both from two snapshots `dt` apart.
inline FieldStrengthChange field_strength_change(const GaugeField& gauge, const GaugeField& gauge_prev,
                                                 const Generator& g, const Generator& g_prev, double dt,
                                                 const PhysicalConstants& k = {}) {
    const FieldStrength before = field_strength(gauge, gauge_prev, dt, k);
    const FieldStrength after =
        field_strength(route_b_transform(gauge, g, k), route_b_transform(gauge_prev, g_prev, k), dt, k);
    FieldStrengthChange c;
    for (int i = 0; i < before.electric.dim(); ++i)
        c.electric = std::max(c.electric, max_abs(after.electric[i] - before.electric[i]));
    if (before.magnetic)
        c.magnetic = max_abs(*after.magnetic - *before.magnetic);
    return c;
}

/// Pass ⇔ every component changes by at most C·(Δx² + dt).
inline VerificationReport f_invariance(const GaugeField& gauge, const GaugeField& gauge_prev, const Generator& g,
                                       const Generator& g_prev, double dt, double c_const,
                                       const PhysicalConstants& k = {}) {
    const double h = gauge.lattice().min_spacing();
    const double tol = c_const * (h * h + std::max(dt, 0.0));
    const FieldStrengthChange c = field_strength_change(gauge, gauge_prev, g, g_prev, dt, k);
    VerificationReport rep;
    rep.add_check("f_invariance.electric", c.electric, tol, "max |F_0i(chi) - F_0i(A)|");
    if (gauge.lattice().dim() == 2)
        rep.add_check("f_invariance.magnetic", c.magnetic, tol, "max |F_12(chi) - F_12(A)|");
    return rep;
}

/// Single snapshot: only F_12 is defined without a time difference.
inline VerificationReport f_invariance(const GaugeField& gauge, const Generator& g, double c_const,
                                       const PhysicalConstants& k = {}) {
    const double h = gauge.lattice().min_spacing();
    VerificationReport rep;
    if (gauge.lattice().dim() == 2)
        rep.add_check("f_invariance.magnetic", field_strength_change(gauge, gauge, g, g, 0.0, k).magnetic,
                      c_const * h * h, "max |F_12(chi) - F_12(A)|");
    return rep;
}

// conservation --------------------------------------------------------------

struct ConservationResult {
    std::vector<double> charge_drift;        // |Q_i − Q_0| / |Q_0| per snapshot
    std::vector<double> continuity_residual; // L2 per snapshot; NaN where no centred stencil exists
    double max_drift = 0.0;
    double max_residual = 0.0;
};

/// ∂ρ/∂t + ∇·J on snapshot i from its neighbours (centred in time; NaN when
/// the neighbours are not equally spaced).
inline double continuity_residual(const std::vector<EvolutionState>& traj, std::size_t i, const PotentialSpec& p,
                                  Equation eq, const PhysicalConstants& k = {}, double floor = -1.0) {
    if (i == 0 || i + 1 >= traj.size())
        return std::numeric_limits<double>::quiet_NaN();
    const double dm = traj[i].time - traj[i - 1].time;
    const double dp = traj[i + 1].time - traj[i].time;
    if (std::abs(dm - dp) > 1e-9 * std::max(dm, dp))
        return std::numeric_limits<double>::quiet_NaN();
    ScalarField r = (1.0 / (dm + dp)) * (traj[i + 1].wave.density() - traj[i - 1].wave.density());
    r += divergence(continuity_current(traj[i], p, eq, k, floor));
    return l2_norm(r);
}

inline ConservationResult conservation_measure(const std::vector<EvolutionState>& traj, const PotentialSpec& p,
                                               Equation eq, const PhysicalConstants& k = {}, double floor = -1.0) {
    ConservationResult out;
    if (traj.empty())
        return out;
    const double q0 = total_charge(traj.front().wave, k);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double d = std::abs(total_charge(traj[i].wave, k) - q0) / std::abs(q0);
        out.charge_drift.push_back(d);
        out.max_drift = std::max(out.max_drift, d);
        const double r = continuity_residual(traj, i, p, eq, k, floor);
        out.continuity_residual.push_back(r);
        if (std::isfinite(r))
            out.max_residual = std::max(out.max_residual, r);
    }
    return out;
}

inline VerificationReport conservation_suite(const std::vector<EvolutionState>& traj, const PotentialSpec& p,
                                             Equation eq, const PhysicalConstants& k = {},
                                             double drift_tolerance = 1e-8,
                                             double residual_tolerance = std::numeric_limits<double>::infinity()) {
    VerificationReport rep;
    const std::string tag = fmt::format("conservation_{}", equation_name(eq));
    if (traj.size() < 3) {
        rep.add({tag, std::numeric_limits<double>::quiet_NaN(), drift_tolerance, false, "needs >= 3 snapshots"});
        return rep;
    }
    try {
        const ConservationResult c = conservation_measure(traj, p, eq, k);
        rep.add_check(tag + ".charge_drift", c.max_drift, drift_tolerance, "max relative |Q - Q0| over snapshots");
        rep.add_check(tag + ".continuity_l2", c.max_residual, residual_tolerance,
                      eq == Equation::Original ? "current J_full" : "bilinear current");
    } catch (const Error& e) {
        rep.add({tag, std::numeric_limits<double>::quiet_NaN(), drift_tolerance, false, e.what()});
    }
    return rep;
}

/// Refinement of the continuity residual (max over interior snapshots).
inline RefinementTable continuity_study(const std::string& name, const StateBuilder& build, const PotentialSpec& p,
                                        Equation eq, const RefinementPlan& plan, const PhysicalConstants& k = {}) {
    RefinementTable t;
    t.name = name;
    t.min_order = plan.min_order;
    t.max_order = plan.max_order;
    try {
        for (int n : plan.n) {
            EvolutionState s0 = build(n);
            if (eq == Equation::RouteA || eq == Equation::RouteAFree)
                s0.wave = route_a_transform(s0.wave, generator_for(s0, p, Route::B, k), k);
            const IntegratorConfig cfg = refined_config(s0.lattice(), plan.t_final, plan.dt_factor, k, plan.stride);
            const auto traj = trajectory(s0, make_rhs(eq, p, k), cfg, k);
            t.resolution.push_back(n);
            t.levels.push_back({s0.lattice().min_spacing(), conservation_measure(traj, p, eq, k).max_residual});
        }
        t.evaluate();
    } catch (const Error& e) {
        t.pass = false;
        t.note = e.what();
    }
    return t;
}

// derivative oracle, special point, field-strength refinement -------------------

struct OracleComparison {
    std::string slot;
    double relative = 0.0; // relative L2, closed form vs numeric engine
};

/// Closed-form functional derivatives against the numeric engine for every slot.
inline std::vector<OracleComparison> derivative_oracle(const PotentialSpec& p, const HydroState& st,
                                                       const PhysicalConstants& k = {}, double h_rel = 1e-6) {
    std::vector<Slot> slots{Slot::rho(), Slot::phase()};
    std::vector<std::string> names{"rho", "S"};
    for (int i = 0; i < st.lattice().dim(); ++i) {
        slots.push_back(Slot::phase_gradient(i));
        names.push_back(fmt::format("dS_axis_{}", i));
        slots.push_back(Slot::density_gradient(i));
        names.push_back(fmt::format("drho_axis_{}", i));
    }
    std::vector<OracleComparison> out;
    for (std::size_t j = 0; j < slots.size(); ++j) {
        const ScalarField closed = functional_derivative(p, slots[j], st, k, DerivativeMethod::ClosedForm);
        const ScalarField numeric =
            functional_derivative(p, slots[j], st, k, DerivativeMethod::Numeric, EngineOptions{h_rel});
        out.push_back({names[j], relative_l2(numeric, closed)});
    }
    return out;
}

/// max |W̃| of route A on the initial state, refined.
inline RefinementTable transformed_nonlinearity_study(const std::string& name, const StateBuilder& build,
                                                      const PotentialSpec& p, const RefinementPlan& plan,
                                                      const PhysicalConstants& k = {}) {
    RefinementTable t;
    t.name = name;
    t.min_order = plan.min_order;
    t.max_order = plan.max_order;
    try {
        for (int n : plan.n) {
            const EvolutionState s0 = build(n);
            const HydroFields h = decompose(s0.wave, k);
            const Generator g = build_generator(p, {h, s0.gauge}, k);
            const HydroFields moved{h.rho, h.phase + g.sigma};
            const ScalarField w = transformed_nonlinearity(p, {moved, s0.gauge}, g, Route::A, k);
            t.resolution.push_back(n);
            t.levels.push_back({s0.lattice().min_spacing(), max_abs(w)});
        }
        t.evaluate();
    } catch (const Error& e) {
        t.pass = false;
        t.note = e.what();
    }
    return t;
}

/// Field-strength change under route B, refined jointly in (Δx, dt ∝ Δx²).
/// The electric part uses one step of the original equation; the magnetic
/// part (n = 2) the initial state.
inline RefinementTable f_invariance_study(const std::string& name, const StateBuilder& build, const PotentialSpec& p,
                                          const RefinementPlan& plan, bool magnetic, const PhysicalConstants& k = {}) {
    RefinementTable t;
    t.name = name;
    t.min_order = plan.min_order;
    t.max_order = plan.max_order;
    try {
        for (int n : plan.n) {
            const EvolutionState s0 = build(n);
            const Generator g0 = generator_for(s0, p, Route::B, k);
            double err = 0.0;
            if (magnetic) {
                err = field_strength_change(s0.gauge, s0.gauge, g0, g0, 0.0, k).magnetic;
            } else {
                const IntegratorConfig cfg = refined_config(s0.lattice(), plan.t_final, plan.dt_factor, k);
                const EvolutionState s1 = step(s0, make_rhs(Equation::Original, p, k), cfg);
                const Generator g1 = generator_for(s1, p, Route::B, k);
                err = field_strength_change(s1.gauge, s0.gauge, g1, g0, cfg.dt, k).electric;
            }
            t.resolution.push_back(n);
            t.levels.push_back({s0.lattice().min_spacing(), err});
        }
        t.evaluate();
    } catch (const Error& e) {
        t.pass = false;
        t.note = e.what();
    }
    return t;
}

} // namespace gnls
