#pragma once

// Named initial data (matter field and gauge field) and a seeded generator
// of random smooth states for property sweeps.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gnls/evolve.hpp"

namespace gnls {

struct InitialParams {
    double rho0 = 1.0;
    double amplitude = 0.5; // cosine-density contrast, bump height
    int mode = 1;
    double width = 0.5;      // bump width (length units)
    double background = 0.2; // bump background density
    double phase_amplitude = 0.0;
};

struct GaugeParams {
    double amplitude = 0.5; // A₀ amplitude or B
};

struct PresetInfo {
    const char* name;
    const char* description;
};

inline const std::vector<PresetInfo>& initial_presets() {
    static const std::vector<PresetInfo> v{
        {"uniform", "constant density rho0, phase from phase_amplitude"},
        {"cosine-density", "rho0 (1 + amplitude cos(2 pi mode x / L)), averaged over axes in 2D"},
        {"gaussian-bump", "background + amplitude * Gaussian of given width at the domain centre"},
        {"two-bump", "background + two Gaussians at L/4 and 3L/4"},
    };
    return v;
}

inline const std::vector<PresetInfo>& gauge_presets() {
    static const std::vector<PresetInfo> v{
        {"zero", "A0 = 0, A = 0"},
        {"static-sine-A0", "A0 = amplitude sin(2 pi x / L), A = 0"},
        {"constant-B", "n = 2 only: symmetric gauge for uniform B = amplitude (seam at the periodic boundary)"},
    };
    return v;
}

namespace detail {

// periodic distance to c on an axis of length L
inline double wrap_distance(double x, double c, double length) {
    double d = std::remainder(x - c, length);
    return d;
}

inline double gauss_at(const Lattice& lat, std::size_t s, const double* centre, double width) {
    double r2 = 0.0;
    for (int a = 0; a < lat.dim(); ++a) {
        const double d = wrap_distance(lat.coordinate(s, a), centre[a], lat.length(a));
        r2 += d * d;
    }
    return std::exp(-0.5 * r2 / (width * width));
}

} // namespace detail

inline bool is_initial_preset(const std::string& name) {
    for (const auto& p : initial_presets())
        if (name == p.name)
            return true;
    return false;
}

inline bool is_gauge_preset(const std::string& name) {
    for (const auto& p : gauge_presets())
        if (name == p.name)
            return true;
    return false;
}

inline HydroFields initial_hydro(const std::string& name, const Lattice& lat, const InitialParams& ip) {
    constexpr double tau = 2.0 * std::numbers::pi;
    HydroFields h{ScalarField(lat), ScalarField(lat)};
    for (std::size_t s = 0; s < lat.size(); ++s) {
        double rho = ip.rho0;
        if (name == "uniform") {
        } else if (name == "cosine-density") {
            double c = 0.0;
            for (int a = 0; a < lat.dim(); ++a)
                c += std::cos(tau * ip.mode * lat.coordinate(s, a) / lat.length(a));
            rho = ip.rho0 * (1.0 + ip.amplitude * c / lat.dim());
        } else if (name == "gaussian-bump") {
            const double centre[2] = {0.5 * lat.length(0), lat.dim() > 1 ? 0.5 * lat.length(1) : 0.0};
            rho = ip.background + ip.amplitude * detail::gauss_at(lat, s, centre, ip.width);
        } else if (name == "two-bump") {
            const double yc = lat.dim() > 1 ? 0.5 * lat.length(1) : 0.0;
            const double c1[2] = {0.25 * lat.length(0), yc};
            const double c2[2] = {0.75 * lat.length(0), yc};
            rho = ip.background +
                  ip.amplitude * (detail::gauss_at(lat, s, c1, ip.width) + detail::gauss_at(lat, s, c2, ip.width));
        } else {
            throw InvalidArgument("unknown initial preset '" + name + "'");
        }
        h.rho[s] = rho;
        h.phase[s] = ip.phase_amplitude * std::sin(tau * lat.coordinate(s, 0) / lat.length(0));
    }
    return h;
}

inline GaugeField initial_gauge(const std::string& name, const Lattice& lat, const GaugeParams& gp) {
    constexpr double tau = 2.0 * std::numbers::pi;
    GaugeField g = GaugeField::zero(lat);
    if (name == "zero")
        return g;
    if (name == "static-sine-A0") {
        g.a0 = ScalarField::sample(lat, [&](double x) { return gp.amplitude * std::sin(tau * x / lat.length(0)); });
        return g;
    }
    if (name == "constant-B") {
        if (lat.dim() != 2)
            throw InvalidArgument("constant-B needs a two-dimensional lattice");
        const double xc = 0.5 * lat.length(0);
        const double yc = 0.5 * lat.length(1);
        for (std::size_t s = 0; s < lat.size(); ++s) {
            g.avec[0][s] = -0.5 * gp.amplitude * (lat.coordinate(s, 1) - yc);
            g.avec[1][s] = 0.5 * gp.amplitude * (lat.coordinate(s, 0) - xc);
        }
        return g;
    }
    throw InvalidArgument("unknown gauge preset '" + name + "'");
}

inline EvolutionState initial_state(const std::string& psi_preset, const std::string& gauge_preset,
                                    const Lattice& lat, const InitialParams& ip = {}, const GaugeParams& gp = {},
                                    const PhysicalConstants& k = {}) {
    return {recompose(initial_hydro(psi_preset, lat, ip), k), initial_gauge(gauge_preset, lat, gp), 0.0, 0};
}

/// Random smooth (ρ, S): log ρ and S are sums of low Fourier modes with
/// amplitudes decaying like 1/|m|², drawn from a seeded mt19937_64.
inline HydroFields random_smooth_hydro(const Lattice& lat, std::uint64_t seed, int modes = 4,
                                       double log_rho_amplitude = 0.4, double phase_amplitude = 0.5) {
    constexpr double tau = 2.0 * std::numbers::pi;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, tau);
    struct Mode {
        int mx, my;
        double a, pa, b, pb;
    };
    std::vector<Mode> ms;
    const int ymax = lat.dim() > 1 ? modes : 0;
    for (int mx = 0; mx <= modes; ++mx)
        for (int my = (lat.dim() > 1 ? -ymax : 0); my <= ymax; ++my) {
            if (mx == 0 && my <= 0)
                continue;
            const double m2 = static_cast<double>(mx * mx + my * my);
            Mode m{mx, my, 0, 0, 0, 0};
            m.a = unit(rng) / m2;
            m.pa = angle(rng);
            m.b = unit(rng) / m2;
            m.pb = angle(rng);
            ms.push_back(m);
        }
    HydroFields h{ScalarField(lat), ScalarField(lat)};
    for (std::size_t s = 0; s < lat.size(); ++s) {
        const double x = lat.coordinate(s, 0) / lat.length(0);
        const double y = lat.dim() > 1 ? lat.coordinate(s, 1) / lat.length(1) : 0.0;
        double lr = 0.0, ph = 0.0;
        for (const Mode& m : ms) {
            const double arg = tau * (m.mx * x + m.my * y);
            lr += m.a * std::cos(arg + m.pa);
            ph += m.b * std::cos(arg + m.pb);
        }
        h.rho[s] = std::exp(log_rho_amplitude * lr);
        h.phase[s] = phase_amplitude * ph;
    }
    return h;
}

inline HydroState random_smooth_state(const Lattice& lat, std::uint64_t seed, bool with_vector_potential = false) {
    HydroState st{random_smooth_hydro(lat, seed), GaugeField::zero(lat)};
    if (with_vector_potential) {
        const HydroFields extra = random_smooth_hydro(lat, seed ^ 0x9e3779b97f4a7c15ULL);
        for (std::size_t s = 0; s < lat.size(); ++s) {
            st.gauge.avec[0][s] = 0.3 * extra.phase[s];
            if (lat.dim() > 1)
                st.gauge.avec[1][s] = 0.3 * std::log(extra.rho[s]);
        }
    }
    return st;
}

} // namespace gnls
