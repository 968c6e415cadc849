#pragma once

// Scenario configuration (TOML-style key/value text), run orchestration and
// CSV / report export for the `simulate` tool.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>

#include "gnls/presets.hpp"
#include "gnls/verify.hpp"

namespace gnls {

// ---------------------------------------------------------------------------
// values and known keys

enum class ValueType { Number, Integer, String, Bool, IntList };

using Value = std::variant<double, long, std::string, bool, std::vector<long>>;

struct KeySpec {
    const char* key;
    ValueType type;
    const char* fallback; // default, written as it would appear in a config
    const char* help;
};

inline const std::vector<KeySpec>& known_keys() {
    static const std::vector<KeySpec> keys{
        {"mode", ValueType::String, "evolve-original", "run mode (see --help)"},
        {"constants.hbar", ValueType::Number, "1", "reduced Planck constant"},
        {"constants.mass", ValueType::Number, "1", "particle mass"},
        {"constants.charge", ValueType::Number, "1", "charge e"},
        {"constants.light", ValueType::Number, "1", "speed of light c"},
        {"potential.kind", ValueType::String, "dg-gauged", "dg-gauged, dg-ungauged or generic"},
        {"potential.nu", ValueType::Number, "0.05", "DG diffusion coefficient"},
        {"potential.alpha", ValueType::Number, "0.1", "DG dimensionless coupling"},
        {"potential.generic", ValueType::String, "rho_squared", "named generic density when kind = generic"},
        {"lattice.dim", ValueType::Integer, "1", "spatial dimension, 1 or 2"},
        {"lattice.n", ValueType::Integer, "128", "points per axis"},
        {"lattice.n_y", ValueType::Integer, "0", "points along y (0: same as n)"},
        {"lattice.length", ValueType::Number, "6.283185307179586", "domain length per axis"},
        {"lattice.length_y", ValueType::Number, "0", "domain length along y (0: same as length)"},
        {"initial.preset", ValueType::String, "cosine-density", "initial matter field preset"},
        {"initial.rho0", ValueType::Number, "1", "reference density"},
        {"initial.amplitude", ValueType::Number, "0.5", "density contrast or bump height"},
        {"initial.mode", ValueType::Integer, "1", "cosine mode number"},
        {"initial.width", ValueType::Number, "0.5", "bump width"},
        {"initial.background", ValueType::Number, "0.2", "bump background density"},
        {"initial.phase_amplitude", ValueType::Number, "0", "amplitude of S = a sin(2 pi x / L)"},
        {"gauge.preset", ValueType::String, "zero", "initial gauge field preset"},
        {"gauge.amplitude", ValueType::Number, "0.5", "A0 amplitude or B"},
        {"integrator.scheme", ValueType::String, "rk4", "time integrator (rk4)"},
        {"integrator.dt", ValueType::Number, "0.0002", "time step"},
        {"integrator.t_final", ValueType::Number, "0.1", "final time"},
        {"integrator.stride", ValueType::Integer, "10", "steps between snapshots and observable rows"},
        {"integrator.stability_factor", ValueType::Number, "0.2", "dt <= factor dx^2 m / hbar"},
        {"density.floor", ValueType::Number, "-1", "density floor (negative: 1e-12 max rho)"},
        {"output.dir", ValueType::String, "out", "output directory"},
        {"output.snapshots", ValueType::Bool, "true", "write snapshot_<step>.csv files"},
        {"verify.route", ValueType::String, "both", "A, B or both"},
        {"verify.levels", ValueType::IntList, "[]", "refinement resolutions (empty: n/4, n/2, n)"},
        {"verify.t_final", ValueType::Number, "0.05", "final time of refinement runs"},
        {"verify.dt_factor", ValueType::Number, "0.1", "dt = factor dx^2 m / hbar in refinement runs"},
        {"verify.random_trials", ValueType::Integer, "50", "random states for property sweeps"},
        {"verify.seed", ValueType::Integer, "20240611", "seed of the random state generator"},
        {"tolerances.charge_drift", ValueType::Number, "1e-8", "relative charge drift"},
        {"tolerances.density_equivalence", ValueType::Number, "1e-12", "max |rho_phi - rho_psi| / max rho"},
        {"tolerances.oracle", ValueType::Number, "1e-6", "closed form vs numeric engine, relative L2"},
        {"tolerances.condition", ValueType::Number, "-1", "integrability residual (negative: calibrated)"},
        {"tolerances.gauss", ValueType::Number, "1e-10", "Gauss-law residual per step"},
        {"tolerances.order_min", ValueType::Number, "1.8", "lowest accepted refinement order"},
        {"tolerances.order_max", ValueType::Number, "2.5", "highest accepted commuting-diagram order"},
    };
    return keys;
}

struct ModeInfo {
    const char* name;
    const char* description;
};

inline const std::vector<ModeInfo>& modes() {
    static const std::vector<ModeInfo> m{
        {"evolve-original", "evolve psi with the complex nonlinearity"},
        {"evolve-transformed-A", "transform psi to phi at t = 0 and evolve with the real nonlinearity"},
        {"evolve-transformed-B", "evolve psi in the shifted gauge field chi with the real nonlinearity"},
        {"commuting-diagram", "evolve-then-transform against transform-then-evolve, with refinement"},
        {"condition-check", "integrability residual of the potential on the initial state"},
        {"selfconsistent-1d", "1+1D electrostatic mode, A0 solved from the Gauss law"},
        {"full-verify", "every check on the configured preset; writes report.txt"},
    };
    return m;
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::string nearest_key(const std::string& key) {
    std::string best;
    std::size_t dist = std::string::npos;
    for (const auto& k : known_keys()) {
        const std::size_t d = edit_distance(key, k.key);
        if (d < dist) {
            dist = d;
            best = k.key;
        }
    }
    return best;
}

inline const KeySpec* find_key(const std::string& key) {
    for (const auto& k : known_keys())
        if (key == k.key)
            return &k;
    return nullptr;
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"')
            quoted = !quoted;
        else if (line[i] == '#' && !quoted)
            return line.substr(0, i);
    }
    return line;
}

inline bool valid_key(const std::string& k) {
    if (k.empty() || k.front() == '.' || k.back() == '.')
        return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
            return false;
    return true;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty())
        return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && std::isfinite(out);
}

inline bool parse_long(const std::string& s, long& out) {
    if (s.empty())
        return false;
    char* end = nullptr;
    out = std::strtol(s.c_str(), &end, 10);
    return end == s.c_str() + s.size();
}

inline Value parse_value(const KeySpec& spec, const std::string& raw, int line) {
    const std::string what = std::string(spec.key) + ": ";
    switch (spec.type) {
    case ValueType::Number: {
        double v = 0.0;
        if (!parse_double(raw, v))
            throw ParseError(line, what + "expected a number, got '" + raw + "'");
        return v;
    }
    case ValueType::Integer: {
        long v = 0;
        if (!parse_long(raw, v))
            throw ParseError(line, what + "expected an integer, got '" + raw + "'");
        return v;
    }
    case ValueType::Bool:
        if (raw == "true")
            return true;
        if (raw == "false")
            return false;
        throw ParseError(line, what + "expected true or false, got '" + raw + "'");
    case ValueType::String:
        if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"')
            return raw.substr(1, raw.size() - 2);
        if (raw.find_first_of("\" \t=[]") != std::string::npos || raw.empty())
            throw ParseError(line, what + "expected a string, got '" + raw + "'");
        return raw;
    case ValueType::IntList: {
        if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
            throw ParseError(line, what + "expected a list like [64, 128, 256]");
        std::vector<long> out;
        std::stringstream ss(raw.substr(1, raw.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty() && out.empty() && ss.eof())
                break;
            long v = 0;
            if (!parse_long(item, v))
                throw ParseError(line, what + "list entry '" + item + "' is not an integer");
            out.push_back(v);
        }
        return out;
    }
    }
    throw ParseError(line, what + "unsupported type");
}

inline std::string format_value(const Value& v) {
    struct {
        std::string operator()(double d) const { return fmt::format("{}", d); }
        std::string operator()(long l) const { return fmt::format("{}", l); }
        std::string operator()(const std::string& s) const { return "\"" + s + "\""; }
        std::string operator()(bool b) const { return b ? "true" : "false"; }
        std::string operator()(const std::vector<long>& l) const { return fmt::format("[{}]", fmt::join(l, ", ")); }
    } f;
    return std::visit(f, v);
}

} // namespace detail

// ---------------------------------------------------------------------------
// ScenarioConfig

struct ScenarioConfig {
    std::string mode = "evolve-original";
    PhysicalConstants constants;
    std::string potential_kind = "dg-gauged";
    double nu = 0.05;
    double alpha = 0.1;
    std::string generic_name = "rho_squared";
    int dim = 1;
    int n = 128;
    int n_y = 128;
    double length = 2.0 * std::numbers::pi;
    double length_y = 2.0 * std::numbers::pi;
    std::string initial_preset = "cosine-density";
    InitialParams initial;
    std::string gauge_preset = "zero";
    GaugeParams gauge;
    IntegratorConfig integrator;
    std::string output_dir = "out";
    bool snapshots = true;
    std::string route = "both";
    std::vector<int> levels;
    double verify_t_final = 0.05;
    double verify_dt_factor = 0.1;
    int random_trials = 50;
    unsigned long seed = 20240611;
    double tol_drift = 1e-8;
    double tol_density = 1e-12;
    double tol_oracle = 1e-6;
    double tol_condition = -1.0;
    double tol_gauss = 1e-10;
    double order_min = 1.8;
    double order_max = 2.5;

    /// Every key with its resolved value, in known-key order.
    std::map<std::string, Value> resolved;

    Lattice lattice_at(int points) const {
        if (dim == 1)
            return Lattice::line(length, points);
        const int py = static_cast<int>(std::lround(static_cast<double>(points) * n_y / n));
        return Lattice::plane(length, length_y, points, py);
    }
    Lattice lattice() const { return lattice_at(n); }

    PotentialSpec potential() const {
        if (potential_kind == "dg-gauged")
            return PotentialSpec::dg_gauged(nu, alpha);
        if (potential_kind == "dg-ungauged")
            return PotentialSpec::dg_ungauged(nu, alpha);
        return generic_potential(generic_name, nu, alpha, constants);
    }

    std::vector<int> refinement_levels() const {
        if (!levels.empty())
            return levels;
        return {n / 4, n / 2, n};
    }

    /// Resolved configuration in the input syntax, sections in key order.
    std::string echo() const {
        std::string out = "# resolved configuration\n";
        std::string section;
        for (const auto& spec : known_keys()) {
            const std::string key = spec.key;
            const auto dot = key.find('.');
            const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
            const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
            if (sec != section) {
                out += "\n[" + sec + "]\n";
                section = sec;
            }
            out += name + " = " + detail::format_value(resolved.at(key)) + "\n";
        }
        return out;
    }
};

namespace detail {

struct RawEntry {
    std::string raw;
    int line = 0;
};

inline void read_entries(const std::string& text, std::map<std::string, RawEntry>& entries) {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string body = trim(strip_comment(line));
        if (body.empty())
            continue;
        if (body.front() == '[') {
            if (body.back() != ']')
                throw ParseError(number, "unterminated section header");
            section = trim(body.substr(1, body.size() - 2));
            if (!valid_key(section))
                throw ParseError(number, "invalid section name '" + section + "'");
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ParseError(number, "expected key = value");
        const std::string key = trim(body.substr(0, eq));
        const std::string raw = trim(body.substr(eq + 1));
        if (!valid_key(key))
            throw ParseError(number, "invalid key '" + key + "'");
        if (raw.empty())
            throw ParseError(number, "missing value for '" + key + "'");
        const std::string full = section.empty() ? key : section + "." + key;
        if (entries.count(full) != 0)
            throw ParseError(number, "duplicate key '" + full + "'");
        entries[full] = {raw, number};
    }
}

inline void require(bool ok, const std::string& field, const std::string& constraint) {
    if (!ok)
        throw ValidationError(field, constraint);
}

} // namespace detail

/// Parses and validates a scenario. `overrides` are "key=value" strings
/// applied on top of the text.
inline ScenarioConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {}) {
    std::map<std::string, detail::RawEntry> entries;
    detail::read_entries(text, entries);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos)
            throw ParseError(0, "override '" + o + "' is not key=value");
        entries[detail::trim(o.substr(0, eq))] = {detail::trim(o.substr(eq + 1)), 0};
    }

    ScenarioConfig c;
    for (const auto& [key, e] : entries)
        if (find_key(key) == nullptr)
            throw ValidationError(key, "unknown key; did you mean '" + nearest_key(key) + "'?");
    for (const auto& spec : known_keys()) {
        const auto it = entries.find(spec.key);
        c.resolved[spec.key] = it != entries.end() ? detail::parse_value(spec, it->second.raw, it->second.line)
                                                   : detail::parse_value(spec, spec.fallback, 0);
    }

    auto num = [&](const char* k) { return std::get<double>(c.resolved.at(k)); };
    auto integer = [&](const char* k) { return std::get<long>(c.resolved.at(k)); };
    auto str = [&](const char* k) { return std::get<std::string>(c.resolved.at(k)); };
    using detail::require;

    c.mode = str("mode");
    bool mode_known = false;
    for (const auto& m : modes())
        mode_known = mode_known || c.mode == m.name;
    require(mode_known, "mode", "unknown mode '" + c.mode + "'");

    c.constants = {num("constants.hbar"), num("constants.mass"), num("constants.charge"), num("constants.light")};
    require(c.constants.hbar > 0.0, "constants.hbar", "must be positive");
    require(c.constants.mass > 0.0, "constants.mass", "must be positive");
    require(c.constants.charge > 0.0, "constants.charge", "must be positive");
    require(c.constants.light > 0.0, "constants.light", "must be positive");

    c.potential_kind = str("potential.kind");
    require(c.potential_kind == "dg-gauged" || c.potential_kind == "dg-ungauged" || c.potential_kind == "generic",
            "potential.kind", "must be dg-gauged, dg-ungauged or generic");
    c.nu = num("potential.nu");
    c.alpha = num("potential.alpha");
    require(c.nu >= 0.0, "potential.nu", "must be non-negative");
    c.generic_name = str("potential.generic");
    if (c.potential_kind == "generic") {
        const auto& names = generic_potential_names();
        require(std::find(names.begin(), names.end(), c.generic_name) != names.end(), "potential.generic",
                "unknown generic density '" + c.generic_name + "'");
    }

    const long dim = integer("lattice.dim");
    require(dim == 1 || dim == 2, "lattice.dim", "must be 1 or 2");
    c.dim = static_cast<int>(dim);
    const long n = integer("lattice.n");
    require(n >= 8 && n <= 1 << 16, "lattice.n", "must be in [8, 65536]");
    c.n = static_cast<int>(n);
    const long ny = integer("lattice.n_y");
    require(ny == 0 || (ny >= 8 && ny <= 1 << 16), "lattice.n_y", "must be 0 or in [8, 65536]");
    c.n_y = ny == 0 ? c.n : static_cast<int>(ny);
    c.length = num("lattice.length");
    require(c.length > 0.0, "lattice.length", "must be positive");
    c.length_y = num("lattice.length_y");
    require(c.length_y >= 0.0, "lattice.length_y", "must be non-negative");
    if (c.length_y == 0.0)
        c.length_y = c.length;

    c.initial_preset = str("initial.preset");
    require(is_initial_preset(c.initial_preset), "initial.preset", "unknown preset '" + c.initial_preset + "'");
    c.initial.rho0 = num("initial.rho0");
    c.initial.amplitude = num("initial.amplitude");
    c.initial.mode = static_cast<int>(integer("initial.mode"));
    c.initial.width = num("initial.width");
    c.initial.background = num("initial.background");
    c.initial.phase_amplitude = num("initial.phase_amplitude");
    require(c.initial.rho0 > 0.0, "initial.rho0", "must be positive");
    require(c.initial.width > 0.0, "initial.width", "must be positive");
    if (c.initial_preset == "cosine-density")
        require(std::abs(c.initial.amplitude) < 1.0, "initial.amplitude", "must satisfy |amplitude| < 1");
    if (c.initial_preset == "gaussian-bump" || c.initial_preset == "two-bump") {
        require(c.initial.background > 0.0, "initial.background", "must be positive");
        require(c.initial.amplitude >= 0.0, "initial.amplitude", "must be non-negative");
    }

    c.gauge_preset = str("gauge.preset");
    require(is_gauge_preset(c.gauge_preset), "gauge.preset", "unknown preset '" + c.gauge_preset + "'");
    require(c.gauge_preset != "constant-B" || c.dim == 2, "gauge.preset", "constant-B needs lattice.dim = 2");
    c.gauge.amplitude = num("gauge.amplitude");

    require(str("integrator.scheme") == "rk4", "integrator.scheme", "only rk4 is available");
    c.integrator.dt = num("integrator.dt");
    require(c.integrator.dt > 0.0, "integrator.dt", "must be positive");
    c.integrator.t_final = num("integrator.t_final");
    require(c.integrator.t_final >= 0.0, "integrator.t_final", "must be non-negative");
    const long stride = integer("integrator.stride");
    require(stride >= 1, "integrator.stride", "must be >= 1");
    c.integrator.snapshot_stride = static_cast<int>(stride);
    c.integrator.stability_factor = num("integrator.stability_factor");
    require(c.integrator.stability_factor > 0.0, "integrator.stability_factor", "must be positive");
    c.integrator.density_floor = num("density.floor");

    c.output_dir = str("output.dir");
    c.snapshots = std::get<bool>(c.resolved.at("output.snapshots"));

    c.route = str("verify.route");
    require(c.route == "A" || c.route == "B" || c.route == "both", "verify.route", "must be A, B or both");
    for (long l : std::get<std::vector<long>>(c.resolved.at("verify.levels"))) {
        require(l >= 8 && l <= 1 << 16, "verify.levels", "entries must be in [8, 65536]");
        require(c.levels.empty() || l > c.levels.back(), "verify.levels", "must be increasing");
        c.levels.push_back(static_cast<int>(l));
    }
    require(c.levels.empty() || c.levels.size() >= 3, "verify.levels", "needs at least 3 levels");
    require(!c.levels.empty() || c.n / 4 >= 8, "verify.levels", "n/4 < 8; give explicit levels");
    c.verify_t_final = num("verify.t_final");
    require(c.verify_t_final > 0.0, "verify.t_final", "must be positive");
    c.verify_dt_factor = num("verify.dt_factor");
    require(c.verify_dt_factor > 0.0 && c.verify_dt_factor <= c.integrator.stability_factor, "verify.dt_factor",
            "must be in (0, integrator.stability_factor]");
    const long trials = integer("verify.random_trials");
    require(trials >= 1, "verify.random_trials", "must be >= 1");
    c.random_trials = static_cast<int>(trials);
    const long seed = integer("verify.seed");
    require(seed >= 0, "verify.seed", "must be non-negative");
    c.seed = static_cast<unsigned long>(seed);

    c.tol_drift = num("tolerances.charge_drift");
    c.tol_density = num("tolerances.density_equivalence");
    c.tol_oracle = num("tolerances.oracle");
    c.tol_condition = num("tolerances.condition");
    c.tol_gauss = num("tolerances.gauss");
    c.order_min = num("tolerances.order_min");
    c.order_max = num("tolerances.order_max");
    require(c.tol_drift > 0.0, "tolerances.charge_drift", "must be positive");
    require(c.tol_density > 0.0, "tolerances.density_equivalence", "must be positive");
    require(c.tol_oracle > 0.0, "tolerances.oracle", "must be positive");
    require(c.tol_gauss > 0.0, "tolerances.gauss", "must be positive");
    require(c.order_max >= c.order_min, "tolerances.order_max", "must be >= tolerances.order_min");

    require(c.mode != "selfconsistent-1d" || c.dim == 1, "lattice.dim", "selfconsistent-1d needs dim = 1");
    return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("config", "cannot read '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), overrides);
}

// ---------------------------------------------------------------------------
// logging

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

/// GNLS_LOG = quiet | info | debug (default info).
inline LogLevel log_level() {
    const char* v = std::getenv("GNLS_LOG");
    if (v == nullptr)
        return LogLevel::Info;
    const std::string s = v;
    if (s == "quiet" || s == "0")
        return LogLevel::Quiet;
    if (s == "debug" || s == "2")
        return LogLevel::Debug;
    return LogLevel::Info;
}

inline void log_message(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) <= static_cast<int>(log_level()))
        std::fprintf(stderr, "[simulate] %s\n", msg.c_str());
}

// ---------------------------------------------------------------------------
// output

struct ObservableRow {
    long step = 0;
    double time = 0.0;
    double total_charge = 0.0;
    double l2_norm_psi = 0.0;
    double max_density = 0.0;
    double min_density = 0.0;
    double continuity = std::numeric_limits<double>::quiet_NaN();
    double maxwell = std::numeric_limits<double>::quiet_NaN();
    double commuting = std::numeric_limits<double>::quiet_NaN();
};

inline ObservableRow observe(const EvolutionState& st, const PhysicalConstants& k) {
    ObservableRow r;
    r.step = st.step_count;
    r.time = st.time;
    const ScalarField rho = st.wave.density();
    r.total_charge = total_charge(st.wave, k);
    r.l2_norm_psi = std::sqrt(integrate(rho));
    r.max_density = *std::max_element(rho.begin(), rho.end());
    r.min_density = *std::min_element(rho.begin(), rho.end());
    return r;
}

class OutputWriter {
public:
    OutputWriter(const std::filesystem::path& dir, bool snapshots) : dir_(dir), snapshots_(snapshots) {
        std::filesystem::create_directories(dir_);
    }

    void write_text(const std::string& name, const std::string& text) const {
        std::ofstream out(dir_ / name, std::ios::binary);
        out << text;
        if (!out)
            throw Error("cannot write " + (dir_ / name).string());
    }

    void row(const ObservableRow& r) {
        if (!obs_.is_open()) {
            obs_.open(dir_ / "observables.csv", std::ios::binary);
            obs_ << "# schema=1\n"
                 << "step,time,total_charge,l2_norm_psi,max_density,min_density,continuity_residual_l2,"
                    "maxwell_residual_l2,commuting_discrepancy\n";
        }
        auto opt = [](double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : std::string(); };
        obs_ << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{}\n", r.step, r.time, r.total_charge,
                            r.l2_norm_psi, r.max_density, r.min_density, opt(r.continuity), opt(r.maxwell),
                            opt(r.commuting));
        obs_.flush();
    }

    void snapshot(const EvolutionState& st, const PhysicalConstants& k) const {
        if (!snapshots_)
            return;
        const Lattice& lat = st.lattice();
        ScalarField phase(lat);
        try {
            phase = decompose(st.wave, k).phase;
        } catch (const Error&) {
            for (std::size_t s = 0; s < lat.size(); ++s)
                phase[s] = std::arg(st.wave.psi[s]) / k.coupling();
        }
        std::string out = "# schema=1\n";
        out += lat.dim() == 1 ? "site_index,x,rho,phase,re_psi,im_psi,a0,a_x\n"
                              : "site_index,x,y,rho,phase,re_psi,im_psi,a0,a_x,a_y\n";
        for (std::size_t s = 0; s < lat.size(); ++s) {
            out += fmt::format("{},{:.17g}", s, lat.coordinate(s, 0));
            if (lat.dim() == 2)
                out += fmt::format(",{:.17g}", lat.coordinate(s, 1));
            out += fmt::format(",{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}", std::norm(st.wave.psi[s]),
                               phase[s], st.wave.psi[s].real(), st.wave.psi[s].imag(), st.gauge.a0[s],
                               st.gauge.avec[0][s]);
            if (lat.dim() == 2)
                out += fmt::format(",{:.17g}", st.gauge.avec[1][s]);
            out += "\n";
        }
        write_text(fmt::format("snapshot_{}.csv", st.step_count), out);
    }

    void close() {
        if (obs_.is_open())
            obs_.close();
    }

private:
    std::filesystem::path dir_;
    bool snapshots_;
    std::ofstream obs_;
};

// ---------------------------------------------------------------------------
// run

enum ExitCode { ExitPass = 0, ExitCheckFailure = 1, ExitUsage = 2, ExitRuntime = 3 };

namespace detail {

inline EvolutionState scenario_state(const ScenarioConfig& c, int points) {
    return initial_state(c.initial_preset, c.gauge_preset, c.lattice_at(points), c.initial, c.gauge, c.constants);
}

/// Streams observable rows; the continuity residual of a row needs the next
/// snapshot, so one row is held back until its neighbour arrives.
class RowStream {
public:
    RowStream(OutputWriter& out, const PotentialSpec& p, Equation eq, const PhysicalConstants& k, double floor)
        : out_(out), p_(p), eq_(eq), k_(k), floor_(floor) {}

    void push(const EvolutionState& st, double commuting = std::numeric_limits<double>::quiet_NaN(),
              double maxwell = std::numeric_limits<double>::quiet_NaN()) {
        window_.push_back(st);
        ObservableRow r = observe(st, k_);
        r.commuting = commuting;
        r.maxwell = maxwell;
        rows_.push_back(r);
        if (window_.size() == 3) {
            rows_[1].continuity = continuity_residual(window_, 1, p_, eq_, k_, floor_);
            residuals_.push_back(rows_[1].continuity);
            out_.row(rows_[0]);
            window_.erase(window_.begin());
            rows_.erase(rows_.begin());
        }
    }

    void flush() {
        for (const auto& r : rows_)
            out_.row(r);
        rows_.clear();
        window_.clear();
    }

    double max_residual() const {
        double m = 0.0;
        for (double v : residuals_)
            if (std::isfinite(v))
                m = std::max(m, v);
        return m;
    }

private:
    OutputWriter& out_;
    PotentialSpec p_;
    Equation eq_;
    PhysicalConstants k_;
    double floor_;
    std::vector<EvolutionState> window_;
    std::vector<ObservableRow> rows_;
    std::vector<double> residuals_;
};

inline std::vector<Route> routes_of(const ScenarioConfig& c) {
    if (c.route == "A")
        return {Route::A};
    if (c.route == "B")
        return {Route::B};
    return {Route::A, Route::B};
}

inline RefinementPlan plan_of(const ScenarioConfig& c, double t_final, double min_order,
                              double max_order = std::numeric_limits<double>::infinity()) {
    RefinementPlan plan;
    plan.n = c.refinement_levels();
    plan.t_final = t_final;
    plan.dt_factor = c.verify_dt_factor;
    plan.min_order = min_order;
    plan.max_order = max_order;
    return plan;
}

/// Evolution of the configured state with `eq`, streamed to disk.
inline VerificationReport run_evolution(const ScenarioConfig& c, Equation eq, OutputWriter& out) {
    const PhysicalConstants& k = c.constants;
    const PotentialSpec p = c.potential();
    EvolutionState s0 = scenario_state(c, c.n);
    if (eq == Equation::RouteA || eq == Equation::RouteAFree)
        s0.wave = route_a_transform(s0.wave, generator_for(s0, p, Route::B, k, c.integrator.density_floor), k);
    RowStream rows(out, p, eq, k, c.integrator.density_floor);
    const double q0 = total_charge(s0.wave, k);
    double drift = 0.0;
    try {
        integrate(
            s0, make_rhs(eq, p, k, c.integrator.density_floor), c.integrator,
            [&](const EvolutionState& s) {
                drift = std::max(drift, std::abs(total_charge(s.wave, k) - q0) / std::abs(q0));
                rows.push(s);
                out.snapshot(s, k);
            },
            k);
    } catch (...) {
        rows.flush();
        throw;
    }
    rows.flush();
    VerificationReport rep;
    rep.add_check(fmt::format("{}.charge_drift", equation_name(eq)), drift, c.tol_drift,
                  "max relative |Q - Q0| over snapshots");
    return rep;
}

inline VerificationReport run_commuting(const ScenarioConfig& c, OutputWriter& out) {
    const PhysicalConstants& k = c.constants;
    const PotentialSpec p = c.potential();
    const EvolutionState s0 = scenario_state(c, c.n);
    check_stability(c.integrator, s0.lattice(), k);
    VerificationReport rep;

    std::vector<CommutingResult> results;
    for (Route r : routes_of(c)) {
        try {
            results.push_back(commuting_discrepancy(s0, p, c.integrator, r, k));
        } catch (const Error& e) {
            rep.add({fmt::format("commuting_{}", route_name(r)), std::numeric_limits<double>::quiet_NaN(), 0.0,
                     false, e.what()});
        }
    }
    const auto path1 = trajectory(s0, make_rhs(Equation::Original, p, k, c.integrator.density_floor), c.integrator, k);
    RowStream rows(out, p, Equation::Original, k, c.integrator.density_floor);
    for (std::size_t i = 0; i < path1.size(); ++i) {
        double d = results.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
        for (const auto& r : results)
            if (i < r.density.size())
                d = std::max(d, r.density[i]);
        rows.push(path1[i], d);
        out.snapshot(path1[i], k);
    }
    rows.flush();

    for (Route r : routes_of(c)) {
        const StateBuilder build = [&c](int points) { return scenario_state(c, points); };
        rep.add_table(commuting_study(fmt::format("commuting_{}", route_name(r)), build, p, r,
                                      plan_of(c, c.verify_t_final, c.order_min, c.order_max), k));
    }
    return rep;
}

inline VerificationReport run_condition(const ScenarioConfig& c, OutputWriter& out) {
    const PhysicalConstants& k = c.constants;
    const PotentialSpec p = c.potential();
    const EvolutionState s0 = scenario_state(c, c.n);
    const HydroState st{decompose(s0.wave, k, c.integrator.density_floor), s0.gauge};
    out.row(observe(s0, k));
    VerificationReport rep;
    const Lattice& lat = s0.lattice();
    const double calibrated = calibrate_condition_tolerance(lat, k);
    const double tol = c.tol_condition >= 0.0 ? c.tol_condition : calibrated;
    rep.calibrate("condition_tolerance", calibrated);
    if (!p.is_dg())
        verify_dependencies(p, st, k);
    const ConditionReport cr = check_condition(p, st, tol, k);
    if (cr.vacuous) {
        rep.add({"condition", 0.0, tol, true, "one dimension: no axis pairs, condition holds trivially"});
        return rep;
    }
    rep.add_check("condition", cr.max_abs, tol, "max |d_i c_j - d_j c_i|, c = (1/rho) dU/d(d S)");
    std::string csv = "# schema=1\nsite_index,x,y,residual_01\n";
    for (std::size_t s = 0; s < lat.size(); ++s)
        csv += fmt::format("{},{:.17g},{:.17g},{:.17g}\n", s, lat.coordinate(s, 0), lat.coordinate(s, 1),
                           cr.residuals.front().residual[s]);
    out.write_text("condition_residual.csv", csv);
    return rep;
}

inline VerificationReport run_selfconsistent(const ScenarioConfig& c, OutputWriter& out) {
    const PhysicalConstants& k = c.constants;
    const PotentialSpec p = c.potential();
    const EvolutionState s0 = scenario_state(c, c.n);
    const SelfConsistentRun run = run_selfconsistent_1d(s0, p, c.integrator, k);
    RowStream rows(out, p, Equation::Original, k, c.integrator.density_floor);
    for (const auto& s : run.snapshots) {
        const MaxwellResidual m = maxwell_residual(s, s, p, k, CurrentChoice::Full, true);
        rows.push(s, std::numeric_limits<double>::quiet_NaN(), l2_norm(m.gauss));
        out.snapshot(s, k);
    }
    rows.flush();
    VerificationReport rep;
    rep.add_check("selfconsistent.gauss_max", *std::max_element(run.gauss_residual.begin(), run.gauss_residual.end()),
                  c.tol_gauss, "max |Gauss residual| over every step");
    double drift = 0.0;
    for (double q : run.charge)
        drift = std::max(drift, std::abs(q - run.charge.front()) / std::abs(run.charge.front()));
    rep.add_check("selfconsistent.charge_drift", drift, c.tol_drift, "max relative |Q - Q0| over every step");
    return rep;
}

inline VerificationReport run_full_verify(const ScenarioConfig& c, OutputWriter& out) {
    const PhysicalConstants& k = c.constants;
    const PotentialSpec p = c.potential();
    const StateBuilder build = [&c](int points) { return scenario_state(c, points); };
    VerificationReport rep;
    auto guarded = [&rep](const std::string& name, const auto& fn) {
        try {
            fn();
        } catch (const Error& e) {
            rep.add({name, std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what()});
        }
    };

    // main evolution with observables: original equation, route-A path alongside
    guarded("evolution", [&] {
        const EvolutionState s0 = scenario_state(c, c.n);
        check_stability(c.integrator, s0.lattice(), k);
        const auto path1 = trajectory(s0, make_rhs(Equation::Original, p, k), c.integrator, k);
        CommutingResult cr;
        bool have_cr = false;
        try {
            cr = commuting_discrepancy(s0, p, c.integrator, Route::A, k);
            have_cr = true;
        } catch (const Error& e) {
            rep.add({"evolution.commuting_A", std::numeric_limits<double>::quiet_NaN(), 0.0, false, e.what()});
        }
        RowStream rows(out, p, Equation::Original, k, c.integrator.density_floor);
        for (std::size_t i = 0; i < path1.size(); ++i) {
            rows.push(path1[i], have_cr && i < cr.density.size() ? cr.density[i]
                                                                  : std::numeric_limits<double>::quiet_NaN());
            out.snapshot(path1[i], k);
        }
        rows.flush();
        rep.merge(conservation_suite(path1, p, Equation::Original, k, c.tol_drift));
    });

    // unitarity of route A on random smooth states
    guarded("density_equivalence", [&] {
        const Lattice lat = c.lattice();
        double worst = 0.0;
        for (int t = 0; t < c.random_trials; ++t) {
            const HydroState st = random_smooth_state(lat, c.seed + static_cast<unsigned long>(t));
            const Generator g = build_generator(p, st, k);
            worst = std::max(worst, density_change(recompose(st.hydro, k), g, k));
        }
        rep.add_check("density_equivalence", worst, c.tol_density,
                      fmt::format("max over {} random smooth states", c.random_trials));
    });

    // closed forms against the numeric engine
    if (p.is_dg())
        guarded("oracle", [&] {
            const Lattice lat = c.lattice();
            const int trials = std::min(c.random_trials, 5);
            double worst = 0.0;
            for (int t = 0; t < trials; ++t) {
                const HydroState st = random_smooth_state(lat, c.seed + 1000 + static_cast<unsigned long>(t), true);
                for (const auto& o : derivative_oracle(p, st, k, 1e-6))
                    worst = std::max(worst, o.relative);
            }
            rep.add_check("oracle.functional_derivatives", worst, c.tol_oracle,
                          fmt::format("closed form vs numeric, every slot, {} random states", trials));
        });

    // integrability condition
    guarded("condition", [&] {
        const EvolutionState s0 = scenario_state(c, c.n);
        const HydroState st{decompose(s0.wave, k), s0.gauge};
        const double tol = c.tol_condition >= 0.0 ? c.tol_condition : calibrate_condition_tolerance(s0.lattice(), k);
        const ConditionReport cr = check_condition(p, st, tol, k);
        if (cr.vacuous)
            rep.add({"condition", 0.0, tol, true, "one dimension: no axis pairs"});
        else
            rep.add_check("condition", cr.max_abs, tol, "integrability residual on the initial state");
    });

    // commuting diagram, both routes
    for (Route r : routes_of(c))
        rep.add_table(commuting_study(fmt::format("commuting_{}", route_name(r)), build, p, r,
                                      plan_of(c, c.verify_t_final, c.order_min, c.order_max), k));

    // continuity residual orders with the equation-appropriate current
    for (Equation eq : {Equation::Original, Equation::RouteA, Equation::RouteB})
        rep.add_table(continuity_study(fmt::format("continuity_{}", equation_name(eq)), build, p, eq,
                                       plan_of(c, 0.2 * c.verify_t_final, c.order_min), k));

    // field-strength invariance
    rep.add_table(f_invariance_study("f_invariance.electric", build, p, plan_of(c, c.verify_t_final, c.order_min),
                                     false, k));
    if (c.dim == 2)
        rep.add_table(f_invariance_study("f_invariance.magnetic", build, p, plan_of(c, c.verify_t_final, c.order_min),
                                         true, k));

    // linearization special point m nu^2 = 2 alpha hbar^2 / m
    if (p.is_dg()) {
        const double alpha_star = k.mass * k.mass * c.nu * c.nu / (2.0 * k.hbar * k.hbar);
        const PotentialSpec special = PotentialSpec::dg_gauged(c.nu, alpha_star);
        const RefinementTable wt =
            transformed_nonlinearity_study("special_point.w_tilde", build, special, plan_of(c, 0.0, c.order_min), k);
        rep.add_table(wt);
        if (!wt.levels.empty()) {
            const double cal = wt.levels.front().error / (wt.levels.front().h * wt.levels.front().h);
            rep.calibrate("special_point.w_tilde_constant", cal);
            const double h = c.lattice().min_spacing();
            double at_n = std::numeric_limits<double>::quiet_NaN();
            for (std::size_t i = 0; i < wt.resolution.size(); ++i)
                if (wt.resolution[i] == c.n)
                    at_n = wt.levels[i].error;
            if (std::isfinite(at_n))
                rep.add_check("special_point.max_w_tilde", at_n, 2.0 * cal * h * h,
                              "2 x calibrated constant x dx^2 (constant from the coarsest level)");
        }
        for (Route r : routes_of(c))
            rep.add_table(commuting_study(fmt::format("special_point.free_{}", route_name(r)), build, special, r,
                                          plan_of(c, c.verify_t_final, c.order_min, c.order_max), k, true));
    }

    // electrostatic self-consistent mode
    if (c.dim == 1)
        guarded("selfconsistent", [&] {
            IntegratorConfig cfg = c.integrator;
            cfg.t_final = std::min(cfg.t_final, 200.0 * cfg.dt);
            const SelfConsistentRun run = run_selfconsistent_1d(scenario_state(c, c.n), p, cfg, k);
            rep.add_check("selfconsistent.gauss_max",
                          *std::max_element(run.gauss_residual.begin(), run.gauss_residual.end()), c.tol_gauss,
                          "max |Gauss residual| over every step");
            double drift = 0.0;
            for (double q : run.charge)
                drift = std::max(drift, std::abs(q - run.charge.front()) / std::abs(run.charge.front()));
            rep.add_check("selfconsistent.charge_drift", drift, c.tol_drift, "max relative |Q - Q0|");
        });
    return rep;
}

} // namespace detail

/// Runs the scenario, writes every artifact under `c.output_dir` and returns
/// the exit code. Errors raised before the run propagate; see run_guarded.
inline int run(const ScenarioConfig& c) {
    OutputWriter out(c.output_dir, c.snapshots);
    out.write_text("resolved_config.toml", c.echo());
    log_message(LogLevel::Info, fmt::format("mode {} -> {}", c.mode, c.output_dir));

    const bool evolves = c.mode.rfind("evolve-", 0) == 0 || c.mode == "selfconsistent-1d";
    if (evolves)
        check_stability(c.integrator, c.lattice(), c.constants);

    VerificationReport rep;
    if (c.mode == "evolve-original")
        rep = detail::run_evolution(c, Equation::Original, out);
    else if (c.mode == "evolve-transformed-A")
        rep = detail::run_evolution(c, Equation::RouteA, out);
    else if (c.mode == "evolve-transformed-B")
        rep = detail::run_evolution(c, Equation::RouteB, out);
    else if (c.mode == "commuting-diagram")
        rep = detail::run_commuting(c, out);
    else if (c.mode == "condition-check")
        rep = detail::run_condition(c, out);
    else if (c.mode == "selfconsistent-1d")
        rep = detail::run_selfconsistent(c, out);
    else
        rep = detail::run_full_verify(c, out);
    out.close();

    out.write_text("report.txt", rep.to_text());
    log_message(LogLevel::Info, fmt::format("{} check(s) failed", rep.failures()));
    if (log_level() == LogLevel::Debug)
        std::fputs(rep.to_text().c_str(), stderr);
    return rep.all_pass() ? ExitPass : ExitCheckFailure;
}

/// run() with errors mapped to exit codes: configuration and stability
/// problems → 2, runtime aborts → 3.
inline int run_guarded(const ScenarioConfig& c) {
    try {
        return run(c);
    } catch (const StabilityViolation& e) {
        log_message(LogLevel::Quiet, fmt::format("stability guard: {}", e.what()));
        return ExitUsage;
    } catch (const ParseError& e) {
        log_message(LogLevel::Quiet, fmt::format("config: {}", e.what()));
        return ExitUsage;
    } catch (const ValidationError& e) {
        log_message(LogLevel::Quiet, fmt::format("config: {}", e.what()));
        return ExitUsage;
    } catch (const Error& e) {
        log_message(LogLevel::Quiet, fmt::format("runtime abort ({}): {}", c.mode, e.what()));
        return ExitRuntime;
    } catch (const std::exception& e) {
        log_message(LogLevel::Quiet, fmt::format("runtime abort ({}): {}", c.mode, e.what()));
        return ExitRuntime;
    }
}

} // namespace gnls
