// simulate <config-path> [--mode M] [--out DIR] [--override key=value ...] [--stride K]
//
// Exit codes: 0 all checks pass, 1 check failure, 2 usage / configuration
// error (including the dt stability guard), 3 runtime abort.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gnls/scenario.hpp"

namespace {

std::string help_footer() {
    std::string s = "\nModes:\n";
    for (const auto& m : gnls::modes())
        s += fmt::format("  {:<22} {}\n", m.name, m.description);
    s += "\nInitial matter-field presets (initial.preset):\n";
    for (const auto& p : gnls::initial_presets())
        s += fmt::format("  {:<22} {}\n", p.name, p.description);
    s += "\nGauge-field presets (gauge.preset):\n";
    for (const auto& p : gnls::gauge_presets())
        s += fmt::format("  {:<22} {}\n", p.name, p.description);
    s += "\nConfiguration keys and defaults:\n";
    for (const auto& k : gnls::known_keys())
        s += fmt::format("  {:<30} {:<20} {}\n", k.key, k.fallback, k.help);
    s += "\nEnvironment: GNLS_LOG=quiet|info|debug sets log verbosity (default info).\n";
    s += "Exit codes: 0 pass, 1 check failure, 2 usage/config error, 3 runtime abort.\n";
    return s;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lattice gauged NLSE laboratory: evolution, linearizing transformations and checks"};
    app.footer(help_footer());
    std::string config_path;
    std::string mode;
    std::string out_dir;
    std::vector<std::string> overrides;
    int stride = 0;
    app.add_option("config", config_path, "scenario configuration file")->required();
    app.add_option("--mode", mode, "override the run mode");
    app.add_option("--out", out_dir, "override the output directory");
    app.add_option("--override", overrides, "key=value, repeatable (e.g. integrator.dt=1e-4)");
    app.add_option("--stride", stride, "steps between snapshots and observable rows")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gnls::ExitUsage;
    }

    if (!mode.empty())
        overrides.push_back("mode=" + mode);
    if (!out_dir.empty())
        overrides.push_back("output.dir=" + out_dir);
    if (stride > 0)
        overrides.push_back("integrator.stride=" + std::to_string(stride));

    gnls::ScenarioConfig cfg;
    try {
        cfg = gnls::load_config(config_path, overrides);
    } catch (const gnls::Error& e) {
        std::cerr << "simulate: " << config_path << ": " << e.what() << "\n";
        return gnls::ExitUsage;
    }
    return gnls::run_guarded(cfg);
}
