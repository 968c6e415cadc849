#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "gnls/scenario.hpp"

using namespace gnls;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("gnls_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
} // namespace

TEST(Config, MinimalUsesDefaults) {
    const ScenarioConfig c = parse_config("mode = \"evolve-original\"\n");
    EXPECT_EQ(c.n, 128);
    EXPECT_DOUBLE_EQ(c.integrator.dt, 0.0002);
    EXPECT_DOUBLE_EQ(c.integrator.stability_factor, 0.2);
    EXPECT_EQ(c.refinement_levels(), (std::vector<int>{32, 64, 128}));
    EXPECT_NE(c.echo().find("[integrator]\n"), std::string::npos);
}

TEST(Config, SectionsCommentsAndLists) {
    const ScenarioConfig c = parse_config("# top\n"
                                          "mode = \"commuting-diagram\"   # inline\n"
                                          "[potential]\n"
                                          "nu = 0.1\n"
                                          "alpha = 5e-3\n"
                                          "[verify]\n"
                                          "levels = [64, 128, 256]\n"
                                          "route = A\n");
    EXPECT_DOUBLE_EQ(c.nu, 0.1);
    EXPECT_DOUBLE_EQ(c.alpha, 0.005);
    EXPECT_EQ(c.levels, (std::vector<int>{64, 128, 256}));
    EXPECT_EQ(c.route, "A");
}

TEST(Config, OverridesWin) {
    const ScenarioConfig c =
        parse_config("[integrator]\ndt = 0.0001\n", {"integrator.dt=0.00005", "output.dir=elsewhere"});
    EXPECT_DOUBLE_EQ(c.integrator.dt, 0.00005);
    EXPECT_EQ(c.output_dir, "elsewhere");
    EXPECT_THROW(parse_config("", {"no_equals_sign"}), Error);
}

TEST(Config, NegativeTimeStepNamesField) {
    try {
        parse_config("[integrator]\ndt = -0.001\n");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "integrator.dt");
    }
}

TEST(Config, UnknownKeySuggestsNearest) {
    try {
        parse_config("[integrtor]\ndt = 0.001\n");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("integrator.dt"), std::string::npos);
    }
    EXPECT_EQ(nearest_key("lattice.nn"), "lattice.n");
}

TEST(Config, ParseErrorsCarryLine) {
    try {
        parse_config("mode = \"evolve-original\"\n\n[lattice]\nn = twelve\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 4);
    }
    try {
        parse_config("[lattice\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 1);
    }
}

TEST(Config, RejectsBadChoices) {
    EXPECT_THROW(parse_config("mode = \"dance\"\n"), ValidationError);
    EXPECT_THROW(parse_config("[initial]\npreset = \"square\"\n"), ValidationError);
    EXPECT_THROW(parse_config("[lattice]\ndim = 3\n"), ValidationError);
    EXPECT_THROW(parse_config("[constants]\nmass = 0\n"), ValidationError);
    EXPECT_THROW(parse_config("mode = \"selfconsistent-1d\"\n[lattice]\ndim = 2\n"), ValidationError);
}

TEST(Config, ShippedScenariosParse) {
    for (const auto& e : fs::directory_iterator(GNLS_SCENARIO_DIR)) {
        if (e.path().extension() == ".toml") {
            EXPECT_NO_THROW(load_config(e.path())) << e.path();
        }
    }
    EXPECT_THROW(load_config("/nonexistent/file.toml"), ValidationError);
}

TEST(Run, StabilityGuardExitsTwo) {
    const fs::path dir = scratch("stability");
    const ScenarioConfig c = parse_config("[integrator]\ndt = 0.01\n", {"output.dir=" + dir.string()});
    EXPECT_EQ(run_guarded(c), ExitUsage);
}

TEST(Run, EvolutionWritesArtifacts) {
    const fs::path dir = scratch("evolve");
    const ScenarioConfig c = parse_config("[lattice]\nn = 32\n[integrator]\ndt = 0.001\nt_final = 0.02\nstride = 10\n",
                                          {"output.dir=" + dir.string()});
    EXPECT_EQ(run_guarded(c), ExitPass);
    const std::string obs = slurp(dir / "observables.csv");
    EXPECT_EQ(obs.rfind("# schema=1\nstep,time,total_charge,l2_norm_psi,max_density,min_density,"
                        "continuity_residual_l2,maxwell_residual_l2,commuting_discrepancy\n",
                        0),
              0u);
    EXPECT_TRUE(fs::exists(dir / "snapshot_0.csv"));
    EXPECT_TRUE(fs::exists(dir / "snapshot_20.csv"));
    EXPECT_EQ(slurp(dir / "snapshot_0.csv").substr(0, 55), "# schema=1\nsite_index,x,rho,phase,re_psi,im_psi,a0,a_x\n");
    EXPECT_NE(slurp(dir / "report.txt").find("status: PASS"), std::string::npos);
    EXPECT_NE(slurp(dir / "resolved_config.toml").find("dt = "), std::string::npos);
}

TEST(Run, CounterexampleFailsCondition) {
    const fs::path dir = scratch("counterexample");
    const ScenarioConfig c =
        load_config(fs::path(GNLS_SCENARIO_DIR) / "counterexample_condition.toml", {"output.dir=" + dir.string()});
    EXPECT_EQ(run_guarded(c), ExitCheckFailure);
    EXPECT_NE(slurp(dir / "report.txt").find("status: FAIL"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "condition_residual.csv"));
}

TEST(Run, DGConditionPasses) {
    const fs::path dir = scratch("condition");
    const ScenarioConfig c =
        load_config(fs::path(GNLS_SCENARIO_DIR) / "dg_condition_2d.toml", {"output.dir=" + dir.string()});
    EXPECT_EQ(run_guarded(c), ExitPass);
}

TEST(Logging, LevelFromEnvironment) {
    ::setenv("GNLS_LOG", "debug", 1);
    EXPECT_EQ(log_level(), LogLevel::Debug);
    ::setenv("GNLS_LOG", "quiet", 1);
    EXPECT_EQ(log_level(), LogLevel::Quiet);
    ::unsetenv("GNLS_LOG");
    EXPECT_EQ(log_level(), LogLevel::Info);
}
