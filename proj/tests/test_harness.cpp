#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "ctoqw/builtin_models.hpp"
#include "ctoqw/csv.hpp"
#include "ctoqw/experiment.hpp"

using namespace ctoqw;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("ctoqw_harness_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(CTOQW_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kBirthChain = R"({
  "kind": "master",
  "model": {"d": 1, "H": [[[0, 0]]], "jumps": [[[[1, 0]]], [[[0, 0]]]]},
  "t_max": 2,
  "dt": 0.001,
  "initial": {"site": [0], "state": [[[1, 0]]]}
})";

const char* kExampleTwoByDrift = R"({
  "kind": "validate",
  "model": {
    "d": 1,
    "D0": [[[-0.375, 0], [0, 0]], [[0, 0], [-0.25, 0]]],
    "jumps": [
      [[[0, 0], [0.5, 0]], [[0.5, 0], [0, 0]]],
      [[[0, 0], [0.5, 0]], [[0.7071067811865476, 0], [0, 0]]]
    ]
  }
})";

} // namespace

TEST_CASE("minimal configuration with a built-in model")
{
    const ExperimentConfig c = parse_config(R"({"kind": "validate", "model": {"example": 1}})");
    CHECK(c.kind == ExperimentKind::validate);
    REQUIRE(c.model);
    CHECK(c.example == 1);
    CHECK(c.model->lindblad_residual() < 1e-15);
}

TEST_CASE("explicit matrices with complex entries")
{
    const ExperimentConfig c = parse_config(kExampleTwoByDrift);
    REQUIRE(c.model);
    const WalkModel ref = builtin::example(2);
    CHECK((c.model->d0() - ref.d0()).norm() < 1e-15);
    for (int r = 0; r < 2; ++r) CHECK((c.model->jump(r) - ref.jump(r)).norm() < 1e-15);
    CHECK(c.model_from_drift);
}

TEST_CASE("reproduce-example selects the built-in matrices")
{
    ParseOverrides ov;
    ov.kind = ExperimentKind::reproduce_example;
    ov.example = 2;
    const ExperimentConfig c = parse_config("{}", ov);
    REQUIRE(c.model);
    const WalkModel ref = builtin::example(2);
    CHECK((c.model->d0() - ref.d0()).norm() == 0.0);
    CHECK((c.model->jump(1) - ref.jump(1)).norm() == 0.0);
    CHECK(c.targets.size() == 4);
    CHECK_FALSE(c.times.empty());
    CHECK(c.u_grid.size() == 101);
    CHECK(c.x_grid.size() == 101);
    CHECK(c.x_grid.front()[0] == doctest::Approx(-1.1));
}

TEST_CASE("validation errors are aggregated and name the field")
{
    const char* bad = R"({
      "kind": "master",
      "model": {"d": 1, "H": [[[0, 0], [0, 0]], [[0, 0], [0, 0]]],
                "jumps": [[[[1, 0]]], [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]]},
      "t_max": -1,
      "colour": "blue"
    })";
    try {
        parse_config(bad);
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(e.errors().size() >= 3);
        const std::string all = e.what();
        CHECK(all.find("model.jumps[0] (D_1)") != std::string::npos);
        CHECK(all.find("t_max") != std::string::npos);
        CHECK(all.find("colour") != std::string::npos);
    }
}

TEST_CASE("single shape error")
{
    const char* bad = R"({"kind": "validate",
      "model": {"d": 1, "H": [[[0, 0]]], "jumps": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]], [[[0, 0]]]]}})";
    try {
        parse_config(bad);
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        REQUIRE(e.errors().size() == 1);
        CHECK(e.errors()[0].find("D_1") != std::string::npos);
    }
}

TEST_CASE("other configuration errors")
{
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"kind": "dance", "model": {"example": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"model": {"example": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"kind": "master", "model": {"example": 1}})"), ConfigError); // no t_max
    CHECK_THROWS_AS(parse_config(R"({"kind": "sample", "model": {"example": 1}, "t_max": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"kind": "validate", "model": {"example": 7}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"kind": "reproduce-example", "example": 4})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"kind": "validate", "model": {"d": 1, "H": [[1]], "jumps": []}})"),
                    ConfigError);
    ParseOverrides ov;
    ov.kind = ExperimentKind::clt;
    CHECK_THROWS_AS(parse_config(R"({"kind": "ldp", "model": {"example": 1}})", ov), ConfigError);
}

TEST_CASE("configuration echo is complete and re-parsable")
{
    const ExperimentConfig a = parse_config(kBirthChain);
    const std::string echo = config_echo(a);
    const ExperimentConfig b = parse_config(echo);
    CHECK(config_echo(b) == echo);
    CHECK(echo.find("\"dt\"") != std::string::npos);
    CHECK(echo.find("\"seed\"") != std::string::npos);
    CHECK(echo.find("\"times\"") != std::string::npos);
}

TEST_CASE("clt reproduction of the second example")
{
    ParseOverrides ov;
    ov.kind = ExperimentKind::reproduce_example;
    ov.example = 2;
    ov.output_dir = scratch("clt2");
    ExperimentConfig c = parse_config(R"({"targets": ["clt"]})", ov);
    const RunManifest man = run_experiment(c);
    const Table t = read_csv(c.output_dir / "clt_summary.csv");
    REQUIRE(t.header[0] == "m_1");
    REQUIRE(t.header[1] == "V_1_1");
    CHECK(std::abs(t.rows[0][0] + 0.1) < 1e-10);
    CHECK(std::abs(t.rows[0][1] - 0.584) < 1e-10);
    CHECK(fs::exists(man.path));
    for (const auto& f : man.outputs) CHECK(sha256_file(c.output_dir / f.name) == f.sha256);
    const std::string manifest = slurp(man.path);
    CHECK(manifest.find("\"sha256\"") != std::string::npos);
    CHECK(manifest.find("\"wall_clock_seconds\"") != std::string::npos);
    CHECK(manifest.find(kVersion) != std::string::npos);
}

TEST_CASE("master run of the pure birth chain")
{
    ParseOverrides ov;
    ov.output_dir = scratch("birth");
    const ExperimentConfig c = parse_config(kBirthChain, ov);
    run_experiment(c);
    const Table t = read_csv(c.output_dir / "distribution.csv");
    REQUIRE(t.header == std::vector<std::string>{"t", "i_1", "weight"});
    double tv = 0.0, covered = 0.0;
    for (const auto& row : t.rows) {
        CHECK(row[0] == 2.0);
        const int k = static_cast<int>(row[1]);
        const double p = std::exp(-2.0 + k * std::log(2.0) - std::lgamma(k + 1.0));
        CHECK(std::abs(row[2] - p) <= 1e-6);
        tv += std::abs(row[2] - p);
        covered += p;
    }
    CHECK(0.5 * (tv + (1.0 - covered)) <= 1e-6);
}

TEST_CASE("failed runs remove their outputs")
{
    const char* reducible = R"({
      "kind": "clt",
      "model": {"d": 1, "H": [[[0.3, 0], [0, 0]], [[0, 0], [-0.2, 0]]],
                "jumps": [[[[0.8, 0], [0, 0]], [[0, 0], [0.3, 0]]],
                          [[[0.4, 0], [0, 0]], [[0, 0], [0.9, 0]]]]}
    })";
    ParseOverrides ov;
    ov.output_dir = scratch("reducible");
    const ExperimentConfig c = parse_config(reducible, ov);
    try {
        run_experiment(c);
        FAIL("expected a failure");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("limit-theorems") != std::string::npos);
    }
    CHECK_FALSE(fs::exists(c.output_dir));
}

TEST_CASE("command line")
{
    const fs::path dir = scratch("cli");
    fs::create_directories(dir);
    const fs::path log = dir / "log.txt";

    // Lindblad identity violated: D0 = -I/2 with jumps of the second example.
    std::ofstream(dir / "bad.json") << R"({"model": {"d": 1,
        "D0": [[[-0.5, 0], [0, 0]], [[0, 0], [-0.5, 0]]],
        "jumps": [[[[0, 0], [0.5, 0]], [[0.5, 0], [0, 0]]],
                  [[[0, 0], [0.5, 0]], [[0.7071067811865476, 0], [0, 0]]]]}})";
    CHECK(run_cli("validate --config " + (dir / "bad.json").string() + " --out " + (dir / "bad").string(), log) != 0);
    CHECK(slurp(log).find("residual") != std::string::npos);

    std::ofstream(dir / "good.json") << kExampleTwoByDrift;
    CHECK(run_cli("validate --config " + (dir / "good.json").string() + " --out " + (dir / "good").string(), log) == 0);
    const Table v = read_csv(dir / "good" / "validation.csv");
    CHECK(v.rows[0][3] == 1.0); // unique stationary state
    CHECK(v.rows[0][6] == 1.0); // irreducible

    CHECK(run_cli("master", log) != 0);
    CHECK(run_cli("reproduce-example 9", log) != 0);
    CHECK(run_cli("", log) != 0);

    // Thread count never changes the data.
    std::ofstream(dir / "sample.json") << R"({"model": {"example": 2}, "t_max": 6, "samples": 500,
        "checkpoints": [2, 6], "export_paths": 2})";
    const std::string base = "sample --config " + (dir / "sample.json").string() + " --seed 5";
    REQUIRE(run_cli(base + " --threads 1 --out " + (dir / "s1").string(), log) == 0);
    REQUIRE(run_cli(base + " --threads 3 --out " + (dir / "s3").string(), log) == 0);
    for (const char* f : {"ensemble_histogram.csv", "ensemble_moments.csv", "occupation_average.csv", "paths.csv"}) {
        CHECK(slurp(dir / "s1" / f) == slurp(dir / "s3" / f));
        CHECK(!slurp(dir / "s1" / f).empty());
    }
    fs::remove_all(dir.parent_path());
}
