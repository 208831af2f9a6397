// experiment.hpp: JSON experiment configuration and run orchestration.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctoqw/limit_theorems.hpp"
#include "ctoqw/linalg.hpp"
#include "ctoqw/walk_model.hpp"

namespace ctoqw {

inline constexpr const char* kVersion = "0.1.0";

enum class ExperimentKind { validate, master, sample, clt, ldp, reproduce_example };

std::string kind_name(ExperimentKind kind);
std::optional<ExperimentKind> kind_from_name(const std::string& name);

// All validation problems found in a configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors);
    const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

struct LdpRegionConfig {
    RateRegion region;
    std::vector<double> times;
    std::size_t samples = 0;
};

// Every field is resolved: defaults are filled in by parse_config so the
// echo in the manifest is complete.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::validate;
    int example = 0; // built-in model index, 0 when matrices are user supplied
    std::optional<WalkModel> model;
    bool model_from_drift = false; // user model given through D0 rather than H
    std::vector<ExperimentKind> targets; // reproduce-example only

    double t_max = 0.0;
    double dt = 0.0;
    std::vector<double> times;       // master snapshots
    std::size_t samples = 0;         // trajectories
    std::vector<double> checkpoints; // ensemble checkpoints
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::size_t export_paths = 0;

    Site initial_site;
    CMatrix initial_state;

    std::vector<std::vector<double>> u_grid;
    std::vector<std::vector<double>> x_grid;
    std::optional<LdpRegionConfig> ldp;

    std::filesystem::path output_dir = "out";
};

struct ParseOverrides {
    std::optional<ExperimentKind> kind;
    std::optional<int> example;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::filesystem::path> output_dir;
};

// Throws ConfigError listing every problem found.
ExperimentConfig parse_config(const std::string& text, const ParseOverrides& overrides = {});

// Resolved configuration as JSON text (re-parsable).
std::string config_echo(const ExperimentConfig& config);

struct OutputFile {
    std::string name;
    std::string sha256;
    std::uintmax_t bytes = 0;
};

struct RunManifest {
    std::string version;
    std::string config;
    double wall_clock_seconds = 0.0;
    std::vector<OutputFile> outputs;
    std::filesystem::path path; // manifest.json
};

// Writes the CSV outputs and manifest.json into config.output_dir. On failure
// files written by this run are removed and the error is rethrown with the
// failing module named.
RunManifest run_experiment(const ExperimentConfig& config);

std::string sha256_file(const std::filesystem::path& path);

} // namespace ctoqw
