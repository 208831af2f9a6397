// ctoqw: command-line front end for the experiment harness.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "ctoqw/experiment.hpp"

namespace {

struct Options {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    int example = 0;
};

std::string slurp(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Continuous-time open quantum walks: master equation, trajectories, CLT and LDP"};
    app.set_version_flag("--version", ctoqw::kVersion);
    app.require_subcommand(1);

    Options opt;
    std::vector<std::pair<CLI::App*, ctoqw::ExperimentKind>> commands;
    const std::vector<std::pair<ctoqw::ExperimentKind, const char*>> kinds = {
        {ctoqw::ExperimentKind::validate, "Check the model and report stationary state and irreducibility"},
        {ctoqw::ExperimentKind::master, "Integrate the site-wise master equation"},
        {ctoqw::ExperimentKind::sample, "Sample quantum trajectories"},
        {ctoqw::ExperimentKind::clt, "Drift, Poisson solution and asymptotic covariance"},
        {ctoqw::ExperimentKind::ldp, "Leading eigenvalue curve and rate function"},
        {ctoqw::ExperimentKind::reproduce_example, "Run the built-in reference models"},
    };
    for (const auto& [kind, help] : kinds) {
        CLI::App* sub = app.add_subcommand(ctoqw::kind_name(kind), help);
        auto* cfg = sub->add_option("--config", opt.config, "JSON experiment configuration")->check(CLI::ExistingFile);
        if (kind == ctoqw::ExperimentKind::reproduce_example) {
            sub->add_option("example", opt.example, "Built-in example index (1, 2 or 3)")->check(CLI::Range(1, 3));
        } else {
            cfg->required();
        }
        sub->add_option("--out", opt.out, "Output directory");
        sub->add_option("--seed", opt.seed, "Root seed for the random streams");
        sub->add_option("--threads", opt.threads, "Worker threads (speed only)")->check(CLI::PositiveNumber);
        commands.emplace_back(sub, kind);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        ctoqw::ParseOverrides ov;
        std::string text = "{}";
        for (const auto& [sub, kind] : commands) {
            if (!sub->parsed()) continue;
            ov.kind = kind;
            if (!opt.config.empty()) text = slurp(opt.config);
            if (kind == ctoqw::ExperimentKind::reproduce_example && sub->count("example")) ov.example = opt.example;
            if (sub->count("--out")) ov.output_dir = opt.out;
            if (sub->count("--seed")) ov.seed = opt.seed;
            if (sub->count("--threads")) ov.threads = opt.threads;
        }
        const ctoqw::ExperimentConfig config = ctoqw::parse_config(text, ov);
        const ctoqw::RunManifest manifest = ctoqw::run_experiment(config);
        for (const auto& f : manifest.outputs) {
            std::cout << f.sha256 << "  " << (config.output_dir / f.name).string() << "\n";
        }
        std::cout << "manifest: " << manifest.path.string() << " (" << manifest.wall_clock_seconds << " s)\n";
    } catch (const ctoqw::ConfigError& e) {
        std::cerr << "ctoqw: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ctoqw: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
