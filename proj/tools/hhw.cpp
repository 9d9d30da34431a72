#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hhw/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"hhw: simulate and check Hodgkin-Huxley-Wilson neuron networks"};
    app.require_subcommand(1);
    app.fallthrough();

    hhw::CommonOptions opt;
    std::uint64_t seed = 0;
    app.add_flag("--quiet,-q", opt.quiet, "Only print errors");
    auto* seed_opt = app.add_option("--seed", seed, "Override the random initial-state seed");

    std::string config;
    std::string out_dir;
    int seeds = 0;
    double rate_scale = 1.0;
    unsigned jobs = 0;

    auto* simulate = app.add_subcommand("simulate", "Integrate a scenario and write its artifacts");
    simulate->add_option("config", config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    auto* sim_out = simulate->add_option("--out", out_dir, "Output directory (overrides output_dir)");

    auto* bounds = app.add_subcommand("bounds", "Print the theoretical constants for a scenario");
    bounds->add_option("config", config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    auto* bounds_out = bounds->add_option("--out", out_dir, "Also write bounds.json to this directory");

    auto* verify = app.add_subcommand("verify", "Simulate and check the guaranteed bounds");
    verify->add_option("config", config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
    auto* seeds_opt = verify->add_option("--seeds", seeds, "Number of random initial states")->check(CLI::PositiveNumber);
    verify->add_option("--debug-rate-scale", rate_scale, "Multiply the envelope rate (testing only)");

    auto* sweep = app.add_subcommand("sweep", "Run a parameter sweep");
    sweep->add_option("config", config, "Sweep config (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--jobs,-j", jobs, "Concurrent runs (default: logical CPUs)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : hhw::exit_config_error;
    }
    if (*seed_opt)
        opt.seed = seed;

    auto dir = [&](CLI::Option* o) {
        return *o ? std::optional<std::filesystem::path>(out_dir) : std::nullopt;
    };
    if (*simulate)
        return hhw::cmd_simulate(config, dir(sim_out), opt);
    if (*bounds)
        return hhw::cmd_bounds(config, dir(bounds_out), opt);
    if (*verify)
        return hhw::cmd_verify(config, *seeds_opt ? std::optional<int>(seeds) : std::nullopt, rate_scale, opt);
    return hhw::cmd_sweep(config, jobs, opt);
}
