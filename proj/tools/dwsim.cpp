#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"

#include "dwsim/commands.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"dwsim: lin-theta-lin double-well lattice simulator"};
    app.set_version_flag("--version", std::string(DWSIM_VERSION));
    std::string command;
    std::string config;
    int jobs = 1;
    std::string out_dir;
    std::uint64_t seed = 0;
    app.add_option("command", command, "one of: potentials bands wannier rabi prepare sweep ensemble fit")
        ->required()
        ->check(CLI::IsMember(dwsim::command_names()));
    app.add_option("--config", config, "INI config file")->required();
    app.add_option("--jobs", jobs, "worker threads for sweeps, bands and ensembles")
        ->check(CLI::Range(1, 1024));
    app.add_option("--out", out_dir, "output directory (overrides [output] directory)");
    auto* seed_opt = app.add_option("--seed", seed, "ensemble seed (overrides [ensemble] seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        auto rc = dwsim::parse_config(config);
        if (!out_dir.empty()) {
            rc.output.directory = out_dir;
            rc.resolved["output"]["directory"] = out_dir;
        }
        if (*seed_opt) {
            if (!rc.ensemble)
                throw dwsim::ConfigError("--seed given but the config has no [ensemble] section");
            rc.ensemble->spec.seed = seed;
            rc.resolved["ensemble"]["seed"] = std::to_string(seed);
            std::erase(rc.defaults_applied, std::string("ensemble.seed"));
        }
        const auto bundle = dwsim::run_command(command, rc, jobs);
        for (const auto& p : bundle.write(rc.output.directory))
            std::printf("wrote %s\n", p.string().c_str());
        return 0;
    } catch (const dwsim::ConfigError& e) {
        std::fprintf(stderr, "dwsim: config error: %s\n", e.what());
        return 2;
    } catch (const dwsim::NumericalError& e) {
        std::fprintf(stderr, "dwsim: numerical failure: %s\n", e.what());
        return 3;
    }
}
