#include "exectraj/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Optimal execution trajectories under geometric Brownian prices"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir;
    std::string trajectory;

    auto add = [&](const char* name, const char* help) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "run configuration (INI)")->required();
        sub->add_option("--out", out_dir, "output directory, overrides [output] dir");
        return sub;
    };
    add("solve", "solve for the optimal trajectory, write trajectory and report");
    auto* evaluate = add("evaluate", "evaluate the objective of a trajectory file");
    evaluate->add_option("--trajectory", trajectory, "trajectory file (default: <out>/trajectory.csv)");
    add("simulate", "Monte Carlo check of the moment formulas and the product identity");
    add("compare", "compare against the arithmetic-Brownian benchmark and the uniform schedule");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exectraj::cli::kExitConfig;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    std::optional<std::filesystem::path> out;
    if (!out_dir.empty()) out = out_dir;
    std::optional<std::filesystem::path> traj;
    if (!trajectory.empty()) traj = trajectory;
    return exectraj::cli::run_command(command, config, out, traj, std::cout, std::cerr);
}
