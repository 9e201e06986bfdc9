#pragma once

#include "exectraj/model.hpp"
#include "exectraj/perturbation.hpp"
#include "exectraj/simulate.hpp"
#include "exectraj/variational.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace exectraj::cli {

enum class OutputFormat { csv, json };
enum class TrajectorySource { uniform, solved };

struct SimSection {
    SimConfig sim;
    TrajectorySource trajectory = TrajectorySource::uniform;
    std::vector<std::size_t> refinements{200, 400, 800};
    std::size_t identity_paths = 100;
};

struct OutputSection {
    std::filesystem::path dir = "out";
    OutputFormat format = OutputFormat::csv;
    bool record_timing = false;  ///< wall time breaks byte-identical reruns
};

/// Everything one command needs. Parsed from an INI-style file with the
/// sections [market], [impact], [problem], [solver], [sim], [output]; unknown
/// sections and keys are rejected.
struct RunConfig {
    MarketParams market;
    ImpactSpec impact;
    ExecutionProblem problem;
    ShootingConfig solver;
    PerturbationConfig perturbation;
    std::optional<SimSection> sim;
    OutputSection output;
};

RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

/// f1 -> f1 + f2 pipeline shared by the commands.
struct PipelineResult {
    Solution f1;
    std::optional<PerturbationSolution> f2;
    Trajectory final_trajectory() const { return f2 ? f2->f : f1.trajectory; }
    bool converged() const { return f1.report.converged && (!f2 || f2->report.converged); }
};

PipelineResult run_pipeline(const RunConfig& cfg);

/// Each command writes its files under cfg.output.dir (created if needed),
/// prints a short summary to `out`, and returns an exit code. Library errors
/// propagate as exceptions; run_command maps them to exit codes.
int cmd_solve(const RunConfig& cfg, std::ostream& out);
int cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& trajectory_file, std::ostream& out);
int cmd_simulate(const RunConfig& cfg, std::ostream& out);
int cmd_compare(const RunConfig& cfg, std::ostream& out);

/// Trajectory file with header t,f,c[,f1,f2] (CSV) or arrays t, f, c (JSON).
Trajectory read_trajectory(const std::filesystem::path& path);

/// Full command dispatch: loads the config, applies --out, runs the command,
/// and converts exceptions into a single-line diagnostic on `err`.
int run_command(const std::string& command, const std::filesystem::path& config_path,
                const std::optional<std::filesystem::path>& out_dir,
                const std::optional<std::filesystem::path>& trajectory_file, std::ostream& out,
                std::ostream& err);

}  // namespace exectraj::cli
