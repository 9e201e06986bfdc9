#include "exectraj/cli.hpp"

#include "exectraj/baseline.hpp"
#include "exectraj/errors.hpp"
#include "exectraj/moments.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace exectraj::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create output directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::io, "write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Column table written as CSV (17 significant digits) or as a JSON object of
/// arrays, depending on the configured format. Returns the file name used.
fs::path write_table(const OutputSection& out, const std::string& stem, const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& cols) {
    const std::size_t rows = cols.empty() ? 0 : cols.front().size();
    if (out.format == OutputFormat::csv) {
        std::string text;
        for (std::size_t k = 0; k < names.size(); ++k) text += (k ? "," : "") + names[k];
        text += "\n";
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t k = 0; k < cols.size(); ++k) text += (k ? "," : "") + fmt17(cols[k][i]);
            text += "\n";
        }
        const fs::path p = out.dir / (stem + ".csv");
        write_text(p, text);
        return p;
    }
    json j = json::object();
    for (std::size_t k = 0; k < names.size(); ++k) j[names[k]] = cols[k];
    const fs::path p = out.dir / (stem + ".json");
    write_json(p, j);
    return p;
}

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

json report_json(const SolverReport& r) {
    json j;
    j["converged"] = r.converged;
    j["iterations"] = r.iterations;
    j["objective"] = r.objective;
    j["expected_shortfall"] = r.expected_shortfall;
    j["variance_term"] = r.variance_term;
    j["residual_sup"] = r.residual_sup;
    j["boundary_miss"] = r.boundary_miss;
    j["gradient_norm"] = r.gradient_norm;
    j["thm2_residual_sup"] = r.thm2_residual_sup;
    j["initial_slope"] = r.initial_slope;
    j["rates_positive"] = r.rates_positive;
    j["dominates_f1"] = r.dominates_f1;
    j["message"] = r.message;
    return j;
}

json problem_json(const RunConfig& cfg) {
    json j;
    j["K"] = cfg.problem.K;
    j["T"] = cfg.problem.T;
    j["lambda"] = cfg.problem.lambda;
    j["s"] = cfg.market.s;
    j["sigma"] = cfg.market.sigma;
    j["alpha"] = cfg.impact.alpha();
    return j;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// z-score of a Monte Carlo estimate against its target; a zero standard
/// error (deterministic price) demands agreement to rounding.
double z_score(const Estimate& e, double target) {
    const double diff = e.value - target;
    if (e.se > 0.0) return diff / e.se;
    return std::abs(diff) <= 1e-9 * std::max(1.0, std::abs(target)) ? 0.0
                                                                     : std::numeric_limits<double>::infinity();
}

double json_number(double x) { return std::isfinite(x) ? x : std::numeric_limits<double>::max(); }

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, sep)) {
        while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.pop_back();
        while (!item.empty() && item.front() == ' ') item.erase(item.begin());
        out.push_back(item);
    }
    return out;
}

[[noreturn]] void schema_error(const fs::path& path, const std::string& msg) {
    throw Error(ErrorCode::config, "trajectory file " + path.string() + ": " + msg);
}

Trajectory trajectory_for_sim(const RunConfig& cfg, const SimSection& sim) {
    if (sim.trajectory == TrajectorySource::uniform)
        return Trajectory::uniform(cfg.problem.K, cfg.problem.T, sim.sim.n_steps);
    return run_pipeline(cfg).final_trajectory();
}

}  // namespace

// ---------------------------------------------------------------------------

PipelineResult run_pipeline(const RunConfig& cfg) {
    PipelineResult out{solve_f1(cfg.impact, cfg.market, cfg.problem, cfg.solver), std::nullopt};
    out.f2 = solve_f2(cfg.impact, cfg.market, cfg.problem, out.f1.trajectory, cfg.perturbation);
    return out;
}

Trajectory read_trajectory(const fs::path& path) {
    std::ifstream in(path);
    if (!in) schema_error(path, "cannot open");
    std::vector<double> t, f, c;

    if (path.extension() == ".json") {
        json j;
        try {
            j = json::parse(in);
            t = j.at("t").get<std::vector<double>>();
            f = j.at("f").get<std::vector<double>>();
            c = j.at("c").get<std::vector<double>>();
        } catch (const json::exception& e) {
            schema_error(path, std::string("expected arrays t, f, c (") + e.what() + ")");
        }
    } else {
        std::string line;
        if (!std::getline(in, line)) schema_error(path, "empty file");
        const auto header = split(line, ',');
        if (header.size() < 3 || header[0] != "t" || header[1] != "f" || header[2] != "c")
            schema_error(path, "header must start with t,f,c");
        std::size_t row = 1;
        while (std::getline(in, line)) {
            ++row;
            if (line.empty() || line == "\r") continue;
            const auto cells = split(line, ',');
            if (cells.size() != header.size())
                schema_error(path, "row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                       " fields, header has " + std::to_string(header.size()));
            double v[3];
            for (int k = 0; k < 3; ++k) {
                std::size_t used = 0;
                try {
                    v[k] = std::stod(cells[k], &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used == 0 || used != cells[k].size())
                    schema_error(path, "row " + std::to_string(row) + ": bad number '" + cells[k] + "'");
            }
            t.push_back(v[0]);
            f.push_back(v[1]);
            c.push_back(v[2]);
        }
    }
    try {
        return Trajectory(std::move(t), std::move(f), std::move(c));
    } catch (const Error& e) {
        schema_error(path, e.what());
    }
}

// ---------------------------------------------------------------------------

int cmd_solve(const RunConfig& cfg, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    ensure_dir(cfg.output.dir);

    json report;
    report["command"] = "solve";
    report["problem"] = problem_json(cfg);

    std::optional<PipelineResult> res;
    try {
        res = run_pipeline(cfg);
    } catch (const Error& e) {
        if (!e.is_numerical()) throw;
        report["converged"] = false;
        report["error"] = to_string(e.code());
        report["message"] = e.what();
        if (cfg.output.record_timing) report["wall_time_s"] = seconds_since(t0);
        write_json(cfg.output.dir / "report.json", report);
        out << "solve: " << e.what() << "\n";
        return kExitNumeric;
    }

    const Trajectory f = res->final_trajectory();
    const Trajectory& f1 = res->f1.trajectory;
    const Trajectory& f2 = res->f2->f2;
    const SolverReport& fin = res->f2->report;

    write_table(cfg.output, "trajectory", {"t", "f", "c", "f1", "f2"},
                {to_vec(f.grid()), to_vec(f.values()), to_vec(f.rates()), to_vec(f1.values()), to_vec(f2.values())});

    report["converged"] = res->converged();
    report["objective"] = fin.objective;
    report["expected_shortfall"] = fin.expected_shortfall;
    report["variance_term"] = fin.variance_term;
    report["residual_sup"] = fin.residual_sup;
    report["iterations"] = res->f1.report.iterations + fin.iterations;
    report["grid_nodes"] = f.size();
    report["message"] = fin.message;
    report["f1"] = report_json(res->f1.report);
    report["f2"] = report_json(fin);
    report["f2"]["coefficients"] = res->f2->coefficients;
    if (cfg.output.record_timing) report["wall_time_s"] = seconds_since(t0);
    write_json(cfg.output.dir / "report.json", report);

    out << "solve: J = " << fmt17(fin.objective) << "  E[Y] = " << fmt17(fin.expected_shortfall)
        << "  lambda V[Y] = " << fmt17(fin.variance_term) << "\n"
        << "       f1 slope = " << fmt17(res->f1.report.initial_slope)
        << "  E-L residual = " << res->f1.report.residual_sup << "  (" << fin.message << ")\n";
    return res->converged() ? kExitOk : kExitNumeric;
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& trajectory_file, std::ostream& out) {
    const Trajectory f = read_trajectory(trajectory_file);
    const double T = cfg.problem.T;
    if (std::abs(f.horizon() - T) > 1e-12 * std::max(1.0, T)) {
        std::ostringstream os;
        os << "grid ends at " << fmt17(f.horizon()) << " but the configured horizon is " << fmt17(T);
        schema_error(trajectory_file, os.str());
    }
    try {
        f.check_boundary(cfg.problem.K, kBoundaryRelTol * std::max(1.0, cfg.problem.K));
    } catch (const Error& e) {
        schema_error(trajectory_file, e.what());
    }
    ensure_dir(cfg.output.dir);

    const auto J = objective(cfg.impact, cfg.market, cfg.problem, f);
    const double J_int = objective_integral_form(cfg.impact, cfg.market, cfg.problem, f);
    const double discrepancy = std::abs(J.J - J_int) / std::max(std::abs(J.J), cfg.problem.K * cfg.market.s);
    const Trajectory u = Trajectory::uniform(cfg.problem.K, T, f.size() - 1);
    const double J_uniform = objective(cfg.impact, cfg.market, cfg.problem, u).J;

    json report;
    report["command"] = "evaluate";
    report["problem"] = problem_json(cfg);
    report["trajectory_file"] = trajectory_file.filename().string();
    report["grid_nodes"] = f.size();
    report["objective"] = J.J;
    report["expected_shortfall"] = J.expected_shortfall;
    report["variance_term"] = J.variance_term;
    report["objective_integral_form"] = J_int;
    report["form_discrepancy"] = discrepancy;
    report["mean_xi"] = J.moments.mean;
    report["second_moment_xi"] = J.moments.second;
    report["variance_xi"] = J.moments.variance;
    report["objective_uniform"] = J_uniform;
    write_json(cfg.output.dir / "evaluation.json", report);

    out << "J                   = " << fmt17(J.J) << "\n"
        << "E[Y]                = " << fmt17(J.expected_shortfall) << "\n"
        << "lambda V[Y]         = " << fmt17(J.variance_term) << "\n"
        << "J (moment form)     = " << fmt17(J.J) << "\n"
        << "J (integral form)   = " << fmt17(J_int) << "\n"
        << "relative difference = " << discrepancy << "\n"
        << "J (uniform)         = " << fmt17(J_uniform) << "\n";
    return kExitOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    if (!cfg.sim) throw Error(ErrorCode::config, "simulate needs a [sim] section");
    const SimSection& sim = *cfg.sim;
    ensure_dir(cfg.output.dir);
    const auto t0 = std::chrono::steady_clock::now();

    const Trajectory source = trajectory_for_sim(cfg, sim);
    const Trajectory traj = source.resampled(uniform_grid(cfg.problem.T, sim.sim.n_steps));
    const auto q = moments_xi(cfg.impact, cfg.market, traj, cfg.problem.T);
    const PathStats st = path_statistics(cfg.impact, cfg.market, traj, sim.sim);
    const double z_mean = z_score(st.xi_mean, q.mean);
    const double z_second = z_score(st.xi_second, q.second);

    SimConfig id_cfg = sim.sim;
    id_cfg.n_paths = sim.identity_paths;
    id_cfg.antithetic = false;
    const auto rows = product_identity_refinement(cfg.impact, cfg.market, source, id_cfg, sim.refinements);
    bool decreasing = true;
    for (std::size_t l = 1; l < rows.size(); ++l)
        decreasing = decreasing && rows[l].n_steps > rows[l - 1].n_steps &&
                     rows[l].mean_sup_error < rows[l - 1].mean_sup_error;

    std::vector<double> steps, mean_err, max_err, xi_T, ratio;
    for (std::size_t l = 0; l < rows.size(); ++l) {
        steps.push_back(static_cast<double>(rows[l].n_steps));
        mean_err.push_back(rows[l].mean_sup_error);
        max_err.push_back(rows[l].max_sup_error);
        xi_T.push_back(rows[l].xi_T_mean);
        ratio.push_back(l == 0 || rows[l].mean_sup_error == 0.0
                            ? 0.0
                            : rows[l - 1].mean_sup_error / rows[l].mean_sup_error);
    }
    write_table(cfg.output, "convergence", {"n_steps", "mean_sup_error", "max_sup_error", "xi_T_mean", "ratio"},
                {steps, mean_err, max_err, xi_T, ratio});

    const bool ok = std::abs(z_mean) <= 5.0 && std::abs(z_second) <= 5.0;
    json report;
    report["command"] = "simulate";
    report["problem"] = problem_json(cfg);
    report["seed"] = sim.sim.seed;
    report["n_paths"] = st.n_paths;
    report["n_steps"] = sim.sim.n_steps;
    report["antithetic"] = sim.sim.antithetic;
    report["scheme"] = sim.sim.scheme == PriceScheme::exact ? "exact-price" : "euler-maruyama";
    report["trajectory"] = sim.trajectory == TrajectorySource::uniform ? "uniform" : "solved";
    report["xi_mean"] = {{"value", st.xi_mean.value}, {"se", st.xi_mean.se}, {"target", q.mean},
                         {"z", json_number(z_mean)}};
    report["xi_second"] = {{"value", st.xi_second.value}, {"se", st.xi_second.se}, {"target", q.second},
                           {"z", json_number(z_second)}};
    report["shortfall_mean"] = st.shortfall_mean;
    report["shortfall_var"] = st.shortfall_var;
    report["sup_product_error"] = st.sup_product_error;
    report["sup_product_error_max"] = st.sup_product_error_max;
    report["identity_paths"] = sim.identity_paths;
    report["identity_error_decreasing"] = decreasing;
    report["identity_error_finest_relative"] =
        rows.back().xi_T_mean != 0.0 ? rows.back().mean_sup_error / std::abs(rows.back().xi_T_mean) : 0.0;
    report["consistent"] = ok;
    if (cfg.output.record_timing) report["wall_time_s"] = seconds_since(t0);
    write_json(cfg.output.dir / "simstats.json", report);

    out << "E[xi_T]   = " << fmt17(st.xi_mean.value) << " +- " << st.xi_mean.se << "  (quadrature "
        << fmt17(q.mean) << ", z = " << z_mean << ")\n"
        << "E[xi_T^2] = " << fmt17(st.xi_second.value) << " +- " << st.xi_second.se << "  (quadrature "
        << fmt17(q.second) << ", z = " << z_second << ")\n"
        << "sup |xi - S X| = " << st.sup_product_error << " on " << sim.sim.n_steps << " steps\n";
    for (const auto& r : rows)
        out << "  n_steps " << r.n_steps << ": identity error " << r.mean_sup_error << "\n";
    if (!ok) {
        out << "simulate: Monte Carlo disagrees with quadrature beyond 5 standard errors\n";
        return kExitNumeric;
    }
    return kExitOk;
}

int cmd_compare(const RunConfig& cfg, std::ostream& out) {
    ensure_dir(cfg.output.dir);
    const PipelineResult res = run_pipeline(cfg);
    const Trajectory ours = res.final_trajectory();
    const auto grid = ours.grid();
    const double K = cfg.problem.K, T = cfg.problem.T;

    const ACParams ac = map_to_ac(cfg.impact, cfg.market, cfg.problem);
    const Trajectory f_ac = ac_trajectory(ac, cfg.problem, grid);
    const Trajectory f_uni = Trajectory::sample(
        to_vec(grid), [&](double t) { return K * t / T; }, [&](double) { return K / T; });

    // Same model with the temporary impact replaced by its linear counterpart.
    RunConfig lin = cfg;
    lin.impact.temporary = LinearImpact{temporary_coefficient(cfg.impact.temporary)};
    const Trajectory f_lin = std::holds_alternative<LinearImpact>(cfg.impact.temporary)
                                 ? ours
                                 : run_pipeline(lin).final_trajectory().resampled(grid);

    std::vector<double> d_ac(grid.size()), d_uni(grid.size()), d_lin(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        d_ac[i] = ours.values()[i] - f_ac.values()[i];
        d_uni[i] = ours.values()[i] - f_uni.values()[i];
        d_lin[i] = ours.values()[i] - f_lin.values()[i];
    }
    write_table(cfg.output, "compare", {"t", "f_ours", "f_ac", "f_uniform", "f_linear_temporary"},
                {to_vec(grid), to_vec(ours.values()), to_vec(f_ac.values()), to_vec(f_uni.values()),
                 to_vec(f_lin.values())});

    auto min_of = [](const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); };
    const double tol = 1e-6 * K;
    json report;
    report["command"] = "compare";
    report["problem"] = problem_json(cfg);
    report["converged"] = res.converged();
    report["ac"] = {{"eta", ac.eta}, {"sigma_abs", ac.sigma_abs}, {"lambda", ac.lambda}, {"kappa", ac.kappa()}};
    report["min_ours_minus_ac"] = min_of(d_ac);
    report["min_ours_minus_uniform"] = min_of(d_uni);
    report["min_ours_minus_linear_temporary"] = min_of(d_lin);
    report["dominates_ac"] = min_of(d_ac) >= -tol;
    report["dominates_linear_temporary"] = min_of(d_lin) >= -tol;
    report["objective"] = objective(cfg.impact, cfg.market, cfg.problem, ours).J;
    report["objective_ac"] = objective(cfg.impact, cfg.market, cfg.problem, f_ac).J;
    report["objective_uniform"] = objective(cfg.impact, cfg.market, cfg.problem, f_uni).J;
    write_json(cfg.output.dir / "compare.json", report);

    out << "min (f_ours - f_ac)      = " << min_of(d_ac) << "\n"
        << "min (f_ours - f_uniform) = " << min_of(d_uni) << "\n"
        << "min (f_ours - f_linear)  = " << min_of(d_lin) << "\n"
        << "kappa = " << ac.kappa() << "\n";
    return res.converged() ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------------------

int run_command(const std::string& command, const fs::path& config_path, const std::optional<fs::path>& out_dir,
                const std::optional<fs::path>& trajectory_file, std::ostream& out, std::ostream& err) {
    auto one_line = [](std::string s) {
        std::replace(s.begin(), s.end(), '\n', ' ');
        return s;
    };
    try {
        RunConfig cfg = load_config(config_path);
        if (out_dir) cfg.output.dir = *out_dir;
        if (command == "solve") return cmd_solve(cfg, out);
        if (command == "evaluate") {
            const fs::path file = trajectory_file
                                      ? *trajectory_file
                                      : cfg.output.dir / (cfg.output.format == OutputFormat::csv ? "trajectory.csv"
                                                                                                 : "trajectory.json");
            return cmd_evaluate(cfg, file, out);
        }
        if (command == "simulate") return cmd_simulate(cfg, out);
        if (command == "compare") return cmd_compare(cfg, out);
        err << "exec-traj: unknown command '" << command << "'\n";
        return kExitConfig;
    } catch (const Error& e) {
        err << "exec-traj: " << to_string(e.code()) << ": " << one_line(e.what()) << "\n";
        return e.is_numerical() ? kExitNumeric : kExitConfig;
    } catch (const std::exception& e) {
        err << "exec-traj: " << one_line(e.what()) << "\n";
        return kExitConfig;
    }
}

}  // namespace exectraj::cli
