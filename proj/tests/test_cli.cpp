#include "exectraj/cli.hpp"
#include "exectraj/errors.hpp"

#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace exectraj;
using namespace exectraj::cli;
using doctest::Approx;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string linear_config(double lambda, const std::string& extra = "") {
    std::ostringstream os;
    os << "[market]\ns = 1\nsigma = 0.2\n"
       << "[impact]\npermanent = linear\nalpha = 1\ntemporary = linear\neta = 1\n"
       << "[problem]\nK = 3\nT = 1\nlambda = " << lambda << "\n"
       << extra;
    return os.str();
}

std::string zero_impact_config(double sigma, const std::string& extra = "") {
    std::ostringstream os;
    os << "[market]\ns = 1\nsigma = " << sigma << "\n"
       << "[impact]\npermanent = zero\ntemporary = zero\n"
       << "[problem]\nK = 1\nT = 1\nlambda = 0\n"
       << extra;
    return os.str();
}

struct Run {
    int code = 0;
    std::string out, err;
};

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
    const auto p = dir / name;
    std::ofstream(p) << text;
    return p;
}

Run run(const std::string& cmd, const fs::path& config, const fs::path& out_dir,
        const std::optional<fs::path>& traj = std::nullopt) {
    std::ostringstream out, err;
    Run r;
    r.code = run_command(cmd, config, out_dir, traj, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

TEST_CASE("config parsing is strict") {
    std::istringstream ok(linear_config(1.0, "[solver]\node_steps = 2000\n[output]\nformat = json\n"));
    const auto cfg = parse_config(ok);
    CHECK(cfg.problem.lambda == 1.0);
    CHECK(cfg.solver.ode_steps == 2000);
    CHECK(cfg.output.format == OutputFormat::json);
    CHECK(!cfg.sim);

    auto code_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            (void)parse_config(in);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::invalid_argument;  // parsed: not what the caller expects
    };
    CHECK(code_of(linear_config(0.0, "[solver]\nbasis_sise = 4\n")) == ErrorCode::config);
    CHECK(code_of(linear_config(0.0, "[plots]\nwidth = 3\n")) == ErrorCode::config);
    CHECK(code_of(linear_config(-1.0)) == ErrorCode::config);
    CHECK(code_of(linear_config(0.0, "[sim]\nn_paths = 12x\n")) == ErrorCode::config);
    CHECK(code_of("[market]\ns = 1\n") == ErrorCode::config);
}

TEST_CASE("unknown key gives exit 2 with a one-line diagnostic") {
    const auto dir = support::scratch_dir("cli_badkey");
    const auto cfg = write_config(dir, "bad.ini", linear_config(0.0, "[solver]\nmax_iters = 5\n"));
    const auto r = run("solve", cfg, dir / "out");
    CHECK(r.code == kExitConfig);
    CHECK(r.err.find("max_iters") != std::string::npos);
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

    CHECK(run("solve", dir / "missing.ini", dir / "out").code == kExitConfig);
    CHECK(run("frobnicate", cfg, dir / "out").code == kExitConfig);
}

TEST_CASE("solve writes the trajectory table and report") {
    const auto dir = support::scratch_dir("cli_solve");
    const auto cfg = write_config(dir, "lin.ini", linear_config(0.0));
    const auto r = run("solve", cfg, dir / "out");
    REQUIRE(r.code == kExitOk);

    const auto rows = read_csv(dir / "out" / "trajectory.csv");
    REQUIRE(rows.size() > 100);
    CHECK(rows[0] == std::vector<std::string>{"t", "f", "c", "f1", "f2"});
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 5);
        CHECK(std::stod(rows[i][4]) == 0.0);
        CHECK(rows[i][1] == rows[i][3]);
    }
    // 17 significant digits survive the round trip exactly.
    const std::string& cell = rows[rows.size() / 2][1];
    CHECK(cell == [&] {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", std::stod(cell));
        return std::string(buf);
    }());

    const auto rep = read_json(dir / "out" / "report.json");
    for (const char* key : {"objective", "expected_shortfall", "variance_term", "residual_sup", "iterations"})
        CHECK(rep.contains(key));
    CHECK(rep["converged"] == true);
    CHECK(rep["residual_sup"].get<double>() < 1e-6);
    CHECK(!rep.contains("wall_time_s"));
}

TEST_CASE("solver failure exits 3 and still writes the report") {
    const auto dir = support::scratch_dir("cli_fail");
    const auto cfg = write_config(dir, "fail.ini", linear_config(0.0, "[solver]\nmax_iter = 2\n"));
    const auto r = run("solve", cfg, dir / "out");
    CHECK(r.code == kExitNumeric);
    REQUIRE(fs::exists(dir / "out" / "report.json"));
    const auto rep = read_json(dir / "out" / "report.json");
    CHECK(rep["converged"] == false);
    CHECK(rep.contains("message"));
}

TEST_CASE("solve then evaluate reproduces the objective") {
    const auto dir = support::scratch_dir("cli_roundtrip");
    for (double lambda : {0.0, 1.0}) {
        const auto cfg = write_config(dir, "lin.ini", linear_config(lambda));
        REQUIRE(run("solve", cfg, dir / "out").code == kExitOk);
        const double J = read_json(dir / "out" / "report.json")["objective"].get<double>();
        const auto e = run("evaluate", cfg, dir / "out");
        REQUIRE(e.code == kExitOk);
        const auto ev = read_json(dir / "out" / "evaluation.json");
        CHECK(std::abs(ev["objective"].get<double>() - J) <= 1e-12 * std::abs(J));
        CHECK(ev["form_discrepancy"].get<double>() < 1e-8);
        CHECK(ev["objective"].get<double>() <= ev["objective_uniform"].get<double>());
        CHECK(e.out.find("J (integral form)") != std::string::npos);
    }
}

TEST_CASE("evaluate: uniform trajectory with zero impact costs nothing") {
    const auto dir = support::scratch_dir("cli_eval_zero");
    const auto cfg = write_config(dir, "zero.ini", zero_impact_config(0.2));
    std::ofstream traj(dir / "uniform.csv");
    traj << "t,f,c\n";
    for (int i = 0; i <= 100; ++i) traj << 0.01 * i << ',' << 0.01 * i << ",1\n";
    traj.close();
    REQUIRE(run("evaluate", cfg, dir / "out", dir / "uniform.csv").code == kExitOk);
    CHECK(std::abs(read_json(dir / "out" / "evaluation.json")["objective"].get<double>()) < 1e-12);

    std::ofstream bad(dir / "bad.csv");
    bad << "time,value\n0,0\n1,1\n";
    bad.close();
    CHECK(run("evaluate", cfg, dir / "out", dir / "bad.csv").code == kExitConfig);

    std::ofstream longer(dir / "longer.csv");
    longer << "t,f,c\n0,0,0.5\n2,1,0.5\n";
    longer.close();
    CHECK(run("evaluate", cfg, dir / "out", dir / "longer.csv").code == kExitConfig);
}

TEST_CASE("identical configs give byte-identical files") {
    const auto dir = support::scratch_dir("cli_determinism");
    const auto cfg = write_config(dir, "lin.ini",
                                  linear_config(1.0, "[sim]\nn_paths = 2000\nn_steps = 200\nseed = 3\n"
                                                     "trajectory = solved\nidentity_paths = 20\n"));
    for (const char* cmd : {"solve", "simulate", "compare"}) {
        REQUIRE(run(cmd, cfg, dir / "a").code == kExitOk);
        REQUIRE(run(cmd, cfg, dir / "b").code == kExitOk);
    }
    for (const char* file : {"trajectory.csv", "report.json", "simstats.json", "convergence.csv", "compare.csv",
                             "compare.json"}) {
        INFO(file);
        CHECK(slurp(dir / "a" / file) == slurp(dir / "b" / file));
    }
}

TEST_CASE("simulate agrees with quadrature") {
    const auto dir = support::scratch_dir("cli_simulate");
    const std::string sim = "[sim]\nn_paths = 20000\nn_steps = 200\nseed = 11\ntrajectory = uniform\n";
    auto cfg = write_config(dir, "zero.ini", zero_impact_config(0.2, sim));
    REQUIRE(run("simulate", cfg, dir / "out").code == kExitOk);
    auto st = read_json(dir / "out" / "simstats.json");
    CHECK(std::abs(st["xi_mean"]["z"].get<double>()) < 3.0);
    CHECK(std::abs(st["xi_second"]["z"].get<double>()) < 3.0);
    CHECK(st["seed"] == 11);
    CHECK(st["identity_error_decreasing"] == true);
    const auto conv = read_csv(dir / "out" / "convergence.csv");
    CHECK(conv.size() == 4);

    cfg = write_config(dir, "flat.ini", zero_impact_config(0.0, sim));
    REQUIRE(run("simulate", cfg, dir / "flat").code == kExitOk);
    st = read_json(dir / "flat" / "simstats.json");
    CHECK(st["xi_mean"]["se"].get<double>() == 0.0);
    CHECK(st["xi_mean"]["value"].get<double>() == Approx(st["xi_mean"]["target"].get<double>()).epsilon(1e-12));
    CHECK(st["xi_second"]["value"].get<double>() == Approx(1.0).epsilon(1e-12));

    cfg = write_config(dir, "nosim.ini", zero_impact_config(0.2));
    CHECK(run("simulate", cfg, dir / "none").code == kExitConfig);
}

TEST_CASE("compare: dominance and benchmark shape") {
    const auto dir = support::scratch_dir("cli_compare");
    auto cfg = write_config(dir, "lin.ini", linear_config(0.0));
    REQUIRE(run("compare", cfg, dir / "lin").code == kExitOk);
    const auto rep = read_json(dir / "lin" / "compare.json");
    CHECK(rep["min_ours_minus_ac"].get<double>() >= -1e-6 * 3.0);
    CHECK(rep["dominates_ac"] == true);
    const auto rows = read_csv(dir / "lin" / "compare.csv");
    CHECK(rows[0] == std::vector<std::string>{"t", "f_ours", "f_ac", "f_uniform", "f_linear_temporary"});
    for (std::size_t i = 1; i < rows.size(); ++i)
        CHECK(std::stod(rows[i][2]) == Approx(3.0 * std::stod(rows[i][0])).epsilon(1e-14));

    std::string pw = linear_config(0.0);
    pw.replace(pw.find("temporary = linear"), 18, "temporary = power\nexponent = 0.6");
    cfg = write_config(dir, "pow.ini", pw);
    REQUIRE(run("compare", cfg, dir / "pow").code == kExitOk);
    const auto prep = read_json(dir / "pow" / "compare.json");
    CHECK(prep["min_ours_minus_linear_temporary"].get<double>() >= -1e-6 * 3.0);
}

TEST_CASE("higher risk aversion executes earlier") {
    const auto dir = support::scratch_dir("cli_lambda");
    REQUIRE(run("solve", write_config(dir, "l0.ini", linear_config(0.0)), dir / "l0").code == kExitOk);
    REQUIRE(run("solve", write_config(dir, "l1.ini", linear_config(1.0)), dir / "l1").code == kExitOk);
    const auto a = read_trajectory(dir / "l0" / "trajectory.csv");
    const auto b = read_trajectory(dir / "l1" / "trajectory.csv");
    REQUIRE(a.same_grid(b));
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.values()[i] >= a.values()[i] - 1e-6 * 3.0);
}

TEST_CASE("json output format") {
    const auto dir = support::scratch_dir("cli_json");
    const auto cfg = write_config(dir, "lin.ini", linear_config(0.0, "[output]\nformat = json\n"));
    REQUIRE(run("solve", cfg, dir / "out").code == kExitOk);
    const auto t = read_json(dir / "out" / "trajectory.json");
    CHECK(t["f2"].size() == t["t"].size());
    REQUIRE(run("evaluate", cfg, dir / "out").code == kExitOk);
}
