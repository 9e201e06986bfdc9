#include "exectraj/cli.hpp"

#include "exectraj/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace exectraj::cli {

namespace {

namespace pt = boost::property_tree;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::config, msg); }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// One section with bookkeeping of which keys were consumed.
class Section {
public:
    Section(std::string name, const pt::ptree* tree) : name_(std::move(name)), tree_(tree) {}

    bool present() const { return tree_ != nullptr; }
    bool has(const std::string& key) const { return tree_ && tree_->find(key) != tree_->not_found(); }

    std::string text(const std::string& key) const {
        if (!has(key)) config_error("missing key [" + name_ + "] " + key);
        return trim(tree_->find(key)->second.data());
    }

    double number(const std::string& key) const {
        const std::string s = text(key);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            config_error("key [" + name_ + "] " + key + ": expected a number, got '" + s + "'");
        return v;
    }

    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    std::size_t count(const std::string& key) const {
        const std::string s = text(key);
        unsigned long long v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size())
            config_error("key [" + name_ + "] " + key + ": expected a non-negative integer, got '" + s + "'");
        return static_cast<std::size_t>(v);
    }

    std::size_t count_or(const std::string& key, std::size_t fallback) const {
        return has(key) ? count(key) : fallback;
    }

    bool flag_or(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string s = text(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        config_error("key [" + name_ + "] " + key + ": expected true/false, got '" + s + "'");
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(text(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
                config_error("key [" + name_ + "] " + key + ": bad list entry '" + item + "'");
            out.push_back(v);
        }
        return out;
    }

    /// Rejects keys outside `allowed`.
    void check_keys(const std::set<std::string>& allowed) const {
        if (!tree_) return;
        for (const auto& [key, child] : *tree_) {
            if (!allowed.contains(key)) config_error("unknown key [" + name_ + "] " + key);
            if (!child.empty()) config_error("key [" + name_ + "] " + key + " must be a scalar");
        }
    }

private:
    std::string name_;
    const pt::ptree* tree_;
};

const std::set<std::string> kSections{"market", "impact", "problem", "solver", "sim", "output"};

}  // namespace

RunConfig parse_config(std::istream& in, const std::string& source) {
    pt::ptree root;
    try {
        pt::ini_parser::read_ini(in, root);
    } catch (const pt::ini_parser_error& e) {
        std::ostringstream os;
        os << source << ":" << e.line() << ": " << e.message();
        config_error(os.str());
    }

    std::map<std::string, const pt::ptree*> sections;
    for (const auto& [name, child] : root) {
        if (child.empty() && !child.data().empty())
            config_error("key '" + name + "' appears outside any section");
        if (!kSections.contains(name)) config_error("unknown section [" + name + "]");
        sections[name] = &child;
    }
    auto section = [&](const std::string& name) {
        const auto it = sections.find(name);
        return Section(name, it == sections.end() ? nullptr : it->second);
    };

    RunConfig cfg;

    const Section market = section("market");
    market.check_keys({"s", "sigma"});
    cfg.market.s = market.number("s");
    cfg.market.sigma = market.number("sigma");

    const Section impact = section("impact");
    impact.check_keys({"permanent", "alpha", "temporary", "eta", "exponent", "table_rates", "table_values"});
    const std::string perm = impact.text("permanent");
    if (perm == "zero") {
        cfg.impact.permanent = PermanentImpact::zero();
    } else if (perm == "linear") {
        cfg.impact.permanent = PermanentImpact::linear(impact.number("alpha"));
    } else {
        config_error("key [impact] permanent: unknown family '" + perm + "' (expected zero|linear)");
    }
    const std::string temp = impact.text("temporary");
    if (temp == "zero") {
        cfg.impact.temporary = ZeroImpact{};
    } else if (temp == "linear") {
        cfg.impact.temporary = LinearImpact{impact.number("eta")};
    } else if (temp == "power") {
        cfg.impact.temporary = PowerImpact{impact.number("eta"), impact.number("exponent")};
    } else if (temp == "tabulated") {
        cfg.impact.temporary = TabulatedImpact(impact.numbers("table_rates"), impact.numbers("table_values"));
    } else {
        config_error("key [impact] temporary: unknown family '" + temp +
                     "' (expected zero|linear|power|tabulated)");
    }

    const Section problem = section("problem");
    problem.check_keys({"K", "T", "lambda"});
    cfg.problem.K = problem.number("K");
    cfg.problem.T = problem.number("T");
    cfg.problem.lambda = problem.number_or("lambda", 0.0);

    const Section solver = section("solver");
    solver.check_keys({"slope_lo", "slope_hi", "max_iter", "bc_tol", "ode_steps", "basis_size", "fd_step",
                       "grad_tol", "bfgs_max_iter"});
    cfg.solver.slope_lo = solver.number_or("slope_lo", cfg.solver.slope_lo);
    cfg.solver.slope_hi = solver.number_or("slope_hi", cfg.solver.slope_hi);
    cfg.solver.max_iter = solver.count_or("max_iter", cfg.solver.max_iter);
    cfg.solver.bc_tol = solver.number_or("bc_tol", cfg.solver.bc_tol);
    cfg.solver.ode_steps = solver.count_or("ode_steps", cfg.solver.ode_steps);
    cfg.perturbation.basis_size = solver.count_or("basis_size", cfg.perturbation.basis_size);
    cfg.perturbation.fd_step = solver.number_or("fd_step", cfg.perturbation.fd_step);
    cfg.perturbation.grad_tol = solver.number_or("grad_tol", cfg.perturbation.grad_tol);
    cfg.perturbation.max_iter = solver.count_or("bfgs_max_iter", cfg.perturbation.max_iter);

    const Section sim = section("sim");
    sim.check_keys({"n_paths", "n_steps", "seed", "scheme", "antithetic", "threads", "trajectory", "refinements",
                    "identity_paths"});
    if (sim.present()) {
        SimSection s;
        s.sim.n_paths = sim.count_or("n_paths", s.sim.n_paths);
        s.sim.n_steps = sim.count_or("n_steps", s.sim.n_steps);
        s.sim.seed = sim.count_or("seed", s.sim.seed);
        s.sim.antithetic = sim.flag_or("antithetic", false);
        s.sim.threads = sim.count_or("threads", 0);
        if (sim.has("scheme")) {
            const std::string scheme = sim.text("scheme");
            if (scheme == "exact-price")
                s.sim.scheme = PriceScheme::exact;
            else if (scheme == "euler-maruyama")
                s.sim.scheme = PriceScheme::euler_maruyama;
            else
                config_error("key [sim] scheme: expected exact-price|euler-maruyama, got '" + scheme + "'");
        }
        if (sim.has("trajectory")) {
            const std::string src = sim.text("trajectory");
            if (src == "uniform")
                s.trajectory = TrajectorySource::uniform;
            else if (src == "solved")
                s.trajectory = TrajectorySource::solved;
            else
                config_error("key [sim] trajectory: expected uniform|solved, got '" + src + "'");
        }
        if (sim.has("refinements")) {
            s.refinements.clear();
            for (double v : sim.numbers("refinements")) {
                if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v)))
                    config_error("key [sim] refinements: step counts must be positive integers");
                s.refinements.push_back(static_cast<std::size_t>(v));
            }
        }
        s.identity_paths = sim.count_or("identity_paths", s.identity_paths);
        cfg.sim = s;
    }

    const Section output = section("output");
    output.check_keys({"dir", "format", "record_timing"});
    if (output.has("dir")) cfg.output.dir = output.text("dir");
    if (output.has("format")) {
        const std::string f = output.text("format");
        if (f == "csv")
            cfg.output.format = OutputFormat::csv;
        else if (f == "json")
            cfg.output.format = OutputFormat::json;
        else
            config_error("key [output] format: expected csv|json, got '" + f + "'");
    }
    cfg.output.record_timing = output.flag_or("record_timing", false);

    try {
        cfg.market.validate();
        cfg.impact.validate();
        cfg.problem.validate();
        cfg.solver.validate();
        cfg.perturbation.validate();
        if (cfg.sim) cfg.sim->sim.validate();
    } catch (const Error& e) {
        config_error(e.what());
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open config file " + path.string());
    return parse_config(in, path.string());
}

}  // namespace exectraj::cli
