#include "exectraj/errors.hpp"
#include "exectraj/moments.hpp"
#include "exectraj/simulate.hpp"
#include "exectraj/variational.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace exectraj;
using doctest::Approx;

namespace {

SimConfig sim(std::size_t paths, std::size_t steps = 200, std::uint64_t seed = 7) {
    SimConfig c;
    c.n_paths = paths;
    c.n_steps = steps;
    c.seed = seed;
    c.threads = 1;
    return c;
}

double z(const Estimate& e, double target) { return (e.value - target) / e.se; }

}  // namespace

TEST_CASE("deterministic prices without volatility") {
    const auto one = support::constant_rate(1.0, 1.0, 200);
    const auto flat = simulate_price(support::zero_impacts(), support::market(2.0, 0.0), one, sim(3));
    for (double x : flat.data) CHECK(x == Approx(2.0).epsilon(1e-15));

    const auto drift = simulate_price(support::drift_only(), support::market(1.0, 0.0), one, sim(2));
    const auto grid = uniform_grid(1.0, 200);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(drift(1, i) == Approx(std::exp(grid[i])).epsilon(1e-13));
}

TEST_CASE("mean price matches the deterministic part") {
    const auto one = support::constant_rate(1.0, 1.0, 100);
    const auto cfg = sim(20000, 100);
    const auto S = simulate_price(support::linear_impacts(), support::market(1.0, 0.2), one, cfg);
    const auto grid = uniform_grid(1.0, 100);
    for (std::size_t i : {10u, 50u, 100u}) {
        double m = 0.0, m2 = 0.0;
        for (std::size_t p = 0; p < cfg.n_paths; ++p) {
            m += S(p, i);
            m2 += S(p, i) * S(p, i);
        }
        const double n = static_cast<double>(cfg.n_paths);
        m /= n;
        const double se = std::sqrt((m2 / n - m * m) / (n - 1.0));
        INFO("t = " << grid[i]);
        CHECK(std::abs(m - std::exp(grid[i] + 1.0)) <= 3.0 * se);
    }
}

TEST_CASE("idle trajectory spends nothing") {
    const auto idle = support::constant_rate(0.0, 1.0, 50);
    const auto run = simulate_xi(support::linear_impacts(), support::market(), idle, sim(5, 50));
    for (double x : run.xi.data) CHECK(x == 0.0);
}

TEST_CASE("spend moments for zero impact and unit rate") {
    const auto one = support::constant_rate(1.0, 1.0, 200);
    const auto run = simulate_xi(support::zero_impacts(), support::market(1.0, 0.2), one, sim(40000));
    const double second = 2.0 * (std::exp(0.04) - 1.0 - 0.04) / (0.04 * 0.04);
    CHECK(std::abs(z(run.stats.xi_mean, 1.0)) <= 3.0);
    CHECK(std::abs(z(run.stats.xi_second, second)) <= 3.0);
    CHECK(run.stats.shortfall_mean == Approx(run.stats.xi_mean.value - 1.0).epsilon(1e-12));
}

TEST_CASE("Brennan-Schwartz process without volatility") {
    const auto one = support::constant_rate(1.0, 1.0, 100);
    const auto X = simulate_brennan_schwartz(support::zero_impacts(), support::market(1.0, 0.0), one, sim(2, 100));
    const auto grid = uniform_grid(1.0, 100);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(X(0, i) == Approx(grid[i]).epsilon(1e-12));
}

TEST_CASE("product identity error shrinks under refinement") {
    const auto f1 = solve_f1(support::linear_impacts(), support::market(), support::problem()).trajectory;
    const std::vector<std::size_t> steps{200, 400, 800};
    const auto rows = product_identity_refinement(support::linear_impacts(), support::market(), f1, sim(100), steps);
    REQUIRE(rows.size() == 3);
    for (std::size_t l = 1; l < rows.size(); ++l) {
        INFO("steps " << rows[l].n_steps << ": " << rows[l].mean_sup_error);
        CHECK(rows[l].mean_sup_error < rows[l - 1].mean_sup_error);
        CHECK(rows[l - 1].mean_sup_error / rows[l].mean_sup_error >= 1.3);
    }
    CHECK(rows.back().mean_sup_error < 0.01 * rows.back().xi_T_mean);

    std::vector<std::size_t> bad{200, 300};
    CHECK_THROWS_AS(product_identity_refinement(support::linear_impacts(), support::market(), f1, sim(2), bad), Error);
}

TEST_CASE("terminal product matches the mean spend") {
    const auto imp = support::linear_impacts();
    const auto mk = support::market();
    const auto traj = Trajectory::uniform(3.0, 1.0, 400);
    const auto run = simulate_joint(imp, mk, traj, sim(20000, 400));
    const std::size_t last = run.S.nodes - 1;
    double m = 0.0, m2 = 0.0;
    for (std::size_t p = 0; p < run.S.paths; ++p) {
        const double y = run.S(p, last) * run.X(p, last);
        m += y;
        m2 += y * y;
    }
    const double n = static_cast<double>(run.S.paths);
    m /= n;
    const double se = std::sqrt((m2 / n - m * m) / (n - 1.0));
    const double target = mean_xi(imp, mk, traj, 1.0);
    INFO("mean S X = " << m << ", target = " << target << ", se = " << se);
    CHECK(std::abs(m - target) <= 3.0 * se);
}

TEST_CASE("same seed reproduces the statistics for any thread count") {
    const auto traj = Trajectory::uniform(3.0, 1.0, 200);
    auto cfg = sim(5000);
    const auto a = path_statistics(support::linear_impacts(), support::market(), traj, cfg);
    cfg.threads = 4;
    const auto b = path_statistics(support::linear_impacts(), support::market(), traj, cfg);
    CHECK(a.xi_mean.value == b.xi_mean.value);
    CHECK(a.xi_second.value == b.xi_second.value);
    CHECK(a.xi_mean.se == b.xi_mean.se);
    CHECK(a.sup_product_error == b.sup_product_error);

    const auto run = simulate_xi(support::linear_impacts(), support::market(), traj, sim(5000));
    CHECK(run.stats.xi_mean.value == Approx(a.xi_mean.value).epsilon(1e-14));

    cfg.seed = 8;
    const auto c = path_statistics(support::linear_impacts(), support::market(), traj, cfg);
    CHECK(c.xi_mean.value != a.xi_mean.value);
}

TEST_CASE("antithetic pairs reduce the standard error") {
    const auto traj = Trajectory::uniform(3.0, 1.0, 200);
    auto cfg = sim(20000);
    const auto plain = path_statistics(support::linear_impacts(), support::market(), traj, cfg);
    cfg.antithetic = true;
    const auto anti = path_statistics(support::linear_impacts(), support::market(), traj, cfg);
    INFO("plain se = " << plain.xi_mean.se << ", antithetic se = " << anti.xi_mean.se);
    CHECK(anti.xi_mean.se < plain.xi_mean.se);
    cfg.n_paths = 20001;
    CHECK_THROWS_AS(path_statistics(support::linear_impacts(), support::market(), traj, cfg), Error);
}

TEST_CASE("standard error scales with the inverse root of the path count") {
    const auto traj = Trajectory::uniform(3.0, 1.0, 100);
    const auto a = path_statistics(support::linear_impacts(), support::market(), traj, sim(4000, 100));
    const auto b = path_statistics(support::linear_impacts(), support::market(), traj, sim(16000, 100));
    CHECK(a.xi_mean.se / b.xi_mean.se == Approx(2.0).epsilon(0.1));
}

TEST_CASE("moment coverage across seeds") {
    // 20 seeds at 100k paths: at most two z-scores beyond 3 per moment.
    const auto imp = support::linear_impacts();
    const auto mk = support::market();
    const auto traj = Trajectory::uniform(3.0, 1.0, 100);
    const auto m = moments_xi(imp, mk, traj, 1.0);
    int miss_mean = 0, miss_second = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto st = path_statistics(imp, mk, traj, sim(100000, 100, seed));
        miss_mean += std::abs(z(st.xi_mean, m.mean)) > 3.0;
        miss_second += std::abs(z(st.xi_second, m.second)) > 3.0;
    }
    CHECK(miss_mean <= 2);
    CHECK(miss_second <= 2);
}

TEST_CASE("configuration validation") {
    const auto traj = Trajectory::uniform(3.0, 1.0, 100);
    CHECK_THROWS_AS(path_statistics(support::linear_impacts(), support::market(), traj, sim(0)), Error);
    CHECK_THROWS_AS(path_statistics(support::linear_impacts(), support::market(), traj, sim(10, 5)), Error);
}
