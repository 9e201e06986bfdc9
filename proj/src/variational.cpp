#include "exectraj/variational.hpp"

#include "exectraj/errors.hpp"
#include "exectraj/moments.hpp"
#include "exectraj/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace exectraj {

namespace {

double sup_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

struct ShotResult {
    std::vector<double> values;
    std::vector<double> rates;
};

void check_state(const ImpactSpec& impact, double f, double c, double t) {
    const double floor = has_singular_slope(impact.temporary) ? kRateFloor : 0.0;
    if (!std::isfinite(f) || !std::isfinite(c) || c < floor) {
        std::ostringstream os;
        os << "shooting ODE left the admissible region at t = " << t << " (f = " << f << ", f' = " << c
           << ")";
        throw Error(ErrorCode::ode_blowup, os.str());
    }
    if (impact.alpha() * f + temporary_value(impact.temporary, c) > kExponentCap) {
        std::ostringstream os;
        os << "shooting ODE hit the exponent cap at t = " << t;
        throw Error(ErrorCode::ode_blowup, os.str());
    }
}

ShotResult shoot(const ImpactSpec& impact, double slope, double T, std::size_t steps) {
    ShotResult out;
    out.values.resize(steps + 1);
    out.rates.resize(steps + 1);
    const double dt = T / static_cast<double>(steps);
    double f = 0.0, c = slope;
    out.values[0] = f;
    out.rates[0] = c;
    auto acc = [&](double rate) {
        if (!(rate > 0.0) || !std::isfinite(rate)) {
            std::ostringstream os;
            os << "shooting ODE produced rate " << rate;
            throw Error(ErrorCode::ode_blowup, os.str());
        }
        return el_acceleration(impact, rate);
    };
    for (std::size_t i = 0; i < steps; ++i) {
        const double k1f = c, k1c = acc(c);
        const double k2f = c + 0.5 * dt * k1c, k2c = acc(k2f);
        const double k3f = c + 0.5 * dt * k2c, k3c = acc(k3f);
        const double k4f = c + dt * k3c, k4c = acc(k4f);
        f += dt / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        c += dt / 6.0 * (k1c + 2.0 * k2c + 2.0 * k3c + k4c);
        check_state(impact, f, c, dt * static_cast<double>(i + 1));
        out.values[i + 1] = f;
        out.rates[i + 1] = c;
    }
    return out;
}

}  // namespace

double ELResidual::sup_norm() const { return sup_abs(residual); }
double ELResidual::reduced_sup_norm() const { return sup_abs(reduced); }

ELResidual el_residual(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj) {
    if (traj.size() < 3) throw Error(ErrorCode::invalid_argument, "E-L residual needs >= 3 nodes");
    const auto grid = traj.grid();
    const auto f = traj.values();
    const auto c = traj.rates();
    const auto dc = grid_derivative(grid, c);

    ELResidual out;
    const std::size_t n = traj.size();
    out.grid.reserve(n - 2);
    out.residual.reserve(n - 2);
    out.reduced.reserve(n - 2);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const auto L = lagrangian_terms(impact, mkt, f[i], c[i]);
        const double dP = L.P_f * c[i] + L.P_fp * dc[i];
        const double r = L.F_f - dP;
        out.grid.push_back(grid[i]);
        out.residual.push_back(r);
        out.reduced.push_back(r / L.scale);
    }
    return out;
}

double el_acceleration(const ImpactSpec& impact, double rate) {
    const double h1 = temporary_slope(impact.temporary, rate);
    const double h2 = temporary_curvature(impact.temporary, rate);
    const double denom = 2.0 * h1 + rate * h1 * h1 + rate * h2;
    if (!(std::abs(denom) > 1e-300))
        throw Error(ErrorCode::degenerate_lagrangian,
                    "degenerate Lagrangian: dF/df' does not depend on f'' at this rate");
    return -impact.alpha() * rate * rate * h1 / denom;
}

void ShootingConfig::validate() const {
    if (!(bc_tol > 0.0)) throw Error(ErrorCode::invalid_argument, "bc_tol must be > 0");
    if (ode_steps < 100) throw Error(ErrorCode::invalid_argument, "ode_steps must be >= 100");
    if (max_iter == 0) throw Error(ErrorCode::invalid_argument, "max_iter must be >= 1");
    if (slope_hi > 0.0 && !(slope_lo >= 0.0 && slope_lo < slope_hi))
        throw Error(ErrorCode::invalid_argument, "slope bracket must satisfy 0 <= lo < hi");
}

Solution solve_f1(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                  const ShootingConfig& cfg) {
    impact.validate();
    mkt.validate();
    prob.validate();
    cfg.validate();
    if (is_zero_impact(impact.temporary))
        throw Error(ErrorCode::degenerate_lagrangian,
                    "degenerate Lagrangian: without temporary impact F = s f' e^{alpha f} is a total "
                    "derivative and every trajectory is stationary");

    double lo = cfg.slope_lo, hi = cfg.slope_hi;
    if (!(hi > 0.0)) {
        lo = prob.K / (10.0 * prob.T);
        hi = 10.0 * prob.K / prob.T;
    }
    lo = std::max(lo, has_singular_slope(impact.temporary) ? 2.0 * kRateFloor : 1e-300);

    std::size_t iterations = 0;
    auto miss = [&](double slope) {
        ++iterations;
        return shoot(impact, slope, prob.T, cfg.ode_steps).values.back() - prob.K;
    };

    double m_lo = miss(lo), m_hi = miss(hi);
    if (m_lo * m_hi > 0.0) {
        std::ostringstream os;
        os << "initial-slope bracket [" << lo << ", " << hi << "] does not straddle f(T) = K (misses "
           << m_lo << ", " << m_hi << ")";
        throw Error(ErrorCode::bracket, os.str());
    }

    double slope = std::abs(m_lo) < std::abs(m_hi) ? lo : hi;
    double m = std::abs(m_lo) < std::abs(m_hi) ? m_lo : m_hi;
    // Bisection until the bracket is narrow, then safeguarded secant.
    while (std::abs(m) > cfg.bc_tol && iterations < cfg.max_iter) {
        const bool narrow = (hi - lo) < 1e-3 * 0.5 * (std::abs(lo) + std::abs(hi));
        double next = 0.5 * (lo + hi);
        if (narrow && m_hi != m_lo) {
            const double secant = hi - m_hi * (hi - lo) / (m_hi - m_lo);
            if (secant > lo && secant < hi) next = secant;
        }
        const double m_next = miss(next);
        if ((m_next < 0.0) == (m_lo < 0.0)) {
            lo = next;
            m_lo = m_next;
        } else {
            hi = next;
            m_hi = m_next;
        }
        slope = next;
        m = m_next;
    }

    if (std::abs(m) > cfg.bc_tol) {
        std::ostringstream os;
        os << "shooting did not converge after " << iterations << " iterations (|f(T) - K| = "
           << std::abs(m) << ")";
        throw Error(ErrorCode::non_convergence, os.str());
    }

    auto shot = shoot(impact, slope, prob.T, cfg.ode_steps);
    Trajectory traj(uniform_grid(prob.T, cfg.ode_steps), std::move(shot.values), std::move(shot.rates));

    Solution out{std::move(traj), {}};
    auto& rep = out.report;
    rep.converged = true;
    rep.iterations = iterations;
    rep.initial_slope = slope;
    rep.boundary_miss = std::abs(out.trajectory.values().back() - prob.K);
    rep.residual_sup = el_residual(impact, mkt, out.trajectory).reduced_sup_norm();
    const auto J = objective(impact, mkt, prob, out.trajectory);
    rep.objective = J.J;
    rep.expected_shortfall = J.expected_shortfall;
    rep.variance_term = J.variance_term;
    const auto rates = out.trajectory.rates();
    rep.rates_positive = std::all_of(rates.begin(), rates.end(), [](double c) { return c > 0.0; });
    rep.message = rep.rates_positive ? "converged" : "converged; trade reversal detected (non-positive rate)";
    return out;
}

}  // namespace exectraj
