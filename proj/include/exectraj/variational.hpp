#pragma once

#include "exectraj/model.hpp"

#include <string>
#include <vector>

namespace exectraj {

/// Euler-Lagrange residual dF/df - d/du dF/df' at the interior nodes of a
/// trajectory. d/du dF/df' is expanded by the chain rule, with f'' taken from
/// finite differences of the stored rates.
struct ELResidual {
    std::vector<double> grid;
    std::vector<double> residual;
    /// residual / (s exp{alpha f + h(f')}); the form in which the ODE is
    /// usually written down by hand.
    std::vector<double> reduced;

    double sup_norm() const;
    double reduced_sup_norm() const;
};

ELResidual el_residual(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj);

/// f'' isolated from the Euler-Lagrange equation at rate c:
///   f'' = -alpha c^2 h'(c) / (2 h'(c) + c h'(c)^2 + c h''(c)).
/// The equation does not involve f itself.
double el_acceleration(const ImpactSpec& impact, double rate);

struct ShootingConfig {
    /// Initial-slope bracket; a non-positive upper bound selects the default
    /// [K / (10 T), 10 K / T].
    double slope_lo = 0.0;
    double slope_hi = 0.0;
    std::size_t max_iter = 200;
    double bc_tol = 1e-10;
    std::size_t ode_steps = 4000;

    void validate() const;
};

struct SolverReport {
    bool converged = false;
    std::size_t iterations = 0;
    double boundary_miss = 0.0;      ///< |f(T) - K|
    double residual_sup = 0.0;       ///< sup of the reduced E-L residual
    double objective = 0.0;          ///< J at the problem's lambda
    double expected_shortfall = 0.0;
    double variance_term = 0.0;
    double gradient_norm = 0.0;      ///< normalised by K s (perturbation solve)
    double thm2_residual_sup = 0.0;  ///< integro-differential identity, normalised by K s
    double initial_slope = 0.0;
    bool rates_positive = true;
    bool dominates_f1 = true;        ///< f >= f1 on the grid (perturbation solve)
    std::string message;
};

struct Solution {
    Trajectory trajectory;
    SolverReport report;
};

/// Risk-neutral optimum: shoots on f'(0) with fixed-step RK4 until f(T) = K.
Solution solve_f1(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                  const ShootingConfig& cfg = {});

}  // namespace exectraj
