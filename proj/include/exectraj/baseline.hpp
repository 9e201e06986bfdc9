#pragma once

#include "exectraj/model.hpp"

#include <span>

namespace exectraj {

/// Arithmetic-Brownian benchmark with linear temporary impact. The urgency
/// kappa = sqrt(lambda sigma_abs^2 / eta) sets how front-loaded it is.
struct ACParams {
    double eta = 1.0;        ///< temporary impact coefficient, currency per (share/time)
    double sigma_abs = 0.0;  ///< absolute volatility, currency per sqrt(time)
    double lambda = 0.0;

    double kappa() const;
    void validate() const;
};

/// Map the exponential model onto the benchmark by linearising around t = 0:
/// sigma_abs = sigma s, eta = eta_h s, with eta_h the temporary-impact
/// coefficient of the exponential model.
ACParams map_to_ac(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob);

/// f(t) = K [1 - sinh(kappa (T - t)) / sinh(kappa T)], or K t / T when kappa = 0.
Trajectory ac_trajectory(const ACParams& params, const ExecutionProblem& prob, std::span<const double> grid);

}  // namespace exectraj
