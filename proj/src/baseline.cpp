#include "exectraj/baseline.hpp"

#include "exectraj/errors.hpp"

#include <cmath>
#include <vector>

namespace exectraj {

double ACParams::kappa() const { return std::sqrt(lambda * sigma_abs * sigma_abs / eta); }

void ACParams::validate() const {
    if (!(eta > 0.0)) throw Error(ErrorCode::invalid_argument, "baseline eta must be > 0");
    if (!(sigma_abs >= 0.0)) throw Error(ErrorCode::invalid_argument, "baseline sigma must be >= 0");
    if (!(lambda >= 0.0)) throw Error(ErrorCode::invalid_argument, "baseline lambda must be >= 0");
}

ACParams map_to_ac(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob) {
    ACParams p;
    p.eta = temporary_coefficient(impact.temporary) * mkt.s;
    p.sigma_abs = mkt.sigma * mkt.s;
    p.lambda = prob.lambda;
    if (!(p.eta > 0.0))
        throw Error(ErrorCode::invalid_argument, "baseline mapping needs a non-zero temporary impact");
    return p;
}

Trajectory ac_trajectory(const ACParams& params, const ExecutionProblem& prob, std::span<const double> grid) {
    params.validate();
    prob.validate();
    if (grid.size() < 2 || grid.front() != 0.0 || std::abs(grid.back() - prob.T) > 1e-12 * prob.T)
        throw Error(ErrorCode::grid_mismatch, "baseline grid must span [0, T]");

    const double kappa = params.kappa();
    const double K = prob.K, T = prob.T;
    std::vector<double> v(grid.size()), r(grid.size());
    // Below this kappa T the sinh ratio is the straight line to double precision.
    const bool linear = kappa * T < 1e-8;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i];
        if (linear) {
            v[i] = K * t / T;
            r[i] = K / T;
        } else {
            const double denom = std::sinh(kappa * T);
            v[i] = K * (1.0 - std::sinh(kappa * (T - t)) / denom);
            r[i] = K * kappa * std::cosh(kappa * (T - t)) / denom;
        }
    }
    v.front() = 0.0;
    v.back() = K;
    return Trajectory(std::vector<double>(grid.begin(), grid.end()), std::move(v), std::move(r));
}

}  // namespace exectraj
