#pragma once

#include "exectraj/model.hpp"

#include <vector>

namespace exectraj {

/// First two moments of the accumulated spend xi_t = int_0^t c(u) S_u du.
struct MomentResult {
    double t = 0.0;
    double mean = 0.0;
    double second = 0.0;
    double variance = 0.0;  ///< second - mean^2 without the cancellation; clamped at 0 within slack
};

/// Markowitz objective J = E[Y] + lambda V[Y] with Y = xi_T - K s.
struct ObjectiveValue {
    double J = 0.0;
    double expected_shortfall = 0.0;
    double variance_term = 0.0;
    MomentResult moments;
};

/// Node-wise moment profile on the trajectory grid.
struct MomentProfile {
    std::vector<double> grid;
    std::vector<double> mean;
    std::vector<double> second;
    std::vector<double> variance;
};

// The quadrature works panel by panel on the trajectory's own grid. With
// a_i, b_i the trapezoid panel integrals of F(u) and F(u) e^{sigma^2 u}, and
// A_i, B_i their prefix sums,
//
//   E[xi]   = sum_i a_i
//   E[xi^2] = 2 sum_i a_i (B_i + b_i / 2)
//
// which is second-order accurate and reproduces (int F)^2 = 2 int F int F
// exactly when sigma = 0, so the variance of a deterministic price is zero to
// rounding. The variance itself is accumulated from the F (e^{sigma^2 u} - 1)
// panels, which gives the same number without the cancellation. The
// permanent-impact integral int_0^u g(c) is alpha f(u).

MomentProfile moment_profile(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj);

double mean_xi(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj, double t);
double second_moment_xi(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                        double t);
MomentResult moments_xi(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                        double t);

/// Relative tolerance on f(T) = K used by the objective evaluators.
inline constexpr double kBoundaryRelTol = 1e-6;

ObjectiveValue objective(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                         const Trajectory& traj);

/// J evaluated as int_0^T (2 lambda int_0^u F (e^{sigma^2 v} - 1) dv + 1) F du - K s.
double objective_integral_form(const ImpactSpec& impact, const MarketParams& mkt,
                               const ExecutionProblem& prob, const Trajectory& traj);

/// Variance slack: negative variance above -kVarianceSlack * mean^2 is clamped.
inline constexpr double kVarianceSlack = 1e-9;

}  // namespace exectraj
