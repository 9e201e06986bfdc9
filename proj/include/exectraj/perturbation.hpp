#pragma once

#include "exectraj/model.hpp"
#include "exectraj/variational.hpp"

#include <span>
#include <vector>

namespace exectraj {

/// phi_k(u) = sin(k pi u / T), k = 1..modes. Every element vanishes at 0 and T.
class SineBasis {
public:
    SineBasis(std::size_t modes, double T);

    std::size_t modes() const { return modes_; }
    double value(std::size_t k, double t) const;
    double slope(std::size_t k, double t) const;

    /// sum_k coefficients[k-1] phi_k sampled on `grid`.
    Trajectory expand(std::span<const double> coefficients, std::span<const double> grid) const;

private:
    std::size_t modes_;
    double T_;
};

/// F^1(v) = F(f(v), f'(v)) (e^{sigma^2 v} - 1) sampled on the trajectory grid.
std::vector<double> variance_weighted_F(const ImpactSpec& impact, const MarketParams& mkt,
                                        const Trajectory& f);

struct PerturbationConfig {
    std::size_t basis_size = 8;
    double fd_step = 1e-6;        ///< finite-difference step, in units of K
    std::size_t max_iter = 500;
    double grad_tol = 1e-6;       ///< on dJ/da, with J in units of K s and a in units of K

    void validate() const;
};

struct PerturbationSolution {
    Trajectory f;   ///< f1 + f2
    Trajectory f2;
    std::vector<double> coefficients;  ///< a_k in shares
    SolverReport report;
};

/// Minimises J(f1 + sum a_k phi_k) over the sine coefficients with BFGS.
/// Non-convergence is reported through report.converged, not thrown.
PerturbationSolution solve_f2(const ImpactSpec& impact, const MarketParams& mkt,
                              const ExecutionProblem& prob, const Trajectory& f1,
                              const PerturbationConfig& cfg = {});

struct Thm2Residual {
    std::vector<double> grid;     ///< every node of the trajectory grid
    std::vector<double> profile;  ///< left-hand side of the integro-differential identity
    double sup_norm = 0.0;        ///< over interior nodes
};

/// f2(u) Gamma(u) [F_f - d/du F_f'] + 2 lambda F(u) int_0^u f2 [F^1_f - d/dv F^1_f'] dv
/// with Gamma(u) = 1 + 2 lambda int_0^u F^1. The bracket for F^1 includes the
/// derivative of the (e^{sigma^2 v} - 1) weight.
Thm2Residual thm2_residual(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                           const Trajectory& f, const Trajectory& f2);

/// dJ(f + eps eta)/d eps at eps = 0 from the integrated-by-parts expansion
///   int (2 lambda int_0^u eta w [EL] dv) F du
/// - int (2 lambda int_0^u eta F_f' sigma^2 e^{sigma^2 v} dv) F du
/// + int Gamma eta [EL] du,                       w(v) = e^{sigma^2 v} - 1.
double first_variation(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                       const Trajectory& f, const Trajectory& eta);

}  // namespace exectraj
