#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace exectraj {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept;
    void merge(const CompensatedSum& other) noexcept;
    double value() const noexcept { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

/// Per-panel trapezoid integrals: out[i] = (t[i+1]-t[i]) (y[i]+y[i+1]) / 2.
std::vector<double> trapezoid_panels(std::span<const double> grid, std::span<const double> y);

/// Running trapezoid integral with out[0] = 0.
std::vector<double> cumulative_trapezoid(std::span<const double> grid, std::span<const double> y);

/// Running trapezoid integral with the Euler-Maclaurin end correction
/// -h^2/12 (y'(t_{i+1}) - y'(t_i)) per panel, y' from grid_derivative. Fourth
/// order on uniform grids for smooth integrands.
std::vector<double> cumulative_corrected_trapezoid(std::span<const double> grid, std::span<const double> y);

bool is_uniform(std::span<const double> grid, double rel_tol = 1e-9);

/// dy/dt at every node. Fourth-order stencils on uniform grids (one-sided
/// near the ends), second-order three-point formulas otherwise.
std::vector<double> grid_derivative(std::span<const double> grid, std::span<const double> y);

struct MinimizeOptions {
    std::size_t max_iter = 500;
    double grad_tol = 1e-7;       ///< on the infinity norm of the gradient
    double fd_step = 1e-6;        ///< central-difference step per coordinate
};

struct MinimizeResult {
    std::vector<double> x;
    double value = 0.0;
    double grad_norm = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

/// BFGS with Armijo backtracking and central finite-difference gradients.
/// The objective may return +inf to mark infeasible points.
MinimizeResult minimize_bfgs(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> x0, const MinimizeOptions& options = {});

}  // namespace exectraj
