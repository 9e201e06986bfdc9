#include "exectraj/numerics.hpp"

#include "exectraj/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace exectraj {

void CompensatedSum::add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
        carry_ += (sum_ - t) + x;
    else
        carry_ += (x - t) + sum_;
    sum_ = t;
}

void CompensatedSum::merge(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.carry_);
}

std::vector<double> trapezoid_panels(std::span<const double> grid, std::span<const double> y) {
    if (grid.size() != y.size() || grid.size() < 2)
        throw Error(ErrorCode::grid_mismatch, "trapezoid: grid and integrand differ in length");
    std::vector<double> out(grid.size() - 1);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        out[i] = 0.5 * (grid[i + 1] - grid[i]) * (y[i] + y[i + 1]);
    return out;
}

std::vector<double> cumulative_trapezoid(std::span<const double> grid, std::span<const double> y) {
    const auto panels = trapezoid_panels(grid, y);
    std::vector<double> out(grid.size(), 0.0);
    CompensatedSum acc;
    for (std::size_t i = 0; i < panels.size(); ++i) {
        acc.add(panels[i]);
        out[i + 1] = acc.value();
    }
    return out;
}

std::vector<double> cumulative_corrected_trapezoid(std::span<const double> grid, std::span<const double> y) {
    const auto panels = trapezoid_panels(grid, y);
    if (grid.size() < 3) return cumulative_trapezoid(grid, y);
    const auto dy = grid_derivative(grid, y);
    std::vector<double> out(grid.size(), 0.0);
    CompensatedSum acc;
    for (std::size_t i = 0; i < panels.size(); ++i) {
        const double h = grid[i + 1] - grid[i];
        acc.add(panels[i] - h * h / 12.0 * (dy[i + 1] - dy[i]));
        out[i + 1] = acc.value();
    }
    return out;
}

bool is_uniform(std::span<const double> grid, double rel_tol) {
    if (grid.size() < 3) return true;
    const double h = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (std::abs((grid[i + 1] - grid[i]) - h) > rel_tol * h) return false;
    return true;
}

std::vector<double> grid_derivative(std::span<const double> grid, std::span<const double> y) {
    const std::size_t n = grid.size();
    if (n != y.size() || n < 2) throw Error(ErrorCode::grid_mismatch, "derivative: bad grid");
    std::vector<double> d(n);
    if (n == 2) {
        d[0] = d[1] = (y[1] - y[0]) / (grid[1] - grid[0]);
        return d;
    }
    if (n >= 5 && is_uniform(grid)) {
        const double h12 = 12.0 * (grid.back() - grid.front()) / static_cast<double>(n - 1);
        d[0] = (-25 * y[0] + 48 * y[1] - 36 * y[2] + 16 * y[3] - 3 * y[4]) / h12;
        d[1] = (-3 * y[0] - 10 * y[1] + 18 * y[2] - 6 * y[3] + y[4]) / h12;
        for (std::size_t i = 2; i + 2 < n; ++i)
            d[i] = (y[i - 2] - 8 * y[i - 1] + 8 * y[i + 1] - y[i + 2]) / h12;
        const std::size_t m = n - 1;
        d[m - 1] = (3 * y[m] + 10 * y[m - 1] - 18 * y[m - 2] + 6 * y[m - 3] - y[m - 4]) / h12;
        d[m] = (25 * y[m] - 48 * y[m - 1] + 36 * y[m - 2] - 16 * y[m - 3] + 3 * y[m - 4]) / h12;
        return d;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h1 = grid[i] - grid[i - 1], h2 = grid[i + 1] - grid[i];
        d[i] = -h2 / (h1 * (h1 + h2)) * y[i - 1] + (h2 - h1) / (h1 * h2) * y[i] +
               h1 / (h2 * (h1 + h2)) * y[i + 1];
    }
    {
        const double h1 = grid[1] - grid[0], h2 = grid[2] - grid[1];
        d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * y[0] + (h1 + h2) / (h1 * h2) * y[1] -
               h1 / (h2 * (h1 + h2)) * y[2];
    }
    {
        const std::size_t m = n - 1;
        const double h2 = grid[m] - grid[m - 1], h1 = grid[m - 1] - grid[m - 2];
        d[m] = (2 * h2 + h1) / (h2 * (h1 + h2)) * y[m] - (h1 + h2) / (h1 * h2) * y[m - 1] +
               h2 / (h1 * (h1 + h2)) * y[m - 2];
    }
    return d;
}

// ---------------------------------------------------------------------------

namespace {

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

MinimizeResult minimize_bfgs(const std::function<double(std::span<const double>)>& objective,
                             std::vector<double> x0, const MinimizeOptions& options) {
    const std::size_t n = x0.size();
    MinimizeResult res;
    res.x = std::move(x0);

    auto eval = [&](std::span<const double> x) {
        ++res.evaluations;
        return objective(x);
    };
    auto gradient = [&](std::vector<double>& x) {
        std::vector<double> g(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double keep = x[k];
            x[k] = keep + options.fd_step;
            const double up = eval(x);
            x[k] = keep - options.fd_step;
            const double down = eval(x);
            x[k] = keep;
            g[k] = (up - down) / (2.0 * options.fd_step);
        }
        return g;
    };

    res.value = eval(res.x);
    if (!std::isfinite(res.value))
        throw Error(ErrorCode::invalid_argument, "BFGS starting point is infeasible");
    if (n == 0) {
        res.converged = true;
        return res;
    }

    std::vector<double> g = gradient(res.x);
    // Inverse Hessian approximation, row-major.
    std::vector<double> H(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) H[i * n + i] = 1.0;
    bool scaled = false;

    for (res.iterations = 0; res.iterations < options.max_iter; ++res.iterations) {
        res.grad_norm = inf_norm(g);
        if (!std::isfinite(res.grad_norm)) break;
        if (res.grad_norm <= options.grad_tol) {
            res.converged = true;
            return res;
        }

        std::vector<double> p(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) p[i] -= H[i * n + j] * g[j];
        double slope = dot(p, g);
        if (!(slope < 0.0)) {
            std::fill(H.begin(), H.end(), 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                H[i * n + i] = 1.0;
                p[i] = -g[i];
            }
            slope = dot(p, g);
        }

        double step = 1.0;
        std::vector<double> trial(n);
        double f_trial = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) trial[i] = res.x[i] + step * p[i];
            f_trial = eval(trial);
            if (std::isfinite(f_trial) && f_trial <= res.value + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        std::vector<double> g_new = gradient(trial);
        std::vector<double> s(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = trial[i] - res.x[i];
            y[i] = g_new[i] - g[i];
        }
        res.x = trial;
        res.value = f_trial;
        g = std::move(g_new);

        const double sy = dot(s, y);
        if (sy <= 1e-300) continue;
        if (!scaled) {
            const double gamma = sy / dot(y, y);
            for (std::size_t i = 0; i < n; ++i) H[i * n + i] = gamma;
            scaled = true;
        }
        std::vector<double> Hy(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) Hy[i] += H[i * n + j] * y[j];
        const double yHy = dot(y, Hy);
        const double rho = 1.0 / sy;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                H[i * n + j] += rho * ((1.0 + rho * yHy) * s[i] * s[j] - Hy[i] * s[j] - s[i] * Hy[j]);
    }

    res.grad_norm = inf_norm(g);
    res.converged = res.grad_norm <= options.grad_tol;
    return res;
}

}  // namespace exectraj
