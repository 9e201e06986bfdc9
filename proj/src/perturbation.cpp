#include "exectraj/perturbation.hpp"

#include "exectraj/errors.hpp"
#include "exectraj/moments.hpp"
#include "exectraj/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace exectraj {

namespace {

/// Node-wise ingredients shared by the residual and the first variation.
struct ELFields {
    std::vector<double> F, P, el;    // F, dF/df', F_f - d/du F_f'
    std::vector<double> w, dw;       // e^{s2 t} - 1 and its derivative
    std::vector<double> gamma;       // 1 + 2 lambda int_0^u F w
};

ELFields el_fields(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                   const Trajectory& f) {
    const auto grid = f.grid();
    const auto v = f.values();
    const auto c = f.rates();
    const auto dc = grid_derivative(grid, c);
    const double s2 = mkt.sigma * mkt.sigma;
    const std::size_t n = f.size();

    ELFields out;
    out.F.resize(n);
    out.P.resize(n);
    out.el.resize(n);
    out.w.resize(n);
    out.dw.resize(n);
    std::vector<double> Fw(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto L = lagrangian_terms(impact, mkt, v[i], c[i]);
        out.F[i] = L.F;
        out.P[i] = L.P;
        out.el[i] = L.F_f - (L.P_f * c[i] + L.P_fp * dc[i]);
        out.w[i] = std::expm1(s2 * grid[i]);
        out.dw[i] = s2 * std::exp(s2 * grid[i]);
        Fw[i] = L.F * out.w[i];
    }
    out.gamma = cumulative_corrected_trapezoid(grid, Fw);
    for (double& g : out.gamma) g = 1.0 + 2.0 * prob.lambda * g;
    return out;
}

void check_perturbation(const Trajectory& f, const Trajectory& eta, double K, const char* what) {
    if (!f.same_grid(eta)) {
        std::ostringstream os;
        os << what << ": trajectory and perturbation live on different grids";
        throw Error(ErrorCode::grid_mismatch, os.str());
    }
    const double tol = 1e-9 * std::max(1.0, K);
    if (std::abs(eta.values().front()) > tol || std::abs(eta.values().back()) > tol) {
        std::ostringstream os;
        os << what << ": perturbation must vanish at both ends (got " << eta.values().front() << ", "
           << eta.values().back() << ")";
        throw Error(ErrorCode::boundary_violation, os.str());
    }
}

}  // namespace

// ---------------------------------------------------------------------------

SineBasis::SineBasis(std::size_t modes, double T) : modes_(modes), T_(T) {
    if (modes == 0) throw Error(ErrorCode::invalid_argument, "sine basis needs at least one mode");
    if (!(T > 0.0)) throw Error(ErrorCode::invalid_argument, "sine basis needs T > 0");
}

double SineBasis::value(std::size_t k, double t) const {
    return std::sin(static_cast<double>(k) * std::numbers::pi * t / T_);
}

double SineBasis::slope(std::size_t k, double t) const {
    const double w = static_cast<double>(k) * std::numbers::pi / T_;
    return w * std::cos(w * t);
}

Trajectory SineBasis::expand(std::span<const double> coefficients, std::span<const double> grid) const {
    if (coefficients.size() > modes_) throw Error(ErrorCode::invalid_argument, "too many sine coefficients");
    std::vector<double> v(grid.size(), 0.0), r(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t k = 1; k <= coefficients.size(); ++k) {
            v[i] += coefficients[k - 1] * value(k, grid[i]);
            r[i] += coefficients[k - 1] * slope(k, grid[i]);
        }
    }
    // sin(k pi) is not exactly zero in floating point.
    v.front() = 0.0;
    v.back() = 0.0;
    return Trajectory(std::vector<double>(grid.begin(), grid.end()), std::move(v), std::move(r));
}

std::vector<double> variance_weighted_F(const ImpactSpec& impact, const MarketParams& mkt,
                                        const Trajectory& f) {
    const double s2 = mkt.sigma * mkt.sigma;
    std::vector<double> out(f.size());
    for (std::size_t i = 0; i < f.size(); ++i)
        out[i] = eval_F(impact, mkt, f.values()[i], f.rates()[i]) * std::expm1(s2 * f.grid()[i]);
    return out;
}

void PerturbationConfig::validate() const {
    if (basis_size == 0) throw Error(ErrorCode::invalid_argument, "basis_size must be >= 1");
    if (!(fd_step > 0.0)) throw Error(ErrorCode::invalid_argument, "fd_step must be > 0");
    if (!(grad_tol > 0.0)) throw Error(ErrorCode::invalid_argument, "grad_tol must be > 0");
}

// ---------------------------------------------------------------------------

PerturbationSolution solve_f2(const ImpactSpec& impact, const MarketParams& mkt,
                              const ExecutionProblem& prob, const Trajectory& f1,
                              const PerturbationConfig& cfg) {
    impact.validate();
    mkt.validate();
    prob.validate();
    cfg.validate();
    f1.check_boundary(prob.K, kBoundaryRelTol * std::max(1.0, prob.K));

    const auto grid = f1.grid();
    const SineBasis basis(cfg.basis_size, prob.T);
    const double scale = prob.K * mkt.s;

    auto finish = [&](std::vector<double> coeffs, SolverReport rep) {
        Trajectory f2 = basis.expand(coeffs, grid);
        Trajectory f = f1.plus(f2);
        const auto J = objective(impact, mkt, prob, f);
        rep.objective = J.J;
        rep.expected_shortfall = J.expected_shortfall;
        rep.variance_term = J.variance_term;
        rep.residual_sup = el_residual(impact, mkt, f).reduced_sup_norm();
        rep.thm2_residual_sup = thm2_residual(impact, mkt, prob, f, f2).sup_norm / scale;
        rep.boundary_miss = std::abs(f.values().back() - prob.K);
        const auto rates = f.rates();
        rep.rates_positive = std::all_of(rates.begin(), rates.end(), [](double c) { return c > 0.0; });
        const auto v2 = f2.values();
        rep.dominates_f1 = std::all_of(v2.begin(), v2.end(), [&](double x) { return x >= -1e-12 * prob.K; });
        return PerturbationSolution{std::move(f), std::move(f2), std::move(coeffs), std::move(rep)};
    };

    if (prob.lambda == 0.0 || mkt.sigma == 0.0) {
        SolverReport rep;
        rep.converged = true;
        rep.message = prob.lambda == 0.0 ? "lambda = 0: f2 is identically zero"
                                         : "sigma = 0: variance weight vanishes, f2 is identically zero";
        return finish(std::vector<double>(cfg.basis_size, 0.0), rep);
    }

    const double floor = has_singular_slope(impact.temporary) ? kRateFloor : 0.0;
    const auto c1 = f1.rates();
    const auto v1 = f1.values();
    // Basis sampled once; the objective is evaluated thousands of times.
    std::vector<double> phi(cfg.basis_size * grid.size()), dphi(cfg.basis_size * grid.size());
    for (std::size_t k = 0; k < cfg.basis_size; ++k)
        for (std::size_t i = 0; i < grid.size(); ++i) {
            phi[k * grid.size() + i] = basis.value(k + 1, grid[i]);
            dphi[k * grid.size() + i] = basis.slope(k + 1, grid[i]);
        }
    std::vector<double> v(grid.size()), r(grid.size());
    std::vector<double> g(grid.begin(), grid.end());
    // The trapezoid J is second order, so its minimiser carries an O(h^2)
    // gradient error. Extrapolating against every other node removes it.
    const bool richardson = grid.size() >= 9 && (grid.size() - 1) % 2 == 0 && is_uniform(grid);
    std::vector<double> gc, vc, rc;
    if (richardson) {
        for (std::size_t i = 0; i < grid.size(); i += 2) gc.push_back(grid[i]);
        vc.resize(gc.size());
        rc.resize(gc.size());
    }

    // The integral form avoids the E[xi^2] - E[xi]^2 cancellation, which would
    // otherwise dominate the finite-difference gradient noise.
    auto J_of = [&](std::span<const double> x) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double dv = 0.0, dr = 0.0;
            for (std::size_t k = 0; k < x.size(); ++k) {
                dv += x[k] * phi[k * grid.size() + i];
                dr += x[k] * dphi[k * grid.size() + i];
            }
            v[i] = v1[i] + prob.K * dv;
            r[i] = c1[i] + prob.K * dr;
            if (!(r[i] >= floor)) return std::numeric_limits<double>::infinity();
        }
        v.front() = v1.front();
        v.back() = v1.back();
        try {
            const Trajectory f(g, v, r);
            const double fine = objective_integral_form(impact, mkt, prob, f);
            if (!richardson) return fine / scale;
            for (std::size_t i = 0; i < gc.size(); ++i) {
                vc[i] = v[2 * i];
                rc[i] = r[2 * i];
            }
            const double coarse = objective_integral_form(impact, mkt, prob, Trajectory(gc, vc, rc));
            return (4.0 * fine - coarse) / (3.0 * scale);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::overflow || e.code() == ErrorCode::singular_derivative)
                return std::numeric_limits<double>::infinity();
            throw;
        }
    };

    MinimizeOptions opt;
    opt.max_iter = cfg.max_iter;
    opt.grad_tol = cfg.grad_tol;
    opt.fd_step = cfg.fd_step;
    const auto res = minimize_bfgs(J_of, std::vector<double>(cfg.basis_size, 0.0), opt);

    std::vector<double> coeffs(res.x.size());
    for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] = prob.K * res.x[k];
    SolverReport rep;
    rep.converged = res.converged;
    rep.iterations = res.iterations;
    rep.gradient_norm = res.grad_norm;
    std::ostringstream os;
    if (res.converged)
        os << "converged";
    else
        os << "quasi-Newton stopped after " << res.iterations << " iterations with gradient norm "
           << res.grad_norm;
    rep.message = os.str();
    return finish(std::move(coeffs), rep);
}

// ---------------------------------------------------------------------------

Thm2Residual thm2_residual(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                           const Trajectory& f, const Trajectory& f2) {
    check_perturbation(f, f2, prob.K, "integro-differential residual");
    const auto grid = f.grid();
    const auto e = el_fields(impact, mkt, prob, f);
    const auto eta = f2.values();
    const std::size_t n = f.size();

    std::vector<double> integrand(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double el1 = e.w[i] * e.el[i] - e.dw[i] * e.P[i];
        integrand[i] = eta[i] * el1;
    }
    const auto inner = cumulative_corrected_trapezoid(grid, integrand);

    Thm2Residual out;
    out.grid.assign(grid.begin(), grid.end());
    out.profile.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.profile[i] = eta[i] * e.gamma[i] * e.el[i] + 2.0 * prob.lambda * inner[i] * e.F[i];
        if (i > 0 && i + 1 < n) out.sup_norm = std::max(out.sup_norm, std::abs(out.profile[i]));
    }
    return out;
}

double first_variation(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                       const Trajectory& f, const Trajectory& eta) {
    check_perturbation(f, eta, prob.K, "first variation");
    const auto grid = f.grid();
    const auto e = el_fields(impact, mkt, prob, f);
    const auto h = eta.values();
    const std::size_t n = f.size();

    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = h[i] * e.w[i] * e.el[i];
        b[i] = h[i] * e.P[i] * e.dw[i];
    }
    const auto A = cumulative_corrected_trapezoid(grid, a);
    const auto B = cumulative_corrected_trapezoid(grid, b);

    std::vector<double> t1(n), t2(n), t3(n);
    for (std::size_t i = 0; i < n; ++i) {
        t1[i] = 2.0 * prob.lambda * A[i] * e.F[i];
        t2[i] = -2.0 * prob.lambda * B[i] * e.F[i];
        t3[i] = e.gamma[i] * h[i] * e.el[i];
    }
    return cumulative_corrected_trapezoid(grid, t1).back() + cumulative_corrected_trapezoid(grid, t2).back() +
           cumulative_corrected_trapezoid(grid, t3).back();
}

}  // namespace exectraj
