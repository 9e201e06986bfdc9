#include "exectraj/moments.hpp"

#include "exectraj/errors.hpp"
#include "exectraj/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace exectraj {

namespace {

std::vector<double> F_nodes(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj) {
    const auto v = traj.values();
    const auto c = traj.rates();
    std::vector<double> F(traj.size());
    for (std::size_t i = 0; i < F.size(); ++i) F[i] = eval_F(impact, mkt, v[i], c[i]);
    return F;
}

std::vector<double> weighted(std::span<const double> grid, std::span<const double> F, double sigma2,
                             bool minus_one) {
    std::vector<double> out(F.size());
    for (std::size_t i = 0; i < F.size(); ++i)
        out[i] = F[i] * (minus_one ? std::expm1(sigma2 * grid[i]) : std::exp(sigma2 * grid[i]));
    return out;
}

double node_interp(const MomentProfile& p, const std::vector<double>& y, double t) {
    const auto it = std::lower_bound(p.grid.begin(), p.grid.end(), t);
    if (it == p.grid.begin()) return y.front();
    if (it == p.grid.end()) return y.back();
    const std::size_t k = static_cast<std::size_t>(it - p.grid.begin());
    if (*it == t) return y[k];
    const double w = (t - p.grid[k - 1]) / (p.grid[k] - p.grid[k - 1]);
    return y[k - 1] + w * (y[k] - y[k - 1]);
}

void check_time(const Trajectory& traj, double t) {
    const double T = traj.horizon();
    if (!(t >= 0.0) || t > T * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "evaluation time " << t << " outside [0, " << T << "]";
        throw Error(ErrorCode::invalid_argument, os.str());
    }
}

}  // namespace

MomentProfile moment_profile(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj) {
    const auto grid = traj.grid();
    const auto F = F_nodes(impact, mkt, traj);
    const auto a = trapezoid_panels(grid, F);
    const auto b = trapezoid_panels(grid, weighted(grid, F, mkt.sigma * mkt.sigma, false));
    const auto d = trapezoid_panels(grid, weighted(grid, F, mkt.sigma * mkt.sigma, true));

    MomentProfile p;
    p.grid.assign(grid.begin(), grid.end());
    p.mean.assign(grid.size(), 0.0);
    p.second.assign(grid.size(), 0.0);
    p.variance.assign(grid.size(), 0.0);
    // Since 2 sum a_i (A_i + a_i / 2) = (sum a_i)^2 exactly, splitting
    // e^{s2 t} = 1 + expm1(s2 t) leaves the variance as a sum of non-negative
    // terms, free of the second - mean^2 cancellation.
    CompensatedSum A, B, D, second, var;
    for (std::size_t i = 0; i < a.size(); ++i) {
        second.add(2.0 * a[i] * (B.value() + 0.5 * b[i]));
        var.add(2.0 * a[i] * (D.value() + 0.5 * d[i]));
        A.add(a[i]);
        B.add(b[i]);
        D.add(d[i]);
        p.mean[i + 1] = A.value();
        p.second[i + 1] = second.value();
        p.variance[i + 1] = var.value();
    }
    return p;
}

double mean_xi(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj, double t) {
    check_time(traj, t);
    const auto p = moment_profile(impact, mkt, traj);
    return node_interp(p, p.mean, t);
}

double second_moment_xi(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                        double t) {
    check_time(traj, t);
    const auto p = moment_profile(impact, mkt, traj);
    return node_interp(p, p.second, t);
}

MomentResult moments_xi(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                        double t) {
    check_time(traj, t);
    const auto p = moment_profile(impact, mkt, traj);
    MomentResult r;
    r.t = t;
    r.mean = node_interp(p, p.mean, t);
    r.second = node_interp(p, p.second, t);
    r.variance = node_interp(p, p.variance, t);
    if (r.variance < 0.0) {
        if (r.variance < -kVarianceSlack * r.mean * r.mean) {
            std::ostringstream os;
            os << "negative variance " << r.variance << " at t = " << t << " (mean " << r.mean << ")";
            throw Error(ErrorCode::quadrature, os.str());
        }
        r.variance = 0.0;
    }
    return r;
}

ObjectiveValue objective(const ImpactSpec& impact, const MarketParams& mkt, const ExecutionProblem& prob,
                         const Trajectory& traj) {
    traj.check_boundary(prob.K, kBoundaryRelTol * std::max(1.0, prob.K));
    ObjectiveValue out;
    out.moments = moments_xi(impact, mkt, traj, traj.horizon());
    out.expected_shortfall = out.moments.mean - prob.K * mkt.s;
    out.variance_term = prob.lambda * out.moments.variance;
    out.J = out.expected_shortfall + out.variance_term;
    return out;
}

double objective_integral_form(const ImpactSpec& impact, const MarketParams& mkt,
                               const ExecutionProblem& prob, const Trajectory& traj) {
    traj.check_boundary(prob.K, kBoundaryRelTol * std::max(1.0, prob.K));
    const auto grid = traj.grid();
    const auto F = F_nodes(impact, mkt, traj);
    const auto a = trapezoid_panels(grid, F);
    const auto w = trapezoid_panels(grid, weighted(grid, F, mkt.sigma * mkt.sigma, true));

    CompensatedSum total, inner;
    for (std::size_t i = 0; i < a.size(); ++i) {
        total.add(a[i] * (2.0 * prob.lambda * (inner.value() + 0.5 * w[i]) + 1.0));
        inner.add(w[i]);
    }
    return total.value() - prob.K * mkt.s;
}

}  // namespace exectraj
