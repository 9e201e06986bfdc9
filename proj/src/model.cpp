#include "exectraj/model.hpp"

#include "exectraj/errors.hpp"
#include "exectraj/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace exectraj {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

void require_rate(double x, const char* what) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
        std::ostringstream os;
        os << what << ": rate must be finite and >= 0, got " << x;
        fail(ErrorCode::invalid_argument, os.str());
    }
}

// Central differences for the tabulated family.
double fd_step(double x, double rel) { return rel * std::max(1.0, x); }

double tab_slope(const TabulatedImpact& h, double x) {
    const double d = fd_step(x, 1e-5);
    if (x < d) return (h(x + d) - h(x)) / d;
    return (h(x + d) - h(x - d)) / (2.0 * d);
}

double tab_curvature(const TabulatedImpact& h, double x) {
    const double d = fd_step(x, 1e-4);
    const double c = std::max(x, d);
    return (h(c + d) - 2.0 * h(c) + h(c - d)) / (d * d);
}

double guarded_exp(double exponent, double cap) {
    if (!(exponent <= cap)) {
        std::ostringstream os;
        os << "exponent " << exponent << " exceeds cap " << cap;
        fail(ErrorCode::overflow, os.str());
    }
    return std::exp(exponent);
}

}  // namespace

// ---------------------------------------------------------------------------

TabulatedImpact::TabulatedImpact(std::vector<double> rates, std::vector<double> values)
    : x_(std::move(rates)), y_(std::move(values)) {
    if (x_.size() < 2 || x_.size() != y_.size())
        fail(ErrorCode::invalid_argument, "tabulated impact needs >= 2 knots of equal length");
    if (x_.front() != 0.0 || y_.front() != 0.0)
        fail(ErrorCode::invalid_argument, "tabulated impact must start at (0, 0)");
    for (std::size_t i = 0; i < x_.size(); ++i) {
        if (!std::isfinite(x_[i]) || !std::isfinite(y_[i]))
            fail(ErrorCode::invalid_argument, "tabulated impact knots must be finite");
        if (i > 0 && !(x_[i] > x_[i - 1]))
            fail(ErrorCode::invalid_argument, "tabulated impact rates must be strictly increasing");
    }

    const std::size_t n = x_.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = x_[k + 1] - x_[k];
        delta[k] = (y_[k + 1] - y_[k]) / h[k];
    }
    slopes_.assign(n, 0.0);
    slopes_.front() = delta.front();
    slopes_.back() = delta.back();
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (delta[k - 1] * delta[k] <= 0.0) continue;
        const double w1 = 2.0 * h[k] + h[k - 1];
        const double w2 = h[k] + 2.0 * h[k - 1];
        slopes_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
}

double TabulatedImpact::operator()(double x) const {
    if (x >= x_.back()) return y_.back() + slopes_.back() * (x - x_.back());
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    const std::size_t k = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[k + 1] - x_[k];
    const double t = (x - x_[k]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[k] + h10 * h * slopes_[k] + h01 * y_[k + 1] + h11 * h * slopes_[k + 1];
}

// ---------------------------------------------------------------------------

void ImpactSpec::validate() const {
    if (!(permanent.alpha >= 0.0) || !std::isfinite(permanent.alpha))
        fail(ErrorCode::invalid_argument, "permanent impact slope alpha must be >= 0");
    std::visit(Overloaded{
                   [](const ZeroImpact&) {},
                   [](const LinearImpact& l) {
                       if (!(l.eta >= 0.0) || !std::isfinite(l.eta))
                           fail(ErrorCode::invalid_argument, "linear impact eta must be >= 0");
                   },
                   [](const PowerImpact& p) {
                       if (!(p.eta >= 0.0) || !std::isfinite(p.eta))
                           fail(ErrorCode::invalid_argument, "power impact eta must be >= 0");
                       if (!(p.exponent > 0.0 && p.exponent <= 1.0))
                           fail(ErrorCode::invalid_argument, "power impact exponent must lie in (0, 1]");
                   },
                   [](const TabulatedImpact&) {},
               },
               temporary);
}

double temporary_value(const TemporaryImpact& h, double x) {
    require_rate(x, "temporary impact");
    return std::visit(Overloaded{
                          [](const ZeroImpact&) { return 0.0; },
                          [x](const LinearImpact& l) { return l.eta * x; },
                          [x](const PowerImpact& p) {
                              return p.exponent == 1.0 ? p.eta * x : p.eta * std::pow(x, p.exponent);
                          },
                          [x](const TabulatedImpact& t) { return t(x); },
                      },
                      h);
}

double temporary_slope(const TemporaryImpact& h, double x) {
    require_rate(x, "temporary impact slope");
    return std::visit(Overloaded{
                          [](const ZeroImpact&) { return 0.0; },
                          [](const LinearImpact& l) { return l.eta; },
                          [x](const PowerImpact& p) {
                              if (p.exponent == 1.0) return p.eta;
                              if (x < kRateFloor) {
                                  std::ostringstream os;
                                  os << "power impact slope is singular at rate " << x
                                     << " (floor " << kRateFloor << ")";
                                  fail(ErrorCode::singular_derivative, os.str());
                              }
                              return p.eta * p.exponent * std::pow(x, p.exponent - 1.0);
                          },
                          [x](const TabulatedImpact& t) { return tab_slope(t, x); },
                      },
                      h);
}

double temporary_curvature(const TemporaryImpact& h, double x) {
    require_rate(x, "temporary impact curvature");
    return std::visit(Overloaded{
                          [](const ZeroImpact&) { return 0.0; },
                          [](const LinearImpact&) { return 0.0; },
                          [x](const PowerImpact& p) {
                              if (p.exponent == 1.0) return 0.0;
                              if (x < kRateFloor)
                                  fail(ErrorCode::singular_derivative,
                                       "power impact curvature is singular near zero rate");
                              return p.eta * p.exponent * (p.exponent - 1.0) *
                                     std::pow(x, p.exponent - 2.0);
                          },
                          [x](const TabulatedImpact& t) { return tab_curvature(t, x); },
                      },
                      h);
}

bool has_singular_slope(const TemporaryImpact& h) {
    const auto* p = std::get_if<PowerImpact>(&h);
    return p != nullptr && p->exponent < 1.0 && p->eta > 0.0;
}

bool is_zero_impact(const TemporaryImpact& h) {
    return std::visit(Overloaded{
                          [](const ZeroImpact&) { return true; },
                          [](const LinearImpact& l) { return l.eta == 0.0; },
                          [](const PowerImpact& p) { return p.eta == 0.0; },
                          [](const TabulatedImpact& t) {
                              return std::all_of(t.values().begin(), t.values().end(),
                                                 [](double y) { return y == 0.0; });
                          },
                      },
                      h);
}

double temporary_coefficient(const TemporaryImpact& h) {
    return std::visit(Overloaded{
                          [](const ZeroImpact&) { return 0.0; },
                          [](const LinearImpact& l) { return l.eta; },
                          [](const PowerImpact& p) { return p.eta; },
                          [](const TabulatedImpact& t) { return tab_slope(t, 0.0); },
                      },
                      h);
}

double eval_impact(const ImpactSpec& spec, ImpactKind which, double x) {
    if (which == ImpactKind::permanent) {
        require_rate(x, "permanent impact");
        return spec.permanent.alpha * x;
    }
    return temporary_value(spec.temporary, x);
}

// ---------------------------------------------------------------------------

void MarketParams::validate() const {
    if (!(s > 0.0) || !std::isfinite(s))
        fail(ErrorCode::invalid_argument, "initial price s must be > 0");
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        fail(ErrorCode::invalid_argument, "volatility sigma must be >= 0");
}

void ExecutionProblem::validate() const {
    if (!(K > 0.0) || !std::isfinite(K)) fail(ErrorCode::invalid_argument, "order size K must be > 0");
    if (!(T > 0.0) || !std::isfinite(T)) fail(ErrorCode::invalid_argument, "horizon T must be > 0");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        fail(ErrorCode::invalid_argument, "risk aversion lambda must be >= 0");
}

// ---------------------------------------------------------------------------

std::vector<double> uniform_grid(double T, std::size_t steps) {
    if (steps == 0 || !(T > 0.0)) fail(ErrorCode::invalid_argument, "grid needs T > 0 and >= 1 step");
    std::vector<double> g(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i)
        g[i] = T * static_cast<double>(i) / static_cast<double>(steps);
    g.back() = T;
    return g;
}

Trajectory::Trajectory(std::vector<double> grid, std::vector<double> values, std::vector<double> rates)
    : grid_(std::move(grid)), values_(std::move(values)), rates_(std::move(rates)) {
    if (grid_.size() < 2) fail(ErrorCode::invalid_argument, "trajectory needs at least 2 nodes");
    if (values_.size() != grid_.size() || rates_.size() != grid_.size())
        fail(ErrorCode::invalid_argument, "trajectory columns differ in length");
    if (grid_.front() != 0.0) fail(ErrorCode::invalid_argument, "trajectory grid must start at 0");
    for (std::size_t i = 0; i < grid_.size(); ++i) {
        if (!std::isfinite(grid_[i]) || !std::isfinite(values_[i]) || !std::isfinite(rates_[i]))
            fail(ErrorCode::invalid_argument, "trajectory contains non-finite entries");
        if (i > 0 && !(grid_[i] > grid_[i - 1]))
            fail(ErrorCode::invalid_argument, "trajectory grid must be strictly increasing");
    }
}

Trajectory Trajectory::uniform(double K, double T, std::size_t steps) {
    auto g = uniform_grid(T, steps);
    std::vector<double> v(g.size()), r(g.size(), K / T);
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = K * g[i] / T;
    v.back() = K;
    return Trajectory(std::move(g), std::move(v), std::move(r));
}

Trajectory Trajectory::from_rates(std::vector<double> grid, std::vector<double> rates) {
    auto v = cumulative_trapezoid(grid, rates);
    return Trajectory(std::move(grid), std::move(v), std::move(rates));
}

Trajectory Trajectory::resampled(std::span<const double> grid) const {
    if (grid.empty() || grid.front() != 0.0 || std::abs(grid.back() - horizon()) > 1e-12 * horizon())
        fail(ErrorCode::grid_mismatch, "resampling grid must span the trajectory horizon");
    std::vector<double> v(grid.size()), r(grid.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = std::min(grid[i], horizon());
        while (k + 2 < grid_.size() && grid_[k + 1] < t) ++k;
        const double w = (t - grid_[k]) / (grid_[k + 1] - grid_[k]);
        v[i] = values_[k] + w * (values_[k + 1] - values_[k]);
        r[i] = rates_[k] + w * (rates_[k + 1] - rates_[k]);
    }
    return Trajectory(std::vector<double>(grid.begin(), grid.end()), std::move(v), std::move(r));
}

bool Trajectory::same_grid(const Trajectory& other, double tol) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
        if (std::abs(grid_[i] - other.grid_[i]) > tol * std::max(1.0, horizon())) return false;
    return true;
}

double Trajectory::trapezoid_mismatch() const {
    const auto integrated = cumulative_trapezoid(grid_, rates_);
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i)
        worst = std::max(worst, std::abs(integrated[i] - values_[i]));
    return worst;
}

void Trajectory::check_boundary(double K, double tol) const {
    if (std::abs(values_.front()) > tol || std::abs(values_.back() - K) > tol) {
        std::ostringstream os;
        os << "trajectory must satisfy f(0) = 0 and f(T) = " << K << " within " << tol << ", got f(0) = "
           << values_.front() << ", f(T) = " << values_.back();
        fail(ErrorCode::boundary_violation, os.str());
    }
}

Trajectory Trajectory::plus(const Trajectory& other) const {
    if (!same_grid(other)) fail(ErrorCode::grid_mismatch, "trajectories live on different grids");
    std::vector<double> v(size()), r(size());
    for (std::size_t i = 0; i < size(); ++i) {
        v[i] = values_[i] + other.values_[i];
        r[i] = rates_[i] + other.rates_[i];
    }
    return Trajectory(grid_, std::move(v), std::move(r));
}

Trajectory Trajectory::minus(const Trajectory& other) const {
    if (!same_grid(other)) fail(ErrorCode::grid_mismatch, "trajectories live on different grids");
    std::vector<double> v(size()), r(size());
    for (std::size_t i = 0; i < size(); ++i) {
        v[i] = values_[i] - other.values_[i];
        r[i] = rates_[i] - other.rates_[i];
    }
    return Trajectory(grid_, std::move(v), std::move(r));
}

// ---------------------------------------------------------------------------

double eval_F(const ImpactSpec& impact, const MarketParams& mkt, double f, double fp, double exponent_cap) {
    require_rate(fp, "F");
    if (fp == 0.0) return 0.0;
    return mkt.s * fp * guarded_exp(impact.alpha() * f + temporary_value(impact.temporary, fp), exponent_cap);
}

FPartials eval_F_partials(const ImpactSpec& impact, const MarketParams& mkt, double f, double fp,
                          double exponent_cap) {
    require_rate(fp, "F partials");
    const double e =
        mkt.s * guarded_exp(impact.alpha() * f + temporary_value(impact.temporary, fp), exponent_cap);
    const double slope = temporary_slope(impact.temporary, fp);
    return {impact.alpha() * fp * e, e * (1.0 + fp * slope)};
}

LagrangianTerms lagrangian_terms(const ImpactSpec& impact, const MarketParams& mkt, double f, double fp,
                                 double exponent_cap) {
    require_rate(fp, "Lagrangian");
    const double alpha = impact.alpha();
    const double e = mkt.s * guarded_exp(alpha * f + temporary_value(impact.temporary, fp), exponent_cap);
    const double h1 = temporary_slope(impact.temporary, fp);
    const double h2 = temporary_curvature(impact.temporary, fp);
    LagrangianTerms out;
    out.scale = e;
    out.F = fp * e;
    out.F_f = alpha * out.F;
    out.P = e * (1.0 + fp * h1);
    out.P_f = alpha * out.P;
    out.P_fp = e * (2.0 * h1 + fp * h1 * h1 + fp * h2);
    return out;
}

}  // namespace exectraj
