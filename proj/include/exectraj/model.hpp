#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace exectraj {

/// Smallest execution rate at which the slope of a singular (power p < 1)
/// temporary impact is evaluated.
inline constexpr double kRateFloor = 1e-8;

/// Largest exponent accepted before exp() in the price/Lagrangian formulas.
inline constexpr double kExponentCap = 700.0;

// ---------------------------------------------------------------------------
// Impact families
// ---------------------------------------------------------------------------

struct ZeroImpact {};

struct LinearImpact {
    double eta = 1.0;
};

/// eta * x^exponent with 0 < exponent <= 1.
struct PowerImpact {
    double eta = 1.0;
    double exponent = 1.0;
};

/// Temporary impact given by a table of (rate, displacement) knots, joined by
/// a monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
/// The first knot must be (0, 0). Beyond the last knot the interpolant is
/// continued linearly with the end slope.
class TabulatedImpact {
public:
    TabulatedImpact(std::vector<double> rates, std::vector<double> values);

    double operator()(double x) const;

    std::span<const double> rates() const { return x_; }
    std::span<const double> values() const { return y_; }

private:
    std::vector<double> x_;
    std::vector<double> y_;
    std::vector<double> slopes_;
};

using TemporaryImpact = std::variant<ZeroImpact, LinearImpact, PowerImpact, TabulatedImpact>;

/// Permanent impact g(x) = alpha * x. The zero family is alpha == 0.
struct PermanentImpact {
    double alpha = 0.0;

    static PermanentImpact zero() { return {0.0}; }
    static PermanentImpact linear(double alpha) { return {alpha}; }
};

struct ImpactSpec {
    PermanentImpact permanent;
    TemporaryImpact temporary = ZeroImpact{};

    double alpha() const { return permanent.alpha; }
    void validate() const;
};

enum class ImpactKind { permanent, temporary };

/// g(x) or h(x). Rejects negative rates.
double eval_impact(const ImpactSpec& spec, ImpactKind which, double x);

double temporary_value(const TemporaryImpact& h, double x);
/// h'(x). Throws singular_derivative below kRateFloor for power p < 1.
double temporary_slope(const TemporaryImpact& h, double x);
/// h''(x), same preconditions as temporary_slope.
double temporary_curvature(const TemporaryImpact& h, double x);

/// True when h'(x) diverges as x -> 0.
bool has_singular_slope(const TemporaryImpact& h);
/// True when h is identically zero, which makes the Lagrangian a null one.
bool is_zero_impact(const TemporaryImpact& h);
/// Linear coefficient used when a temporary impact must be summarised by a
/// single slope (baseline mapping, linear counterparts of nonlinear runs).
double temporary_coefficient(const TemporaryImpact& h);

// ---------------------------------------------------------------------------
// Market and problem data
// ---------------------------------------------------------------------------

struct MarketParams {
    double s = 1.0;      ///< initial share price
    double sigma = 0.0;  ///< volatility per sqrt(time); 0 is the risk-free limit

    void validate() const;
};

struct ExecutionProblem {
    double K = 1.0;       ///< shares to buy
    double T = 1.0;       ///< horizon
    double lambda = 0.0;  ///< risk aversion

    void validate() const;
};

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

std::vector<double> uniform_grid(double T, std::size_t steps);

/// Cumulative executed shares f on a time grid together with the rates f'.
class Trajectory {
public:
    Trajectory(std::vector<double> grid, std::vector<double> values, std::vector<double> rates);

    /// f(t) = K t / T.
    static Trajectory uniform(double K, double T, std::size_t steps);
    /// Values obtained by trapezoid integration of the rates, starting at 0.
    static Trajectory from_rates(std::vector<double> grid, std::vector<double> rates);

    template <class Value, class Rate>
    static Trajectory sample(std::vector<double> grid, Value&& f, Rate&& fp) {
        std::vector<double> v(grid.size()), r(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            v[i] = f(grid[i]);
            r[i] = fp(grid[i]);
        }
        return Trajectory(std::move(grid), std::move(v), std::move(r));
    }

    std::span<const double> grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<const double> rates() const { return rates_; }

    std::size_t size() const { return grid_.size(); }
    double horizon() const { return grid_.back(); }

    /// Linear interpolation of f and f' onto another grid covering [0, T].
    Trajectory resampled(std::span<const double> grid) const;

    bool same_grid(const Trajectory& other, double tol = 1e-12) const;

    /// Max |values[i] - trapezoid(rates)[i]| over the grid.
    double trapezoid_mismatch() const;

    /// Throws boundary_violation unless f(0) = 0 and |f(T) - K| <= tol.
    void check_boundary(double K, double tol) const;

    Trajectory plus(const Trajectory& other) const;
    Trajectory minus(const Trajectory& other) const;

private:
    std::vector<double> grid_;
    std::vector<double> values_;
    std::vector<double> rates_;
};

// ---------------------------------------------------------------------------
// Lagrangian F(f, f') = s f' exp{alpha f + h(f')}
// ---------------------------------------------------------------------------

struct FPartials {
    double d_value = 0.0;  ///< dF/df
    double d_rate = 0.0;   ///< dF/df'
};

double eval_F(const ImpactSpec& impact, const MarketParams& mkt, double f, double fp,
              double exponent_cap = kExponentCap);

FPartials eval_F_partials(const ImpactSpec& impact, const MarketParams& mkt, double f, double fp,
                          double exponent_cap = kExponentCap);

/// First and mixed second partials of F used by the Euler-Lagrange operator.
/// With E = s exp{alpha f + h(f')}: F = f' E, P = dF/df' = E (1 + f' h').
struct LagrangianTerms {
    double scale = 0.0;    ///< E
    double F = 0.0;
    double F_f = 0.0;      ///< dF/df
    double P = 0.0;        ///< dF/df'
    double P_f = 0.0;      ///< d2F/df'df
    double P_fp = 0.0;     ///< d2F/df'^2
};

LagrangianTerms lagrangian_terms(const ImpactSpec& impact, const MarketParams& mkt, double f,
                                 double fp, double exponent_cap = kExponentCap);

}  // namespace exectraj
