#include "exectraj/simulate.hpp"

#include "exectraj/errors.hpp"
#include "exectraj/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

namespace exectraj {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::size_t kChunkUnits = 256;

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Deterministic coefficients of the price and Brennan-Schwartz dynamics on
/// the simulation grid.
struct Kernel {
    double s = 1.0;
    double sigma = 0.0;
    double dt = 0.0;
    PriceScheme scheme = PriceScheme::exact;
    std::vector<double> t, c;
    std::vector<double> log_drift;  // alpha f + h(c) - sigma^2 t / 2
    std::vector<double> mu;         // g(c) + dh(c(t))/dt
};

Kernel make_kernel(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                   const SimConfig& cfg) {
    impact.validate();
    mkt.validate();
    cfg.validate();
    const auto grid = uniform_grid(traj.horizon(), cfg.n_steps);
    bool same = traj.size() == grid.size();
    for (std::size_t i = 0; same && i < grid.size(); ++i)
        same = std::abs(traj.grid()[i] - grid[i]) <= 1e-12 * traj.horizon();
    const Trajectory r = same ? traj : traj.resampled(grid);
    Kernel k;
    k.s = mkt.s;
    k.sigma = mkt.sigma;
    k.dt = traj.horizon() / static_cast<double>(cfg.n_steps);
    k.scheme = cfg.scheme;
    k.t.assign(grid.begin(), grid.end());
    k.c.assign(r.rates().begin(), r.rates().end());
    const auto dc = grid_derivative(grid, k.c);
    const std::size_t n = grid.size();
    k.log_drift.resize(n);
    k.mu.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = k.c[i];
        if (c < 0.0) throw Error(ErrorCode::invalid_argument, "simulation requires non-negative rates");
        k.log_drift[i] = impact.alpha() * r.values()[i] + temporary_value(impact.temporary, c) -
                         0.5 * mkt.sigma * mkt.sigma * grid[i];
        if (k.log_drift[i] > kExponentCap) throw Error(ErrorCode::overflow, "price exponent exceeds cap");
        const double dh = dc[i] == 0.0 ? 0.0 : temporary_slope(impact.temporary, c) * dc[i];
        k.mu[i] = impact.alpha() * c + dh;
    }
    return k;
}

struct PathOut {
    double xi_T = 0.0;
    double sup_error = 0.0;
};

/// One path. S, X, xi may be empty spans; X is integrated when `with_x`.
PathOut integrate_path(const Kernel& k, std::span<const double> dB, std::span<double> S_out,
                       std::span<double> X_out, std::span<double> xi_out, bool with_x) {
    const std::size_t n = k.t.size();
    double B = 0.0;
    double S = k.s * std::exp(k.log_drift[0]);
    double X = 0.0, xi = 0.0;
    double sup = 0.0;
    const double s2 = k.sigma * k.sigma;
    auto store = [&](std::size_t i) {
        if (!S_out.empty()) S_out[i] = S;
        if (!X_out.empty()) X_out[i] = X;
        if (!xi_out.empty()) xi_out[i] = xi;
    };
    store(0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double S_prev = S;
        if (with_x) {
            X += (k.c[i] - (k.mu[i] - s2) * X) * k.dt - k.sigma * X * dB[i];
            if (!std::isfinite(X)) throw Error(ErrorCode::ode_blowup, "Brennan-Schwartz step blew up");
        }
        B += dB[i];
        if (k.scheme == PriceScheme::exact)
            S = k.s * std::exp(k.log_drift[i + 1] + k.sigma * B);
        else
            S = S_prev * (1.0 + k.mu[i] * k.dt + k.sigma * dB[i]);
        xi += 0.5 * k.dt * (k.c[i] * S_prev + k.c[i + 1] * S);
        if (with_x) sup = std::max(sup, std::abs(xi - S * X));
        store(i + 1);
    }
    return {xi, sup};
}

/// Per-chunk accumulators; merged in chunk order.
struct Accum {
    CompensatedSum y1, y1sq, y2, y2sq;  // per sampling unit (path or antithetic pair)
    CompensatedSum x1, x2;              // per path xi_T, xi_T^2
    CompensatedSum sup;
    double sup_max = 0.0;
    std::size_t units = 0, paths = 0;

    void merge(const Accum& o) {
        y1.merge(o.y1);
        y1sq.merge(o.y1sq);
        y2.merge(o.y2);
        y2sq.merge(o.y2sq);
        x1.merge(o.x1);
        x2.merge(o.x2);
        sup.merge(o.sup);
        sup_max = std::max(sup_max, o.sup_max);
        units += o.units;
        paths += o.paths;
    }
};

double sample_var(double sum, double sumsq, std::size_t n) {
    if (n < 2) return 0.0;
    const double m = sum / static_cast<double>(n);
    return std::max(0.0, (sumsq - m * sum) / static_cast<double>(n - 1));
}

PathStats finish_stats(const Accum& a, double K, double s) {
    PathStats st;
    st.n_paths = a.paths;
    const double nu = static_cast<double>(a.units);
    const double np = static_cast<double>(a.paths);
    st.xi_mean.value = a.y1.value() / nu;
    st.xi_mean.se = std::sqrt(sample_var(a.y1.value(), a.y1sq.value(), a.units) / nu);
    st.xi_second.value = a.y2.value() / nu;
    st.xi_second.se = std::sqrt(sample_var(a.y2.value(), a.y2sq.value(), a.units) / nu);
    st.shortfall_mean = a.x1.value() / np - K * s;
    st.shortfall_var = sample_var(a.x1.value(), a.x2.value(), a.paths);
    st.sup_product_error = a.sup.value() / np;
    st.sup_product_error_max = a.sup_max;
    return st;
}

void add_unit(Accum& a, std::span<const PathOut> outs) {
    double m1 = 0.0, m2 = 0.0;
    for (const auto& o : outs) {
        m1 += o.xi_T;
        m2 += o.xi_T * o.xi_T;
        a.x1.add(o.xi_T);
        a.x2.add(o.xi_T * o.xi_T);
        a.sup.add(o.sup_error);
        a.sup_max = std::max(a.sup_max, o.sup_error);
        ++a.paths;
    }
    m1 /= static_cast<double>(outs.size());
    m2 /= static_cast<double>(outs.size());
    a.y1.add(m1);
    a.y1sq.add(m1 * m1);
    a.y2.add(m2);
    a.y2sq.add(m2 * m2);
    ++a.units;
}

std::size_t unit_size(const SimConfig& cfg) { return cfg.antithetic ? 2 : 1; }

}  // namespace

// ---------------------------------------------------------------------------

void SimConfig::validate() const {
    if (n_paths < 1) throw Error(ErrorCode::invalid_argument, "n_paths must be >= 1");
    if (n_steps < 10) throw Error(ErrorCode::invalid_argument, "n_steps must be >= 10");
    if (antithetic && n_paths % 2 != 0)
        throw Error(ErrorCode::invalid_argument, "antithetic sampling needs an even n_paths");
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed + kGolden) ^ mix64((stream + 1) * 0xD1B54A32D192ED03ULL)) {}

std::uint64_t CounterRng::next() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

std::vector<double> brownian_increments(const SimConfig& cfg, std::size_t path, std::size_t steps, double dt) {
    const std::size_t stream = cfg.antithetic ? path / 2 : path;
    const double sign = (cfg.antithetic && path % 2 == 1) ? -1.0 : 1.0;
    CounterRng rng(cfg.seed, stream);
    const double sd = std::sqrt(dt);
    std::vector<double> dB(steps);
    for (auto& x : dB) x = sign * sd * rng.normal();
    return dB;
}

// ---------------------------------------------------------------------------

PathMatrix simulate_price(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                          const SimConfig& cfg) {
    const Kernel k = make_kernel(impact, mkt, traj, cfg);
    PathMatrix S(cfg.n_paths, k.t.size());
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
        const auto dB = brownian_increments(cfg, p, cfg.n_steps, k.dt);
        integrate_path(k, dB, {S.data.data() + p * S.nodes, S.nodes}, {}, {}, false);
    }
    return S;
}

XiRun simulate_xi(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                  const SimConfig& cfg) {
    const Kernel k = make_kernel(impact, mkt, traj, cfg);
    XiRun run;
    run.xi = PathMatrix(cfg.n_paths, k.t.size());
    Accum acc;
    const std::size_t u = unit_size(cfg);
    std::vector<PathOut> outs(u);
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
        const auto dB = brownian_increments(cfg, p, cfg.n_steps, k.dt);
        outs[p % u] = integrate_path(k, dB, {}, {}, {run.xi.data.data() + p * run.xi.nodes, run.xi.nodes}, false);
        if (p % u == u - 1) add_unit(acc, outs);
    }
    run.stats = finish_stats(acc, traj.values().back(), mkt.s);
    return run;
}

PathMatrix simulate_brennan_schwartz(const ImpactSpec& impact, const MarketParams& mkt,
                                     const Trajectory& traj, const SimConfig& cfg) {
    return simulate_joint(impact, mkt, traj, cfg).X;
}

JointRun simulate_joint(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                        const SimConfig& cfg) {
    const Kernel k = make_kernel(impact, mkt, traj, cfg);
    JointRun run;
    const std::size_t n = k.t.size();
    run.S = PathMatrix(cfg.n_paths, n);
    run.X = PathMatrix(cfg.n_paths, n);
    run.xi = PathMatrix(cfg.n_paths, n);
    run.sup_error.resize(cfg.n_paths);
    Accum acc;
    const std::size_t u = unit_size(cfg);
    std::vector<PathOut> outs(u);
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
        const auto dB = brownian_increments(cfg, p, cfg.n_steps, k.dt);
        outs[p % u] = integrate_path(k, dB, {run.S.data.data() + p * n, n}, {run.X.data.data() + p * n, n},
                                     {run.xi.data.data() + p * n, n}, true);
        run.sup_error[p] = outs[p % u].sup_error;
        if (p % u == u - 1) add_unit(acc, outs);
    }
    run.stats = finish_stats(acc, traj.values().back(), mkt.s);
    return run;
}

PathStats path_statistics(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                          const SimConfig& cfg) {
    const Kernel k = make_kernel(impact, mkt, traj, cfg);
    const std::size_t u = unit_size(cfg);
    const std::size_t units = cfg.n_paths / u;
    const std::size_t chunks = (units + kChunkUnits - 1) / kChunkUnits;
    std::vector<Accum> partial(chunks);

    auto work_chunk = [&](std::size_t ch) {
        Accum& a = partial[ch];
        std::vector<PathOut> outs(u);
        const std::size_t end = std::min(units, (ch + 1) * kChunkUnits);
        for (std::size_t unit = ch * kChunkUnits; unit < end; ++unit) {
            for (std::size_t j = 0; j < u; ++j) {
                const auto dB = brownian_increments(cfg, unit * u + j, cfg.n_steps, k.dt);
                outs[j] = integrate_path(k, dB, {}, {}, {}, true);
            }
            add_unit(a, outs);
        }
    };

    std::size_t threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    threads = std::min(threads, std::max<std::size_t>(chunks, 1));
    if (threads <= 1) {
        for (std::size_t ch = 0; ch < chunks; ++ch) work_chunk(ch);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (std::size_t w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t ch = next++; ch < chunks; ch = next++) work_chunk(ch);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        pool.clear();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    Accum total;
    for (const auto& a : partial) total.merge(a);
    return finish_stats(total, traj.values().back(), mkt.s);
}

std::vector<RefinementRow> product_identity_refinement(const ImpactSpec& impact, const MarketParams& mkt,
                                                       const Trajectory& traj, const SimConfig& cfg,
                                                       std::span<const std::size_t> step_counts) {
    if (step_counts.empty()) throw Error(ErrorCode::invalid_argument, "no refinement levels given");
    const std::size_t finest = *std::max_element(step_counts.begin(), step_counts.end());
    for (std::size_t n : step_counts)
        if (n < 10 || finest % n != 0) {
            std::ostringstream os;
            os << "refinement level " << n << " must be >= 10 and divide " << finest;
            throw Error(ErrorCode::invalid_argument, os.str());
        }

    std::vector<Kernel> kernels;
    for (std::size_t n : step_counts) {
        SimConfig c = cfg;
        c.n_steps = n;
        kernels.push_back(make_kernel(impact, mkt, traj, c));
    }
    std::vector<RefinementRow> rows(step_counts.size());
    std::vector<CompensatedSum> sup(step_counts.size()), xiT(step_counts.size());
    const double dt_fine = traj.horizon() / static_cast<double>(finest);
    for (std::size_t p = 0; p < cfg.n_paths; ++p) {
        const auto fine = brownian_increments(cfg, p, finest, dt_fine);
        for (std::size_t l = 0; l < step_counts.size(); ++l) {
            const std::size_t n = step_counts[l], ratio = finest / n;
            std::vector<double> dB(n, 0.0);
            for (std::size_t i = 0; i < finest; ++i) dB[i / ratio] += fine[i];
            const auto out = integrate_path(kernels[l], dB, {}, {}, {}, true);
            sup[l].add(out.sup_error);
            xiT[l].add(out.xi_T);
            rows[l].max_sup_error = std::max(rows[l].max_sup_error, out.sup_error);
        }
    }
    for (std::size_t l = 0; l < step_counts.size(); ++l) {
        rows[l].n_steps = step_counts[l];
        rows[l].mean_sup_error = sup[l].value() / static_cast<double>(cfg.n_paths);
        rows[l].xi_T_mean = xiT[l].value() / static_cast<double>(cfg.n_paths);
    }
    return rows;
}

}  // namespace exectraj
