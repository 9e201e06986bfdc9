#pragma once

#include "exectraj/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace exectraj {

enum class PriceScheme {
    exact,           ///< closed-form exponential of the Brownian path
    euler_maruyama,  ///< Euler-Maruyama on dS = S[(g + dh/dt) dt + sigma dB]
};

struct SimConfig {
    std::size_t n_paths = 10000;
    std::size_t n_steps = 200;
    std::uint64_t seed = 1;
    PriceScheme scheme = PriceScheme::exact;
    bool antithetic = false;   ///< paths 2k and 2k+1 use opposite increments
    std::size_t threads = 0;   ///< 0 selects hardware concurrency

    void validate() const;
};

/// Counter-based generator: stream `stream` of seed `seed` is a pure function
/// of (seed, stream, draw index), so paths can be generated in any order.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next() noexcept;
    double uniform() noexcept;  ///< in (0, 1)
    double normal() noexcept;   ///< Box-Muller

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Brownian increments of path `path` on `steps` steps of length dt.
std::vector<double> brownian_increments(const SimConfig& cfg, std::size_t path, std::size_t steps, double dt);

/// Row-major paths x nodes.
struct PathMatrix {
    std::size_t paths = 0;
    std::size_t nodes = 0;
    std::vector<double> data;

    PathMatrix() = default;
    PathMatrix(std::size_t p, std::size_t n) : paths(p), nodes(n), data(p * n, 0.0) {}

    double& operator()(std::size_t p, std::size_t i) { return data[p * nodes + i]; }
    double operator()(std::size_t p, std::size_t i) const { return data[p * nodes + i]; }
    std::span<const double> row(std::size_t p) const { return {data.data() + p * nodes, nodes}; }
};

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct PathStats {
    std::size_t n_paths = 0;
    Estimate xi_mean;
    Estimate xi_second;
    double shortfall_mean = 0.0;
    double shortfall_var = 0.0;
    /// Mean over paths of sup_t |xi_t - S_t X_t|; only filled by runs that
    /// also integrate the Brennan-Schwartz process.
    double sup_product_error = 0.0;
    double sup_product_error_max = 0.0;
};

/// The trajectory is resampled onto the uniform simulation grid with
/// cfg.n_steps steps. Order size K for the shortfall is f(T).

PathMatrix simulate_price(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                          const SimConfig& cfg);

struct XiRun {
    PathMatrix xi;
    PathStats stats;
};

XiRun simulate_xi(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                  const SimConfig& cfg);

/// X on the simulation grid, Euler-Maruyama with the same increments as
/// simulate_price for the same configuration.
PathMatrix simulate_brennan_schwartz(const ImpactSpec& impact, const MarketParams& mkt,
                                     const Trajectory& traj, const SimConfig& cfg);

struct JointRun {
    PathMatrix S;
    PathMatrix X;
    PathMatrix xi;
    std::vector<double> sup_error;  ///< per path sup_t |xi_t - S_t X_t|
    PathStats stats;
};

JointRun simulate_joint(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                        const SimConfig& cfg);

/// Streaming statistics of xi_T and the product identity, without storing
/// paths. Paths are processed in fixed-size chunks, possibly concurrently,
/// and merged in chunk order with compensated sums, so the result does not
/// depend on the thread count.
PathStats path_statistics(const ImpactSpec& impact, const MarketParams& mkt, const Trajectory& traj,
                          const SimConfig& cfg);

struct RefinementRow {
    std::size_t n_steps = 0;
    double mean_sup_error = 0.0;
    double max_sup_error = 0.0;
    double xi_T_mean = 0.0;
};

/// Product-identity error on nested grids driven by the same Brownian paths:
/// increments are drawn on the finest grid and summed for coarser ones. Every
/// step count must divide the largest.
std::vector<RefinementRow> product_identity_refinement(const ImpactSpec& impact, const MarketParams& mkt,
                                                       const Trajectory& traj, const SimConfig& cfg,
                                                       std::span<const std::size_t> step_counts);

}  // namespace exectraj
