#pragma once

#include "exectraj/model.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <span>
#include <vector>
#include <string>

namespace support {

using namespace exectraj;

inline std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

inline ImpactSpec linear_impacts(double alpha = 1.0, double eta = 1.0) {
    return {PermanentImpact::linear(alpha), LinearImpact{eta}};
}

inline ImpactSpec power_impacts(double alpha = 1.0, double eta = 1.0, double p = 0.6) {
    return {PermanentImpact::linear(alpha), PowerImpact{eta, p}};
}

inline ImpactSpec zero_impacts() { return {PermanentImpact::zero(), ZeroImpact{}}; }

/// Drift only: g(x) = alpha x, no temporary impact.
inline ImpactSpec drift_only(double alpha = 1.0) { return {PermanentImpact::linear(alpha), ZeroImpact{}}; }

inline MarketParams market(double s = 1.0, double sigma = 0.2) { return {s, sigma}; }

inline ExecutionProblem problem(double K = 3.0, double T = 1.0, double lambda = 0.0) { return {K, T, lambda}; }

inline Trajectory constant_rate(double rate, double T, std::size_t steps) {
    return Trajectory::sample(
        uniform_grid(T, steps), [&](double t) { return rate * t; }, [&](double) { return rate; });
}

/// Smooth increasing trajectory from 0 to K: K t/T plus a few sine modes with
/// random amplitudes small enough to keep the rate positive.
inline Trajectory random_smooth(std::mt19937_64& rng, double K, double T, std::size_t steps) {
    std::uniform_real_distribution<double> amp(-0.04, 0.04);
    double a[3];
    for (double& x : a) x = amp(rng);
    const double w = std::numbers::pi / T;
    return Trajectory::sample(
        uniform_grid(T, steps),
        [&](double t) {
            double v = t / T;
            for (int k = 0; k < 3; ++k) v += a[k] * std::sin((k + 1) * w * t);
            return K * v;
        },
        [&](double t) {
            double r = 1.0 / T;
            for (int k = 0; k < 3; ++k) r += a[k] * (k + 1) * w * std::cos((k + 1) * w * t);
            return K * r;
        });
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("exectraj_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace support
