#ifndef AUTOBO_OBJECTIVE_HPP
#define AUTOBO_OBJECTIVE_HPP
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autobo/errors.hpp"
#include "autobo/random.hpp"

namespace autobo {

/// Per-dimension (lo, hi) in original units.
using Bounds = std::vector<std::pair<double, double>>;

inline void validate_bounds(const Bounds& bounds) {
    if (bounds.empty()) throw ArgumentError("bounds must have at least one dimension");
    for (const auto& [lo, hi] : bounds)
        if (!(lo < hi)) throw ArgumentError("each bound needs lo < hi");
}

inline Eigen::VectorXd to_original(const Eigen::VectorXd& unit, const Bounds& bounds) {
    if (static_cast<std::size_t>(unit.size()) != bounds.size()) throw ArgumentError("point/bounds dimension mismatch");
    Eigen::VectorXd x(unit.size());
    for (Eigen::Index j = 0; j < unit.size(); ++j) {
        const auto [lo, hi] = bounds[static_cast<std::size_t>(j)];
        x(j) = lo + unit(j) * (hi - lo);
    }
    return x;
}

inline Eigen::VectorXd to_unit(const Eigen::VectorXd& x, const Bounds& bounds) {
    if (static_cast<std::size_t>(x.size()) != bounds.size()) throw ArgumentError("point/bounds dimension mismatch");
    Eigen::VectorXd u(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const auto [lo, hi] = bounds[static_cast<std::size_t>(j)];
        u(j) = (x(j) - lo) / (hi - lo);
    }
    return u;
}

/// A black box over the unit box; `bounds` maps unit coordinates to original units.
struct Objective {
    std::function<double(const Eigen::VectorXd& unit_x)> eval;
    Bounds bounds;
    int dim = 0;
    std::optional<double> known_optimum;
    /// Whether distinct runs may call `eval` concurrently.
    bool concurrent_safe = true;

    [[nodiscard]] Eigen::VectorXd original(const Eigen::VectorXd& unit_x) const { return to_original(unit_x, bounds); }

    double operator()(const Eigen::VectorXd& unit_x) const { return eval(unit_x); }
};

/// Wraps `f` so each call returns f(x) + noise_std * N(0,1). The wrapper owns
/// `rng` and is therefore serial.
inline Objective with_noise(Objective f, double noise_std, Rng rng) {
    if (!(noise_std >= 0.0)) throw ArgumentError("noise_std must be non-negative");
    if (noise_std == 0.0) return f;
    auto state = std::make_shared<Rng>(std::move(rng));
    auto inner = std::move(f.eval);
    f.eval = [inner = std::move(inner), state, noise_std](const Eigen::VectorXd& x) {
        return inner(x) + noise_std * standard_normal(*state);
    };
    f.concurrent_safe = false;
    return f;
}

} // namespace autobo

#endif // AUTOBO_OBJECTIVE_HPP
