#ifndef AUTOBO_BENCHMARKS_HPP
#define AUTOBO_BENCHMARKS_HPP
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autobo/errors.hpp"
#include "autobo/objective.hpp"

namespace autobo {

struct BenchmarkSpec {
    std::string name;
    int dim = 0;
    Bounds bounds;
    double f_star = 0.0;
    std::vector<std::vector<double>> x_star;
    std::function<double(std::span<const double>)> f;
};

namespace detail {

inline void check_in_bounds(std::span<const double> x, const Bounds& bounds, const char* who) {
    if (x.size() != bounds.size()) throw ArgumentError(std::string(who) + ": wrong dimension");
    for (std::size_t j = 0; j < x.size(); ++j) {
        // Allow a few ulps of slack from the unit-box mapping.
        const auto [lo, hi] = bounds[j];
        const double slack = 1e-12 * (hi - lo);
        if (!(x[j] >= lo - slack && x[j] <= hi + slack))
            throw ArgumentError(std::string(who) + ": coordinate " + std::to_string(j) + " out of bounds");
    }
}

inline const Bounds& branin_bounds() {
    static const Bounds b{{-5.0, 10.0}, {0.0, 15.0}};
    return b;
}

inline const Bounds& hartmann3_bounds() {
    static const Bounds b{{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
    return b;
}

inline const Bounds& rastrigin3_bounds() {
    static const Bounds b{{-5.12, 5.12}, {-5.12, 5.12}, {-5.12, 5.12}};
    return b;
}

} // namespace detail

inline double branin(std::span<const double> x) {
    detail::check_in_bounds(x, detail::branin_bounds(), "branin");
    constexpr double pi = std::numbers::pi;
    constexpr double a = 1.0, b = 5.1 / (4.0 * pi * pi), c = 5.0 / pi, r = 6.0, s = 10.0, t = 1.0 / (8.0 * pi);
    const double inner = x[1] - b * x[0] * x[0] + c * x[0] - r;
    return a * inner * inner + s * (1.0 - t) * std::cos(x[0]) + s;
}

inline double hartmann3(std::span<const double> x) {
    detail::check_in_bounds(x, detail::hartmann3_bounds(), "hartmann3");
    static constexpr std::array<double, 4> alpha{1.0, 1.2, 3.0, 3.2};
    static constexpr std::array<std::array<double, 3>, 4> a{{{3.0, 10.0, 30.0}, {0.1, 10.0, 35.0}, {3.0, 10.0, 30.0},
                                                            {0.1, 10.0, 35.0}}};
    static constexpr std::array<std::array<double, 3>, 4> p{{{0.3689, 0.1170, 0.2673},
                                                            {0.4699, 0.4387, 0.7470},
                                                            {0.1091, 0.8732, 0.5547},
                                                            {0.0381, 0.5743, 0.8828}}};
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        double e = 0.0;
        for (std::size_t j = 0; j < 3; ++j) e += a[i][j] * (x[j] - p[i][j]) * (x[j] - p[i][j]);
        sum += alpha[i] * std::exp(-e);
    }
    return -sum;
}

/// Rastrigin in any dimension on [-5.12, 5.12]^d.
inline double rastrigin(std::span<const double> x) {
    if (x.empty()) throw ArgumentError("rastrigin: empty point");
    detail::check_in_bounds(x, Bounds(x.size(), {-5.12, 5.12}), "rastrigin");
    double sum = 10.0 * static_cast<double>(x.size());
    for (double v : x) sum += v * v - 10.0 * std::cos(2.0 * std::numbers::pi * v);
    return sum;
}

inline std::vector<std::string> benchmark_names() { return {"branin", "hartmann3", "rastrigin3"}; }

inline BenchmarkSpec benchmark(const std::string& name) {
    if (name == "branin")
        return {"branin", 2, detail::branin_bounds(), 5.0 / (4.0 * std::numbers::pi),
                {{-std::numbers::pi, 12.275}, {std::numbers::pi, 2.275}, {9.42477796076938, 2.475}},
                [](std::span<const double> x) { return branin(x); }};
    if (name == "hartmann3")
        return {"hartmann3", 3, detail::hartmann3_bounds(), -3.862779787332663,
                {{0.11458888, 0.5556489, 0.85254698}},
                [](std::span<const double> x) { return hartmann3(x); }};
    if (name == "rastrigin3")
        return {"rastrigin3", 3, detail::rastrigin3_bounds(), 0.0, {{0.0, 0.0, 0.0}},
                [](std::span<const double> x) { return rastrigin(x); }};
    throw ArgumentError("unknown benchmark '" + name + "'");
}

/// Noise-free objective over the unit box for a benchmark.
inline Objective make_objective(const BenchmarkSpec& spec) {
    Objective o;
    o.dim = spec.dim;
    o.bounds = spec.bounds;
    o.known_optimum = spec.f_star;
    o.eval = [f = spec.f, bounds = spec.bounds](const Eigen::VectorXd& unit) {
        const Eigen::VectorXd x = to_original(unit, bounds);
        return f(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    };
    return o;
}

} // namespace autobo

#endif // AUTOBO_BENCHMARKS_HPP
