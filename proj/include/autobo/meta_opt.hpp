#ifndef AUTOBO_META_OPT_HPP
#define AUTOBO_META_OPT_HPP
#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "autobo/bo_loop.hpp"
#include "autobo/errors.hpp"
#include "autobo/objective.hpp"
#include "autobo/policies.hpp"

namespace autobo {

/// Outer BO over raw weights in [0,1]^|seeds| for the Weighted policy.
struct MetaConfig {
    int outer_iters = 10;
    int outer_init = 5;
    int inner_reps = 3;
    RunConfig inner_config;
    std::uint64_t seed = 0;
    std::vector<AcquisitionKind> seeds = default_seeds();
    int outer_grid_size = 1000;
    int outer_gp_restarts = 10;

    void validate() const {
        if (outer_iters < 0) throw ArgumentError("outer_iters must be non-negative");
        if (outer_init < 2) throw ArgumentError("outer_init must be at least 2");
        if (inner_reps < 1) throw ArgumentError("inner_reps must be positive");
        if (seeds.empty()) throw ArgumentError("meta-optimization needs at least one seed acquisition");
        inner_config.validate();
    }
};

/// Normalizes raw weights onto the simplex; near-zero input maps to uniform.
inline std::vector<double> project_weights(std::span<const double> raw) {
    if (raw.empty()) throw ArgumentError("project_weights: empty weight vector");
    double sum = 0.0;
    for (double w : raw) {
        if (!(w >= 0.0 && w <= 1.0)) throw ArgumentError("project_weights: raw weights must lie in [0,1]");
        sum += w;
    }
    std::vector<double> out(raw.size(), 1.0 / static_cast<double>(raw.size()));
    if (sum < 1e-12) return out;
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / sum;
    return out;
}

/// Mean final best_so_far over inner_reps Weighted runs. Inner run r is
/// seeded with meta.seed + r for every weight vector, so different weights
/// are compared on common random numbers.
inline double meta_objective(std::span<const double> raw_weights, const Objective& objective, const MetaConfig& meta) {
    meta.validate();
    if (raw_weights.size() != meta.seeds.size()) throw ArgumentError("meta_objective: one raw weight per seed");
    const auto policy = PolicySpec::weighted(project_weights(raw_weights), meta.seeds);
    double total = 0.0;
    for (int r = 0; r < meta.inner_reps; ++r) {
        RunConfig cfg = meta.inner_config;
        cfg.seed = meta.seed + static_cast<std::uint64_t>(r);
        total += run_bo(objective, cfg, policy).final_best();
    }
    return total / static_cast<double>(meta.inner_reps);
}

struct MetaResult {
    /// Projected weights of the best evaluated raw weight vector.
    std::vector<double> weights;
    std::vector<double> raw_weights;
    double value = 0.0;
    /// Projected weights at the outer posterior-mean minimizer.
    std::vector<double> recommended_weights;
    Trace outer_trace;
};

/// Outer Fixed(EI) BO loop over raw weights with meta_objective as the black box.
inline MetaResult meta_optimize(const Objective& objective, const MetaConfig& meta) {
    meta.validate();
    const auto k = static_cast<int>(meta.seeds.size());
    Objective outer;
    outer.dim = k;
    outer.bounds = Bounds(static_cast<std::size_t>(k), {0.0, 1.0});
    outer.concurrent_safe = false;
    outer.eval = [&objective, &meta](const Eigen::VectorXd& raw) {
        return meta_objective(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), objective, meta);
    };

    RunConfig outer_cfg;
    outer_cfg.n_init = meta.outer_init;
    outer_cfg.n_iters = meta.outer_iters;
    outer_cfg.grid_size = meta.outer_grid_size;
    outer_cfg.gp_restarts = meta.outer_gp_restarts;
    outer_cfg.seed = meta.seed;

    MetaResult result;
    result.outer_trace = run_bo(outer, outer_cfg, PolicySpec::fixed(AcquisitionKind::ei()));
    const auto& best = result.outer_trace.best_record();
    result.raw_weights.assign(best.x.data(), best.x.data() + best.x.size());
    result.weights = project_weights(result.raw_weights);
    result.value = best.y;
    const auto& rec = result.outer_trace.recommendation;
    std::vector<double> rec_raw(rec.data(), rec.data() + rec.size());
    for (auto& w : rec_raw) w = std::clamp(w, 0.0, 1.0);
    result.recommended_weights = project_weights(rec_raw);
    return result;
}

} // namespace autobo

#endif // AUTOBO_META_OPT_HPP
