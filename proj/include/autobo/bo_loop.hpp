#ifndef AUTOBO_BO_LOOP_HPP
#define AUTOBO_BO_LOOP_HPP
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autobo/acquisitions.hpp"
#include "autobo/csv.hpp"
#include "autobo/errors.hpp"
#include "autobo/gp.hpp"
#include "autobo/objective.hpp"
#include "autobo/policies.hpp"
#include "autobo/random.hpp"

namespace autobo {

struct RunConfig {
    int n_init = 5;
    int n_iters = 20;
    int grid_size = 1000;
    bool refine_local = false;
    std::uint64_t seed = 0;
    int gp_restarts = 10;

    void validate() const {
        if (n_init < 2) throw ArgumentError("n_init must be at least 2");
        if (n_iters < 0) throw ArgumentError("n_iters must be non-negative");
        if (grid_size < 10) throw ArgumentError("grid_size must be at least 10");
        if (gp_restarts < 1) throw ArgumentError("gp_restarts must be positive");
    }
};

struct TraceRecord {
    std::size_t iter = 0;
    Eigen::VectorXd x; // original units
    double y = 0.0;
    double best_so_far = 0.0;
    std::string policy_label;
};

struct Trace {
    std::vector<TraceRecord> records;
    /// Posterior-mean minimizer of the final model, original units.
    Eigen::VectorXd recommendation;
    double recommendation_value_estimate = 0.0;

    [[nodiscard]] double final_best() const {
        if (records.empty()) throw UsageError("empty trace");
        return records.back().best_so_far;
    }

    /// Best observed point (lowest index among ties), original units.
    [[nodiscard]] const TraceRecord& best_record() const {
        if (records.empty()) throw UsageError("empty trace");
        std::size_t best = 0;
        for (std::size_t i = 1; i < records.size(); ++i)
            if (records[i].y < records[best].y) best = i;
        return records[best];
    }
};

/// A failed run, carrying whatever was recorded before the failure.
class RunError : public std::runtime_error {
public:
    RunError(const std::string& what, Trace partial, bool protocol_failure = false)
        : std::runtime_error(what), partial_(std::move(partial)), protocol_failure_(protocol_failure) {}

    [[nodiscard]] const Trace& partial_trace() const { return partial_; }
    [[nodiscard]] bool protocol_failure() const { return protocol_failure_; }

private:
    Trace partial_;
    bool protocol_failure_;
};

/// Latin hypercube on [0,1]^dim: every dimension hits each of the n_init
/// equal-width strata exactly once.
inline std::vector<Eigen::VectorXd> initial_design(const RunConfig& config, int dim, Rng& rng) {
    if (config.n_init < 2) throw ArgumentError("n_init must be at least 2");
    if (dim < 1) throw ArgumentError("dimension must be positive");
    const auto n = static_cast<std::size_t>(config.n_init);
    std::vector<Eigen::VectorXd> points(n, Eigen::VectorXd(dim));
    std::vector<std::size_t> strata(n);
    for (int j = 0; j < dim; ++j) {
        std::iota(strata.begin(), strata.end(), std::size_t{0});
        std::shuffle(strata.begin(), strata.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = (static_cast<double>(strata[i]) + uniform01(rng)) / static_cast<double>(n);
            // Keep the point inside its half-open stratum despite rounding.
            points[i](j) = std::min(v, std::nextafter((static_cast<double>(strata[i]) + 1.0) / static_cast<double>(n), 0.0));
        }
    }
    return points;
}

inline Eigen::MatrixXd uniform_candidates(int count, int dim, Rng& rng) {
    Eigen::MatrixXd c(count, dim);
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < dim; ++j) c(i, j) = uniform01(rng);
    return c;
}

struct Proposal {
    Eigen::VectorXd x; // unit box
    double utility = 0.0;
    std::string label;
    std::size_t grid_index = 0;
    std::vector<double> grid_utilities;
    Eigen::MatrixXd candidates;
};

namespace detail {

// Coordinate pattern search on the unit box, at most `budget` utility calls.
inline std::pair<Eigen::VectorXd, double> pattern_search(const std::function<double(const Eigen::VectorXd&)>& u,
                                                         Eigen::VectorXd x, double ux, int budget) {
    double step = 0.05;
    int used = 0;
    while (used < budget && step > 1e-6) {
        bool improved = false;
        for (Eigen::Index j = 0; j < x.size() && used < budget; ++j) {
            for (double dir : {1.0, -1.0}) {
                if (used >= budget) break;
                Eigen::VectorXd trial = x;
                trial(j) = std::clamp(trial(j) + dir * step, 0.0, 1.0);
                if (trial(j) == x(j)) continue;
                const double ut = u(trial);
                ++used;
                if (ut > ux) {
                    x = std::move(trial);
                    ux = ut;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return {x, ux};
}

} // namespace detail

/// Grid-search maximization of the iteration's acquisition, optionally
/// polished by a short pattern search from the grid argmax.
inline Proposal propose_next(const GPModel& model, const PolicySpec& policy, std::size_t iter, const Incumbent& inc,
                             const RunConfig& config, Rng& candidate_rng, Rng& policy_rng, HedgeState* hedge = nullptr) {
    Proposal out;
    out.candidates = uniform_candidates(config.grid_size, model.dim(), candidate_rng);
    auto it = utilities_for_iteration(policy, iter, model, inc, out.candidates, policy_rng, hedge);
    out.grid_index = argmax_lowest(it.utilities);
    out.x = out.candidates.row(static_cast<Eigen::Index>(out.grid_index)).transpose();
    out.utility = it.utilities[out.grid_index];
    out.label = std::move(it.label);
    if (config.refine_local) {
        const double start = it.point_utility(out.x);
        auto [x, ux] = detail::pattern_search(it.point_utility, out.x, start, 50);
        if (ux > start) out.x = std::move(x);
    }
    out.grid_utilities = std::move(it.utilities);
    return out;
}

/// Minimizes the posterior mean over the observed inputs followed by a fresh
/// uniform grid; returns the unit-box argmin and its mean.
inline std::pair<Eigen::VectorXd, double> recommend(const GPModel& model, const RunConfig& config, Rng& rng) {
    const auto& observed = model.data().inputs();
    Eigen::MatrixXd cands(observed.rows() + config.grid_size, model.dim());
    cands.topRows(observed.rows()) = observed;
    cands.bottomRows(config.grid_size) = uniform_candidates(config.grid_size, model.dim(), rng);
    const auto preds = model.predict_batch(cands);
    std::size_t best = 0;
    for (std::size_t i = 1; i < preds.size(); ++i)
        if (preds[i].mu < preds[best].mu) best = i;
    return {cands.row(static_cast<Eigen::Index>(best)).transpose(), preds[best].mu};
}

namespace detail {

inline void append_record(Trace& trace, const Objective& objective, const Eigen::VectorXd& unit_x, double y,
                          std::string label) {
    TraceRecord r;
    r.iter = trace.records.size();
    r.x = objective.original(unit_x);
    r.y = y;
    r.best_so_far = trace.records.empty() ? y : std::min(trace.records.back().best_so_far, y);
    r.policy_label = std::move(label);
    trace.records.push_back(std::move(r));
}

inline double observe(const Objective& objective, const Eigen::VectorXd& unit_x, const Trace& partial) {
    double y = 0.0;
    try {
        y = objective.eval(unit_x);
    } catch (const ProtocolError& e) {
        throw RunError(std::string("objective protocol failure: ") + e.what(), partial, true);
    } catch (const std::exception& e) {
        throw RunError(std::string("objective evaluation failed: ") + e.what(), partial);
    }
    if (!std::isfinite(y)) throw RunError("objective returned a non-finite value", partial);
    return y;
}

inline const PolicySpec& hedge_bearing(const PolicySpec& p) {
    return p.variant == PolicySpec::Variant::Noised ? *p.base : p;
}

} // namespace detail

/// Uniform random search with the same trace layout as run_bo.
inline Trace random_search(const Objective& objective, const RunConfig& config) {
    config.validate();
    validate_bounds(objective.bounds);
    auto rng = make_rng(config.seed, Stream::design);
    Trace trace;
    Eigen::VectorXd best_x;
    const int total = config.n_init + config.n_iters;
    for (int i = 0; i < total; ++i) {
        Eigen::VectorXd x(objective.dim);
        for (int j = 0; j < objective.dim; ++j) x(j) = uniform01(rng);
        const double y = detail::observe(objective, x, trace);
        if (trace.records.empty() || y < trace.records.back().best_so_far) best_x = x;
        detail::append_record(trace, objective, x, y, "random-search");
    }
    trace.recommendation = objective.original(best_x);
    trace.recommendation_value_estimate = trace.final_best();
    return trace;
}

/// The BO driver: Latin-hypercube initial design, then n_iters rounds of
/// propose, observe, augment and refit.
inline Trace run_bo(const Objective& objective, const RunConfig& config, const PolicySpec& policy) {
    config.validate();
    policy.validate();
    validate_bounds(objective.bounds);
    if (static_cast<std::size_t>(objective.dim) != objective.bounds.size())
        throw ArgumentError("objective dimension does not match its bounds");
    if (policy.variant == PolicySpec::Variant::RandomSearch) return random_search(objective, config);

    auto design_rng = make_rng(config.seed, Stream::design);
    auto candidate_rng = make_rng(config.seed, Stream::candidates);
    auto policy_rng = make_rng(config.seed, Stream::policy);
    auto surrogate_rng = make_rng(config.seed, Stream::surrogate);
    auto jitter_rng = make_rng(config.seed, Stream::jitter);
    auto rec_rng = make_rng(config.seed, Stream::recommendation);

    Trace trace;
    Dataset data(objective.dim);
    for (const auto& x0 : initial_design(config, objective.dim, design_rng)) {
        const Eigen::VectorXd x = data.separated(x0, jitter_rng);
        const double y = detail::observe(objective, x, trace);
        data.add(x, y, jitter_rng);
        detail::append_record(trace, objective, x, y, "initial");
    }

    auto refit = [&]() {
        try {
            return fit(data, config.gp_restarts, surrogate_rng);
        } catch (const std::exception& e) {
            throw RunError(std::string("surrogate fit failed: ") + e.what(), trace);
        }
    };

    std::optional<HedgeState> hedge;
    if (detail::hedge_bearing(policy).variant == PolicySpec::Variant::Hedge)
        hedge = HedgeState::for_seeds(detail::hedge_bearing(policy).seeds.size());

    GPModel model = refit();
    for (int t = 0; t < config.n_iters; ++t) {
        Incumbent inc;
        Eigen::Index arg = 0;
        inc.y_best = data.outputs_raw().minCoeff(&arg);
        inc.x_best = data.inputs().row(arg).transpose();

        auto proposal = propose_next(model, policy, static_cast<std::size_t>(t), inc, config, candidate_rng, policy_rng,
                                     hedge ? &*hedge : nullptr);
        const Eigen::VectorXd x = data.separated(proposal.x, jitter_rng);
        const double y = detail::observe(objective, x, trace);
        data.add(x, y, jitter_rng);
        detail::append_record(trace, objective, x, y, proposal.label);
        model = refit();
        if (hedge) *hedge = hedge_update(std::move(*hedge), model);
    }

    auto [rec_x, rec_mu] = recommend(model, config, rec_rng);
    trace.recommendation = objective.original(rec_x);
    trace.recommendation_value_estimate = rec_mu;
    return trace;
}

/// Writes `rep,iter,policy_label,x_0..x_{d-1},y,best_so_far` rows.
inline void write_trace_csv(std::ostream& out, const Trace& trace, std::size_t rep, bool header) {
    const auto d = trace.records.empty() ? Eigen::Index{0} : trace.records.front().x.size();
    if (header) {
        out << "rep,iter,policy_label";
        for (Eigen::Index j = 0; j < d; ++j) out << ",x_" << j;
        out << ",y,best_so_far\n";
    }
    for (const auto& r : trace.records) {
        out << rep << ',' << r.iter << ',' << r.policy_label;
        for (Eigen::Index j = 0; j < r.x.size(); ++j) out << ',' << format_double(r.x(j));
        out << ',' << format_double(r.y) << ',' << format_double(r.best_so_far) << '\n';
    }
}

} // namespace autobo

#endif // AUTOBO_BO_LOOP_HPP
