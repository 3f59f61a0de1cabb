#ifndef AUTOBO_POLICIES_HPP
#define AUTOBO_POLICIES_HPP
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "autobo/acquisitions.hpp"
#include "autobo/errors.hpp"
#include "autobo/gp.hpp"
#include "autobo/random.hpp"

namespace autobo {

inline std::vector<AcquisitionKind> default_seeds() {
    return {AcquisitionKind::pi(), AcquisitionKind::ei(), AcquisitionKind::lcb()};
}

/// Acquisition generator: decides which acquisition (or blend) is maximized
/// at each iteration.
struct PolicySpec {
    enum class Variant { Fixed, RandomChoice, Sequential, Weighted, Noised, Hedge, RandomSearch };

    static constexpr double default_noise_scale = 0.1;
    static constexpr double default_eta = 1.0;

    Variant variant = Variant::Fixed;
    std::vector<AcquisitionKind> seeds = {AcquisitionKind::ei()};
    std::vector<double> weights;
    double scale = default_noise_scale;
    double eta = default_eta;
    std::shared_ptr<const PolicySpec> base;

    static PolicySpec fixed(AcquisitionKind kind) { return make(Variant::Fixed, {kind}); }
    static PolicySpec random_choice(std::vector<AcquisitionKind> seeds = default_seeds()) {
        return make(Variant::RandomChoice, std::move(seeds));
    }
    static PolicySpec sequential(std::vector<AcquisitionKind> seeds = default_seeds()) {
        return make(Variant::Sequential, std::move(seeds));
    }
    static PolicySpec weighted(std::vector<double> weights, std::vector<AcquisitionKind> seeds = default_seeds()) {
        auto p = make(Variant::Weighted, std::move(seeds));
        p.weights = std::move(weights);
        return p;
    }
    static PolicySpec uniform_weighted(std::vector<AcquisitionKind> seeds = default_seeds()) {
        std::vector<double> w(seeds.size(), 1.0 / static_cast<double>(seeds.size()));
        return weighted(std::move(w), std::move(seeds));
    }
    static PolicySpec noised(PolicySpec base, double scale = default_noise_scale) {
        PolicySpec p;
        p.variant = Variant::Noised;
        p.seeds = base.seeds;
        p.scale = scale;
        p.base = std::make_shared<const PolicySpec>(std::move(base));
        return p;
    }
    static PolicySpec hedge(std::vector<AcquisitionKind> seeds = default_seeds(), double eta = default_eta) {
        auto p = make(Variant::Hedge, std::move(seeds));
        p.eta = eta;
        return p;
    }
    static PolicySpec random_search() { return make(Variant::RandomSearch, {}); }

    void validate() const {
        for (const auto& s : seeds) s.validate();
        switch (variant) {
        case Variant::Fixed:
            if (seeds.size() != 1) throw ArgumentError("fixed policy needs exactly one seed acquisition");
            break;
        case Variant::RandomChoice:
        case Variant::Sequential:
            if (seeds.empty()) throw ArgumentError("policy needs at least one seed acquisition");
            break;
        case Variant::Weighted: {
            if (seeds.empty()) throw ArgumentError("weighted policy needs at least one seed acquisition");
            if (weights.size() != seeds.size()) throw ArgumentError("weighted policy needs one weight per seed");
            double sum = 0.0;
            for (double w : weights) {
                if (!(w >= 0.0 && w <= 1.0)) throw ArgumentError("weights must lie in [0,1]");
                sum += w;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw ArgumentError("weights must sum to 1");
            break;
        }
        case Variant::Noised:
            if (!base) throw ArgumentError("noised policy needs a base policy");
            if (base->variant == Variant::Noised) throw ArgumentError("noised policies cannot be stacked");
            if (base->variant == Variant::RandomSearch) throw ArgumentError("random search cannot be noised");
            if (!(scale >= 0.0 && std::isfinite(scale))) throw ArgumentError("noise scale must be non-negative");
            base->validate();
            break;
        case Variant::Hedge:
            if (seeds.empty()) throw ArgumentError("hedge policy needs at least one seed acquisition");
            if (!(eta > 0.0 && std::isfinite(eta))) throw ArgumentError("hedge eta must be positive");
            break;
        case Variant::RandomSearch: break;
        }
    }

private:
    static PolicySpec make(Variant v, std::vector<AcquisitionKind> seeds) {
        PolicySpec p;
        p.variant = v;
        p.seeds = std::move(seeds);
        return p;
    }
};

/// Cumulative GP-Hedge rewards and the per-seed nominees of the current iteration.
struct HedgeState {
    std::vector<double> gains;
    std::vector<Eigen::VectorXd> last_nominees;
    bool nominees_pending = false;

    static HedgeState for_seeds(std::size_t n) { return {std::vector<double>(n, 0.0), {}, false}; }
};

// ---------------------------------------------------------------------------
// Generator building blocks

inline std::size_t random_choice(std::size_t n_seeds, Rng& rng) {
    if (n_seeds == 0) throw ArgumentError("random_choice: empty seed set");
    return std::uniform_int_distribution<std::size_t>(0, n_seeds - 1)(rng);
}

inline std::size_t argmax_lowest(std::span<const double> values) {
    if (values.empty()) throw ArgumentError("argmax of an empty list");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

namespace detail {

struct Range {
    double lo, span;
};

inline Range value_range(std::span<const double> u) {
    const auto [lo, hi] = std::minmax_element(u.begin(), u.end());
    return {*lo, *hi - *lo};
}

inline double min_max(double v, const Range& r) { return r.span > 0.0 ? (v - r.lo) / r.span : 0.0; }

} // namespace detail

/// Min-max normalizes each seed's utilities over the candidate set and mixes
/// them with the given weights. Constant lists contribute zeros.
inline std::vector<double> weighted_utility(std::span<const std::vector<double>> per_seed, std::span<const double> weights) {
    if (per_seed.size() != weights.size()) throw ArgumentError("weighted_utility: one weight per seed required");
    if (per_seed.empty()) throw ArgumentError("weighted_utility: no seeds");
    const auto m = per_seed.front().size();
    std::vector<double> out(m, 0.0);
    for (std::size_t s = 0; s < per_seed.size(); ++s) {
        if (per_seed[s].size() != m) throw ArgumentError("weighted_utility: utility lists differ in length");
        const auto r = detail::value_range(per_seed[s]);
        for (std::size_t i = 0; i < m; ++i) out[i] += weights[s] * detail::min_max(per_seed[s][i], r);
    }
    return out;
}

/// Adds scale * range(u) * N(0,1) to each utility.
inline std::vector<double> noised_utility(std::span<const double> base, double scale, Rng& rng) {
    if (!(scale >= 0.0)) throw ArgumentError("noised_utility: scale must be non-negative");
    std::vector<double> out(base.begin(), base.end());
    if (out.empty() || scale == 0.0) return out;
    const double range = detail::value_range(base).span;
    if (range == 0.0) return out;
    for (auto& u : out) u += scale * range * standard_normal(rng);
    return out;
}

/// Softmax over eta * gains, shifted by the maximum gain.
inline std::vector<double> hedge_probabilities(const HedgeState& state, double eta) {
    if (state.gains.empty()) throw ArgumentError("hedge: no gains");
    const double top = *std::max_element(state.gains.begin(), state.gains.end());
    std::vector<double> p;
    p.reserve(state.gains.size());
    double total = 0.0;
    for (double g : state.gains) {
        if (!std::isfinite(g)) throw ArgumentError("hedge: gains must be finite");
        p.push_back(std::exp(eta * (g - top)));
        total += p.back();
    }
    for (auto& v : p) v /= total;
    return p;
}

inline std::size_t hedge_select(const HedgeState& state, double eta, Rng& rng) {
    const auto p = hedge_probabilities(state, eta);
    if (p.size() == 1) return 0;
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return p.size() - 1;
}

/// Credits each seed with the negated posterior mean at its nominee.
inline HedgeState hedge_update(HedgeState state, const GPModel& model_after_eval) {
    if (!state.nominees_pending || state.last_nominees.size() != state.gains.size())
        throw UsageError("hedge_update: no nominees recorded for this iteration");
    for (std::size_t i = 0; i < state.gains.size(); ++i) state.gains[i] -= model_after_eval.predict(state.last_nominees[i]).mu;
    state.nominees_pending = false;
    return state;
}

// ---------------------------------------------------------------------------
// Per-iteration acquisition

/// Utilities over a candidate set for one iteration, plus a scorer for
/// arbitrary points that ranks them consistently with the candidate utilities
/// (used by local refinement).
struct IterationUtilities {
    std::vector<double> utilities;
    std::string label;
    std::function<double(const Eigen::VectorXd&)> point_utility;
};

namespace detail {

inline std::vector<std::vector<double>> per_seed_utilities(std::span<const AcquisitionKind> seeds,
                                                          std::span<const PosteriorPrediction> preds,
                                                          const Incumbent& inc) {
    std::vector<std::vector<double>> out;
    out.reserve(seeds.size());
    for (const auto& s : seeds) out.push_back(evaluate_batch(s, preds, inc));
    return out;
}

inline IterationUtilities single_seed(const AcquisitionKind& kind, std::vector<double> u, const GPModel& model,
                                      const Incumbent& inc) {
    return {std::move(u), to_string(kind.tag),
            [&model, kind, inc](const Eigen::VectorXd& x) { return utility(kind, model.predict(x), inc); }};
}

} // namespace detail

/// Evaluates the policy's acquisition for iteration `iter` over the rows of
/// `candidates`. `hedge` is required for Hedge policies.
inline IterationUtilities utilities_for_iteration(const PolicySpec& policy, std::size_t iter, const GPModel& model,
                                                  const Incumbent& inc, const Eigen::MatrixXd& candidates, Rng& rng,
                                                  HedgeState* hedge = nullptr) {
    using V = PolicySpec::Variant;
    if (candidates.rows() == 0) throw ArgumentError("utilities_for_iteration: no candidates");
    if (policy.variant == V::RandomSearch) throw UsageError("random search has no acquisition utilities");
    if (policy.variant == V::Hedge && hedge == nullptr) throw UsageError("hedge policy evaluated without HedgeState");

    if (policy.variant == V::Noised) {
        auto base = utilities_for_iteration(*policy.base, iter, model, inc, candidates, rng, hedge);
        base.utilities = noised_utility(base.utilities, policy.scale, rng);
        base.label = "noised:" + base.label;
        return base;
    }

    const auto preds = model.predict_batch(candidates);
    switch (policy.variant) {
    case V::Fixed: {
        const auto& kind = policy.seeds.front();
        return detail::single_seed(kind, evaluate_batch(kind, preds, inc), model, inc);
    }
    case V::RandomChoice: {
        const auto& kind = policy.seeds[random_choice(policy.seeds.size(), rng)];
        return detail::single_seed(kind, evaluate_batch(kind, preds, inc), model, inc);
    }
    case V::Sequential: {
        const auto& kind = policy.seeds[iter % policy.seeds.size()];
        return detail::single_seed(kind, evaluate_batch(kind, preds, inc), model, inc);
    }
    case V::Weighted: {
        auto per_seed = detail::per_seed_utilities(policy.seeds, preds, inc);
        std::vector<detail::Range> ranges;
        for (const auto& u : per_seed) ranges.push_back(detail::value_range(u));
        auto mixed = weighted_utility(per_seed, policy.weights);
        return {std::move(mixed), "weighted",
                [&model, inc, seeds = policy.seeds, weights = policy.weights, ranges](const Eigen::VectorXd& x) {
                    const auto pred = model.predict(x);
                    double v = 0.0;
                    for (std::size_t s = 0; s < seeds.size(); ++s)
                        v += weights[s] * detail::min_max(utility(seeds[s], pred, inc), ranges[s]);
                    return v;
                }};
    }
    case V::Hedge: {
        if (hedge->gains.size() != policy.seeds.size()) throw UsageError("HedgeState does not match the seed set");
        auto per_seed = detail::per_seed_utilities(policy.seeds, preds, inc);
        hedge->last_nominees.clear();
        for (const auto& u : per_seed) hedge->last_nominees.push_back(candidates.row(argmax_lowest(u)).transpose());
        hedge->nominees_pending = true;
        const auto chosen = hedge_select(*hedge, policy.eta, rng);
        return detail::single_seed(policy.seeds[chosen], std::move(per_seed[chosen]), model, inc);
    }
    case V::Noised:
    case V::RandomSearch: break;
    }
    throw UsageError("unhandled policy variant");
}

// ---------------------------------------------------------------------------
// Names and serialization

inline std::string to_string(PolicySpec::Variant v) {
    using V = PolicySpec::Variant;
    switch (v) {
    case V::Fixed: return "fixed";
    case V::RandomChoice: return "random";
    case V::Sequential: return "sequential";
    case V::Weighted: return "weighted";
    case V::Noised: return "noised";
    case V::Hedge: return "hedge";
    case V::RandomSearch: return "random-search";
    }
    return "?";
}

inline PolicySpec::Variant parse_variant(const std::string& s) {
    using V = PolicySpec::Variant;
    for (auto v : {V::Fixed, V::RandomChoice, V::Sequential, V::Weighted, V::Noised, V::Hedge, V::RandomSearch})
        if (to_string(v) == s) return v;
    throw ArgumentError("unknown policy variant '" + s + "'");
}

namespace detail {

inline std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string seed_name(const AcquisitionKind& k) {
    if (k.tag == AcquisitionTag::LCB && k.kappa != AcquisitionKind::default_kappa)
        return "LCB" + std::string("(") + short_number(k.kappa) + ")";
    if (k.tag != AcquisitionTag::LCB && k.xi != AcquisitionKind::default_xi)
        return to_string(k.tag) + "(" + short_number(k.xi) + ")";
    return to_string(k.tag);
}

} // namespace detail

/// Human-readable, comma-free policy name used as the CSV `policy` column.
inline std::string policy_name(const PolicySpec& p) {
    using V = PolicySpec::Variant;
    switch (p.variant) {
    case V::Fixed: return detail::seed_name(p.seeds.front());
    case V::Weighted: {
        bool uniform = true;
        for (double w : p.weights)
            if (std::abs(w - 1.0 / static_cast<double>(p.weights.size())) > 1e-9) uniform = false;
        if (uniform) return "weighted";
        std::string s = "weighted[";
        for (std::size_t i = 0; i < p.weights.size(); ++i) s += (i ? "/" : "") + detail::short_number(p.weights[i]);
        return s + "]";
    }
    case V::Noised: return "noised-" + policy_name(*p.base);
    default: return to_string(p.variant);
    }
}

inline nlohmann::json to_json(const AcquisitionKind& k) {
    nlohmann::json j{{"tag", to_string(k.tag)}};
    if (k.tag == AcquisitionTag::LCB)
        j["kappa"] = k.kappa;
    else
        j["xi"] = k.xi;
    return j;
}

inline AcquisitionKind acquisition_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        AcquisitionKind k;
        k.tag = parse_acquisition_tag(j.get<std::string>());
        return k;
    }
    if (!j.is_object() || !j.contains("tag")) throw ArgumentError("acquisition must be a name or an object with a tag");
    AcquisitionKind k;
    k.tag = parse_acquisition_tag(j.at("tag").get<std::string>());
    if (j.contains("kappa")) k.kappa = j.at("kappa").get<double>();
    if (j.contains("xi")) k.xi = j.at("xi").get<double>();
    k.validate();
    return k;
}

inline nlohmann::json to_json(const PolicySpec& p) {
    using V = PolicySpec::Variant;
    nlohmann::json j{{"variant", to_string(p.variant)}};
    auto seeds = nlohmann::json::array();
    for (const auto& s : p.seeds) seeds.push_back(to_json(s));
    j["seeds"] = seeds;
    if (p.variant == V::Weighted) j["weights"] = p.weights;
    if (p.variant == V::Noised) {
        j["scale"] = p.scale;
        j["base"] = to_json(*p.base);
    }
    if (p.variant == V::Hedge) j["eta"] = p.eta;
    return j;
}

inline PolicySpec policy_from_json(const nlohmann::json& j) {
    using V = PolicySpec::Variant;
    try {
        if (!j.is_object()) throw ArgumentError("policy must be a JSON object");
        PolicySpec p;
        p.variant = parse_variant(j.at("variant").get<std::string>());
        if (j.contains("seeds")) {
            p.seeds.clear();
            for (const auto& s : j.at("seeds")) p.seeds.push_back(acquisition_from_json(s));
        } else if (p.variant == V::Fixed) {
            throw ArgumentError("fixed policy needs a seeds list");
        } else {
            p.seeds = p.variant == V::RandomSearch ? std::vector<AcquisitionKind>{} : default_seeds();
        }
        if (j.contains("weights")) p.weights = j.at("weights").get<std::vector<double>>();
        if (p.variant == V::Weighted && p.weights.empty())
            p.weights.assign(p.seeds.size(), 1.0 / static_cast<double>(p.seeds.size()));
        if (j.contains("scale")) p.scale = j.at("scale").get<double>();
        if (j.contains("eta")) p.eta = j.at("eta").get<double>();
        if (p.variant == V::Noised) {
            if (!j.contains("base")) throw ArgumentError("noised policy needs a base policy");
            p.base = std::make_shared<const PolicySpec>(policy_from_json(j.at("base")));
            p.seeds = p.base->seeds;
        }
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(std::string("malformed policy JSON: ") + e.what());
    }
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

inline double parse_number(const std::string& s, const std::string& context) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ArgumentError("expected a number in '" + context + "', got '" + s + "'");
    }
}

} // namespace detail

/// Parses a policy from either a JSON object or the short CLI form:
/// `ei`, `pi`, `lcb`, `ei:<xi>`, `lcb:<kappa>`, `random`, `sequential`,
/// `weighted`, `weighted:<w1>/<w2>/<w3>`, `hedge`, `hedge:<eta>`,
/// `noised:<scale>:<base>`, `random-search`.
inline PolicySpec parse_policy(const std::string& text) {
    if (!text.empty() && text.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ArgumentError(std::string("malformed policy JSON: ") + e.what());
        }
        return policy_from_json(j);
    }
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
    PolicySpec p;
    if (head == "ei" || head == "pi" || head == "lcb") {
        AcquisitionKind k;
        k.tag = parse_acquisition_tag(head);
        if (!rest.empty()) (k.tag == AcquisitionTag::LCB ? k.kappa : k.xi) = detail::parse_number(rest, text);
        p = PolicySpec::fixed(k);
    } else if (head == "random" && rest.empty()) {
        p = PolicySpec::random_choice();
    } else if (head == "sequential" && rest.empty()) {
        p = PolicySpec::sequential();
    } else if (head == "weighted") {
        if (rest.empty()) {
            p = PolicySpec::uniform_weighted();
        } else {
            std::vector<double> w;
            for (const auto& part : detail::split(rest, '/')) w.push_back(detail::parse_number(part, text));
            p = PolicySpec::weighted(std::move(w));
        }
    } else if (head == "hedge") {
        p = PolicySpec::hedge(default_seeds(), rest.empty() ? PolicySpec::default_eta : detail::parse_number(rest, text));
    } else if (head == "noised") {
        const auto c2 = rest.find(':');
        if (c2 == std::string::npos) throw ArgumentError("noised policy form is noised:<scale>:<base>");
        p = PolicySpec::noised(parse_policy(rest.substr(c2 + 1)), detail::parse_number(rest.substr(0, c2), text));
    } else if (head == "random-search" && rest.empty()) {
        p = PolicySpec::random_search();
    } else {
        throw ArgumentError("unrecognized policy '" + text + "'");
    }
    p.validate();
    return p;
}

} // namespace autobo

#endif // AUTOBO_POLICIES_HPP
