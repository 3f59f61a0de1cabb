#ifndef AUTOBO_ACQUISITIONS_HPP
#define AUTOBO_ACQUISITIONS_HPP
#pragma once

#include <cctype>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "autobo/errors.hpp"
#include "autobo/posterior.hpp"

// Every acquisition is a utility to maximize for a minimization problem.

namespace autobo {

struct Incumbent {
    double y_best = 0.0;
    Eigen::VectorXd x_best;
};

enum class AcquisitionTag { PI, EI, LCB };

struct AcquisitionKind {
    static constexpr double default_kappa = 1.96;
    static constexpr double default_xi = 0.01;

    AcquisitionTag tag = AcquisitionTag::EI;
    double kappa = default_kappa;
    double xi = default_xi;

    static AcquisitionKind pi(double xi = default_xi) { return {AcquisitionTag::PI, default_kappa, xi}; }
    static AcquisitionKind ei(double xi = default_xi) { return {AcquisitionTag::EI, default_kappa, xi}; }
    static AcquisitionKind lcb(double kappa = default_kappa) { return {AcquisitionTag::LCB, kappa, default_xi}; }

    void validate() const {
        if (tag == AcquisitionTag::LCB && !(kappa > 0.0 && std::isfinite(kappa)))
            throw ArgumentError("LCB kappa must be positive and finite");
        if (tag != AcquisitionTag::LCB && !(xi >= 0.0 && std::isfinite(xi)))
            throw ArgumentError("PI/EI xi must be non-negative and finite");
    }

    friend bool operator==(const AcquisitionKind&, const AcquisitionKind&) = default;
};

inline std::string to_string(AcquisitionTag tag) {
    switch (tag) {
    case AcquisitionTag::PI: return "PI";
    case AcquisitionTag::EI: return "EI";
    case AcquisitionTag::LCB: return "LCB";
    }
    return "?";
}

inline AcquisitionTag parse_acquisition_tag(const std::string& name) {
    std::string up;
    for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (up == "PI") return AcquisitionTag::PI;
    if (up == "EI") return AcquisitionTag::EI;
    if (up == "LCB") return AcquisitionTag::LCB;
    throw ArgumentError("unknown acquisition '" + name + "' (expected PI, EI or LCB)");
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

inline double pi_utility(const PosteriorPrediction& pred, const Incumbent& inc, double xi) {
    const double target = inc.y_best - xi;
    if (pred.sigma <= 0.0) return pred.mu < target ? 1.0 : 0.0;
    return normal_cdf((target - pred.mu) / pred.sigma);
}

inline double ei_utility(const PosteriorPrediction& pred, const Incumbent& inc, double xi) {
    const double improvement = inc.y_best - xi - pred.mu;
    if (pred.sigma <= 0.0) return std::max(improvement, 0.0);
    const double gamma = improvement / pred.sigma;
    // Rounding can leave the closed form a hair below the deterministic improvement.
    return std::max(pred.sigma * (gamma * normal_cdf(gamma) + normal_pdf(gamma)), std::max(improvement, 0.0));
}

/// Negated lower confidence bound, kappa*sigma - mu.
inline double lcb_utility(const PosteriorPrediction& pred, double kappa) { return kappa * pred.sigma - pred.mu; }

inline double utility(const AcquisitionKind& kind, const PosteriorPrediction& pred, const Incumbent& inc) {
    switch (kind.tag) {
    case AcquisitionTag::PI: return pi_utility(pred, inc, kind.xi);
    case AcquisitionTag::EI: return ei_utility(pred, inc, kind.xi);
    case AcquisitionTag::LCB: return lcb_utility(pred, kind.kappa);
    }
    return 0.0;
}

inline std::vector<double> evaluate_batch(const AcquisitionKind& kind, std::span<const PosteriorPrediction> preds,
                                          const Incumbent& inc) {
    if (preds.empty()) throw ArgumentError("evaluate_batch: empty prediction list");
    std::vector<double> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(utility(kind, p, inc));
    return out;
}

} // namespace autobo

#endif // AUTOBO_ACQUISITIONS_HPP
