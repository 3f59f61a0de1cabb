#ifndef AUTOBO_GP_HPP
#define AUTOBO_GP_HPP
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "autobo/errors.hpp"
#include "autobo/posterior.hpp"
#include "autobo/random.hpp"

namespace autobo {

/// Matérn-5/2 ARD hyperparameters, all stored as logs. Lengthscales are in
/// normalized-input units, variances in standardized-output units.
struct KernelParams {
    Eigen::VectorXd log_lengthscales;
    double log_signal_var = 0.0;
    double log_noise_var = std::log(1e-6);

    [[nodiscard]] int dim() const { return static_cast<int>(log_lengthscales.size()); }
    [[nodiscard]] double signal_var() const { return std::exp(log_signal_var); }
    [[nodiscard]] double noise_var() const { return std::exp(log_noise_var); }

    static KernelParams unit(int dim, double log_noise_var = std::log(1e-6)) {
        KernelParams p;
        p.log_lengthscales = Eigen::VectorXd::Zero(dim);
        p.log_signal_var = 0.0;
        p.log_noise_var = log_noise_var;
        return p;
    }

    /// Packed as [log_lengthscales..., log_signal_var, log_noise_var].
    [[nodiscard]] Eigen::VectorXd packed() const {
        Eigen::VectorXd v(dim() + 2);
        v.head(dim()) = log_lengthscales;
        v(dim()) = log_signal_var;
        v(dim() + 1) = log_noise_var;
        return v;
    }

    static KernelParams unpack(const Eigen::VectorXd& v) {
        const auto d = static_cast<int>(v.size()) - 2;
        if (d < 1) throw ArgumentError("packed kernel parameters need at least 3 entries");
        KernelParams p;
        p.log_lengthscales = v.head(d);
        p.log_signal_var = v(d);
        p.log_noise_var = v(d + 1);
        return p;
    }

    void validate(int expected_dim) const {
        if (dim() != expected_dim)
            throw ArgumentError("kernel has " + std::to_string(dim()) + " lengthscales, expected " +
                                std::to_string(expected_dim));
        if (!log_lengthscales.allFinite() || !std::isfinite(log_signal_var) || !std::isfinite(log_noise_var))
            throw ArgumentError("kernel parameters must be finite");
    }
};

namespace detail {

inline constexpr double sqrt5 = 2.2360679774997896964091736687313;

// Scaled distance r = || (x1 - x2) / l ||.
template <typename A, typename B>
double scaled_distance(const KernelParams& p, const Eigen::MatrixBase<A>& x1, const Eigen::MatrixBase<B>& x2) {
    double r2 = 0.0;
    for (Eigen::Index j = 0; j < x1.size(); ++j) {
        const double z = (x1(j) - x2(j)) * std::exp(-p.log_lengthscales(j));
        r2 += z * z;
    }
    return std::sqrt(r2);
}

inline double matern52(double signal_var, double r) {
    const double s5r = sqrt5 * r;
    return signal_var * (1.0 + s5r + 5.0 * r * r / 3.0) * std::exp(-s5r);
}

} // namespace detail

/// Matérn-5/2 covariance with ARD lengthscales.
inline double kernel_eval(const KernelParams& params, const Eigen::Ref<const Eigen::VectorXd>& x1,
                          const Eigen::Ref<const Eigen::VectorXd>& x2) {
    if (x1.size() != params.dim() || x2.size() != params.dim())
        throw ArgumentError("kernel_eval: point dimension does not match kernel dimension");
    return detail::matern52(params.signal_var(), detail::scaled_distance(params, x1, x2));
}

/// Observations on the unit box with standardized outputs.
class Dataset {
public:
    static constexpr double duplicate_tolerance = 1e-10;
    static constexpr double duplicate_perturbation = 1e-8;

    explicit Dataset(int dim) : inputs_(0, dim) {
        if (dim < 1) throw ArgumentError("dataset dimension must be positive");
    }

    /// Takes rows as given; near-duplicate rows are rejected rather than perturbed.
    Dataset(Eigen::MatrixXd inputs, Eigen::VectorXd outputs_raw) : inputs_(std::move(inputs)), raw_(std::move(outputs_raw)) {
        if (inputs_.cols() < 1) throw ArgumentError("dataset dimension must be positive");
        if (inputs_.rows() != raw_.size()) throw ArgumentError("dataset inputs and outputs differ in length");
        for (Eigen::Index i = 0; i < inputs_.rows(); ++i) {
            check_point(inputs_.row(i).transpose());
            for (Eigen::Index k = 0; k < i; ++k)
                if ((inputs_.row(i) - inputs_.row(k)).cwiseAbs().maxCoeff() < duplicate_tolerance)
                    throw ArgumentError("dataset rows " + std::to_string(k) + " and " + std::to_string(i) +
                                        " are duplicates");
        }
        if (!raw_.allFinite()) throw ArgumentError("dataset outputs must be finite");
        restandardize();
    }

    [[nodiscard]] int dim() const { return static_cast<int>(inputs_.cols()); }
    [[nodiscard]] int size() const { return static_cast<int>(inputs_.rows()); }
    [[nodiscard]] const Eigen::MatrixXd& inputs() const { return inputs_; }
    [[nodiscard]] const Eigen::VectorXd& outputs_raw() const { return raw_; }
    [[nodiscard]] const Eigen::VectorXd& outputs_std() const { return std_; }
    [[nodiscard]] double std_offset() const { return offset_; }
    [[nodiscard]] double std_scale() const { return scale_; }

    /// Returns x unchanged unless it lies within the duplicate tolerance of a
    /// stored row, in which case it is perturbed by uniform noise of magnitude
    /// 1e-8 per coordinate (clipped to the box) until it does not.
    [[nodiscard]] Eigen::VectorXd separated(Eigen::VectorXd x, Rng& rng) const {
        check_point(x);
        for (int attempt = 0; attempt < 1000 && is_near_duplicate(x); ++attempt)
            for (Eigen::Index j = 0; j < x.size(); ++j)
                x(j) = std::clamp(x(j) + uniform(rng, -duplicate_perturbation, duplicate_perturbation), 0.0, 1.0);
        if (is_near_duplicate(x)) throw NumericalError("could not separate a duplicate input");
        return x;
    }

    /// Appends an observation after applying the duplicate policy; returns the stored input.
    Eigen::VectorXd add(const Eigen::VectorXd& x, double y, Rng& rng) {
        if (!std::isfinite(y)) throw ArgumentError("observation must be finite");
        Eigen::VectorXd stored = separated(x, rng);
        const auto n = inputs_.rows();
        inputs_.conservativeResize(n + 1, Eigen::NoChange);
        inputs_.row(n) = stored.transpose();
        raw_.conservativeResize(n + 1);
        raw_(n) = y;
        restandardize();
        return stored;
    }

    [[nodiscard]] bool is_near_duplicate(const Eigen::VectorXd& x) const {
        for (Eigen::Index i = 0; i < inputs_.rows(); ++i)
            if ((inputs_.row(i).transpose() - x).cwiseAbs().maxCoeff() < duplicate_tolerance) return true;
        return false;
    }

private:
    void check_point(const Eigen::VectorXd& x) const {
        if (x.size() != inputs_.cols()) throw ArgumentError("input point has the wrong dimension");
        for (Eigen::Index j = 0; j < x.size(); ++j)
            if (!(x(j) >= 0.0 && x(j) <= 1.0)) throw ArgumentError("input coordinates must lie in [0,1]");
    }

    void restandardize() {
        const auto n = raw_.size();
        if (n == 0) {
            offset_ = 0.0;
            scale_ = 1.0;
            std_.resize(0);
            return;
        }
        offset_ = raw_.mean();
        const double var = (raw_.array() - offset_).square().sum() / static_cast<double>(n);
        scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
        std_ = (raw_.array() - offset_) / scale_;
    }

    Eigen::MatrixXd inputs_;
    Eigen::VectorXd raw_;
    Eigen::VectorXd std_;
    double offset_ = 0.0;
    double scale_ = 1.0;
};

namespace detail {

inline Eigen::MatrixXd gram(const KernelParams& p, const Eigen::MatrixXd& x) {
    const auto n = x.rows();
    const double s = p.signal_var();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = s;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = matern52(s, scaled_distance(p, x.row(i), x.row(j)));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

struct Factorization {
    Eigen::MatrixXd lower;
    double jitter = 0.0;
};

// Cholesky of K + noise*I + jitter*I, escalating the jitter from 1e-10 to
// 1e-4 (relative to the signal variance) by factors of 10.
inline Factorization factorize(const KernelParams& p, const Eigen::MatrixXd& k_signal) {
    const double s = p.signal_var();
    const double noise = p.noise_var();
    const auto n = k_signal.rows();
    for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
        const double jitter = rel * s;
        Eigen::MatrixXd k = k_signal;
        k.diagonal().array() += noise + jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() != Eigen::Success) continue;
        Eigen::MatrixXd l = llt.matrixL();
        bool ok = true;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) ok = false;
        if (ok) return {std::move(l), jitter};
    }
    throw NumericalError("Cholesky factorization failed after jitter escalation to 1e-4");
}

} // namespace detail

/// A GP conditioned on a dataset. Immutable once built.
class GPModel {
public:
    GPModel(KernelParams params, Dataset data) : params_(std::move(params)), data_(std::move(data)) {
        params_.validate(data_.dim());
        if (data_.size() < 1) throw ArgumentError("GP needs at least one observation");
        auto f = detail::factorize(params_, detail::gram(params_, data_.inputs()));
        chol_ = std::move(f.lower);
        jitter_ = f.jitter;
        solve_vec_ = chol_.triangularView<Eigen::Lower>().solve(data_.outputs_std());
        chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(solve_vec_);
    }

    [[nodiscard]] const KernelParams& params() const { return params_; }
    [[nodiscard]] const Dataset& data() const { return data_; }
    [[nodiscard]] const Eigen::MatrixXd& chol_factor() const { return chol_; }
    [[nodiscard]] const Eigen::VectorXd& solve_vec() const { return solve_vec_; }
    [[nodiscard]] double jitter() const { return jitter_; }
    [[nodiscard]] int dim() const { return data_.dim(); }

    [[nodiscard]] double log_marginal_likelihood() const {
        const auto n = static_cast<double>(data_.size());
        return -0.5 * data_.outputs_std().dot(solve_vec_) - chol_.diagonal().array().log().sum() -
               0.5 * n * std::log(2.0 * std::numbers::pi);
    }

    [[nodiscard]] PosteriorPrediction predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        if (x.size() != dim()) throw ArgumentError("predict: point dimension does not match model");
        const auto n = data_.size();
        const double s = params_.signal_var();
        Eigen::VectorXd k(n);
        for (Eigen::Index i = 0; i < n; ++i)
            k(i) = detail::matern52(s, detail::scaled_distance(params_, x, data_.inputs().row(i)));
        const double mean_std = k.dot(solve_vec_);
        chol_.triangularView<Eigen::Lower>().solveInPlace(k);
        const double var_std = std::max(s - k.squaredNorm(), 0.0);
        return {data_.std_offset() + data_.std_scale() * mean_std, data_.std_scale() * std::sqrt(var_std)};
    }

    /// Row-wise predictions for an m×d matrix of points.
    [[nodiscard]] std::vector<PosteriorPrediction> predict_batch(const Eigen::MatrixXd& points) const {
        if (points.cols() != dim()) throw ArgumentError("predict: point dimension does not match model");
        const auto n = data_.size();
        const auto m = points.rows();
        const double s = params_.signal_var();
        Eigen::MatrixXd cross(n, m);
        for (Eigen::Index c = 0; c < m; ++c)
            for (Eigen::Index i = 0; i < n; ++i)
                cross(i, c) = detail::matern52(s, detail::scaled_distance(params_, points.row(c), data_.inputs().row(i)));
        const Eigen::VectorXd mean_std = cross.transpose() * solve_vec_;
        chol_.triangularView<Eigen::Lower>().solveInPlace(cross);
        std::vector<PosteriorPrediction> out(static_cast<std::size_t>(m));
        for (Eigen::Index c = 0; c < m; ++c) {
            const double var_std = std::max(s - cross.col(c).squaredNorm(), 0.0);
            out[static_cast<std::size_t>(c)] = {data_.std_offset() + data_.std_scale() * mean_std(c),
                                                data_.std_scale() * std::sqrt(var_std)};
        }
        return out;
    }

private:
    KernelParams params_;
    Dataset data_;
    Eigen::MatrixXd chol_;
    Eigen::VectorXd solve_vec_;
    double jitter_ = 0.0;
};

inline PosteriorPrediction predict(const GPModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    return model.predict(x);
}

/// Log marginal likelihood of the standardized outputs.
inline double log_marginal_likelihood(const KernelParams& params, const Dataset& data) {
    return GPModel(params, data).log_marginal_likelihood();
}

/// LML and its gradient with respect to KernelParams::packed().
inline std::pair<double, Eigen::VectorXd> log_marginal_likelihood_with_gradient(const KernelParams& params,
                                                                               const Dataset& data) {
    params.validate(data.dim());
    const auto n = data.size();
    const int d = data.dim();
    const double s = params.signal_var();
    const Eigen::MatrixXd& x = data.inputs();
    const Eigen::MatrixXd k_signal = detail::gram(params, x);
    const auto f = detail::factorize(params, k_signal);
    const auto lower = f.lower.triangularView<Eigen::Lower>();

    Eigen::VectorXd alpha = lower.solve(data.outputs_std());
    lower.transpose().solveInPlace(alpha);
    const double lml = -0.5 * data.outputs_std().dot(alpha) - f.lower.diagonal().array().log().sum() -
                       0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);

    Eigen::MatrixXd k_inv = Eigen::MatrixXd::Identity(n, n);
    lower.solveInPlace(k_inv);
    lower.transpose().solveInPlace(k_inv);
    const Eigen::MatrixXd w = alpha * alpha.transpose() - k_inv;

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(d + 2);
    const Eigen::ArrayXd inv_ls = (-params.log_lengthscales.array()).exp();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            const Eigen::ArrayXd z = (x.row(i) - x.row(j)).transpose().array() * inv_ls;
            const double r = std::sqrt(z.square().sum());
            const double s5r = detail::sqrt5 * r;
            // d k / d log l_q = s * 5/3 * (1 + sqrt5 r) exp(-sqrt5 r) * z_q^2
            const double common = s * (5.0 / 3.0) * (1.0 + s5r) * std::exp(-s5r);
            const double wij = 2.0 * w(i, j); // symmetric pair
            for (int q = 0; q < d; ++q) grad(q) += 0.5 * wij * common * z(q) * z(q);
        }
    }
    // d/dlog s covers the signal block and the jitter, which scales with s.
    Eigen::MatrixXd dk_signal = k_signal;
    dk_signal.diagonal().array() += f.jitter;
    grad(d) = 0.5 * (w.array() * dk_signal.array()).sum();
    grad(d + 1) = 0.5 * params.noise_var() * w.trace();
    return {lml, grad};
}

/// Log-space search box and restart distribution for maximum-likelihood fitting.
struct FitOptions {
    double init_lengthscale_lo = 1e-2, init_lengthscale_hi = 1e1;
    double init_signal_lo = 1e-2, init_signal_hi = 1e1;
    double init_noise_lo = 1e-6, init_noise_hi = 1e-1;

    double lengthscale_lo = 1e-2, lengthscale_hi = 1e2;
    double signal_lo = 1e-3, signal_hi = 1e2;
    double noise_lo = 1e-10, noise_hi = 1.0;

    int max_iterations = 50;
    double gradient_tolerance = 1e-6;
    /// Stop once one accepted step gains less than this times (1 + |LML|).
    double relative_improvement_tolerance = 1e-8;
};

namespace detail {

struct BoxBounds {
    Eigen::VectorXd lo, hi;
};

inline BoxBounds fit_bounds(int d, const FitOptions& o) {
    BoxBounds b{Eigen::VectorXd(d + 2), Eigen::VectorXd(d + 2)};
    b.lo.head(d).setConstant(std::log(o.lengthscale_lo));
    b.hi.head(d).setConstant(std::log(o.lengthscale_hi));
    b.lo(d) = std::log(o.signal_lo);
    b.hi(d) = std::log(o.signal_hi);
    b.lo(d + 1) = std::log(o.noise_lo);
    b.hi(d + 1) = std::log(o.noise_hi);
    return b;
}

// Projected quasi-Newton ascent of the LML inside a box. Only ever accepts
// improving steps, so the result is never worse than the start.
inline std::pair<Eigen::VectorXd, double> maximize_lml(const Dataset& data, Eigen::VectorXd x, const BoxBounds& box,
                                                       const FitOptions& opts) {
    const auto m = x.size();
    x = x.cwiseMax(box.lo).cwiseMin(box.hi);
    auto eval = [&](const Eigen::VectorXd& v) {
        auto [f, g] = log_marginal_likelihood_with_gradient(KernelParams::unpack(v), data);
        return std::pair<double, Eigen::VectorXd>{-f, -g};
    };
    auto [f, g] = eval(x);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(m, m);
    constexpr double max_step = 3.0;

    auto active = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& grad, Eigen::Index i) {
        return (v(i) <= box.lo(i) && grad(i) > 0.0) || (v(i) >= box.hi(i) && grad(i) < 0.0);
    };

    for (int it = 0; it < opts.max_iterations; ++it) {
        Eigen::VectorXd pg = g;
        for (Eigen::Index i = 0; i < m; ++i)
            if (active(x, g, i)) pg(i) = 0.0;
        if (pg.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) break;

        Eigen::VectorXd dir = -(h * pg);
        for (Eigen::Index i = 0; i < m; ++i)
            if (active(x, g, i)) dir(i) = 0.0;
        if (dir.dot(pg) >= 0.0) {
            dir = -pg;
            h.setIdentity();
        }
        if (const double norm = dir.norm(); norm > max_step) dir *= max_step / norm;

        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = 0.0;
        Eigen::VectorXd g_new;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            x_new = (x + t * dir).cwiseMax(box.lo).cwiseMin(box.hi);
            try {
                std::tie(f_new, g_new) = eval(x_new);
            } catch (const NumericalError&) {
                continue;
            }
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x) && f_new <= f) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;

        const Eigen::VectorXd step = x_new - x;
        Eigen::VectorXd dg = g_new - g;
        for (Eigen::Index i = 0; i < m; ++i)
            if (step(i) == 0.0) dg(i) = 0.0;
        const double improvement = f - f_new;
        x = x_new;
        f = f_new;
        g = g_new;
        if (const double sy = step.dot(dg); sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
            h = (id - rho * step * dg.transpose()) * h * (id - rho * dg * step.transpose()) +
                rho * step * step.transpose();
        }
        if (improvement < opts.relative_improvement_tolerance * (1.0 + std::abs(f))) break;
    }
    return {x, -f};
}

} // namespace detail

/// Maximum-likelihood fit with `restarts` log-uniform starting points. The
/// best restart wins; ties go to the lowest restart index.
inline GPModel fit(const Dataset& data, int restarts, Rng& rng, const FitOptions& opts = {}) {
    if (restarts < 1) throw ArgumentError("fit: restarts must be positive");
    if (data.size() < 1) throw ArgumentError("fit: dataset is empty");
    const int d = data.dim();
    const auto box = detail::fit_bounds(d, opts);

    std::optional<Eigen::VectorXd> best;
    double best_lml = -std::numeric_limits<double>::infinity();
    std::string last_error = "no restart evaluated";
    for (int r = 0; r < restarts; ++r) {
        Eigen::VectorXd start(d + 2);
        for (int j = 0; j < d; ++j)
            start(j) = uniform(rng, std::log(opts.init_lengthscale_lo), std::log(opts.init_lengthscale_hi));
        start(d) = uniform(rng, std::log(opts.init_signal_lo), std::log(opts.init_signal_hi));
        start(d + 1) = uniform(rng, std::log(opts.init_noise_lo), std::log(opts.init_noise_hi));
        try {
            auto [x, lml] = detail::maximize_lml(data, start, box, opts);
            if (!best || lml > best_lml) {
                best = x;
                best_lml = lml;
            }
        } catch (const NumericalError& e) {
            last_error = e.what();
        }
    }
    if (!best) throw FitError("all " + std::to_string(restarts) + " restarts failed: " + last_error);
    return GPModel(KernelParams::unpack(*best), data);
}

} // namespace autobo

#endif // AUTOBO_GP_HPP
