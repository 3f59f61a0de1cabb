#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "autobo/gp.hpp"
#include "oracles.hpp"

using namespace autobo;

namespace {

Dataset random_dataset(Rng& rng, int n, int d) {
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) x(i, j) = uniform01(rng);
        y(i) = std::sin(3.0 * x.row(i).sum()) + 0.3 * standard_normal(rng);
    }
    return Dataset(x, y);
}

KernelParams random_params(Rng& rng, int d) {
    KernelParams p;
    p.log_lengthscales.resize(d);
    for (int j = 0; j < d; ++j) p.log_lengthscales(j) = uniform(rng, std::log(0.05), std::log(2.0));
    p.log_signal_var = uniform(rng, std::log(0.1), std::log(5.0));
    p.log_noise_var = uniform(rng, std::log(1e-6), std::log(1e-1));
    return p;
}

oracle::Dense dense_of(const GPModel& m) {
    const auto& p = m.params();
    return {p.log_lengthscales.array().exp(), p.signal_var(), p.noise_var(), m.jitter(), m.data().inputs(),
            m.data().outputs_raw()};
}

} // namespace

TEST(Kernel, ZeroDistanceIsSignalVariance) {
    auto p = KernelParams::unit(2);
    p.log_signal_var = std::log(2.0);
    Eigen::Vector2d a(0.3, 0.7);
    EXPECT_DOUBLE_EQ(kernel_eval(p, a, a), 2.0);
}

TEST(Kernel, Symmetric) {
    auto rng = make_rng(3);
    for (int k = 0; k < 20; ++k) {
        auto p = random_params(rng, 3);
        Eigen::Vector3d a(uniform01(rng), uniform01(rng), uniform01(rng));
        Eigen::Vector3d b(uniform01(rng), uniform01(rng), uniform01(rng));
        EXPECT_EQ(kernel_eval(p, a, b), kernel_eval(p, b, a));
    }
}

TEST(Kernel, UnitDistanceHandValue) {
    const auto p = KernelParams::unit(1);
    Eigen::VectorXd a(1), b(1);
    a << 0.0;
    b << 1.0;
    const double hand = (1.0 + std::sqrt(5.0) + 5.0 / 3.0) * std::exp(-std::sqrt(5.0));
    EXPECT_NEAR(kernel_eval(p, a, b), hand, 1e-15);
}

TEST(Kernel, DimensionMismatchThrows) {
    const auto p = KernelParams::unit(2);
    Eigen::VectorXd a(3), b(2);
    a.setZero();
    b.setZero();
    EXPECT_THROW(kernel_eval(p, a, b), ArgumentError);
}

TEST(DatasetTest, RejectsOutOfBoxAndDuplicates) {
    Eigen::MatrixXd x(2, 1);
    x << 0.2, 1.5;
    EXPECT_THROW(Dataset(x, Eigen::Vector2d(1, 2)), ArgumentError);
    x << 0.2, 0.2;
    EXPECT_THROW(Dataset(x, Eigen::Vector2d(1, 2)), ArgumentError);
    x << 0.2, 0.3;
    EXPECT_THROW(Dataset(x, Eigen::Vector2d(1, std::nan(""))), ArgumentError);
}

TEST(DatasetTest, StandardizationUsesPopulationStd) {
    Eigen::MatrixXd x(3, 1);
    x << 0.1, 0.5, 0.9;
    Dataset d(x, Eigen::Vector3d(1.0, 2.0, 6.0));
    EXPECT_DOUBLE_EQ(d.std_offset(), 3.0);
    EXPECT_NEAR(d.std_scale(), std::sqrt(14.0 / 3.0), 1e-14);
    EXPECT_NEAR(d.outputs_std().mean(), 0.0, 1e-15);
    EXPECT_NEAR(d.outputs_std().squaredNorm() / 3.0, 1.0, 1e-14);
}

TEST(DatasetTest, ConstantOutputsKeepUnitScale) {
    Eigen::MatrixXd x(2, 1);
    x << 0.1, 0.9;
    Dataset d(x, Eigen::Vector2d(4.0, 4.0));
    EXPECT_EQ(d.std_scale(), 1.0);
    EXPECT_EQ(d.outputs_std().norm(), 0.0);
}

TEST(DatasetTest, DuplicateIsPerturbedSlightly) {
    auto rng = make_rng(1);
    Dataset d(2);
    Eigen::Vector2d x(0.5, 1.0);
    d.add(x, 1.0, rng);
    const Eigen::VectorXd stored = d.add(x, 2.0, rng);
    EXPECT_EQ(d.size(), 2);
    EXPECT_GT((stored - x).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((stored - x).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LE(stored(1), 1.0);
}

TEST(Lml, SinglePointClosedForm) {
    Eigen::MatrixXd x(1, 2);
    x << 0.4, 0.6;
    Dataset d(x, Eigen::VectorXd::Constant(1, 3.7));
    auto rng = make_rng(5);
    for (int k = 0; k < 10; ++k) {
        const auto p = random_params(rng, 2);
        const GPModel m(p, d);
        const double expected = -0.5 * std::log(2 * std::numbers::pi) - 0.5 * std::log(p.signal_var() + p.noise_var() + m.jitter());
        EXPECT_NEAR(log_marginal_likelihood(p, d), expected, 1e-12);
        EXPECT_NEAR(m.jitter(), 1e-10 * p.signal_var(), 1e-25);
    }
}

TEST(Lml, MatchesDenseOracle) {
    auto rng = make_rng(11);
    for (int k = 0; k < 30; ++k) {
        const int d = 1 + k % 3;
        const int n = 2 + k % 19;
        const auto data = random_dataset(rng, n, d);
        const auto p = random_params(rng, d);
        const GPModel m(p, data);
        const double want = dense_of(m).lml();
        EXPECT_NEAR(m.log_marginal_likelihood(), want, 1e-8 * std::max(1.0, std::abs(want))) << "case " << k;
    }
}

TEST(Lml, LargeNoiseApproachesPureNoise) {
    auto rng = make_rng(12);
    const auto data = random_dataset(rng, 15, 2);
    auto p = KernelParams::unit(2);
    p.log_noise_var = 10.0;
    const double nu = std::exp(10.0);
    const auto& y = data.outputs_std();
    const double pure = -0.5 * y.squaredNorm() / nu - 0.5 * 15 * std::log(2 * std::numbers::pi * nu);
    EXPECT_NEAR(log_marginal_likelihood(p, data), pure, 1e-3);
}

TEST(Lml, GradientMatchesFiniteDifferences) {
    auto rng = make_rng(13);
    for (int k = 0; k < 6; ++k) {
        const int d = 1 + k % 3;
        const auto data = random_dataset(rng, 12, d);
        const auto p = random_params(rng, d);
        const auto [f, g] = log_marginal_likelihood_with_gradient(p, data);
        EXPECT_NEAR(f, log_marginal_likelihood(p, data), 1e-10);
        const Eigen::VectorXd v = p.packed();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const double h = 1e-5;
            Eigen::VectorXd up = v, dn = v;
            up(i) += h;
            dn(i) -= h;
            const double fd = (log_marginal_likelihood(KernelParams::unpack(up), data) -
                               log_marginal_likelihood(KernelParams::unpack(dn), data)) /
                              (2 * h);
            EXPECT_NEAR(g(i), fd, 1e-4 * std::max(1.0, std::abs(fd))) << "case " << k << " coord " << i;
        }
    }
}

TEST(Fit, BeatsGeneratingParameters) {
    auto rng = make_rng(21);
    const int n = 40, d = 2;
    Eigen::MatrixXd x(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) x(i, j) = uniform01(rng);
    oracle::Dense gen{Eigen::Vector2d(0.3, 0.5), 1.0, 1e-3, 0.0, x, Eigen::VectorXd::Zero(n)};
    const Eigen::MatrixXd k = gen.cov().cast<double>();
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z(i) = standard_normal(rng);
    const Eigen::VectorXd y = k.llt().matrixL() * z;
    const Dataset data(x, y);

    KernelParams truth;
    truth.log_lengthscales = Eigen::Vector2d(std::log(0.3), std::log(0.5));
    truth.log_signal_var = std::log(1.0 / (data.std_scale() * data.std_scale()));
    truth.log_noise_var = std::log(1e-3 / (data.std_scale() * data.std_scale()));
    auto fit_rng = make_rng(22);
    const auto model = fit(data, 10, fit_rng);
    EXPECT_GE(model.log_marginal_likelihood(), log_marginal_likelihood(truth, data) - 1e-6);
}

TEST(Fit, DeterministicUnderSeed) {
    auto rng = make_rng(31);
    const auto data = random_dataset(rng, 10, 2);
    auto r1 = make_rng(7);
    auto r2 = make_rng(7);
    const auto a = fit(data, 1, r1);
    const auto b = fit(data, 1, r2);
    EXPECT_EQ(a.params().packed(), b.params().packed());
    EXPECT_EQ(a.chol_factor(), b.chol_factor());
}

TEST(Fit, TwoPoints) {
    Eigen::MatrixXd x(2, 1);
    x << 0.2, 0.8;
    const Dataset data(x, Eigen::Vector2d(1.0, -1.0));
    auto rng = make_rng(1);
    EXPECT_NO_THROW((void)fit(data, 5, rng));
}

TEST(Fit, StaysInsideBox) {
    auto rng = make_rng(41);
    const auto data = random_dataset(rng, 15, 3);
    const FitOptions o;
    const auto m = fit(data, 3, rng, o);
    const auto& p = m.params();
    for (int j = 0; j < 3; ++j) {
        EXPECT_GE(p.log_lengthscales(j), std::log(o.lengthscale_lo) - 1e-12);
        EXPECT_LE(p.log_lengthscales(j), std::log(o.lengthscale_hi) + 1e-12);
    }
    EXPECT_GE(p.log_noise_var, std::log(o.noise_lo) - 1e-12);
    EXPECT_LE(p.log_noise_var, std::log(o.noise_hi) + 1e-12);
}

TEST(Predict, InterpolatesTrainingPoints) {
    auto rng = make_rng(51);
    const auto data = random_dataset(rng, 8, 2);
    auto p = KernelParams::unit(2, std::log(1e-10));
    p.log_lengthscales.setConstant(std::log(0.3));
    const GPModel m(p, data);
    for (int i = 0; i < data.size(); ++i) {
        const auto pr = m.predict(data.inputs().row(i).transpose());
        EXPECT_NEAR(pr.mu, data.outputs_raw()(i), 1e-4 * data.std_scale());
        EXPECT_LT(pr.sigma, 1e-3 * data.std_scale());
    }
}

TEST(Predict, RevertsToPriorFarAway) {
    Eigen::MatrixXd x(3, 1);
    x << 0.0, 0.1, 0.2;
    const Dataset data(x, Eigen::Vector3d(1.0, 3.0, 2.0));
    auto p = KernelParams::unit(1);
    p.log_lengthscales(0) = std::log(0.01);
    p.log_signal_var = std::log(2.0);
    const GPModel m(p, data);
    const auto pr = m.predict(Eigen::VectorXd::Constant(1, 1.0));
    EXPECT_NEAR(pr.mu, data.std_offset(), 0.01 * data.std_scale());
    EXPECT_NEAR(pr.sigma, std::sqrt(2.0) * data.std_scale(), 0.01 * std::sqrt(2.0) * data.std_scale());
}

TEST(Predict, MatchesDenseOracle) {
    auto rng = make_rng(61);
    for (int k = 0; k < 20; ++k) {
        const int d = 1 + k % 3;
        const auto data = random_dataset(rng, k < 5 ? 3 : 2 + k, d);
        const GPModel m(random_params(rng, d), data);
        const auto o = dense_of(m);
        for (int q = 0; q < 5; ++q) {
            Eigen::VectorXd x(d);
            for (int j = 0; j < d; ++j) x(j) = uniform01(rng);
            const auto [mu, sigma] = o.predict(x);
            const auto pr = m.predict(x);
            EXPECT_NEAR(pr.mu, mu, 1e-8 * std::max(1.0, std::abs(mu)));
            EXPECT_NEAR(pr.sigma, sigma, 1e-8 * std::max(1.0, sigma));
        }
    }
}

TEST(Predict, BatchEqualsScalarAndSigmaBounded) {
    auto rng = make_rng(71);
    const auto data = random_dataset(rng, 12, 2);
    const auto p = random_params(rng, 2);
    const GPModel m(p, data);
    Eigen::MatrixXd q(50, 2);
    for (int i = 0; i < 50; ++i) q.row(i) << uniform01(rng), uniform01(rng);
    const auto batch = m.predict_batch(q);
    for (int i = 0; i < 50; ++i) {
        const auto s = m.predict(q.row(i).transpose());
        EXPECT_NEAR(batch[i].mu, s.mu, 1e-12 * std::max(1.0, std::abs(s.mu)));
        EXPECT_NEAR(batch[i].sigma, s.sigma, 1e-12 * std::max(1.0, s.sigma));
        EXPECT_GE(s.sigma, 0.0);
        EXPECT_LE(s.sigma, std::sqrt(p.signal_var()) * data.std_scale() * (1 + 1e-12));
    }
}

TEST(Predict, AffineEquivariance) {
    auto rng = make_rng(81);
    const auto data = random_dataset(rng, 10, 2);
    const Dataset shifted(data.inputs(), (3.0 * data.outputs_raw().array() + 7.0).matrix());
    const auto p = random_params(rng, 2);
    const GPModel a(p, data), b(p, shifted);
    const Eigen::Vector2d x(0.31, 0.77);
    EXPECT_NEAR(b.predict(x).mu, 3.0 * a.predict(x).mu + 7.0, 1e-9);
    EXPECT_NEAR(b.predict(x).sigma, 3.0 * a.predict(x).sigma, 1e-9);
}

TEST(Predict, JitterLadderEscalatesByDecades) {
    // Smallest eigenvalue -5e-8: rungs up to 1e-8 fail, 1e-7 succeeds.
    auto p = KernelParams::unit(1, std::log(1e-12));
    Eigen::MatrixXd k(2, 2);
    k << 1.0, 1.0 + 5e-8, 1.0 + 5e-8, 1.0;
    const auto f = detail::factorize(p, k);
    EXPECT_NEAR(f.jitter, 1e-7, 1e-20);
    Eigen::MatrixXd ok = Eigen::MatrixXd::Identity(2, 2);
    EXPECT_NEAR(detail::factorize(p, ok).jitter, 1e-10, 1e-22);
}

TEST(Predict, FactorizationFailureRaises) {
    const auto p = KernelParams::unit(1);
    Eigen::MatrixXd k(2, 2);
    k << 1.0, 5.0, 5.0, 1.0;
    EXPECT_THROW(detail::factorize(p, k), NumericalError);
}
