#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "autobo/benchmarks.hpp"
#include "autobo/bo_loop.hpp"

using namespace autobo;

namespace {

Objective quadratic() {
    Objective o;
    o.dim = 1;
    o.bounds = {{0.0, 1.0}};
    o.known_optimum = 0.0;
    o.eval = [](const Eigen::VectorXd& u) { return (u(0) - 0.3) * (u(0) - 0.3); };
    return o;
}

RunConfig small(std::uint64_t seed, int n_init = 4, int n_iters = 6) {
    RunConfig c;
    c.seed = seed;
    c.n_init = n_init;
    c.n_iters = n_iters;
    c.grid_size = 200;
    c.gp_restarts = 3;
    return c;
}

void expect_same(const Trace& a, const Trace& b) {
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        EXPECT_EQ(a.records[i].x, b.records[i].x);
        EXPECT_EQ(a.records[i].y, b.records[i].y);
        EXPECT_EQ(a.records[i].best_so_far, b.records[i].best_so_far);
        EXPECT_EQ(a.records[i].policy_label, b.records[i].policy_label);
    }
    EXPECT_EQ(a.recommendation, b.recommendation);
}

} // namespace

TEST(InitialDesign, TwoPointsSplitTheLine) {
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto rng = make_rng(s);
        RunConfig c;
        c.n_init = 2;
        auto pts = initial_design(c, 1, rng);
        std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a(0) < b(0); });
        EXPECT_GE(pts[0](0), 0.0);
        EXPECT_LT(pts[0](0), 0.5);
        EXPECT_GE(pts[1](0), 0.5);
        EXPECT_LT(pts[1](0), 1.0);
    }
}

TEST(InitialDesign, StrataFormPermutation) {
    RunConfig c;
    c.n_init = 16;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        auto rng = make_rng(s, Stream::design);
        const auto pts = initial_design(c, 3, rng);
        ASSERT_EQ(pts.size(), 16u);
        for (int j = 0; j < 3; ++j) {
            std::vector<int> hits(16, 0);
            for (const auto& p : pts) {
                ASSERT_GE(p(j), 0.0);
                ASSERT_LE(p(j), 1.0);
                ++hits[static_cast<std::size_t>(std::floor(p(j) * 16))];
            }
            for (int h : hits) ASSERT_EQ(h, 1) << "seed " << s << " dim " << j;
        }
    }
}

TEST(Propose, ArgmaxAndTieBreak) {
    EXPECT_EQ(argmax_lowest(std::vector<double>{0.1, 0.9, 0.3}), 1u);
    EXPECT_EQ(argmax_lowest(std::vector<double>{0.4, 0.4, 0.4}), 0u);
}

TEST(Propose, EiAtProposalDominatesGrid) {
    Eigen::MatrixXd x(2, 1);
    x << 0.2, 0.7;
    const Dataset data(x, Eigen::Vector2d(0.5, -0.1));
    auto p = KernelParams::unit(1);
    p.log_lengthscales(0) = std::log(0.2);
    const GPModel model(p, data);
    const Incumbent inc{-0.1, x.row(1).transpose()};
    for (bool refine : {false, true}) {
        auto c = small(3);
        c.refine_local = refine;
        auto cr = make_rng(1), pr = make_rng(2);
        const auto prop = propose_next(model, PolicySpec::fixed(AcquisitionKind::ei()), 0, inc, c, cr, pr);
        const double at = ei_utility(model.predict(prop.x), inc, 0.01);
        for (Eigen::Index i = 0; i < prop.candidates.rows(); ++i)
            EXPECT_GE(at, ei_utility(model.predict(prop.candidates.row(i).transpose()), inc, 0.01));
        if (!refine) {
            EXPECT_EQ(prop.x, prop.candidates.row(static_cast<Eigen::Index>(prop.grid_index)).transpose());
        }
    }
}

TEST(RunBo, ZeroIterationsIsInitialDesign) {
    const auto t = run_bo(quadratic(), small(1, 5, 0), PolicySpec::fixed(AcquisitionKind::ei()));
    ASSERT_EQ(t.records.size(), 5u);
    double m = t.records[0].y;
    for (const auto& r : t.records) {
        m = std::min(m, r.y);
        EXPECT_EQ(r.policy_label, "initial");
    }
    EXPECT_EQ(t.final_best(), m);
}

TEST(RunBo, DeterministicUnderSeed) {
    for (const auto& p : {PolicySpec::fixed(AcquisitionKind::ei()), PolicySpec::hedge(), PolicySpec::random_choice(),
                          PolicySpec::noised(PolicySpec::uniform_weighted())}) {
        const auto obj = make_objective(benchmark("branin"));
        expect_same(run_bo(obj, small(5), p), run_bo(obj, small(5), p));
    }
}

TEST(RunBo, BestSoFarNonIncreasingAndIndexed) {
    const auto obj = make_objective(benchmark("hartmann3"));
    const auto t = run_bo(obj, small(2), PolicySpec::sequential());
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        EXPECT_EQ(t.records[i].iter, i);
        if (i) {
            EXPECT_LE(t.records[i].best_so_far, t.records[i - 1].best_so_far);
        }
        EXPECT_LE(t.records[i].best_so_far, t.records[i].y);
    }
    const char* names[] = {"PI", "EI", "LCB"};
    for (std::size_t i = 4; i < t.records.size(); ++i) EXPECT_EQ(t.records[i].policy_label, names[(i - 4) % 3]);
}

TEST(RunBo, QuadraticConverges) {
    RunConfig c;
    c.seed = 0;
    c.n_init = 4;
    c.n_iters = 20;
    const auto t = run_bo(quadratic(), c, PolicySpec::fixed(AcquisitionKind::ei()));
    EXPECT_LT(t.final_best(), 1e-3);

    // Must also beat the median of 24-point random searches.
    std::vector<double> rs;
    for (std::uint64_t s = 0; s < 101; ++s) rs.push_back(random_search(quadratic(), small(s, 4, 20)).final_best());
    std::nth_element(rs.begin(), rs.begin() + 50, rs.end());
    EXPECT_LT(t.final_best(), rs[50]);
}

TEST(RunBo, ObjectiveFailureCarriesPartialTrace) {
    Objective o = quadratic();
    int calls = 0;
    o.eval = [&calls](const Eigen::VectorXd& u) {
        if (++calls == 6) throw EvaluationError("boom");
        return u(0);
    };
    try {
        (void)run_bo(o, small(1), PolicySpec::fixed(AcquisitionKind::ei()));
        FAIL() << "expected RunError";
    } catch (const RunError& e) {
        EXPECT_EQ(e.partial_trace().records.size(), 5u);
        EXPECT_FALSE(e.protocol_failure());
    }
    calls = 0;
    o.eval = [&calls](const Eigen::VectorXd&) -> double { throw ProtocolError("bad line"); };
    try {
        (void)run_bo(o, small(1), PolicySpec::fixed(AcquisitionKind::ei()));
        FAIL() << "expected RunError";
    } catch (const RunError& e) {
        EXPECT_TRUE(e.protocol_failure());
        EXPECT_TRUE(e.partial_trace().records.empty());
    }
}

TEST(RunBo, RejectsBadConfig) {
    auto c = small(1);
    c.n_init = 1;
    EXPECT_THROW(run_bo(quadratic(), c, PolicySpec::fixed(AcquisitionKind::ei())), ArgumentError);
    EXPECT_THROW(run_bo(quadratic(), small(1), PolicySpec::weighted({0.5, 0.6, 0.1})), ArgumentError);
}

TEST(Recommend, ObservedPointWithLowestMean) {
    Eigen::MatrixXd x(3, 1);
    x << 0.1, 0.5, 0.9;
    const Dataset data(x, Eigen::Vector3d(1.0, -2.0, 0.5));
    auto p = KernelParams::unit(1, std::log(1e-10));
    p.log_lengthscales(0) = std::log(0.05);
    const GPModel m(p, data);
    auto rng = make_rng(1);
    const auto [rx, mu] = recommend(m, small(1), rng);
    EXPECT_NEAR(rx(0), 0.5, 1e-12);
    EXPECT_NEAR(mu, -2.0, 1e-4);
}

TEST(Recommend, ConstantMeanTakesFirstCandidate) {
    Eigen::MatrixXd x(2, 1);
    x << 0.3, 0.6;
    const GPModel m(KernelParams::unit(1), Dataset(x, Eigen::Vector2d(2.0, 2.0)));
    auto rng = make_rng(1);
    EXPECT_EQ(recommend(m, small(1), rng).first(0), 0.3);
}

TEST(Recommend, NoCandidateHasLowerMean) {
    Eigen::MatrixXd x(3, 2);
    x << 0.1, 0.1, 0.5, 0.8, 0.9, 0.4;
    auto p = KernelParams::unit(2);
    p.log_lengthscales.setConstant(std::log(0.3));
    const GPModel m(p, Dataset(x, Eigen::Vector3d(0.3, -0.4, 0.9)));
    auto r1 = make_rng(8), r2 = make_rng(8);
    const auto c = small(1);
    const auto [rx, mu] = recommend(m, c, r1);
    const auto grid = uniform_candidates(c.grid_size, 2, r2);
    for (Eigen::Index i = 0; i < grid.rows(); ++i) EXPECT_LE(mu, m.predict(grid.row(i).transpose()).mu);
    for (Eigen::Index i = 0; i < x.rows(); ++i) EXPECT_LE(mu, m.predict(x.row(i).transpose()).mu);
}

TEST(RandomSearch, ReproducibleAndMonotone) {
    const auto obj = make_objective(benchmark("branin"));
    const auto a = random_search(obj, small(4, 5, 25));
    expect_same(a, random_search(obj, small(4, 5, 25)));
    ASSERT_EQ(a.records.size(), 30u);
    for (std::size_t i = 1; i < a.records.size(); ++i) EXPECT_LE(a.records[i].best_so_far, a.records[i - 1].best_so_far);
    EXPECT_EQ(run_bo(obj, small(4, 5, 25), PolicySpec::random_search()).records.back().y, a.records.back().y);
}

TEST(RandomSearch, BraninRegressionSnapshot) {
    const auto spec = benchmark("branin");
    const auto obj = make_objective(spec);
    std::vector<double> regret;
    for (std::uint64_t s = 0; s < 100; ++s) regret.push_back(random_search(obj, small(s, 5, 25)).final_best() - spec.f_star);
    std::nth_element(regret.begin(), regret.begin() + 50, regret.end());
    EXPECT_GE(regret[50], 0.1);
    EXPECT_LE(regret[50], 10.0);
}

TEST(TraceCsv, Layout) {
    const auto t = run_bo(make_objective(benchmark("branin")), small(1, 3, 1), PolicySpec::fixed(AcquisitionKind::pi()));
    std::ostringstream out;
    write_trace_csv(out, t, 7, true);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "rep,iter,policy_label,x_0,x_1,y,best_so_far");
    int rows = 0;
    while (std::getline(in, line)) {
        EXPECT_EQ(line.rfind("7,", 0), 0u);
        ++rows;
    }
    EXPECT_EQ(rows, 4);
}
