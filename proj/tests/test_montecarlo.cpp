#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "levelstat/montecarlo.hpp"
#include "levelstat/rng.hpp"

using namespace levelstat;

TEST_CASE("worker resolution prefers the request, then the environment") {
    unsetenv("LEVELSTAT_WORKERS");
    CHECK(resolve_workers(4) == 4);
    CHECK(resolve_workers(0) == omp_get_max_threads());

    setenv("LEVELSTAT_WORKERS", "3", 1);
    CHECK(resolve_workers(0) == 3);
    CHECK(resolve_workers(2) == 2);

    setenv("LEVELSTAT_WORKERS", "junk", 1);
    CHECK(resolve_workers(0) == omp_get_max_threads());
    setenv("LEVELSTAT_WORKERS", "0", 1);
    CHECK(resolve_workers(0) == omp_get_max_threads());
    unsetenv("LEVELSTAT_WORKERS");
}

TEST_CASE("trial runner gives identical results at any worker count") {
    auto fn = [](long t) {
        RngStream rng(9, static_cast<std::uint64_t>(t));
        return rng.u01() + rng.u01();
    };
    std::vector<double> serial = run_trials<double>(200, 1, fn);
    std::vector<double> parallel = run_trials<double>(200, 3, fn);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) CHECK(serial[i] == parallel[i]);
}

TEST_CASE("trial runner rethrows worker exceptions") {
    auto fn = [](long t) -> int {
        if (t == 5) throw std::runtime_error("boom");
        return 0;
    };
    CHECK_THROWS_AS(run_trials<int>(10, 3, fn), std::runtime_error);
    CHECK_THROWS_AS(run_trials<int>(10, 1, fn), std::runtime_error);
}

TEST_CASE("wilson interval brackets the point estimate") {
    ProbabilityEstimate e{50, 100};
    CHECK(e.point() == doctest::Approx(0.5));
    CHECK(e.wilson_lo() == doctest::Approx(0.4038315).epsilon(1e-4));
    CHECK(e.wilson_hi() == doctest::Approx(0.5961685).epsilon(1e-4));

    ProbabilityEstimate zero{0, 100};
    CHECK(zero.wilson_lo() == 0.0);
    CHECK(zero.wilson_hi() > 0.0);
    CHECK(zero.wilson_hi() < 0.05);

    ProbabilityEstimate full{100, 100};
    CHECK(full.wilson_hi() == 1.0);
    CHECK(full.wilson_lo() < 1.0);

    ProbabilityEstimate none{0, 0};
    CHECK(none.wilson_lo() == 0.0);
    CHECK(none.wilson_hi() == 1.0);

    for (long s : {1L, 10L, 60L, 99L}) {
        ProbabilityEstimate p{s, 100};
        CHECK(p.wilson_lo() < p.point());
        CHECK(p.point() < p.wilson_hi());
    }
}

TEST_CASE("scaling fit recovers an exact power law") {
    std::vector<FitPoint> pts;
    for (double s : {4.0, 8.0, 16.0, 32.0}) pts.push_back({s, 7.0 * std::pow(s, -2.5), 1000});
    ScalingFit f = scaling_fit(pts);
    CHECK(f.used == 4);
    CHECK(f.slope == doctest::Approx(-2.5).epsilon(1e-9));
    CHECK(f.intercept == doctest::Approx(std::log(7.0)).epsilon(1e-9));
    CHECK(f.stderr_slope <= 1e-9);

    std::vector<FitPoint> flat;
    for (double s : {4.0, 8.0, 16.0}) flat.push_back({s, 3.0, 1000});
    CHECK(scaling_fit(flat).slope == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("scaling fit drops weak points and demands three survivors") {
    std::vector<FitPoint> pts = {{4.0, 0.5, 100}, {8.0, 0.25, 100}, {16.0, 0.125, 100},
                                 {32.0, 0.0625, 2}};
    ScalingFit f = scaling_fit(pts);
    CHECK(f.used == 3);
    CHECK(f.slope == doctest::Approx(-1.0).epsilon(1e-9));

    std::vector<FitPoint> sparse = {{4.0, 0.5, 100}, {8.0, 0.25, 100}, {16.0, 0.0, 100}};
    CHECK_THROWS_AS(scaling_fit(sparse), std::invalid_argument);
    CHECK_THROWS_AS(scaling_fit({}), std::invalid_argument);
}

TEST_CASE("single-site occupation probability matches the density mass") {
    // One site, uniform omega on [-1, 1]: the lone eigenvalue is omega itself,
    // so P{eigenvalue in [0.2, 0.5)} = 0.3 / 2.
    ModelContext ctx(LatticeBox(1, 1), ModelSpec::rank_one(), DisorderSpec::uniform(1.0));
    EnergyWindow w = EnergyWindow::absolute(0.2, 0.5);
    long trials = 200000;
    ProbabilityEstimate e =
        estimate_event(ctx, w, trials, 101, 1, [](long c) { return c >= 1; });
    double sigma = std::sqrt(0.15 * 0.85 / static_cast<double>(trials));
    CHECK(std::abs(e.point() - 0.15) <= 3.0 * sigma);

    ProbabilityEstimate two =
        estimate_event(ctx, w, 1000, 101, 1, [](long c) { return c >= 2; });
    CHECK(two.successes == 0);
}

TEST_CASE("two-site occupation probability matches midpoint quadrature") {
    // H = [[w0, 1], [1, w1]]; the event {some eigenvalue in [0.9, 1.1)} has a
    // closed-form indicator, integrated on a 2000^2 midpoint grid.
    EnergyWindow w = EnergyWindow::absolute(0.9, 1.1);
    const int G = 2000;
    long inside = 0;
    for (int i = 0; i < G; ++i) {
        double a = -1.0 + (2.0 * i + 1.0) / G;
        for (int j = 0; j < G; ++j) {
            double b = -1.0 + (2.0 * j + 1.0) / G;
            double mean = 0.5 * (a + b);
            double root = std::sqrt(0.25 * (a - b) * (a - b) + 1.0);
            if (w.contains(mean + root) || w.contains(mean - root)) ++inside;
        }
    }
    double p_grid = static_cast<double>(inside) / (static_cast<double>(G) * G);

    ModelContext ctx(LatticeBox(1, 2), ModelSpec::rank_one(), DisorderSpec::uniform(1.0));
    long trials = 200000;
    ProbabilityEstimate e =
        estimate_event(ctx, w, trials, 113, 1, [](long c) { return c >= 1; });

    double sigma = std::sqrt(p_grid * (1 - p_grid) / static_cast<double>(trials));
    CHECK(std::abs(e.point() - p_grid) <= 3.0 * sigma + 2e-3);
    CHECK(e.wilson_lo() - 2e-3 <= p_grid);
    CHECK(p_grid <= e.wilson_hi() + 2e-3);
}

TEST_CASE("count scans are identical across worker counts") {
    ModelContext ctx(LatticeBox(1, 9), ModelSpec::rank_one(), DisorderSpec::uniform(4.0));
    EnergyWindow wa = EnergyWindow::absolute(-0.5, 0.5);
    EnergyWindow wb = EnergyWindow::absolute(1.0, 2.0);

    std::vector<int> c1 = count_scan(ctx, wa, 500, 19, 1);
    std::vector<int> c3 = count_scan(ctx, wa, 500, 19, 3);
    REQUIRE(c1.size() == c3.size());
    for (std::size_t i = 0; i < c1.size(); ++i) CHECK(c1[i] == c3[i]);

    std::vector<PairCount> p1 = pair_count_scan(ctx, wa, wb, 500, 19, 1);
    std::vector<PairCount> p3 = pair_count_scan(ctx, wa, wb, 500, 19, 3);
    REQUIRE(p1.size() == p3.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i].first == p3[i].first);
        CHECK(p1[i].second == p3[i].second);
    }
}

TEST_CASE("occupation probability grows about linearly with box size") {
    WegnerResult res = wegner_scan(ModelSpec::rank_one(), DisorderSpec::uniform(2.0), 1, 0.0,
                                   -2.0, 2.0, 128.0, {2, 4, 8}, 4000, 5, 1);
    REQUIRE(res.points.size() == 3);
    CHECK(res.points[0].side == 5);
    CHECK(res.points[1].side == 9);
    CHECK(res.points[2].side == 17);
    for (const auto& p : res.points) CHECK(p.nonempty.trials == 4000);
    CHECK(res.points[0].nonempty.successes < res.points[1].nonempty.successes);
    CHECK(res.points[1].nonempty.successes < res.points[2].nonempty.successes);
    REQUIRE(res.fit.used == 3);
    CHECK(res.fit.slope > 0.5);
    CHECK(res.fit.slope < 1.3);
}

TEST_CASE("double-occupation probability decays faster than occupation") {
    MinamiResult res = minami_scan(ModelSpec::rank_one(), DisorderSpec::uniform(4.0), 1, 3.0,
                                   -2.0, 2.0, 4.0, {2, 4, 8}, 10000, 5, 1);
    CHECK(res.m == 1);
    REQUIRE(res.points.size() == 3);
    for (const auto& p : res.points) {
        CHECK(p.exceed.trials == 10000);
        CHECK(p.extended_events == p.exceed.successes);
        if (p.exceed.successes > 0) CHECK(p.extended_mean > 0.0);
    }
    REQUIRE(res.fit_exceed.used == 3);
    CHECK(res.fit_exceed.slope > 1.2);
    CHECK(res.fit_exceed.slope < 2.5);
    CHECK(res.fit_extended.used == 3);
}

TEST_CASE("an empty window degrades the fit instead of throwing") {
    // E far outside the spectrum: every count is zero.
    MinamiResult res = minami_scan(ModelSpec::rank_one(), DisorderSpec::uniform(2.0), 1, 50.0,
                                   -2.0, 2.0, 32.0, {2, 4, 8}, 50, 5, 1);
    for (const auto& p : res.points) CHECK(p.exceed.successes == 0);
    CHECK(res.fit_exceed.used == 0);
    CHECK(std::isnan(res.fit_exceed.slope));
}

TEST_CASE("pair window scan reports joint and marginal rates") {
    DecorrResult res =
        decorrelation_scan(ModelSpec::rank_one(), DisorderSpec::uniform(2.0), 1, 0.5, -0.5,
                           -2.0, 2.0, -2.0, 2.0, 0.5, 0.0, {16, 64}, 1500, 7, 1);
    REQUIRE(res.points.size() == 2);
    CHECK(res.points[0].ell == 4);
    CHECK(res.points[0].side == 9);
    CHECK(res.points[1].ell == 8);
    CHECK(res.points[1].side == 17);
    for (const auto& p : res.points) {
        CHECK(p.trials == 1500);
        CHECK(p.joint.successes <= p.first.successes);
        CHECK(p.joint.successes <= p.second.successes);
        CHECK(p.first.successes > 0);
        if (p.product > 0) CHECK(p.ratio == doctest::Approx(p.joint.point() / p.product));
        CHECK(p.diff == doctest::Approx(p.joint.point() - p.product).epsilon(1e-12));
        CHECK(p.diff_se > 0.0);
    }
    // two ladder points cannot support a fit
    CHECK(res.joint_fit.used == 0);
    CHECK(std::isnan(res.joint_fit.slope));
}

TEST_CASE("log-scale window picks ceil(C log L) boxes") {
    DecorrResult res =
        decorrelation_scan(ModelSpec::rank_one(), DisorderSpec::uniform(2.0), 1, 0.5, -0.5,
                           -2.0, 2.0, -2.0, 2.0, 0.5, 1.0, {32}, 50, 7, 1);
    REQUIRE(res.points.size() == 1);
    CHECK(res.points[0].ell == 4); // ceil(log 32)
}

TEST_CASE("jacobian scan scores trials with both windows occupied") {
    JacobianScanResult res =
        jacobian_event_scan(ModelSpec::rank_one(), DisorderSpec::uniform(8.0), 1, 6.0, -6.0,
                            -2.0, 2.0, -2.0, 2.0, 32, 1.0, 3.0, 1.0, 6000, 11, 1);
    CHECK(res.lambda == doctest::Approx(8.0 / std::pow(std::log(32.0), 3.0)).epsilon(1e-12));
    CHECK(res.ell == 4);
    CHECK(res.side == 9);
    CHECK(res.trials == 6000);
    REQUIRE(res.qualifying >= 5);
    CHECK(res.event.trials == res.qualifying - res.excluded);
    CHECK(res.trial_ids.size() == static_cast<std::size_t>(res.event.trials));
    CHECK(res.max_jacobians.size() == res.trial_ids.size());
    CHECK(res.l1_diffs.size() == res.trial_ids.size());
    CHECK(res.trace_gaps.size() == res.trial_ids.size());
    CHECK(res.klopp_violations == 0);
    CHECK(res.separation_failures == 0);
    // traces live in windows around +-6, so every scored gap clears 4d
    for (double g : res.trace_gaps) CHECK(g > 11.0);
    CHECK(res.admissible == res.event.trials);
    CHECK(res.event.successes >= res.event.trials / 2);
}

TEST_CASE("quantile interpolates between order statistics") {
    std::vector<double> xs = {4.0, 1.0, 3.0, 2.0};
    CHECK(quantile(xs, 0.0) == doctest::Approx(1.0));
    CHECK(quantile(xs, 1.0) == doctest::Approx(4.0));
    CHECK(quantile(xs, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(xs, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({7.0}, 0.3) == doctest::Approx(7.0));
    CHECK(std::isnan(quantile({}, 0.5)));
}
