#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "levelstat/pointprocess.hpp"

using namespace levelstat;

TEST_CASE("subcube layout tiles a chain into consecutive site triples") {
    LatticeBox big(1, 9);
    SubcubeLayout lay = make_subcube_layout(big, ModelSpec::rank_one(), 3);
    CHECK(lay.per_axis == 3);
    CHECK(lay.count == 3);
    REQUIRE(lay.disorder_map.size() == 3);
    for (long p = 0; p < 3; ++p) {
        REQUIRE(lay.disorder_map[p].size() == 3);
        for (long j = 0; j < 3; ++j) CHECK(lay.disorder_map[p][j] == 3 * p + j);
    }
}

TEST_CASE("subcube layout drops the margin that does not tile") {
    SubcubeLayout lay = make_subcube_layout(LatticeBox(1, 9), ModelSpec::rank_one(), 4);
    CHECK(lay.per_axis == 2);
    CHECK(lay.count == 2);
    CHECK(lay.disorder_map[1] == std::vector<long>({4, 5, 6, 7}));
}

TEST_CASE("subcube layout in the plane maps sites block by block") {
    LatticeBox big(2, 4);
    SubcubeLayout lay = make_subcube_layout(big, ModelSpec::rank_one(), 2);
    CHECK(lay.count == 4);
    CHECK(lay.disorder_map[0] == std::vector<long>({0, 1, 4, 5}));
    CHECK(lay.disorder_map[1] == std::vector<long>({2, 3, 6, 7}));
    CHECK(lay.disorder_map[2] == std::vector<long>({8, 9, 12, 13}));
    CHECK(lay.disorder_map[3] == std::vector<long>({10, 11, 14, 15}));

    // every big-box site appears exactly once
    std::vector<long> seen;
    for (const auto& m : lay.disorder_map) seen.insert(seen.end(), m.begin(), m.end());
    std::sort(seen.begin(), seen.end());
    for (long i = 0; i < 16; ++i) CHECK(seen[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("polymer subcube layout maps whole blocks") {
    SubcubeLayout lay = make_subcube_layout(LatticeBox(1, 8), ModelSpec::polymer(2), 4);
    CHECK(lay.count == 2);
    CHECK(lay.disorder_map[0] == std::vector<long>({0, 1}));
    CHECK(lay.disorder_map[1] == std::vector<long>({2, 3}));

    CHECK_THROWS_AS(make_subcube_layout(LatticeBox(1, 8), ModelSpec::polymer(2), 3),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_subcube_layout(LatticeBox(1, 8), ModelSpec::rank_one(), 0),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_subcube_layout(LatticeBox(1, 8), ModelSpec::rank_one(), 9),
                    std::invalid_argument);
}

TEST_CASE("subcube counts match a hand-built chain Hamiltonian") {
    LatticeBox big(1, 9);
    ModelSpec spec = ModelSpec::rank_one();
    DisorderSpec dist = DisorderSpec::uniform(2.0);
    SubcubeLayout lay = make_subcube_layout(big, spec, 3);
    ModelContext sub_ctx(LatticeBox(1, 3), spec, dist);

    EnergyWindow wa = EnergyWindow::absolute(-0.5, 0.5);
    EnergyWindow wb = EnergyWindow::absolute(0.5, 1.5);
    for (int t = 0; t < 5; ++t) {
        Eigen::VectorXd omega = sample_disorder(dist, 9, 77, static_cast<std::uint64_t>(t));
        SubcubeCounts c = count_subcube_array(sub_ctx, lay, omega, wa, wb);
        REQUIRE(c.first.size() == 3);
        for (long p = 0; p < 3; ++p) {
            Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
            h(0, 1) = h(1, 0) = h(1, 2) = h(2, 1) = 1.0;
            for (long j = 0; j < 3; ++j) h(j, j) = omega[3 * p + j];
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(h);
            int ca = 0, cb = 0;
            for (long k = 0; k < 3; ++k) {
                ca += wa.contains(es.eigenvalues()[k]) ? 1 : 0;
                cb += wb.contains(es.eigenvalues()[k]) ? 1 : 0;
            }
            CHECK(c.first[p] == ca);
            CHECK(c.second[p] == cb);
        }
    }
}

TEST_CASE("gap clustering joins values below the resolution") {
    CHECK(cluster_sizes({0.1, 0.1 + 1e-9, 0.5}, 1e-6) == std::vector<int>({2, 1}));
    CHECK(cluster_sizes({}, 1e-6).empty());
    CHECK(cluster_sizes({1.0, 1.0, 1.0}, 0.0) == std::vector<int>({3}));
    CHECK(cluster_sizes({0.0, 1e-7, 2e-7, 1.0}, 1e-7) == std::vector<int>({3, 1}));
    CHECK(cluster_sizes({0.5}, 1e-3) == std::vector<int>({1}));
}

TEST_CASE("count diagnostics report moments and distance to Poisson") {
    CompoundPoissonDiag d = compound_poisson_diagnostics({0, 0, 1, 1});
    CHECK(d.mean == doctest::Approx(0.5));
    CHECK(d.pmf.size() == 2);
    CHECK(d.pmf[0] == doctest::Approx(0.5));
    CHECK(d.pmf[1] == doctest::Approx(0.5));
    CHECK(d.fm2 == 0.0);
    // Bernoulli(1/2) vs Poisson(1/2): tv = (|.5-e^-.5| + |.5-.5e^-.5| + tail)/2
    double p0 = std::exp(-0.5), p1 = 0.5 * std::exp(-0.5);
    double tv = (std::abs(0.5 - p0) + std::abs(0.5 - p1) + (1.0 - p0 - p1)) / 2.0;
    CHECK(d.tv_poisson == doctest::Approx(tv).epsilon(1e-12));

    CompoundPoissonDiag burst = compound_poisson_diagnostics({2, 0, 0, 0});
    CHECK(burst.mean == doctest::Approx(0.5));
    CHECK(burst.fm2 == doctest::Approx(2.0));

    CHECK(compound_poisson_diagnostics({}).mean == 0.0);
}

TEST_CASE("independence scan fills per-point statistics") {
    IndependenceResult res =
        independence_scan(ModelSpec::rank_one(), DisorderSpec::uniform(2.0), 1, 0.5, -0.5,
                          -2.0, 2.0, -2.0, 2.0, 0.5, {16}, 800, 3, 1);
    REQUIRE(res.points.size() == 1);
    const IndependencePoint& p = res.points[0];
    CHECK(p.L == 16);
    CHECK(p.ell == 4);
    CHECK(p.sub_side == 9);
    CHECK(p.boxes == 3);
    CHECK(p.trials == 800);
    CHECK(p.joint.trials == 800);
    CHECK(p.joint.point() <= 1.0);
    CHECK(p.product >= 0.0);
    CHECK(p.double_sum >= 0.0);
    CHECK(p.e_se > 0.0);
    CHECK(std::abs(p.pearson) <= 1.0);
    // disjoint boxes with independent disorder: cross-box covariance is noise
    CHECK(p.max_offdiag_z <= 4.0);
    CHECK(p.mean_zeta_first > 0.0);
    CHECK(p.zeta_first_diag.mean == doctest::Approx(p.mean_zeta_first).epsilon(1e-12));
    CHECK(p.max_eta >= 1.0);
    CHECK(p.frac_eta_above >= 0.0);
    CHECK(p.frac_eta_above <= 1.0);
}

TEST_CASE("multiplicity scan counts clusters wider than the local rank") {
    MultiplicityResult res =
        multiplicity_scan(ModelSpec::rank_one(), DisorderSpec::uniform(2.0), 1, -3.0, 3.0, 3.0,
                          {4, 8}, 300, 13, 1);
    CHECK(res.m == 1);
    CHECK(res.q == 3.0);
    REQUIRE(res.points.size() == 2);
    CHECK(res.points[0].resolution == doctest::Approx(std::pow(4.0, -3.0)));
    CHECK(res.points[1].resolution == doctest::Approx(std::pow(8.0, -3.0)));
    for (const auto& p : res.points) {
        CHECK(p.exceed.trials == 300);
        CHECK(p.max_cluster_seen >= 1);
        CHECK(p.exceed.successes >= 0);
    }

    MultiplicityResult poly =
        multiplicity_scan(ModelSpec::polymer(2), DisorderSpec::uniform(2.0), 1, -3.0, 3.0, 3.0,
                          {4}, 10, 13, 1);
    CHECK(poly.m == 2);
}

TEST_CASE("restricting to the whole box reproduces the eigenpair") {
    LatticeBox box(1, 9);
    ModelContext ctx(box, ModelSpec::rank_one(), DisorderSpec::uniform(2.0));
    SymmetricMatrix h = ctx.hamiltonian(ctx.sample(55, 0));
    Spectrum sp = eigendecompose(h, true);

    TruncationResidual r = truncation_residual(box, 1, h, sp, 3, 4);
    CHECK(r.inside_norm == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.outside_mass <= 1e-6);
    CHECK(r.residual <= 1e-10);

    CHECK_THROWS_AS(truncation_residual(box, 1, h, sp, 0, 7), std::invalid_argument);
    Spectrum bare = eigendecompose(h, false);
    CHECK_THROWS_AS(truncation_residual(box, 1, h, bare, 0, 4), std::invalid_argument);
}

TEST_CASE("a deep-well eigenvector barely leaks out of a small sub-box") {
    LatticeBox box(1, 9);
    ModelContext ctx(box, ModelSpec::rank_one(), DisorderSpec::uniform(2.0));
    Eigen::VectorXd omega = Eigen::VectorXd::Zero(9);
    omega[4] = 10.0; // well at the center site
    SymmetricMatrix h = ctx.hamiltonian(omega);
    Spectrum sp = eigendecompose(h, true);

    TruncationResidual r = truncation_residual(box, 1, h, sp, 8, 2);
    CHECK(r.inside_norm > 0.999);
    CHECK(r.outside_mass < 1e-2);
    CHECK(r.residual < 1e-2);
}

TEST_CASE("gram overlaps of full eigenvectors form the identity") {
    LatticeBox box(1, 9);
    ModelContext ctx(box, ModelSpec::rank_one(), DisorderSpec::uniform(2.0));
    Spectrum sp = eigendecompose(ctx.hamiltonian(ctx.sample(56, 0)), true);

    Eigen::MatrixXd g = gram_overlaps(box, 1, sp, {0, 1, 2}, 4);
    REQUIRE(g.rows() == 3);
    CHECK((g - Eigen::MatrixXd::Identity(3, 3)).lpNorm<Eigen::Infinity>() <= 1e-10);

    Eigen::MatrixXd small = gram_overlaps(box, 1, sp, {0, 1, 2}, 2);
    CHECK((small - small.transpose()).lpNorm<Eigen::Infinity>() <= 1e-14);
    for (long i = 0; i < 3; ++i) {
        CHECK(small(i, i) >= 0.0);
        CHECK(small(i, i) <= 1.0 + 1e-12);
    }
}
