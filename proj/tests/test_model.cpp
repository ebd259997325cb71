#include <cmath>
#include <set>

#include "doctest.h"

#include "levelstat/model.hpp"
#include "levelstat/spectral.hpp"

using namespace levelstat;

TEST_CASE("density sup bounds") {
    CHECK(DisorderSpec::uniform(4.0).sup_density() == doctest::Approx(0.125));
    CHECK(DisorderSpec::triangular(4.0).sup_density() == doctest::Approx(0.25));
    CHECK_THROWS(DisorderSpec::uniform(0.0));
    CHECK_THROWS(DisorderSpec::triangular(-1.0));
}

TEST_CASE("compatible side snaps to block multiples") {
    CHECK(compatible_side(8, ModelSpec::rank_one()) == 17);
    CHECK(compatible_side(8, ModelSpec::polymer(2)) == 16);
    CHECK(compatible_side(8, ModelSpec::polymer(3)) == 15);
    CHECK(compatible_side(0, ModelSpec::polymer(2)) == 2);
    CHECK(compatible_side(2, ModelSpec::matrix_valued(2)) == 5);
    CHECK(compatible_side(1, ModelSpec::polymer(3)) == 3);
}

TEST_CASE("disorder dimension per model") {
    LatticeBox box5(1, 5);
    CHECK(disorder_dimension(box5, ModelSpec::rank_one()) == 5);
    CHECK(disorder_dimension(box5, ModelSpec::matrix_valued(2)) == 5);
    CHECK(disorder_dimension(box5, ModelSpec::alloy(SitePotential::chain({{0, 1.0}}))) == 5);
    CHECK(disorder_dimension(LatticeBox(1, 4), ModelSpec::polymer(2)) == 2);
    CHECK(disorder_dimension(LatticeBox(2, 4), ModelSpec::polymer(2)) == 4);
    CHECK_THROWS(disorder_dimension(box5, ModelSpec::polymer(2)));
}

TEST_CASE("adjacency hopping has no diagonal and unit couplings") {
    LatticeBox box(2, 3);
    SymmetricMatrix h = build_laplacian(box);
    CHECK(h.dense().trace() == doctest::Approx(0.0));
    long center = box.index_of(std::array{0, 0});
    long right = box.index_of(std::array{1, 0});
    CHECK(h(center, right) == doctest::Approx(1.0));
    CHECK(h(right, center) == doctest::Approx(1.0));
    CHECK(h(center, box.index_of(std::array{1, 1})) == doctest::Approx(0.0));
    double row_sum = 0;
    for (long j = 0; j < box.sites(); ++j) row_sum += h(center, j);
    CHECK(row_sum == doctest::Approx(4.0));
}

TEST_CASE("matrix-valued hopping tensors the fiber into blocks") {
    Eigen::MatrixXd a(2, 2);
    a << 2.0, 0.5, 0.5, 1.0;
    ModelSpec spec = ModelSpec::matrix_valued(a);
    LatticeBox box(1, 2);
    SymmetricMatrix h = build_laplacian(box, spec);
    REQUIRE(h.order() == 4);
    CHECK(h(0, 2) == doctest::Approx(2.0));
    CHECK(h(0, 3) == doctest::Approx(0.5));
    CHECK(h(1, 2) == doctest::Approx(0.5));
    CHECK(h(1, 3) == doctest::Approx(1.0));
    CHECK(h(0, 1) == doctest::Approx(0.0)); // no on-site fiber coupling
    CHECK(h.dense().trace() == doctest::Approx(0.0));
}

TEST_CASE("fiber validation rejects bad matrices") {
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS(ModelSpec::matrix_valued(asym));
    Eigen::MatrixXd indef(2, 2);
    indef << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS(ModelSpec::matrix_valued(indef));
    CHECK_THROWS(ModelSpec::matrix_valued(0));
    Eigen::MatrixXd spd(2, 2);
    spd << 2.0, 0.5, 0.5, 1.0;
    CHECK(ModelSpec::matrix_valued(spd).fiber_dim == 2);
}

TEST_CASE("projection family partitions the coordinates") {
    struct Case {
        ModelSpec spec;
        int dim;
        int side;
        std::size_t sets;
        std::size_t set_size;
    };
    std::vector<Case> cases = {{ModelSpec::rank_one(), 1, 3, 3, 1},
                               {ModelSpec::polymer(2), 1, 4, 2, 2},
                               {ModelSpec::polymer(3), 1, 3, 1, 3},
                               {ModelSpec::polymer(2), 2, 4, 4, 4},
                               {ModelSpec::matrix_valued(2), 1, 2, 2, 2}};
    for (const auto& c : cases) {
        LatticeBox box(c.dim, c.side);
        ProjectionFamily fam = build_projection_family(box, c.spec);
        REQUIRE(fam.size() == c.sets);
        std::set<long> seen;
        for (const auto& s : fam) {
            CHECK(s.size() == c.set_size);
            for (long idx : s) CHECK(seen.insert(idx).second);
        }
        CHECK(static_cast<long>(seen.size()) == box.sites() * c.spec.dof_per_site());
    }
}

TEST_CASE("polymer blocks are contiguous site groups") {
    LatticeBox box(1, 4);
    ProjectionFamily fam = build_projection_family(box, ModelSpec::polymer(2));
    REQUIRE(fam.size() == 2);
    CHECK(fam[0] == std::vector<long>{0, 1});
    CHECK(fam[1] == std::vector<long>{2, 3});
}

TEST_CASE("alloy potential convolves the profile") {
    LatticeBox box(1, 3);
    SitePotential prof = SitePotential::chain({{0, 1.0}, {1, 0.2}});
    Eigen::VectorXd omega = Eigen::VectorXd::Zero(3);
    omega[0] = 1.0; // kick at the leftmost site
    Eigen::VectorXd v = alloy_potential(box, prof, omega);
    CHECK(v[0] == doctest::Approx(1.0));
    CHECK(v[1] == doctest::Approx(0.2));
    CHECK(v[2] == doctest::Approx(0.0));
}

TEST_CASE("alloy potential matches the naive double loop") {
    for (int dim : {1, 2}) {
        SitePotential prof;
        prof.dim = dim;
        std::vector<std::vector<int>> offsets;
        if (dim == 1)
            offsets = {{0}, {1}, {-1}, {2}};
        else
            offsets = {{0, 0}, {1, 0}, {0, -1}, {1, 1}};
        std::vector<double> vals = {1.0, 0.3, -0.2, 0.1};
        prof.offsets = offsets;
        prof.values = vals;

        LatticeBox box(dim, 5);
        Eigen::VectorXd omega = sample_disorder(DisorderSpec::uniform(1.0), box.sites(), 5, 0);
        Eigen::VectorXd fast = alloy_potential(box, prof, omega);

        for (long m = 0; m < box.sites(); ++m) {
            auto xm = box.coord_of(m);
            double acc = 0;
            for (long n = 0; n < box.sites(); ++n) {
                auto xn = box.coord_of(n);
                for (std::size_t t = 0; t < offsets.size(); ++t) {
                    bool match = true;
                    for (int a = 0; a < dim; ++a)
                        match = match && xm[a] - xn[a] == offsets[t][a];
                    if (match) acc += vals[t] * omega[n];
                }
            }
            CHECK(fast[m] == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("alloy parameters for the reference profile") {
    SitePotential prof = SitePotential::chain({{0, 1.0}, {1, 0.2}});
    AlloyParams p = alloy_parameters(prof, 2.0, 1.0);
    CHECK(p.a0 == doctest::Approx(1.0));
    CHECK(p.delta == doctest::Approx(0.2));
    CHECK(p.mass == doctest::Approx(1.2));
    CHECK(p.constraint == doctest::Approx(0.8));
    CHECK(p.K == doctest::Approx(0.8 / 1.44));
    CHECK(p.constraint_ok);
    CHECK(p.min_abs_fourier == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("alloy parameters degenerate and flagged cases") {
    AlloyParams single = alloy_parameters(SitePotential::chain({{0, 1.0}}), 2.0, 1.0);
    CHECK(single.delta == doctest::Approx(0.0));
    CHECK(single.K == doctest::Approx(2.0));
    CHECK(single.constraint_ok);

    AlloyParams fat = alloy_parameters(SitePotential::chain({{0, 1.0}, {1, 0.6}}), 1.0, 1.0);
    CHECK(fat.delta == doctest::Approx(0.6));
    CHECK(fat.constraint < 0);
    CHECK(!fat.constraint_ok);

    CHECK_THROWS(alloy_parameters(SitePotential::chain({{0, 1.0}, {1, 1.0}}), 2.0, 1.0));
    CHECK_THROWS(alloy_parameters(SitePotential::chain({{0, -1.0}}), 2.0, 1.0));
    CHECK_THROWS(alloy_parameters(SitePotential::chain({{0, 1.0}}), 0.0, 1.0));
    CHECK_THROWS(alloy_parameters(SitePotential::chain({{0, 1.0}}), 2.0, 0.0));
}

TEST_CASE("sampling respects support and is reproducible") {
    DisorderSpec dist = DisorderSpec::uniform(3.0);
    Eigen::VectorXd a = sample_disorder(dist, 100, 9, 4);
    Eigen::VectorXd b = sample_disorder(dist, 100, 9, 4);
    Eigen::VectorXd c = sample_disorder(dist, 100, 9, 5);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
    CHECK(a.cwiseAbs().maxCoeff() <= 3.0);
}

TEST_CASE("hamiltonian adds the potential on the diagonal") {
    SUBCASE("rank one") {
        ModelContext ctx(LatticeBox(1, 3), ModelSpec::rank_one(), DisorderSpec::uniform(1.0));
        Eigen::VectorXd omega(3);
        omega << 0.5, -0.25, 0.75;
        SymmetricMatrix h = ctx.hamiltonian(omega);
        for (long i = 0; i < 3; ++i) CHECK(h(i, i) == doctest::Approx(omega[i]));
        CHECK(h(0, 1) == doctest::Approx(1.0));
    }
    SUBCASE("polymer spreads one variable over its block") {
        ModelContext ctx(LatticeBox(1, 4), ModelSpec::polymer(2), DisorderSpec::uniform(1.0));
        Eigen::VectorXd omega(2);
        omega << 0.3, -0.6;
        SymmetricMatrix h = ctx.hamiltonian(omega);
        CHECK(h(0, 0) == doctest::Approx(0.3));
        CHECK(h(1, 1) == doctest::Approx(0.3));
        CHECK(h(2, 2) == doctest::Approx(-0.6));
        CHECK(h(3, 3) == doctest::Approx(-0.6));
    }
    SUBCASE("matrix valued couples through the identity on the fiber") {
        ModelContext ctx(LatticeBox(1, 2), ModelSpec::matrix_valued(2),
                         DisorderSpec::uniform(1.0));
        Eigen::VectorXd omega(2);
        omega << 0.4, -0.1;
        SymmetricMatrix h = ctx.hamiltonian(omega);
        CHECK(h(0, 0) == doctest::Approx(0.4));
        CHECK(h(1, 1) == doctest::Approx(0.4));
        CHECK(h(2, 2) == doctest::Approx(-0.1));
        CHECK(h(3, 3) == doctest::Approx(-0.1));
    }
    SUBCASE("alloy uses the convolved potential") {
        ModelContext ctx(LatticeBox(1, 3),
                         ModelSpec::alloy(SitePotential::chain({{0, 1.0}, {1, 0.2}})),
                         DisorderSpec::uniform(1.0));
        Eigen::VectorXd omega(3);
        omega << 1.0, 0.0, 0.0;
        SymmetricMatrix h = ctx.hamiltonian(omega);
        CHECK(h(0, 0) == doctest::Approx(1.0));
        CHECK(h(1, 1) == doctest::Approx(0.2));
        CHECK(h(2, 2) == doctest::Approx(0.0));
    }
}

TEST_CASE("minami rank per model") {
    CHECK(ModelSpec::rank_one().minami_rank(3) == 1);
    CHECK(ModelSpec::polymer(2).minami_rank(1) == 2);
    CHECK(ModelSpec::polymer(2).minami_rank(2) == 4);
    CHECK(ModelSpec::matrix_valued(3).minami_rank(2) == 3);
    CHECK(ModelSpec::alloy(SitePotential::chain({{0, 1.0}})).minami_rank(1) == 1);
}
