#include "levelstat/model.hpp"

#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>

#include "levelstat/rng.hpp"

namespace levelstat {

double DisorderSpec::sup_density() const {
    return density == DensityKind::Uniform ? 1.0 / (2.0 * half_width) : 1.0 / half_width;
}

DisorderSpec DisorderSpec::uniform(double half_width) {
    if (half_width <= 0) throw std::invalid_argument("disorder half_width must be > 0");
    return DisorderSpec{DensityKind::Uniform, half_width};
}

DisorderSpec DisorderSpec::triangular(double half_width) {
    if (half_width <= 0) throw std::invalid_argument("disorder half_width must be > 0");
    return DisorderSpec{DensityKind::Triangular, half_width};
}

double SitePotential::at_origin() const {
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        bool zero = true;
        for (int c : offsets[i]) zero = zero && c == 0;
        if (zero) return values[i];
    }
    return 0.0;
}

SitePotential SitePotential::chain(std::vector<std::pair<int, double>> terms) {
    SitePotential p;
    p.dim = 1;
    for (auto& [o, v] : terms) {
        p.offsets.push_back({o});
        p.values.push_back(v);
    }
    return p;
}

ModelSpec ModelSpec::rank_one() { return ModelSpec{}; }

ModelSpec ModelSpec::polymer(int block_side) {
    if (block_side < 1) throw std::invalid_argument("polymer block side must be >= 1");
    ModelSpec s;
    s.kind = ModelKind::Polymer;
    s.block_side = block_side;
    return s;
}

ModelSpec ModelSpec::matrix_valued(int fiber_dim) {
    if (fiber_dim < 1) throw std::invalid_argument("fiber dimension must be >= 1");
    ModelSpec s;
    s.kind = ModelKind::MatrixValued;
    s.fiber_dim = fiber_dim;
    return s;
}

ModelSpec ModelSpec::matrix_valued(const Eigen::MatrixXd& fiber) {
    if (fiber.rows() != fiber.cols() || fiber.rows() < 1)
        throw std::invalid_argument("fiber matrix must be square");
    if (!fiber.isApprox(fiber.transpose()))
        throw std::invalid_argument("fiber matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fiber, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0)
        throw std::invalid_argument("fiber matrix must be positive definite");
    ModelSpec s;
    s.kind = ModelKind::MatrixValued;
    s.fiber_dim = static_cast<int>(fiber.rows());
    s.fiber = fiber;
    return s;
}

ModelSpec ModelSpec::alloy(SitePotential profile) {
    if (profile.offsets.size() != profile.values.size())
        throw std::invalid_argument("alloy profile offsets/values length mismatch");
    if (profile.at_origin() <= 0)
        throw std::invalid_argument("alloy profile needs a_0 > 0 at the origin");
    ModelSpec s;
    s.kind = ModelKind::Alloy;
    s.profile = std::move(profile);
    return s;
}

int ModelSpec::minami_rank(int dim) const {
    switch (kind) {
        case ModelKind::RankOne: return 1;
        case ModelKind::Polymer: {
            int m = 1;
            for (int a = 0; a < dim; ++a) m *= block_side;
            return m;
        }
        case ModelKind::MatrixValued: return fiber_dim;
        case ModelKind::Alloy: return 1;
    }
    return 1;
}

std::string ModelSpec::name() const {
    switch (kind) {
        case ModelKind::RankOne: return "rank_one";
        case ModelKind::Polymer: return "polymer";
        case ModelKind::MatrixValued: return "matrix_valued";
        case ModelKind::Alloy: return "alloy";
    }
    return "?";
}

int compatible_side(int radius, const ModelSpec& spec) {
    int side = 2 * radius + 1;
    if (spec.kind == ModelKind::Polymer && side % spec.block_side != 0) {
        side = spec.block_side * (side / spec.block_side);
        if (side < spec.block_side) side = spec.block_side;
    }
    return side;
}

long disorder_dimension(const LatticeBox& box, const ModelSpec& spec) {
    switch (spec.kind) {
        case ModelKind::RankOne:
        case ModelKind::MatrixValued:
        case ModelKind::Alloy:
            return box.sites();
        case ModelKind::Polymer: {
            if (box.side() % spec.block_side != 0)
                throw std::invalid_argument("polymer blocks must tile the box: side " +
                                            std::to_string(box.side()) + " vs block " +
                                            std::to_string(spec.block_side));
            long n = 1;
            for (int a = 0; a < box.dim(); ++a) n *= box.side() / spec.block_side;
            return n;
        }
    }
    return 0;
}

SymmetricMatrix build_laplacian(const LatticeBox& box) {
    SymmetricMatrix h(box.sites());
    for (long i = 0; i < box.sites(); ++i)
        for (int a = 0; a < box.dim(); ++a) {
            long j = box.neighbor(i, a, +1);
            if (j >= 0) h.set(i, j, 1.0);
        }
    return h;
}

SymmetricMatrix build_laplacian(const LatticeBox& box, const ModelSpec& spec) {
    if (spec.kind != ModelKind::MatrixValued) return build_laplacian(box);
    int m = spec.fiber_dim;
    Eigen::MatrixXd fiber =
        spec.fiber.size() > 0 ? spec.fiber : Eigen::MatrixXd::Identity(m, m).eval();
    SymmetricMatrix h(box.sites() * m);
    for (long i = 0; i < box.sites(); ++i)
        for (int a = 0; a < box.dim(); ++a) {
            long j = box.neighbor(i, a, +1);
            if (j < 0) continue;
            for (int p = 0; p < m; ++p)
                for (int q = 0; q < m; ++q) {
                    h.dense()(i * m + p, j * m + q) = fiber(p, q);
                    h.dense()(j * m + q, i * m + p) = fiber(p, q);
                }
        }
    return h;
}

ProjectionFamily build_projection_family(const LatticeBox& box, const ModelSpec& spec) {
    ProjectionFamily fam;
    switch (spec.kind) {
        case ModelKind::RankOne: {
            fam.resize(box.sites());
            for (long i = 0; i < box.sites(); ++i) fam[i] = {i};
            break;
        }
        case ModelKind::MatrixValued: {
            fam.resize(box.sites());
            for (long i = 0; i < box.sites(); ++i) {
                fam[i].resize(spec.fiber_dim);
                for (int p = 0; p < spec.fiber_dim; ++p) fam[i][p] = i * spec.fiber_dim + p;
            }
            break;
        }
        case ModelKind::Polymer: {
            long nblocks = disorder_dimension(box, spec);
            int per_axis = box.side() / spec.block_side;
            fam.resize(nblocks);
            std::vector<int> bc(box.dim()), x(box.dim());
            for (long b = 0; b < nblocks; ++b) {
                long rest = b;
                for (int a = box.dim() - 1; a >= 0; --a) {
                    bc[a] = static_cast<int>(rest % per_axis);
                    rest /= per_axis;
                }
                long vol = 1;
                for (int a = 0; a < box.dim(); ++a) vol *= spec.block_side;
                fam[b].reserve(vol);
                for (long off = 0; off < vol; ++off) {
                    long r = off;
                    for (int a = box.dim() - 1; a >= 0; --a) {
                        x[a] = box.lo() + bc[a] * spec.block_side +
                               static_cast<int>(r % spec.block_side);
                        r /= spec.block_side;
                    }
                    fam[b].push_back(box.index_of(x));
                }
            }
            break;
        }
        case ModelKind::Alloy:
            // disorder couples through the profile, not through projections
            break;
    }
    return fam;
}

Eigen::VectorXd alloy_potential(const LatticeBox& box, const SitePotential& profile,
                                const Eigen::VectorXd& omega) {
    if (omega.size() != box.sites())
        throw std::invalid_argument("alloy_potential: omega length must equal site count");
    if (profile.dim != box.dim())
        throw std::invalid_argument("alloy_potential: profile dimension mismatch");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(box.sites());
    std::vector<int> x(box.dim()), n(box.dim());
    for (long i = 0; i < box.sites(); ++i) {
        box.coord_of(i, x);
        for (std::size_t t = 0; t < profile.offsets.size(); ++t) {
            for (int a = 0; a < box.dim(); ++a) n[a] = x[a] - profile.offsets[t][a];
            if (box.contains(n)) v[i] += profile.values[t] * omega[box.index_of(n)];
        }
    }
    return v;
}

Eigen::VectorXd sample_disorder(const DisorderSpec& dist, long dimension, std::uint64_t seed,
                                std::uint64_t trial) {
    RngStream rng(seed, trial);
    Eigen::VectorXd omega(dimension);
    for (long j = 0; j < dimension; ++j)
        omega[j] = dist.density == DensityKind::Uniform ? rng.uniform(dist.half_width)
                                                        : rng.triangular(dist.half_width);
    return omega;
}

AlloyParams alloy_parameters(const SitePotential& profile, double c, double half_width,
                             int grid_per_axis) {
    if (c <= 0 || half_width <= 0)
        throw std::invalid_argument("alloy_parameters: c and half_width must be > 0");
    AlloyParams p;
    p.a0 = profile.at_origin();
    if (p.a0 <= 0) throw std::invalid_argument("alloy_parameters: a_0 must be > 0");

    double tail = 0;
    for (std::size_t t = 0; t < profile.offsets.size(); ++t) {
        bool origin = true;
        for (int cc : profile.offsets[t]) origin = origin && cc == 0;
        if (!origin) tail += std::abs(profile.values[t]);
        p.mass += profile.values[t];
    }
    p.delta = tail / p.a0;
    if (p.delta >= 1)
        throw std::invalid_argument(
            "alloy_parameters: delta >= 1 (tail mass must stay below a_0)");
    p.constraint = c / half_width * (1 - p.delta) * (1 - p.delta) -
                   2 * p.delta * (1 + p.delta);
    p.K = p.a0 * p.constraint / ((1 + p.delta) * (1 + p.delta));
    p.constraint_ok = p.constraint > 0;

    int grid = std::max(grid_per_axis, 256);
    long points = 1;
    for (int a = 0; a < profile.dim; ++a) points *= grid;
    double best = std::numeric_limits<double>::infinity();
    std::vector<long> idx(profile.dim);
    for (long g = 0; g < points; ++g) {
        long rest = g;
        for (int a = profile.dim - 1; a >= 0; --a) {
            idx[a] = rest % grid;
            rest /= grid;
        }
        std::complex<double> f = 0;
        for (std::size_t t = 0; t < profile.offsets.size(); ++t) {
            double phase = 0;
            for (int a = 0; a < profile.dim; ++a)
                phase += 2.0 * M_PI * idx[a] / grid * profile.offsets[t][a];
            f += profile.values[t] * std::polar(1.0, phase);
        }
        best = std::min(best, std::abs(f));
    }
    p.min_abs_fourier = best;
    return p;
}

ModelContext::ModelContext(LatticeBox b, ModelSpec s, DisorderSpec d)
    : box(std::move(b)),
      spec(std::move(s)),
      dist(d),
      hopping(build_laplacian(box, spec)),
      family(build_projection_family(box, spec)),
      disorder_dim(disorder_dimension(box, spec)),
      dof(spec.dof_per_site()) {}

Eigen::VectorXd ModelContext::sample(std::uint64_t seed, std::uint64_t trial) const {
    return sample_disorder(dist, disorder_dim, seed, trial);
}

Eigen::VectorXd ModelContext::potential(const Eigen::VectorXd& omega) const {
    if (omega.size() != disorder_dim)
        throw std::invalid_argument("potential: omega length must equal disorder dimension");
    if (spec.kind == ModelKind::Alloy) return alloy_potential(box, spec.profile, omega);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(coordinates());
    for (long j = 0; j < disorder_dim; ++j)
        for (long cidx : family[j]) v[cidx] += omega[j];
    return v;
}

SymmetricMatrix ModelContext::hamiltonian(const Eigen::VectorXd& omega) const {
    SymmetricMatrix h = hopping;
    Eigen::VectorXd v = potential(omega);
    h.dense().diagonal() += v;
    return h;
}

} // namespace levelstat
