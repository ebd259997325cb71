#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "levelstat/lattice.hpp"

namespace levelstat {

enum class DensityKind { Uniform, Triangular };

struct DisorderSpec {
    DensityKind density = DensityKind::Uniform;
    double half_width = 1.0; // M, support is [-M, M]

    double sup_density() const;
    static DisorderSpec uniform(double half_width);
    static DisorderSpec triangular(double half_width);
};

// Single-site alloy profile: finitely many offsets with real amplitudes.
// The origin amplitude a_0 must be present and positive.
struct SitePotential {
    int dim = 1;
    std::vector<std::vector<int>> offsets;
    std::vector<double> values;

    double at_origin() const;
    static SitePotential chain(std::vector<std::pair<int, double>> terms); // d=1
};

enum class ModelKind { RankOne, Polymer, MatrixValued, Alloy };

struct ModelSpec {
    ModelKind kind = ModelKind::RankOne;
    int block_side = 1;                 // Polymer
    int fiber_dim = 1;                  // MatrixValued
    Eigen::MatrixXd fiber;              // MatrixValued; empty means identity
    SitePotential profile;              // Alloy

    static ModelSpec rank_one();
    static ModelSpec polymer(int block_side);
    static ModelSpec matrix_valued(int fiber_dim);
    static ModelSpec matrix_valued(const Eigen::MatrixXd& fiber);
    static ModelSpec alloy(SitePotential profile);

    // Largest number of eigenvalues one disorder variable can produce in a
    // shrinking window: 1, block volume, fiber dimension, 1.
    int minami_rank(int dim) const;
    int dof_per_site() const { return kind == ModelKind::MatrixValued ? fiber_dim : 1; }
    std::string name() const;
};

// Box side for a nominal radius L: 2L+1, snapped down to a multiple of the
// polymer block side when needed so blocks tile exactly.
int compatible_side(int radius, const ModelSpec& spec);

// Dense symmetric matrix with mirrored element access.
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(long order) : a_(Eigen::MatrixXd::Zero(order, order)) {}

    long order() const { return a_.rows(); }
    double operator()(long i, long j) const { return a_(i, j); }
    void set(long i, long j, double v) { a_(i, j) = v; a_(j, i) = v; }
    void add(long i, long j, double v) { a_(i, j) += v; if (i != j) a_(j, i) += v; }
    void add_diag(long i, double v) { a_(i, i) += v; }
    const Eigen::MatrixXd& dense() const { return a_; }
    Eigen::MatrixXd& dense() { return a_; }
    double frobenius_norm() const { return a_.norm(); }

private:
    Eigen::MatrixXd a_;
};

// Disorder variable -> coordinate indices it shifts (orthogonal projections).
using ProjectionFamily = std::vector<std::vector<long>>;

long disorder_dimension(const LatticeBox& box, const ModelSpec& spec);

// Hopping part: adjacency operator of the box (matrix-valued: adjacency (x) fiber).
SymmetricMatrix build_laplacian(const LatticeBox& box, const ModelSpec& spec);
SymmetricMatrix build_laplacian(const LatticeBox& box); // scalar, dof = 1

ProjectionFamily build_projection_family(const LatticeBox& box, const ModelSpec& spec);

// Alloy potential under truncation to the box: V(m) = sum over n in box of
// a_{m-n} omega_n, so sites near the boundary see a clipped profile.
Eigen::VectorXd alloy_potential(const LatticeBox& box, const SitePotential& profile,
                                const Eigen::VectorXd& omega);

Eigen::VectorXd sample_disorder(const DisorderSpec& dist, long dimension,
                                std::uint64_t seed, std::uint64_t trial);

struct AlloyParams {
    double a0 = 0;
    double delta = 0;        // sum_{m != 0} |a_m| / a_0
    double mass = 0;         // sum_m a_m
    double constraint = 0;   // c/M (1-delta)^2 - 2 delta (1+delta)
    double K = 0;            // a_0 * constraint / (1+delta)^2
    double min_abs_fourier = 0;
    bool constraint_ok = false;
};

// grid_per_axis is clamped up to 256.
AlloyParams alloy_parameters(const SitePotential& profile, double c, double half_width,
                             int grid_per_axis = 256);

// Precomputed pieces shared by every trial at one geometry.
struct ModelContext {
    LatticeBox box;
    ModelSpec spec;
    DisorderSpec dist;
    SymmetricMatrix hopping;
    ProjectionFamily family; // empty for alloy
    long disorder_dim = 0;
    int dof = 1;

    ModelContext(LatticeBox b, ModelSpec s, DisorderSpec d);

    long coordinates() const { return box.sites() * dof; }
    Eigen::VectorXd sample(std::uint64_t seed, std::uint64_t trial) const;
    Eigen::VectorXd potential(const Eigen::VectorXd& omega) const;
    SymmetricMatrix hamiltonian(const Eigen::VectorXd& omega) const;
};

} // namespace levelstat
