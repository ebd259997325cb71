#pragma once

#include <cstdint>
#include <vector>

#include "levelstat/model.hpp"
#include "levelstat/montecarlo.hpp"
#include "levelstat/spectral.hpp"

namespace levelstat {

// Disjoint sub-boxes of side sub_side tiling the lower-left corner of the big
// box, per_axis^dim of them; the margin that does not fit is dropped.
struct SubcubeLayout {
    int dim = 1;
    int sub_side = 1;
    int per_axis = 1;
    long count = 1;
    // [box][sub disorder index] -> big disorder index
    std::vector<std::vector<long>> disorder_map;
};

SubcubeLayout make_subcube_layout(const LatticeBox& big, const ModelSpec& spec, int sub_side);

// Eigenvalue counts per sub-box for one disorder draw on the big box: the
// sub-box Hamiltonian at p uses the slice of omega that p owns.
struct SubcubeCounts {
    std::vector<int> first;
    std::vector<int> second;
};

SubcubeCounts count_subcube_array(const ModelContext& sub_ctx, const SubcubeLayout& layout,
                                  const Eigen::VectorXd& omega_big, const EnergyWindow& wa,
                                  const EnergyWindow& wb);

struct CompoundPoissonDiag {
    double mean = 0;
    std::vector<double> pmf;     // empirical, index = count
    double tv_poisson = 0;       // total variation against Poisson(mean)
    double fm2 = 0, fm3 = 0;     // factorial moment ratios, 1 for Poisson
};

CompoundPoissonDiag compound_poisson_diagnostics(const std::vector<int>& counts);

struct IndependencePoint {
    int L = 0;
    int ell = 0;
    int sub_side = 0;
    long boxes = 0;
    long trials = 0;
    ProbabilityEstimate joint;    // P{zeta_first >= 1 and zeta_second >= 1}
    double product = 0;           // P{zeta_first >= 1} P{zeta_second >= 1}
    double double_sum = 0;        // sum over p != q of P{eta_p >= 1} P{eta_q' >= 1}
    double e_sum = 0;  // sum over boxes of P{both} - P{first} P{second}
    double e_se = 0;   // delta-method, boxes treated as independent
    double pearson = 0;           // corr(zeta_first, zeta_second)
    double max_offdiag_z = 0;     // max |z| of cov(eta_p, eta_q'), p != q
    double mean_zeta_first = 0, mean_zeta_second = 0;
    double max_eta = 0;           // largest per-box count seen in the first window
    double frac_eta_above = 0;    // share of (trial, box) pairs with eta > minami rank
    CompoundPoissonDiag zeta_first_diag;
};

struct IndependenceResult {
    std::vector<IndependencePoint> points;
};

IndependenceResult independence_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim,
                                     double E, double Ep, double i_lo, double i_hi, double j_lo,
                                     double j_hi, double alpha, const std::vector<int>& ladder,
                                     long trials, std::uint64_t seed, int workers);

// Greedy consecutive-gap clustering of ascending values.
std::vector<int> cluster_sizes(const std::vector<double>& ascending, double resolution);

struct MultiplicityPoint {
    int L = 0;
    int side = 0;
    double resolution = 0;
    ProbabilityEstimate exceed; // max cluster size > m
    int max_cluster_seen = 0;
};

struct MultiplicityResult {
    int m = 1;
    double q = 3;
    std::vector<MultiplicityPoint> points;
};

// Clusters the spectrum inside a fixed window at resolution L^{-q}.
MultiplicityResult multiplicity_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim,
                                     double w_lo, double w_hi, double q,
                                     const std::vector<int>& ladder, long trials,
                                     std::uint64_t seed, int workers);

struct TruncationResidual {
    double residual = 0;      // ||(H_sub - lambda) phi_sub||_2
    double inside_norm = 0;   // ||phi restricted||_2
    double outside_mass = 0;  // sqrt(1 - inside^2) for a normalized eigenvector
};

TruncationResidual truncation_residual(const LatticeBox& big, int dof,
                                       const SymmetricMatrix& h_big, const Spectrum& sp,
                                       long column, int sub_radius);

// Gram matrix of eigenvectors restricted to the centered sub-box.
Eigen::MatrixXd gram_overlaps(const LatticeBox& big, int dof, const Spectrum& sp,
                              const std::vector<long>& columns, int sub_radius);

} // namespace levelstat
