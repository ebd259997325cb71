#pragma once

#include <Eigen/Dense>
#include <vector>

#include "levelstat/model.hpp"
#include "levelstat/spectral.hpp"

namespace levelstat {

struct WeightedTrace {
    double value = 0; // mean of eigenvalues inside the window
    long k = 0;       // eigenvalue count
};

// Throws when the window is empty.
WeightedTrace weighted_trace(const Eigen::VectorXd& values, const EnergyWindow& w);

struct TraceStats {
    double value = 0;
    long k = 0;
    Eigen::VectorXd grad; // d/d omega_j of the weighted trace, length = disorder dim
};

// Gradient through the spectral projector: g_j = (1/k) tr(P_w dH/d omega_j).
// Projection models: sum of |v(c)|^2 over the variable's coordinates.
// Alloy: g_n = (1/k) sum_i sum_offsets a_o |v_i(n+o)|^2 within the box.
TraceStats window_trace_stats(const ModelContext& ctx, const Spectrum& sp,
                              const EnergyWindow& w);

struct FdGradient {
    Eigen::VectorXd grad;
    bool count_changed = false; // window count moved under some perturbation
    double min_isolation = 0;   // smallest eigenvalue distance to a window edge seen
};

// Central differences of the weighted trace, 2 * dim(omega) eigensolves.
FdGradient fd_trace_gradient(const ModelContext& ctx, const Eigen::VectorXd& omega,
                             const EnergyWindow& w, double step);

struct DirectionalIdentity {
    double lhs = 0;      // omega . (grad T - grad T')
    double rhs = 0;      // T - T' - (1/k1) tr(P_E L) + (1/k2) tr(P_E' L)
    double residual = 0; // |lhs - rhs|
    double t_first = 0, t_second = 0;
    long k1 = 0, k2 = 0;
};

DirectionalIdentity directional_identity(const ModelContext& ctx, const Eigen::VectorXd& omega,
                                         const Spectrum& sp, const EnergyWindow& wE,
                                         const EnergyWindow& wEp);

struct SeparationCheck {
    double l1 = 0, l2 = 0;            // norms of grad T - grad T'
    double l1_bound = 0, l2_bound = 0; // (|T - T'| - 4d) / M, same over M sqrt(n)
    double trace_gap = 0;              // |T - T'|
    bool ok = true;                    // vacuous when trace_gap <= 4d
};

SeparationCheck separation_check(const Eigen::VectorXd& grad_first,
                                 const Eigen::VectorXd& grad_second, double t_first,
                                 double t_second, int dim, double half_width);

struct JacobianMax {
    double value = 0; // max over i<j of |u_i v_j - u_j v_i|
    long i = -1, j = -1;
};

JacobianMax max_abs_jacobian(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct KloppCheck {
    double max_det2 = 0;
    double l1_diff = 0;
    double bound = 0; // ||u - v||_1^2 / (4 n^5)
    long n = 0;
    bool ok = false;
};

// Determinant lower bound for nonnegative l1-normalized vectors.
KloppCheck klopp_check(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// (|E - E'| - 4d) / K * (C log L)^{-beta d}; requires |E-E'| > 4d, beta > 5/2.
double lambda_threshold(double delta_e, int dim, double K, double beta, double C, long L);

// Length scale ell~ = ceil(C log L).
int log_scale_length(double C, long L);

// k-fold non-interacting operator sum_slots I x..x H x..x I applied to the
// product of the given eigenvectors; returns the sup-norm residual against
// the eigenvalue sum. Order n^k storage, intended for small checks.
double tensor_product_residual(const Eigen::MatrixXd& h, const Eigen::MatrixXd& vectors,
                               const Eigen::VectorXd& values,
                               const std::vector<long>& indices);

// Dense k-fold sum operator, oracle-sized (n^k rows).
Eigen::MatrixXd build_tensor_sum(const Eigen::MatrixXd& h, int k);

} // namespace levelstat
