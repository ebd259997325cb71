#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "levelstat/lattice.hpp"
#include "levelstat/model.hpp"

namespace levelstat {

// Half-open energy window [lo, hi).
struct EnergyWindow {
    double lo = 0;
    double hi = 0;

    double width() const { return hi - lo; }
    bool contains(double x) const { return lo <= x && x < hi; }

    // L^{-d}-scaled window centered at E: E + [i_lo, i_hi) / L^d.
    static EnergyWindow scaled(double E, double i_lo, double i_hi, double L, int dim);
    static EnergyWindow absolute(double lo, double hi);
};

struct Spectrum {
    Eigen::VectorXd values;  // ascending
    Eigen::MatrixXd vectors; // columns, empty when eigenvalues-only
    bool has_vectors() const { return vectors.size() > 0; }
};

// Throws on solver non-convergence, naming the matrix order.
Spectrum eigendecompose(const SymmetricMatrix& h, bool with_vectors);

// [first, last) index range of eigenvalues inside the window.
std::pair<long, long> window_range(const Eigen::VectorXd& values, const EnergyWindow& w);
long count_in_window(const Eigen::VectorXd& values, const EnergyWindow& w);

// Smallest distance from any eigenvalue to either window edge; +inf when the
// spectrum is empty. Counts are stable under perturbations below this.
double window_isolation(const Eigen::VectorXd& values, const EnergyWindow& w);

// P = sum of v v^T over eigenvalues in the window.
SymmetricMatrix spectral_projector(const Spectrum& sp, const EnergyWindow& w);

struct EigvecDiag {
    long index = -1;        // eigenvalue index
    double value = 0;
    long center = -1;       // site with max fiber amplitude, smallest index on ties
    double max_amp = 0;
    double decay_rate = 0;  // least-squares exponential rate, positive = decaying
    bool bound_ok = false;  // amp(x) <= ell^q exp(-nu |x - center|) everywhere
};

// Diagnostics for the eigenvectors inside the window.
std::vector<EigvecDiag> localization_diagnostics(const LatticeBox& box, int dof,
                                                 const Spectrum& sp, const EnergyWindow& w,
                                                 double q, double nu);

double median(std::vector<double> xs);

} // namespace levelstat
