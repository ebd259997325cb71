#include "levelstat/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace levelstat {

EnergyWindow EnergyWindow::scaled(double E, double i_lo, double i_hi, double L, int dim) {
    if (i_hi <= i_lo) throw std::invalid_argument("EnergyWindow: interval must have i_lo < i_hi");
    if (L <= 0) throw std::invalid_argument("EnergyWindow: scale L must be > 0");
    double vol = std::pow(L, dim);
    return EnergyWindow{E + i_lo / vol, E + i_hi / vol};
}

EnergyWindow EnergyWindow::absolute(double lo, double hi) {
    if (hi <= lo) throw std::invalid_argument("EnergyWindow: lo < hi required");
    return EnergyWindow{lo, hi};
}

Spectrum eigendecompose(const SymmetricMatrix& h, bool with_vectors) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.compute(h.dense(), with_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigendecomposition failed to converge for order " +
                                 std::to_string(h.order()));
    Spectrum sp;
    sp.values = es.eigenvalues();
    if (with_vectors) sp.vectors = es.eigenvectors();
    return sp;
}

std::pair<long, long> window_range(const Eigen::VectorXd& values, const EnergyWindow& w) {
    const double* b = values.data();
    const double* e = b + values.size();
    long first = std::lower_bound(b, e, w.lo) - b;
    long last = std::lower_bound(b, e, w.hi) - b;
    return {first, last};
}

long count_in_window(const Eigen::VectorXd& values, const EnergyWindow& w) {
    auto [first, last] = window_range(values, w);
    return last - first;
}

double window_isolation(const Eigen::VectorXd& values, const EnergyWindow& w) {
    double best = std::numeric_limits<double>::infinity();
    for (long i = 0; i < values.size(); ++i) {
        best = std::min(best, std::abs(values[i] - w.lo));
        best = std::min(best, std::abs(values[i] - w.hi));
    }
    return best;
}

SymmetricMatrix spectral_projector(const Spectrum& sp, const EnergyWindow& w) {
    if (!sp.has_vectors())
        throw std::invalid_argument("spectral_projector needs eigenvectors");
    auto [first, last] = window_range(sp.values, w);
    long n = sp.vectors.rows();
    SymmetricMatrix p(n);
    if (last > first) {
        auto block = sp.vectors.middleCols(first, last - first);
        p.dense() = block * block.transpose();
    }
    return p;
}

std::vector<EigvecDiag> localization_diagnostics(const LatticeBox& box, int dof,
                                                 const Spectrum& sp, const EnergyWindow& w,
                                                 double q, double nu) {
    if (!sp.has_vectors())
        throw std::invalid_argument("localization_diagnostics needs eigenvectors");
    long sites = box.sites();
    if (sp.vectors.rows() != sites * dof)
        throw std::invalid_argument("localization_diagnostics: dof/box mismatch");

    auto [first, last] = window_range(sp.values, w);
    std::vector<EigvecDiag> out;
    out.reserve(last - first);
    double ell = std::max(1.0, box.radius());
    double cap_base = std::pow(ell, q);

    std::vector<double> amp(sites);
    for (long j = first; j < last; ++j) {
        EigvecDiag d;
        d.index = j;
        d.value = sp.values[j];
        for (long s = 0; s < sites; ++s) {
            double a2 = 0;
            for (int f = 0; f < dof; ++f) a2 += sp.vectors(s * dof + f, j) * sp.vectors(s * dof + f, j);
            amp[s] = std::sqrt(a2);
            if (amp[s] > d.max_amp) {
                d.max_amp = amp[s];
                d.center = s;
            }
        }
        // least-squares slope of log amp against distance from the center
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        long n = 0;
        for (long s = 0; s < sites; ++s) {
            if (amp[s] < 1e-14) continue;
            double x = box.distance(s, d.center);
            double y = std::log(amp[s]);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
            ++n;
        }
        double denom = n * sxx - sx * sx;
        d.decay_rate = denom > 0 ? -(n * sxy - sx * sy) / denom : 0.0;

        d.bound_ok = true;
        for (long s = 0; s < sites; ++s)
            if (amp[s] > cap_base * std::exp(-nu * box.distance(s, d.center)) + 1e-12) {
                d.bound_ok = false;
                break;
            }
        out.push_back(d);
    }
    return out;
}

double median(std::vector<double> xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

} // namespace levelstat
