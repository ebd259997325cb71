#pragma once

#include <cstdint>
#include <exception>
#include <functional>
#include <vector>

#include <omp.h>

#include "levelstat/eigstats.hpp"
#include "levelstat/model.hpp"
#include "levelstat/spectral.hpp"

namespace levelstat {

// requested > 0 wins, then LEVELSTAT_WORKERS, then the OpenMP default.
int resolve_workers(int requested);

// Runs fn(trial) for trial = 0..trials-1 into a pre-sized vector. Each trial
// draws from its own counter-based stream, so scheduling order cannot change
// results; workers <= 1 is the serial reference path.
template <class R, class F>
std::vector<R> run_trials(long trials, int workers, F&& fn) {
    std::vector<R> out(static_cast<std::size_t>(trials));
    if (workers <= 1) {
        for (long t = 0; t < trials; ++t) out[static_cast<std::size_t>(t)] = fn(t);
        return out;
    }
    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic, 8) num_threads(workers)
    for (long t = 0; t < trials; ++t) {
        try {
            out[static_cast<std::size_t>(t)] = fn(t);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

struct ProbabilityEstimate {
    long successes = 0;
    long trials = 0;

    double point() const { return trials > 0 ? static_cast<double>(successes) / trials : 0; }
    double wilson_lo() const;
    double wilson_hi() const;
};

struct FitPoint {
    double size = 0;
    double value = 0;
    long successes = 0; // sample support behind the value
};

struct ScalingFit {
    double slope = 0;
    double intercept = 0;
    double stderr_slope = 0;
    int used = 0;
};

// Least squares on (log size, log value); keeps points with value > 0 and
// successes >= min_successes; throws unless >= 3 points survive.
ScalingFit scaling_fit(const std::vector<FitPoint>& points, long min_successes = 5);

// Per-trial eigenvalue counts in one or two windows on a fresh disorder draw.
struct PairCount {
    int first = 0;
    int second = 0;
};

std::vector<int> count_scan(const ModelContext& ctx, const EnergyWindow& w, long trials,
                            std::uint64_t seed, int workers);
std::vector<PairCount> pair_count_scan(const ModelContext& ctx, const EnergyWindow& wa,
                                       const EnergyWindow& wb, long trials, std::uint64_t seed,
                                       int workers);

ProbabilityEstimate estimate_event(const ModelContext& ctx, const EnergyWindow& w, long trials,
                                   std::uint64_t seed, int workers,
                                   const std::function<bool(long)>& count_event);

struct WegnerPoint {
    int nominal = 0; // ladder value (box radius)
    int side = 0;
    ProbabilityEstimate nonempty;
};

struct WegnerResult {
    std::vector<WegnerPoint> points;
    ScalingFit fit; // slope of log P{X >= 1} against log ladder value
};

WegnerResult wegner_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim, double E,
                         double i_lo, double i_hi, double scale_L,
                         const std::vector<int>& ladder, long trials, std::uint64_t seed,
                         int workers);

struct MinamiPoint {
    int nominal = 0;
    int side = 0;
    ProbabilityEstimate exceed;  // P{X > m}
    double extended_mean = 0;    // mean of X (X - m) over trials with X > m, else 0
    long extended_events = 0;
};

struct MinamiResult {
    int m = 1;
    std::vector<MinamiPoint> points;
    ScalingFit fit_exceed;
    ScalingFit fit_extended;
};

MinamiResult minami_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim, double E,
                         double i_lo, double i_hi, double scale_L,
                         const std::vector<int>& ladder, long trials, std::uint64_t seed,
                         int workers);

struct DecorrPoint {
    int L = 0;
    int ell = 0;
    int side = 0;
    long trials = 0;
    ProbabilityEstimate joint, first, second;
    double product = 0;
    double diff = 0;     // joint - product
    double diff_se = 0;  // multinomial delta method
    double ratio = 0;    // joint / product, 0 when product is 0
};

struct DecorrResult {
    std::vector<DecorrPoint> points;
    ScalingFit joint_fit; // log P{both} against log L
};

// ell per point: floor(L^alpha), or ceil(C log L) when log_scale_C > 0.
DecorrResult decorrelation_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim,
                                double E, double Ep, double i_lo, double i_hi, double j_lo,
                                double j_hi, double alpha, double log_scale_C,
                                const std::vector<int>& ladder, long trials,
                                std::uint64_t seed, int workers);

struct JacobianScanResult {
    double lambda = 0;
    int ell = 0;
    int side = 0;
    long trials = 0;
    long qualifying = 0;        // both windows nonempty
    long excluded = 0;          // crossing risk: eigenvalue too close to a window edge
    long klopp_violations = 0;
    long separation_failures = 0;
    long admissible = 0;        // trace gap above 4d, separation bounds in force
    ProbabilityEstimate event;  // P{max |2x2 minor| >= lambda | qualifying}
    std::vector<long> trial_ids; // aligned with the per-trial vectors below
    std::vector<double> max_jacobians;
    std::vector<double> l1_diffs;
    std::vector<double> trace_gaps;
};

JacobianScanResult jacobian_event_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim,
                                       double E, double Ep, double i_lo, double i_hi,
                                       double j_lo, double j_hi, long L, double K, double beta,
                                       double C, long trials, std::uint64_t seed, int workers);

double quantile(std::vector<double> xs, double q);

} // namespace levelstat
