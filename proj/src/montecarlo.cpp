#include "levelstat/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace levelstat {

namespace {
constexpr double kZ95 = 1.959963984540054;
}

int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("LEVELSTAT_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return omp_get_max_threads();
}

double ProbabilityEstimate::wilson_lo() const {
    if (trials == 0 || successes == 0) return 0;
    double n = trials, p = point(), z2 = kZ95 * kZ95;
    double center = (p + z2 / (2 * n)) / (1 + z2 / n);
    double half = kZ95 * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    return std::max(0.0, center - half);
}

double ProbabilityEstimate::wilson_hi() const {
    if (trials == 0 || successes == trials) return 1;
    double n = trials, p = point(), z2 = kZ95 * kZ95;
    double center = (p + z2 / (2 * n)) / (1 + z2 / n);
    double half = kZ95 * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    return std::min(1.0, center + half);
}

ScalingFit scaling_fit(const std::vector<FitPoint>& points, long min_successes) {
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : points)
        if (p.value > 0 && p.successes >= min_successes)
            xy.emplace_back(std::log(p.size), std::log(p.value));
    if (xy.size() < 3)
        throw std::invalid_argument("scaling_fit: need >= 3 usable points, have " +
                                    std::to_string(xy.size()));
    double n = static_cast<double>(xy.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto& [x, y] : xy) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double denom = n * sxx - sx * sx;
    ScalingFit f;
    f.used = static_cast<int>(xy.size());
    f.slope = (n * sxy - sx * sy) / denom;
    f.intercept = (sy - f.slope * sx) / n;
    double ss = 0;
    for (auto& [x, y] : xy) {
        double r = y - (f.slope * x + f.intercept);
        ss += r * r;
    }
    if (xy.size() > 2)
        f.stderr_slope = std::sqrt(ss / (n - 2) / (sxx - sx * sx / n));
    return f;
}

namespace {

// A sparse ladder is a data condition, not a programming error: callers see
// used = 0 and NaN slopes instead of an exception.
ScalingFit fit_or_empty(const std::vector<FitPoint>& points) {
    try {
        return scaling_fit(points);
    } catch (const std::invalid_argument&) {
        ScalingFit f;
        f.slope = std::numeric_limits<double>::quiet_NaN();
        f.intercept = std::numeric_limits<double>::quiet_NaN();
        f.stderr_slope = std::numeric_limits<double>::quiet_NaN();
        f.used = 0;
        return f;
    }
}

} // namespace

std::vector<int> count_scan(const ModelContext& ctx, const EnergyWindow& w, long trials,
                            std::uint64_t seed, int workers) {
    return run_trials<int>(trials, workers, [&](long t) {
        Spectrum sp = eigendecompose(ctx.hamiltonian(ctx.sample(seed, t)), false);
        return static_cast<int>(count_in_window(sp.values, w));
    });
}

std::vector<PairCount> pair_count_scan(const ModelContext& ctx, const EnergyWindow& wa,
                                       const EnergyWindow& wb, long trials, std::uint64_t seed,
                                       int workers) {
    return run_trials<PairCount>(trials, workers, [&](long t) {
        Spectrum sp = eigendecompose(ctx.hamiltonian(ctx.sample(seed, t)), false);
        return PairCount{static_cast<int>(count_in_window(sp.values, wa)),
                         static_cast<int>(count_in_window(sp.values, wb))};
    });
}

ProbabilityEstimate estimate_event(const ModelContext& ctx, const EnergyWindow& w, long trials,
                                   std::uint64_t seed, int workers,
                                   const std::function<bool(long)>& count_event) {
    std::vector<int> counts = count_scan(ctx, w, trials, seed, workers);
    ProbabilityEstimate e;
    e.trials = trials;
    for (int c : counts) e.successes += count_event(c) ? 1 : 0;
    return e;
}

WegnerResult wegner_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim, double E,
                         double i_lo, double i_hi, double scale_L,
                         const std::vector<int>& ladder, long trials, std::uint64_t seed,
                         int workers) {
    EnergyWindow w = EnergyWindow::scaled(E, i_lo, i_hi, scale_L, dim);
    WegnerResult res;
    std::vector<FitPoint> fit_pts;
    for (int ell : ladder) {
        ModelContext ctx(LatticeBox::from_side(dim, compatible_side(ell, spec)), spec, dist);
        std::vector<int> counts = count_scan(ctx, w, trials, seed, workers);
        WegnerPoint p;
        p.nominal = ell;
        p.side = ctx.box.side();
        p.nonempty.trials = trials;
        for (int c : counts) p.nonempty.successes += c >= 1 ? 1 : 0;
        res.points.push_back(p);
        fit_pts.push_back({static_cast<double>(ell), p.nonempty.point(), p.nonempty.successes});
    }
    res.fit = fit_or_empty(fit_pts);
    return res;
}

MinamiResult minami_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim, double E,
                         double i_lo, double i_hi, double scale_L,
                         const std::vector<int>& ladder, long trials, std::uint64_t seed,
                         int workers) {
    EnergyWindow w = EnergyWindow::scaled(E, i_lo, i_hi, scale_L, dim);
    MinamiResult res;
    res.m = spec.minami_rank(dim);
    std::vector<FitPoint> exceed_pts, ext_pts;
    for (int ell : ladder) {
        ModelContext ctx(LatticeBox::from_side(dim, compatible_side(ell, spec)), spec, dist);
        std::vector<int> counts = count_scan(ctx, w, trials, seed, workers);
        MinamiPoint p;
        p.nominal = ell;
        p.side = ctx.box.side();
        p.exceed.trials = trials;
        double ext_sum = 0;
        for (int c : counts)
            if (c > res.m) {
                ++p.exceed.successes;
                ++p.extended_events;
                ext_sum += static_cast<double>(c) * (c - res.m);
            }
        p.extended_mean = ext_sum / trials;
        res.points.push_back(p);
        exceed_pts.push_back({static_cast<double>(ell), p.exceed.point(), p.exceed.successes});
        ext_pts.push_back({static_cast<double>(ell), p.extended_mean, p.extended_events});
    }
    res.fit_exceed = fit_or_empty(exceed_pts);
    res.fit_extended = fit_or_empty(ext_pts);
    return res;
}

namespace {

// Delta-method standard error of p11 - (p11+p10)(p11+p01) under the
// multinomial over {both, first only, second only}.
double diff_standard_error(long n11, long n10, long n01, long n) {
    if (n < 2) return 0;
    double p11 = static_cast<double>(n11) / n;
    double p10 = static_cast<double>(n10) / n;
    double p01 = static_cast<double>(n01) / n;
    double pa = p11 + p10, pb = p11 + p01;
    double g11 = 1 - pa - pb, g10 = -pb, g01 = -pa;
    auto cov = [&](double pi, double pj, bool same) {
        return (same ? pi * (1 - pi) : -pi * pj) / n;
    };
    double var = g11 * g11 * cov(p11, p11, true) + g10 * g10 * cov(p10, p10, true) +
                 g01 * g01 * cov(p01, p01, true) + 2 * g11 * g10 * cov(p11, p10, false) +
                 2 * g11 * g01 * cov(p11, p01, false) + 2 * g10 * g01 * cov(p10, p01, false);
    return var > 0 ? std::sqrt(var) : 0;
}

} // namespace

DecorrResult decorrelation_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim,
                                double E, double Ep, double i_lo, double i_hi, double j_lo,
                                double j_hi, double alpha, double log_scale_C,
                                const std::vector<int>& ladder, long trials,
                                std::uint64_t seed, int workers) {
    DecorrResult res;
    std::vector<FitPoint> joint_pts;
    for (int L : ladder) {
        int ell = log_scale_C > 0
                      ? log_scale_length(log_scale_C, L)
                      : std::max(1, static_cast<int>(std::floor(std::pow(L, alpha))));
        ModelContext ctx(LatticeBox::from_side(dim, compatible_side(ell, spec)), spec, dist);
        EnergyWindow wa = EnergyWindow::scaled(E, i_lo, i_hi, L, dim);
        EnergyWindow wb = EnergyWindow::scaled(Ep, j_lo, j_hi, L, dim);
        std::vector<PairCount> counts = pair_count_scan(ctx, wa, wb, trials, seed, workers);

        DecorrPoint p;
        p.L = L;
        p.ell = ell;
        p.side = ctx.box.side();
        p.trials = trials;
        long n11 = 0, n10 = 0, n01 = 0;
        for (const auto& c : counts) {
            bool a = c.first >= 1, b = c.second >= 1;
            n11 += a && b;
            n10 += a && !b;
            n01 += !a && b;
        }
        p.joint = {n11, trials};
        p.first = {n11 + n10, trials};
        p.second = {n11 + n01, trials};
        p.product = p.first.point() * p.second.point();
        p.diff = p.joint.point() - p.product;
        p.diff_se = diff_standard_error(n11, n10, n01, trials);
        p.ratio = p.product > 0 ? p.joint.point() / p.product : 0;
        res.points.push_back(p);
        joint_pts.push_back({static_cast<double>(L), p.joint.point(), p.joint.successes});
    }
    res.joint_fit = fit_or_empty(joint_pts);
    return res;
}

JacobianScanResult jacobian_event_scan(const ModelSpec& spec, const DisorderSpec& dist, int dim,
                                       double E, double Ep, double i_lo, double i_hi,
                                       double j_lo, double j_hi, long L, double K, double beta,
                                       double C, long trials, std::uint64_t seed, int workers) {
    JacobianScanResult res;
    res.lambda = lambda_threshold(std::abs(E - Ep), dim, K, beta, C, L);
    res.ell = log_scale_length(C, L);
    res.trials = trials;

    ModelContext ctx(LatticeBox::from_side(dim, compatible_side(res.ell, spec)), spec, dist);
    res.side = ctx.box.side();
    EnergyWindow wa = EnergyWindow::scaled(E, i_lo, i_hi, L, dim);
    EnergyWindow wb = EnergyWindow::scaled(Ep, j_lo, j_hi, L, dim);

    struct Rec {
        unsigned char qualified = 0, excluded = 0, event = 0, klopp_ok = 1, sep_ok = 1,
                      admissible = 0;
        double maxj = 0, l1 = 0, gap = 0;
    };
    std::vector<Rec> recs = run_trials<Rec>(trials, workers, [&](long t) {
        Rec r;
        Eigen::VectorXd omega = ctx.sample(seed, t);
        SymmetricMatrix h = ctx.hamiltonian(omega);
        Spectrum quick = eigendecompose(h, false);
        if (count_in_window(quick.values, wa) < 1 || count_in_window(quick.values, wb) < 1)
            return r;
        r.qualified = 1;
        double gap_tol = 1e-8 * std::max(1.0, h.frobenius_norm());
        if (window_isolation(quick.values, wa) < gap_tol ||
            window_isolation(quick.values, wb) < gap_tol) {
            r.excluded = 1;
            return r;
        }
        Spectrum sp = eigendecompose(h, true);
        TraceStats a = window_trace_stats(ctx, sp, wa);
        TraceStats b = window_trace_stats(ctx, sp, wb);
        Eigen::VectorXd u = a.grad / a.grad.lpNorm<1>();
        Eigen::VectorXd v = b.grad / b.grad.lpNorm<1>();
        r.maxj = max_abs_jacobian(u, v).value;
        r.l1 = (u - v).lpNorm<1>();
        r.event = r.maxj >= res.lambda ? 1 : 0;
        KloppCheck kc = klopp_check(u, v);
        r.klopp_ok = kc.ok ? 1 : 0;
        SeparationCheck sc =
            separation_check(a.grad, b.grad, a.value, b.value, dim, dist.half_width);
        r.admissible = sc.trace_gap > 4.0 * dim ? 1 : 0;
        r.sep_ok = sc.ok ? 1 : 0;
        r.gap = sc.trace_gap;
        return r;
    });

    for (long t = 0; t < trials; ++t) {
        const Rec& r = recs[static_cast<std::size_t>(t)];
        if (!r.qualified) continue;
        ++res.qualifying;
        if (r.excluded) {
            ++res.excluded;
            continue;
        }
        ++res.event.trials;
        res.event.successes += r.event;
        res.klopp_violations += r.klopp_ok ? 0 : 1;
        res.admissible += r.admissible;
        if (r.admissible && !r.sep_ok) ++res.separation_failures;
        res.trial_ids.push_back(t);
        res.max_jacobians.push_back(r.maxj);
        res.l1_diffs.push_back(r.l1);
        res.trace_gaps.push_back(r.gap);
    }
    return res;
}

double quantile(std::vector<double> xs, double q) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(xs.begin(), xs.end());
    double pos = q * (xs.size() - 1);
    std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= xs.size()) return xs.back();
    double frac = pos - i;
    return xs[i] * (1 - frac) + xs[i + 1] * frac;
}

} // namespace levelstat
