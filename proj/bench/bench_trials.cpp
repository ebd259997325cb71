#include <chrono>
#include <cstdio>
#include <cstdlib>

#include <omp.h>

#include "levelstat/montecarlo.hpp"

using namespace levelstat;

namespace {

double run_timed(const ModelContext& ctx, const EnergyWindow& w, long trials, int workers,
                 std::vector<int>& counts) {
    auto start = std::chrono::steady_clock::now();
    counts = count_scan(ctx, w, trials, 1, workers);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

// Usage: bench_trials [trials] [radius] [workers]
int main(int argc, char** argv) {
    long trials = argc > 1 ? std::atol(argv[1]) : 4000;
    int radius = argc > 2 ? std::atoi(argv[2]) : 12;
    int workers = argc > 3 ? std::atoi(argv[3]) : omp_get_max_threads();

    ModelSpec spec = ModelSpec::rank_one();
    ModelContext ctx(LatticeBox::from_radius(1, radius), spec, DisorderSpec::uniform(4.0));
    EnergyWindow w = EnergyWindow::scaled(4.0, -2.0, 2.0, 128.0, 1);

    std::printf("count scan, side %d, %ld trials\n", ctx.box.side(), trials);
    std::vector<int> serial, parallel;
    double t1 = run_timed(ctx, w, trials, 1, serial);
    std::printf("  serial reference: %8.3f s  (%8.1f trials/s)\n", t1, trials / t1);
    double tn = run_timed(ctx, w, trials, workers, parallel);
    std::printf("  %2d workers:       %8.3f s  (%8.1f trials/s)\n", workers, tn, trials / tn);
    std::printf("  speedup: %.2fx\n", t1 / tn);

    if (serial != parallel) {
        std::printf("MISMATCH: parallel counts differ from the serial reference\n");
        return 1;
    }
    std::printf("parallel counts match the serial reference\n");
    return 0;
}
