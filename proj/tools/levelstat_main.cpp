#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "levelstat/experiment.hpp"

using levelstat::RunConfig;

namespace {

// --config is resolved before CLI11 parsing so explicit flags override file
// values.
std::string find_config_path(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg == "--config" && i + 1 < argc) return argv[i + 1];
        if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
    }
    return {};
}

struct WindowStage {
    std::vector<double> I, J;
};

void add_common_options(CLI::App* sub, RunConfig& cfg, WindowStage& win,
                        std::string& config_echo) {
    sub->add_option("--config", config_echo, "JSON config file, flags override its values")
        ->type_name("FILE");
    sub->add_option("--model", cfg.model, "rank_one | polymer | matrix_valued | alloy");
    sub->add_option("--density", cfg.density, "uniform | triangular");
    sub->add_option("--half-width,-M", cfg.half_width, "disorder support half width");
    sub->add_option("--dim", cfg.dim, "lattice dimension");
    sub->add_option("--block-side", cfg.block_side, "polymer block side");
    sub->add_option("--fiber-dim", cfg.fiber_dim, "matrix-valued fiber dimension");
    sub->add_option("--E", cfg.E, "first window center");
    sub->add_option("--Eprime", cfg.Eprime, "second window center");
    sub->add_option("--I", win.I, "first base interval, two numbers")
        ->expected(2)
        ->delimiter(',');
    sub->add_option("--J", win.J, "second base interval, two numbers")
        ->expected(2)
        ->delimiter(',');
    sub->add_option("--alpha", cfg.alpha, "sub-box exponent");
    sub->add_option("--beta", cfg.beta, "threshold exponent");
    sub->add_option("--q", cfg.q, "resolution exponent");
    sub->add_option("--C", cfg.C, "log scale constant");
    sub->add_option("--c", cfg.c_gap, "spectral gap constant");
    sub->add_option("--K", cfg.K, "gradient separation constant");
    sub->add_option("--nu", cfg.nu, "localization rate for decay bounds");
    sub->add_option("--L", cfg.L, "reference scale for window widths");
    sub->add_option("--ladder", cfg.ladder, "comma-separated scan sizes")->delimiter(',');
    sub->add_option("--box-radius", cfg.box_radius, "nominal box radius");
    sub->add_option("--h-step", cfg.h_step, "finite-difference step");
    sub->add_option("--tensor-k", cfg.tensor_k, "tensor factor count, 1 or 2");
    sub->add_option("--trials", cfg.trials, "Monte Carlo trials");
    sub->add_option("--seed", cfg.seed, "stream seed");
    sub->add_option("--workers", cfg.workers,
                    "worker threads, 0 = LEVELSTAT_WORKERS or the OpenMP default");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--slope-tol", cfg.slope_tol, "slope assertion tolerance, <= 0 disables");
    sub->add_option("--min-admissible", cfg.min_admissible, "required admissible trials");
    sub->add_flag("--strict", cfg.strict, "turn warnings into configuration errors");
    sub->add_flag("--dump-trials", cfg.dump_trials, "also write per-trial counts");
    sub->add_flag("--use-log-scale", cfg.use_log_scale,
                  "decorrelate: ell = ceil(C log L) instead of floor(L^alpha)");
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    std::string config_path = find_config_path(argc, argv);
    if (!config_path.empty()) {
        try {
            cfg = RunConfig::from_file(config_path);
        } catch (const levelstat::ConfigError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }

    CLI::App app{"Finite-volume spectral statistics for random lattice operators"};
    app.require_subcommand(1);
    WindowStage win;
    std::string config_echo;
    for (const auto& name : levelstat::command_names())
        add_common_options(app.add_subcommand(name), cfg, win, config_echo);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (win.I.size() == 2) cfg.I = {win.I[0], win.I[1]};
    if (win.J.size() == 2) cfg.J = {win.J[0], win.J[1]};

    for (const auto& name : levelstat::command_names())
        if (app.get_subcommand(name)->parsed())
            return levelstat::execute_command(name, cfg, std::cout);
    return 2;
}
