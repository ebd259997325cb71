#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "levelstat/model.hpp"

namespace levelstat {

// Invalid configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat run configuration shared by every subcommand. Unused fields are
// ignored; each driver materializes its own defaults for ladder-like fields.
struct RunConfig {
    // model
    std::string model = "rank_one";
    int block_side = 2;
    int fiber_dim = 2;
    std::vector<std::vector<double>> fiber; // optional SPD matrix, else identity
    std::vector<std::pair<std::vector<int>, double>> profile; // alloy amplitudes

    // disorder
    std::string density = "uniform";
    double half_width = 4.0;

    // geometry and scan parameters
    int dim = 1;
    double E = 4.0;
    double Eprime = -4.0;
    std::array<double, 2> I{-2.0, 2.0};
    std::array<double, 2> J{-2.0, 2.0};
    double alpha = 0.5;   // sub-box exponent, ell = floor(L^alpha)
    bool use_log_scale = false; // decorrelate: ell = ceil(C log L) instead of L^alpha
    double beta = 3.0;    // jacobian threshold exponent
    double q = 3.0;       // multiplicity resolution exponent
    double C = 1.0;       // log scale constant, ell~ = ceil(C log L)
    double c_gap = 2.0;   // alloy spectral gap constant
    double K = 1.0;       // gradient separation constant for the jacobian threshold
    double nu = 0.0;      // localization rate for decay bound checks, 0 disables
    long L = 128;
    std::vector<int> ladder;
    int box_radius = 8;
    double h_step = 1e-5;        // finite-difference step
    double cluster_tol = 1e-6;   // eigenvalue grouping tolerance
    double min_isolation = 0.05; // below this the FD oracle is flagged unreliable
    int tensor_k = 2;

    // execution
    long trials = 1000;
    std::uint64_t seed = 1;
    int workers = 0;
    std::string out = "out";
    bool strict = false;
    bool dump_trials = false;
    double slope_tol = 0.3;      // <= 0 disables slope assertions
    long min_admissible = 0;

    ModelSpec model_spec() const;
    DisorderSpec disorder_spec() const;

    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
};

struct AssertionOutcome {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct CommandOutput {
    nlohmann::json summary;
    std::string csv;            // results.csv content, header included
    std::string trials_csv;     // optional per-trial dump
    std::vector<AssertionOutcome> assertions;

    bool pass() const;
    void require(const std::string& name, bool ok, const std::string& detail);
};

const std::vector<std::string>& command_names();

// Validates cfg for the subcommand; throws ConfigError with the violated
// condition spelled out.
void validate_config(const std::string& command, const RunConfig& cfg);

CommandOutput run_spectrum(const RunConfig& cfg);
CommandOutput run_wegner(const RunConfig& cfg);
CommandOutput run_minami(const RunConfig& cfg);
CommandOutput run_decorrelate(const RunConfig& cfg);
CommandOutput run_jacobian(const RunConfig& cfg);
CommandOutput run_independence(const RunConfig& cfg);
CommandOutput run_multiplicity(const RunConfig& cfg);
CommandOutput run_alloy_check(const RunConfig& cfg);
CommandOutput run_gradcheck(const RunConfig& cfg);
CommandOutput run_tensor_check(const RunConfig& cfg);

CommandOutput run_command(const std::string& name, const RunConfig& cfg);

// Validates, runs, writes <out>/<name>/{summary.json,results.csv} plus the
// optional trials.csv, logs one line per assertion. Returns the exit code:
// 0 all assertions passed, 1 some failed, 2 invalid configuration.
int execute_command(const std::string& name, const RunConfig& cfg, std::ostream& log);

// Shortest round-trip decimal form, identical for identical doubles.
std::string format_double(double v);

std::uint64_t config_hash(const RunConfig& cfg);

} // namespace levelstat
