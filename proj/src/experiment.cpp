#include "levelstat/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "levelstat/eigstats.hpp"
#include "levelstat/montecarlo.hpp"
#include "levelstat/pointprocess.hpp"
#include "levelstat/rng.hpp"
#include "levelstat/spectral.hpp"

namespace levelstat {

using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string cell(double v) { return format_double(v); }
std::string cell(long v) { return std::to_string(v); }
std::string cell(int v) { return std::to_string(v); }
std::string cell(const std::string& v) { return v; }

struct Csv {
    std::string text;
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) text += ',';
            text += fields[i];
        }
        text += '\n';
    }
};

json estimate_json(const ProbabilityEstimate& e) {
    return json{{"successes", e.successes},
                {"trials", e.trials},
                {"point", e.point()},
                {"wilson_lo", e.wilson_lo()},
                {"wilson_hi", e.wilson_hi()}};
}

json fit_json(const ScalingFit& f) {
    json j;
    j["used"] = f.used;
    if (f.used > 0) {
        j["slope"] = f.slope;
        j["intercept"] = f.intercept;
        j["stderr_slope"] = f.stderr_slope;
    }
    return j;
}

std::vector<int> ladder_or(const RunConfig& cfg, std::vector<int> fallback) {
    return cfg.ladder.empty() ? std::move(fallback) : cfg.ladder;
}

// Maximal run of eigenvalues around the one nearest target whose internal
// gaps stay within tol, padded a third of the outer gap on each side.
struct ClusterWindow {
    EnergyWindow w;
    long first = 0, last = 0;
    double isolation = 0;
};

ClusterWindow cluster_window(const Eigen::VectorXd& values, double target, double tol) {
    long n = values.size();
    if (n == 0) throw std::invalid_argument("cluster_window: empty spectrum");
    long j = 0;
    for (long i = 1; i < n; ++i)
        if (std::abs(values[i] - target) < std::abs(values[j] - target)) j = i;
    long first = j, last = j;
    while (first > 0 && values[first] - values[first - 1] <= tol) --first;
    while (last + 1 < n && values[last + 1] - values[last] <= tol) ++last;
    double inf = std::numeric_limits<double>::infinity();
    double gap_below = first > 0 ? values[first] - values[first - 1] : inf;
    double gap_above = last + 1 < n ? values[last + 1] - values[last] : inf;
    ClusterWindow c;
    c.w.lo = values[first] - std::min(gap_below / 3, 0.5);
    c.w.hi = values[last] + std::min(gap_above / 3, 0.5);
    c.first = first;
    c.last = last + 1;
    c.isolation = std::min(gap_below, gap_above);
    return c;
}

double rel_inf_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double scale = a.lpNorm<Eigen::Infinity>();
    if (scale <= 0) scale = 1;
    return (a - b).lpNorm<Eigen::Infinity>() / scale;
}

std::string utc_timestamp() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
}

bool is_projection_model(const ModelSpec& spec) { return spec.kind != ModelKind::Alloy; }

std::vector<std::string> config_warnings(const std::string& command, const RunConfig& cfg) {
    std::vector<std::string> out;
    if (command == "decorrelate" || command == "independence") {
        if (std::abs(cfg.E - cfg.Eprime) <= 4.0 * cfg.dim)
            out.push_back("|E - Eprime| <= 4 dim: the two windows are not spectrally "
                          "separated, decorrelation has no content at this distance");
    }
    return out;
}

} // namespace

bool CommandOutput::pass() const {
    for (const auto& a : assertions)
        if (!a.pass) return false;
    return true;
}

void CommandOutput::require(const std::string& name, bool ok, const std::string& detail) {
    assertions.push_back({name, ok, detail});
}

ModelSpec RunConfig::model_spec() const {
    std::string m = model;
    std::replace(m.begin(), m.end(), '-', '_');
    if (m == "rank_one") return ModelSpec::rank_one();
    if (m == "polymer") return ModelSpec::polymer(block_side);
    if (m == "matrix_valued") {
        if (fiber.empty()) return ModelSpec::matrix_valued(fiber_dim);
        Eigen::MatrixXd a(fiber.size(), fiber.size());
        for (std::size_t i = 0; i < fiber.size(); ++i) {
            if (fiber[i].size() != fiber.size())
                throw ConfigError("fiber matrix must be square");
            for (std::size_t j = 0; j < fiber.size(); ++j) a(i, j) = fiber[i][j];
        }
        return ModelSpec::matrix_valued(a);
    }
    if (m == "alloy") {
        SitePotential p;
        p.dim = dim;
        if (profile.empty()) {
            p.offsets.push_back(std::vector<int>(dim, 0));
            p.values.push_back(1.0);
            std::vector<int> e1(dim, 0);
            e1[0] = 1;
            p.offsets.push_back(e1);
            p.values.push_back(0.2);
        } else {
            for (const auto& [off, val] : profile) {
                if (static_cast<int>(off.size()) != dim)
                    throw ConfigError("profile offset arity must match dim");
                p.offsets.push_back(off);
                p.values.push_back(val);
            }
        }
        return ModelSpec::alloy(std::move(p));
    }
    throw ConfigError("unknown model: " + model);
}

DisorderSpec RunConfig::disorder_spec() const {
    if (density == "uniform") return DisorderSpec::uniform(half_width);
    if (density == "triangular") return DisorderSpec::triangular(half_width);
    throw ConfigError("unknown density: " + density);
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    c.model = j.value("model", c.model);
    c.block_side = j.value("block_side", c.block_side);
    c.fiber_dim = j.value("fiber_dim", c.fiber_dim);
    if (j.contains("fiber")) c.fiber = j.at("fiber").get<std::vector<std::vector<double>>>();
    if (j.contains("profile")) {
        for (const auto& term : j.at("profile")) {
            std::vector<int> off;
            if (term.at("offset").is_array())
                off = term.at("offset").get<std::vector<int>>();
            else
                off.push_back(term.at("offset").get<int>());
            c.profile.emplace_back(std::move(off), term.at("value").get<double>());
        }
    }
    c.density = j.value("density", c.density);
    c.half_width = j.value("half_width", c.half_width);
    c.dim = j.value("dim", c.dim);
    c.E = j.value("E", c.E);
    c.Eprime = j.value("Eprime", c.Eprime);
    if (j.contains("I")) {
        auto v = j.at("I").get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("I must be [lo, hi]");
        c.I = {v[0], v[1]};
    }
    if (j.contains("J")) {
        auto v = j.at("J").get<std::vector<double>>();
        if (v.size() != 2) throw ConfigError("J must be [lo, hi]");
        c.J = {v[0], v[1]};
    }
    c.alpha = j.value("alpha", c.alpha);
    c.use_log_scale = j.value("use_log_scale", c.use_log_scale);
    c.beta = j.value("beta", c.beta);
    c.q = j.value("q", c.q);
    c.C = j.value("C", c.C);
    c.c_gap = j.value("c", c.c_gap);
    c.K = j.value("K", c.K);
    c.nu = j.value("nu", c.nu);
    c.L = j.value("L", c.L);
    if (j.contains("ladder")) c.ladder = j.at("ladder").get<std::vector<int>>();
    c.box_radius = j.value("box_radius", c.box_radius);
    c.h_step = j.value("h_step", c.h_step);
    c.cluster_tol = j.value("cluster_tol", c.cluster_tol);
    c.min_isolation = j.value("min_isolation", c.min_isolation);
    c.tensor_k = j.value("tensor_k", c.tensor_k);
    c.trials = j.value("trials", c.trials);
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    c.out = j.value("out", c.out);
    c.strict = j.value("strict", c.strict);
    c.dump_trials = j.value("dump_trials", c.dump_trials);
    c.slope_tol = j.value("slope_tol", c.slope_tol);
    c.min_admissible = j.value("min_admissible", c.min_admissible);
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config file not found: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return from_json(j);
}

json RunConfig::to_json() const {
    json j;
    j["model"] = model;
    j["block_side"] = block_side;
    j["fiber_dim"] = fiber_dim;
    if (!fiber.empty()) j["fiber"] = fiber;
    if (!profile.empty()) {
        json terms = json::array();
        for (const auto& [off, val] : profile)
            terms.push_back(json{{"offset", off}, {"value", val}});
        j["profile"] = terms;
    }
    j["density"] = density;
    j["half_width"] = half_width;
    j["dim"] = dim;
    j["E"] = E;
    j["Eprime"] = Eprime;
    j["I"] = std::vector<double>{I[0], I[1]};
    j["J"] = std::vector<double>{J[0], J[1]};
    j["alpha"] = alpha;
    j["use_log_scale"] = use_log_scale;
    j["beta"] = beta;
    j["q"] = q;
    j["C"] = C;
    j["c"] = c_gap;
    j["K"] = K;
    j["nu"] = nu;
    j["L"] = L;
    j["ladder"] = ladder;
    j["box_radius"] = box_radius;
    j["h_step"] = h_step;
    j["cluster_tol"] = cluster_tol;
    j["min_isolation"] = min_isolation;
    j["tensor_k"] = tensor_k;
    j["trials"] = trials;
    j["seed"] = seed;
    j["workers"] = workers;
    j["out"] = out;
    j["strict"] = strict;
    j["dump_trials"] = dump_trials;
    j["slope_tol"] = slope_tol;
    j["min_admissible"] = min_admissible;
    return j;
}

std::uint64_t config_hash(const RunConfig& cfg) {
    std::string s = cfg.to_json().dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char b : s) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {
        "spectrum",     "wegner",       "minami",      "decorrelate", "jacobian",
        "independence", "multiplicity", "alloy-check", "gradcheck",   "tensor-check"};
    return names;
}

void validate_config(const std::string& command, const RunConfig& cfg) {
    if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
    if (cfg.dim < 1 || cfg.dim > 3) throw ConfigError("dim must be in {1, 2, 3}");
    if (cfg.half_width <= 0) throw ConfigError("half_width must be > 0");
    if (!(cfg.I[0] < cfg.I[1])) throw ConfigError("I must satisfy lo < hi");
    if (!(cfg.J[0] < cfg.J[1])) throw ConfigError("J must satisfy lo < hi");
    if (cfg.L < 2) throw ConfigError("L must be >= 2");
    if (cfg.box_radius < 0) throw ConfigError("box_radius must be >= 0");
    if (cfg.workers < 0) throw ConfigError("workers must be >= 0");
    if (cfg.h_step <= 0) throw ConfigError("h_step must be > 0");
    if (!(cfg.alpha > 0 && cfg.alpha <= 1)) throw ConfigError("alpha must be in (0, 1]");
    if (cfg.C <= 0) throw ConfigError("C must be > 0");
    for (std::size_t i = 0; i < cfg.ladder.size(); ++i) {
        if (cfg.ladder[i] < 1) throw ConfigError("ladder entries must be >= 1");
        if (i > 0 && cfg.ladder[i] <= cfg.ladder[i - 1])
            throw ConfigError("ladder must be strictly increasing");
    }
    try {
        cfg.model_spec();
        cfg.disorder_spec();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }

    double gap = std::abs(cfg.E - cfg.Eprime);
    if (command == "jacobian") {
        if (gap <= 4.0 * cfg.dim)
            throw ConfigError("jacobian requires |E - Eprime| > 4 dim");
        if (cfg.beta <= 2.5) throw ConfigError("beta must be > 5/2");
        if (cfg.K <= 0) throw ConfigError("K must be > 0");
    }
    if (command == "alloy-check") {
        if (cfg.model_spec().kind != ModelKind::Alloy)
            throw ConfigError("alloy-check requires model = alloy");
        if (gap <= 4.0 * cfg.dim)
            throw ConfigError("alloy-check requires |E - Eprime| > 4 dim");
        if (cfg.c_gap <= 0) throw ConfigError("c must be > 0");
    }
    if (command == "multiplicity" && cfg.q <= 2.0 * cfg.dim)
        throw ConfigError("q must exceed 2 dim, otherwise the cluster bound has no decay");
    if (command == "tensor-check" && (cfg.tensor_k < 1 || cfg.tensor_k > 2))
        throw ConfigError("tensor_k must be 1 or 2");
    if (cfg.strict)
        for (const auto& w : config_warnings(command, cfg)) throw ConfigError(w + " (strict)");
}

CommandOutput run_spectrum(const RunConfig& cfg) {
    ModelSpec spec = cfg.model_spec();
    ModelContext ctx(LatticeBox::from_side(cfg.dim, compatible_side(cfg.box_radius, spec)),
                     spec, cfg.disorder_spec());
    Eigen::VectorXd omega = ctx.sample(cfg.seed, 0);
    SymmetricMatrix h = ctx.hamiltonian(omega);
    Spectrum sp = eigendecompose(h, true);

    double trace_h = h.dense().trace();
    double trace_sum = sp.values.sum();
    double trace_rel = std::abs(trace_sum - trace_h) / std::max(1.0, std::abs(trace_h));
    double ortho = (sp.vectors.transpose() * sp.vectors -
                    Eigen::MatrixXd::Identity(sp.vectors.cols(), sp.vectors.cols()))
                       .cwiseAbs()
                       .maxCoeff();
    double recon = (h.dense() * sp.vectors - sp.vectors * sp.values.asDiagonal())
                       .cwiseAbs()
                       .maxCoeff();

    EnergyWindow all = EnergyWindow::absolute(sp.values.minCoeff() - 1, sp.values.maxCoeff() + 1);
    auto diags = localization_diagnostics(ctx.box, ctx.dof, sp, all, 2.0, cfg.nu);

    Csv csv;
    csv.row({"trial", "index", "value", "center", "decay_rate"});
    std::vector<double> rates;
    for (const auto& d : diags) {
        csv.row({cell(0L), cell(d.index), cell(d.value), cell(d.center), cell(d.decay_rate)});
        rates.push_back(d.decay_rate);
    }

    CommandOutput out;
    out.csv = std::move(csv.text);
    out.summary["model"] = spec.name();
    out.summary["side"] = ctx.box.side();
    out.summary["sites"] = ctx.box.sites();
    out.summary["order"] = ctx.coordinates();
    out.summary["trace"] = trace_sum;
    out.summary["trace_identity_rel_error"] = trace_rel;
    out.summary["orthonormality_error"] = ortho;
    out.summary["reconstruction_error"] = recon;
    out.summary["median_decay_rate"] = median(rates);
    out.require("trace identity", trace_rel <= 1e-8,
                "rel error " + format_double(trace_rel));
    out.require("eigenvector orthonormality", ortho <= 1e-10, format_double(ortho));
    double recon_tol = 1e-10 * std::max(1.0, h.frobenius_norm());
    out.require("eigendecomposition residual", recon <= recon_tol,
                format_double(recon) + " vs " + format_double(recon_tol));
    return out;
}

CommandOutput run_wegner(const RunConfig& cfg) {
    std::vector<int> ladder = ladder_or(cfg, {4, 8, 16, 32});
    ModelSpec spec = cfg.model_spec();
    DisorderSpec dist = cfg.disorder_spec();
    WegnerResult res =
        wegner_scan(spec, dist, cfg.dim, cfg.E, cfg.I[0], cfg.I[1],
                    static_cast<double>(cfg.L), ladder, cfg.trials, cfg.seed, cfg.workers);

    CommandOutput out;
    Csv csv;
    csv.row({"ell", "side", "trials", "successes", "p", "wilson_lo", "wilson_hi"});
    json points = json::array();
    for (const auto& p : res.points) {
        csv.row({cell(p.nominal), cell(p.side), cell(p.nonempty.trials),
                 cell(p.nonempty.successes), cell(p.nonempty.point()),
                 cell(p.nonempty.wilson_lo()), cell(p.nonempty.wilson_hi())});
        points.push_back(json{{"ell", p.nominal},
                              {"side", p.side},
                              {"nonempty", estimate_json(p.nonempty)}});
    }
    out.csv = std::move(csv.text);
    out.summary["points"] = points;
    out.summary["fit"] = fit_json(res.fit);
    out.summary["expected_slope"] = cfg.dim;

    if (cfg.dump_trials) {
        Csv t;
        t.row({"ell", "trial", "count"});
        for (int ell : ladder) {
            ModelContext ctx(LatticeBox::from_side(cfg.dim, compatible_side(ell, spec)), spec,
                             dist);
            EnergyWindow w = EnergyWindow::scaled(cfg.E, cfg.I[0], cfg.I[1],
                                                  static_cast<double>(cfg.L), cfg.dim);
            std::vector<int> counts = count_scan(ctx, w, cfg.trials, cfg.seed, cfg.workers);
            for (long i = 0; i < cfg.trials; ++i) t.row({cell(ell), cell(i), cell(counts[i])});
        }
        out.trials_csv = std::move(t.text);
    }

    out.require("scaling fit usable", res.fit.used >= 3,
                std::to_string(res.fit.used) + " usable points");
    if (cfg.slope_tol > 0 && res.fit.used >= 3)
        out.require("volume scaling exponent",
                    std::abs(res.fit.slope - cfg.dim) <= cfg.slope_tol,
                    "slope " + format_double(res.fit.slope) + " vs " +
                        std::to_string(cfg.dim) + " +- " + format_double(cfg.slope_tol));
    return out;
}

CommandOutput run_minami(const RunConfig& cfg) {
    std::vector<int> ladder = ladder_or(cfg, {4, 8, 16, 32});
    ModelSpec spec = cfg.model_spec();
    DisorderSpec dist = cfg.disorder_spec();
    MinamiResult res =
        minami_scan(spec, dist, cfg.dim, cfg.E, cfg.I[0], cfg.I[1],
                    static_cast<double>(cfg.L), ladder, cfg.trials, cfg.seed, cfg.workers);

    CommandOutput out;
    Csv csv;
    csv.row({"ell", "side", "trials", "exceed", "p", "wilson_lo", "wilson_hi", "extended_mean",
             "extended_events"});
    json points = json::array();
    for (const auto& p : res.points) {
        csv.row({cell(p.nominal), cell(p.side), cell(p.exceed.trials), cell(p.exceed.successes),
                 cell(p.exceed.point()), cell(p.exceed.wilson_lo()), cell(p.exceed.wilson_hi()),
                 cell(p.extended_mean), cell(p.extended_events)});
        points.push_back(json{{"ell", p.nominal},
                              {"side", p.side},
                              {"exceed", estimate_json(p.exceed)},
                              {"extended_mean", p.extended_mean},
                              {"extended_events", p.extended_events}});
    }
    out.csv = std::move(csv.text);
    out.summary["m"] = res.m;
    out.summary["points"] = points;
    out.summary["fit_exceed"] = fit_json(res.fit_exceed);
    out.summary["fit_extended"] = fit_json(res.fit_extended);
    out.summary["expected_slope"] = 2 * cfg.dim;

    if (cfg.dump_trials) {
        Csv t;
        t.row({"ell", "trial", "count"});
        EnergyWindow w = EnergyWindow::scaled(cfg.E, cfg.I[0], cfg.I[1],
                                              static_cast<double>(cfg.L), cfg.dim);
        for (int ell : ladder) {
            ModelContext ctx(LatticeBox::from_side(cfg.dim, compatible_side(ell, spec)), spec,
                             dist);
            std::vector<int> counts = count_scan(ctx, w, cfg.trials, cfg.seed, cfg.workers);
            for (long i = 0; i < cfg.trials; ++i) t.row({cell(ell), cell(i), cell(counts[i])});
        }
        out.trials_csv = std::move(t.text);
    }

    out.require("scaling fit usable", res.fit_exceed.used >= 3,
                std::to_string(res.fit_exceed.used) + " usable points");
    if (cfg.slope_tol > 0 && res.fit_exceed.used >= 3)
        out.require("pair scaling exponent",
                    std::abs(res.fit_exceed.slope - 2.0 * cfg.dim) <= cfg.slope_tol,
                    "slope " + format_double(res.fit_exceed.slope) + " vs " +
                        std::to_string(2 * cfg.dim) + " +- " + format_double(cfg.slope_tol));
    return out;
}

CommandOutput run_decorrelate(const RunConfig& cfg) {
    std::vector<int> ladder = ladder_or(cfg, {32, 64, 128, 256});
    ModelSpec spec = cfg.model_spec();
    DisorderSpec dist = cfg.disorder_spec();
    DecorrResult res = decorrelation_scan(spec, dist, cfg.dim, cfg.E, cfg.Eprime, cfg.I[0],
                                          cfg.I[1], cfg.J[0], cfg.J[1], cfg.alpha,
                                          cfg.use_log_scale ? cfg.C : 0.0, ladder, cfg.trials,
                                          cfg.seed, cfg.workers);

    CommandOutput out;
    Csv csv;
    csv.row({"L", "ell", "side", "trials", "joint", "joint_lo", "joint_hi", "first", "second",
             "product", "diff", "diff_se", "ratio"});
    json points = json::array();
    bool axioms = true;
    for (const auto& p : res.points) {
        csv.row({cell(p.L), cell(p.ell), cell(p.side), cell(p.trials), cell(p.joint.point()),
                 cell(p.joint.wilson_lo()), cell(p.joint.wilson_hi()), cell(p.first.point()),
                 cell(p.second.point()), cell(p.product), cell(p.diff), cell(p.diff_se),
                 cell(p.ratio)});
        points.push_back(json{{"L", p.L},
                              {"ell", p.ell},
                              {"side", p.side},
                              {"joint", estimate_json(p.joint)},
                              {"first", estimate_json(p.first)},
                              {"second", estimate_json(p.second)},
                              {"product", p.product},
                              {"diff", p.diff},
                              {"diff_se", p.diff_se},
                              {"ratio", p.ratio}});
        axioms = axioms && p.joint.successes <= p.first.successes &&
                 p.joint.successes <= p.second.successes;
    }
    out.csv = std::move(csv.text);
    out.summary["points"] = points;
    out.summary["joint_fit"] = fit_json(res.joint_fit);

    if (cfg.dump_trials) {
        Csv t;
        t.row({"L", "trial", "count_first", "count_second"});
        for (int L : ladder) {
            int ell = cfg.use_log_scale
                          ? log_scale_length(cfg.C, L)
                          : std::max(1, static_cast<int>(std::floor(std::pow(L, cfg.alpha))));
            ModelContext ctx(LatticeBox::from_side(cfg.dim, compatible_side(ell, spec)), spec,
                             dist);
            EnergyWindow wa = EnergyWindow::scaled(cfg.E, cfg.I[0], cfg.I[1], L, cfg.dim);
            EnergyWindow wb = EnergyWindow::scaled(cfg.Eprime, cfg.J[0], cfg.J[1], L, cfg.dim);
            auto counts = pair_count_scan(ctx, wa, wb, cfg.trials, cfg.seed, cfg.workers);
            for (long i = 0; i < cfg.trials; ++i)
                t.row({cell(L), cell(i), cell(counts[i].first), cell(counts[i].second)});
        }
        out.trials_csv = std::move(t.text);
    }

    out.require("joint within marginals", axioms, "P{both} <= min marginal at every point");
    return out;
}

CommandOutput run_jacobian(const RunConfig& cfg) {
    ModelSpec spec = cfg.model_spec();
    DisorderSpec dist = cfg.disorder_spec();
    double K = cfg.K;
    json alloy_info;
    if (spec.kind == ModelKind::Alloy) {
        AlloyParams ap = alloy_parameters(spec.profile, cfg.c_gap, cfg.half_width);
        if (ap.constraint_ok) K = ap.K;
        alloy_info = json{{"a0", ap.a0},           {"delta", ap.delta},
                          {"mass", ap.mass},       {"constraint", ap.constraint},
                          {"K", ap.K},             {"constraint_ok", ap.constraint_ok},
                          {"min_abs_fourier", ap.min_abs_fourier}};
    }
    JacobianScanResult res = jacobian_event_scan(spec, dist, cfg.dim, cfg.E, cfg.Eprime,
                                                 cfg.I[0], cfg.I[1], cfg.J[0], cfg.J[1], cfg.L,
                                                 K, cfg.beta, cfg.C, cfg.trials, cfg.seed,
                                                 cfg.workers);

    CommandOutput out;
    Csv csv;
    csv.row({"trial", "max_jacobian", "l1_diff", "trace_gap", "event"});
    for (std::size_t i = 0; i < res.trial_ids.size(); ++i)
        csv.row({cell(res.trial_ids[i]), cell(res.max_jacobians[i]), cell(res.l1_diffs[i]),
                 cell(res.trace_gaps[i]),
                 cell(res.max_jacobians[i] >= res.lambda ? 1L : 0L)});
    out.csv = std::move(csv.text);

    out.summary["lambda"] = res.lambda;
    out.summary["ell"] = res.ell;
    out.summary["side"] = res.side;
    out.summary["K"] = K;
    out.summary["trials"] = res.trials;
    out.summary["qualifying"] = res.qualifying;
    out.summary["excluded"] = res.excluded;
    out.summary["admissible"] = res.admissible;
    out.summary["klopp_violations"] = res.klopp_violations;
    out.summary["separation_failures"] = res.separation_failures;
    out.summary["event"] = estimate_json(res.event);
    if (!res.max_jacobians.empty()) {
        out.summary["max_jacobian_quantiles"] =
            json{{"min", quantile(res.max_jacobians, 0.0)},
                 {"p50", quantile(res.max_jacobians, 0.5)},
                 {"p90", quantile(res.max_jacobians, 0.9)}};
        out.summary["l1_diff_quantiles"] = json{{"min", quantile(res.l1_diffs, 0.0)},
                                                {"p50", quantile(res.l1_diffs, 0.5)}};
    }
    if (!alloy_info.is_null()) out.summary["alloy"] = alloy_info;

    out.require("qualifying trials exist", res.event.trials >= 1,
                std::to_string(res.event.trials) + " evaluated trials");
    out.require("determinant lower bound", res.klopp_violations == 0,
                std::to_string(res.klopp_violations) + " violations");
    out.require("gradient separation bounds", res.separation_failures == 0,
                std::to_string(res.separation_failures) + " failures on " +
                    std::to_string(res.admissible) + " admissible trials");
    return out;
}

CommandOutput run_independence(const RunConfig& cfg) {
    std::vector<int> ladder = ladder_or(cfg, {32, 64, 128, 256});
    ModelSpec spec = cfg.model_spec();
    IndependenceResult res =
        independence_scan(spec, cfg.disorder_spec(), cfg.dim, cfg.E, cfg.Eprime, cfg.I[0],
                          cfg.I[1], cfg.J[0], cfg.J[1], cfg.alpha, ladder, cfg.trials, cfg.seed,
                          cfg.workers);

    CommandOutput out;
    Csv csv;
    csv.row({"L", "ell", "sub_side", "boxes", "trials", "joint", "joint_lo", "joint_hi",
             "product", "double_sum", "error_sum", "error_se", "pearson", "max_offdiag_z",
             "mean_zeta_first", "mean_zeta_second", "max_eta", "frac_eta_above", "tv_poisson",
             "fm2", "fm3"});
    json points = json::array();
    bool cov_ok = true;
    for (const auto& p : res.points) {
        csv.row({cell(p.L), cell(p.ell), cell(p.sub_side), cell(p.boxes), cell(p.trials),
                 cell(p.joint.point()), cell(p.joint.wilson_lo()), cell(p.joint.wilson_hi()),
                 cell(p.product), cell(p.double_sum), cell(p.e_sum), cell(p.e_se),
                 cell(p.pearson), cell(p.max_offdiag_z), cell(p.mean_zeta_first),
                 cell(p.mean_zeta_second), cell(p.max_eta), cell(p.frac_eta_above),
                 cell(p.zeta_first_diag.tv_poisson), cell(p.zeta_first_diag.fm2),
                 cell(p.zeta_first_diag.fm3)});
        points.push_back(json{{"L", p.L},
                              {"ell", p.ell},
                              {"sub_side", p.sub_side},
                              {"boxes", p.boxes},
                              {"joint", estimate_json(p.joint)},
                              {"product", p.product},
                              {"double_sum", p.double_sum},
                              {"error_sum", p.e_sum},
                              {"error_se", p.e_se},
                              {"pearson", p.pearson},
                              {"max_offdiag_z", p.max_offdiag_z},
                              {"mean_zeta_first", p.mean_zeta_first},
                              {"mean_zeta_second", p.mean_zeta_second},
                              {"max_eta", p.max_eta},
                              {"frac_eta_above", p.frac_eta_above},
                              {"tv_poisson", p.zeta_first_diag.tv_poisson},
                              {"fm2", p.zeta_first_diag.fm2},
                              {"fm3", p.zeta_first_diag.fm3}});
        cov_ok = cov_ok && p.max_offdiag_z <= 3.0;
    }
    out.csv = std::move(csv.text);
    out.summary["points"] = points;

    out.require("cross-box covariance consistent with zero", cov_ok, "max |z| <= 3");
    if (std::abs(cfg.E - cfg.Eprime) > 4.0 * cfg.dim && res.points.size() >= 2) {
        bool decreasing = true;
        for (std::size_t i = 1; i < res.points.size(); ++i)
            decreasing =
                decreasing && std::abs(res.points[i].e_sum) < std::abs(res.points[i - 1].e_sum);
        std::string seq;
        for (const auto& p : res.points) {
            if (!seq.empty()) seq += ", ";
            seq += format_double(std::abs(p.e_sum));
        }
        out.require("diagonal error decreasing", decreasing, "|error_sum|: " + seq);
    }
    return out;
}

CommandOutput run_multiplicity(const RunConfig& cfg) {
    std::vector<int> ladder = ladder_or(cfg, {16, 32, 64, 128});
    MultiplicityResult res =
        multiplicity_scan(cfg.model_spec(), cfg.disorder_spec(), cfg.dim, cfg.I[0], cfg.I[1],
                          cfg.q, ladder, cfg.trials, cfg.seed, cfg.workers);

    CommandOutput out;
    Csv csv;
    csv.row({"L", "side", "resolution", "trials", "exceed", "p", "wilson_lo", "wilson_hi",
             "max_cluster"});
    json points = json::array();
    for (const auto& p : res.points) {
        csv.row({cell(p.L), cell(p.side), cell(p.resolution), cell(p.exceed.trials),
                 cell(p.exceed.successes), cell(p.exceed.point()), cell(p.exceed.wilson_lo()),
                 cell(p.exceed.wilson_hi()), cell(p.max_cluster_seen)});
        points.push_back(json{{"L", p.L},
                              {"side", p.side},
                              {"resolution", p.resolution},
                              {"exceed", estimate_json(p.exceed)},
                              {"max_cluster", p.max_cluster_seen}});
    }
    out.csv = std::move(csv.text);
    out.summary["m"] = res.m;
    out.summary["q"] = res.q;
    out.summary["points"] = points;

    bool monotone = true;
    for (std::size_t i = 1; i < res.points.size(); ++i)
        monotone =
            monotone && res.points[i].exceed.point() <= res.points[i - 1].exceed.point();
    std::string seq;
    for (const auto& p : res.points) {
        if (!seq.empty()) seq += ", ";
        seq += format_double(p.exceed.point());
    }
    out.require("cluster frequency non-increasing", monotone, seq);
    return out;
}

CommandOutput run_alloy_check(const RunConfig& cfg) {
    ModelSpec spec = cfg.model_spec();
    DisorderSpec dist = cfg.disorder_spec();
    AlloyParams params = alloy_parameters(spec.profile, cfg.c_gap, cfg.half_width);

    ModelContext ctx(LatticeBox::from_side(cfg.dim, compatible_side(cfg.box_radius, spec)),
                     spec, dist);
    EnergyWindow wa = EnergyWindow::scaled(cfg.E, cfg.I[0], cfg.I[1],
                                           static_cast<double>(cfg.L), cfg.dim);
    EnergyWindow wb = EnergyWindow::scaled(cfg.Eprime, cfg.J[0], cfg.J[1],
                                           static_cast<double>(cfg.L), cfg.dim);
    double iso_threshold =
        std::pow(static_cast<double>(cfg.L) * std::log(static_cast<double>(cfg.L)), -cfg.dim);
    double norm_lo = params.a0 * (1 - params.delta) - 1e-9;
    double norm_hi = params.a0 * (1 + params.delta) + 1e-9;

    struct Rec {
        unsigned char admissible = 0, a_ok = 1, b_ok = 1, c_ok = 1;
        double e1 = 0, e2 = 0, norm1 = 0, norm2 = 0, l1_diff = 0, l1_sum = 0, iso = 0;
    };
    std::vector<Rec> recs = run_trials<Rec>(cfg.trials, cfg.workers, [&](long t) {
        Rec r;
        Eigen::VectorXd omega = ctx.sample(cfg.seed, t);
        SymmetricMatrix h = ctx.hamiltonian(omega);
        Spectrum quick = eigendecompose(h, false);
        if (count_in_window(quick.values, wa) != 1 || count_in_window(quick.values, wb) != 1)
            return r;
        auto neighbor_gap = [&](const EnergyWindow& w) {
            auto [first, last] = window_range(quick.values, w);
            double gap = std::numeric_limits<double>::infinity();
            if (first > 0) gap = std::min(gap, quick.values[first] - quick.values[first - 1]);
            if (last < quick.values.size())
                gap = std::min(gap, quick.values[last] - quick.values[last - 1]);
            return gap;
        };
        r.iso = std::min(neighbor_gap(wa), neighbor_gap(wb));
        if (r.iso <= iso_threshold) return r;
        r.admissible = 1;
        Spectrum sp = eigendecompose(h, true);
        TraceStats a = window_trace_stats(ctx, sp, wa);
        TraceStats b = window_trace_stats(ctx, sp, wb);
        r.e1 = a.value;
        r.e2 = b.value;
        r.norm1 = a.grad.lpNorm<1>();
        r.norm2 = b.grad.lpNorm<1>();
        r.a_ok = r.norm1 >= norm_lo && r.norm1 <= norm_hi && r.norm2 >= norm_lo &&
                         r.norm2 <= norm_hi
                     ? 1
                     : 0;
        Eigen::VectorXd u = a.grad / r.norm1, v = b.grad / r.norm2;
        r.l1_diff = (u - v).lpNorm<1>();
        r.l1_sum = (u + v).lpNorm<1>();
        r.b_ok = r.l1_diff >= params.K - 1e-9 ? 1 : 0;
        r.c_ok = r.l1_sum >= 2.0 - 1e-9 ? 1 : 0;
        return r;
    });

    Csv csv;
    csv.row({"trial", "value_first", "value_second", "grad_norm_first", "grad_norm_second",
             "l1_diff", "l1_sum", "isolation"});
    long admissible = 0, va = 0, vb = 0, vc = 0;
    double min_diff = std::numeric_limits<double>::infinity();
    double min_sum = std::numeric_limits<double>::infinity();
    for (long t = 0; t < cfg.trials; ++t) {
        const Rec& r = recs[static_cast<std::size_t>(t)];
        if (!r.admissible) continue;
        ++admissible;
        va += r.a_ok ? 0 : 1;
        vb += r.b_ok ? 0 : 1;
        vc += r.c_ok ? 0 : 1;
        min_diff = std::min(min_diff, r.l1_diff);
        min_sum = std::min(min_sum, r.l1_sum);
        csv.row({cell(t), cell(r.e1), cell(r.e2), cell(r.norm1), cell(r.norm2), cell(r.l1_diff),
                 cell(r.l1_sum), cell(r.iso)});
    }

    CommandOutput out;
    out.csv = std::move(csv.text);
    out.summary["a0"] = params.a0;
    out.summary["delta"] = params.delta;
    out.summary["mass"] = params.mass;
    out.summary["constraint"] = params.constraint;
    out.summary["K"] = params.K;
    out.summary["min_abs_fourier"] = params.min_abs_fourier;
    out.summary["constraint_ok"] = params.constraint_ok;
    out.summary["isolation_threshold"] = iso_threshold;
    out.summary["norm_bounds"] = std::vector<double>{norm_lo, norm_hi};
    out.summary["trials"] = cfg.trials;
    out.summary["admissible"] = admissible;
    out.summary["violations_norm"] = va;
    out.summary["violations_separation"] = vb;
    out.summary["violations_sum"] = vc;
    if (admissible > 0) {
        out.summary["min_l1_diff"] = min_diff;
        out.summary["min_l1_sum"] = min_sum;
    }

    out.require("profile constraint positive", params.constraint_ok,
                "constraint " + format_double(params.constraint));
    out.require("admissible trials found", admissible >= std::max(1L, cfg.min_admissible),
                std::to_string(admissible) + " of " + std::to_string(cfg.trials));
    out.require("gradient norm within profile bounds", va == 0, std::to_string(va) + " violations");
    out.require("normalized gradient separation >= K", vb == 0,
                std::to_string(vb) + " violations, min " +
                    (admissible ? format_double(min_diff) : "n/a") + " vs K " +
                    format_double(params.K));
    out.require("normalized gradient sums >= 2", vc == 0,
                std::to_string(vc) + " violations");
    return out;
}

CommandOutput run_gradcheck(const RunConfig& cfg) {
    ModelSpec spec = cfg.model_spec();
    ModelContext ctx(LatticeBox::from_side(cfg.dim, compatible_side(cfg.box_radius, spec)),
                     spec, cfg.disorder_spec());
    bool projection = is_projection_model(spec);

    struct Row {
        long k1 = 0, k2 = 0;
        double t1 = 0, t2 = 0, grad_l1 = 0, grad_min = 0, fd_rel = 0, ident = 0, jac = 0,
               iso = 0;
        unsigned char flagged = 0, pair_skipped = 0;
    };
    std::vector<Row> rows = run_trials<Row>(cfg.trials, cfg.workers, [&](long t) {
        Row r;
        Eigen::VectorXd omega = ctx.sample(cfg.seed, t);
        SymmetricMatrix h = ctx.hamiltonian(omega);
        Spectrum sp = eigendecompose(h, true);

        ClusterWindow ca = cluster_window(sp.values, cfg.E, cfg.cluster_tol);
        TraceStats a = window_trace_stats(ctx, sp, ca.w);
        FdGradient fd = fd_trace_gradient(ctx, omega, ca.w, cfg.h_step);
        r.k1 = a.k;
        r.t1 = a.value;
        r.grad_l1 = a.grad.lpNorm<1>();
        r.grad_min = a.grad.minCoeff();
        r.fd_rel = rel_inf_error(a.grad, fd.grad);
        r.iso = ca.isolation;
        r.flagged = ca.isolation < cfg.min_isolation || fd.count_changed ? 1 : 0;

        ClusterWindow cb = cluster_window(sp.values, cfg.Eprime, cfg.cluster_tol);
        if (cb.first == ca.first && cb.last == ca.last) {
            r.pair_skipped = 1;
            return r;
        }
        TraceStats b = window_trace_stats(ctx, sp, cb.w);
        r.k2 = b.k;
        r.t2 = b.value;
        DirectionalIdentity ident = directional_identity(ctx, omega, sp, ca.w, cb.w);
        r.ident = ident.residual;
        Eigen::VectorXd u = a.grad / std::max(r.grad_l1, 1e-300);
        Eigen::VectorXd v = b.grad / std::max(b.grad.lpNorm<1>(), 1e-300);
        r.jac = max_abs_jacobian(u, v).value;
        return r;
    });

    Csv csv;
    csv.row({"trial", "k1", "k2", "t_first", "t_second", "grad_l1", "grad_min", "fd_rel_err",
             "identity_residual", "max_jacobian", "isolation", "flagged", "pair_skipped"});
    long flagged = 0, paired = 0;
    double max_rel = 0, max_ident = 0, min_comp = std::numeric_limits<double>::infinity();
    double max_l1_dev = 0;
    for (long t = 0; t < cfg.trials; ++t) {
        const Row& r = rows[static_cast<std::size_t>(t)];
        csv.row({cell(t), cell(r.k1), cell(r.k2), cell(r.t1), cell(r.t2), cell(r.grad_l1),
                 cell(r.grad_min), cell(r.fd_rel), cell(r.ident), cell(r.jac), cell(r.iso),
                 cell(static_cast<long>(r.flagged)), cell(static_cast<long>(r.pair_skipped))});
        flagged += r.flagged;
        if (!r.flagged) max_rel = std::max(max_rel, r.fd_rel);
        if (!r.pair_skipped) {
            ++paired;
            max_ident = std::max(max_ident, r.ident);
        }
        min_comp = std::min(min_comp, r.grad_min);
        max_l1_dev = std::max(max_l1_dev, std::abs(r.grad_l1 - 1.0));
    }

    CommandOutput out;
    out.csv = std::move(csv.text);
    out.summary["model"] = spec.name();
    out.summary["side"] = ctx.box.side();
    out.summary["trials"] = cfg.trials;
    out.summary["flagged"] = flagged;
    out.summary["paired"] = paired;
    out.summary["max_fd_rel_error"] = max_rel;
    out.summary["max_identity_residual"] = max_ident;
    out.summary["min_grad_component"] = min_comp;
    out.summary["max_grad_l1_deviation"] = max_l1_dev;

    out.require("unflagged trials exist", flagged < cfg.trials,
                std::to_string(cfg.trials - flagged) + " of " + std::to_string(cfg.trials));
    out.require("finite differences confirm the gradient", max_rel <= 1e-6,
                "max rel error " + format_double(max_rel));
    if (paired > 0)
        out.require("directional identity", max_ident <= 1e-8,
                    "max residual " + format_double(max_ident));
    if (projection) {
        out.require("gradient components nonnegative", min_comp >= -1e-12,
                    "min " + format_double(min_comp));
        out.require("gradient l1 norm is 1", max_l1_dev <= 1e-8,
                    "max deviation " + format_double(max_l1_dev));
    }
    return out;
}

CommandOutput run_tensor_check(const RunConfig& cfg) {
    DisorderSpec dist = cfg.disorder_spec();
    struct Geometry {
        std::string name;
        ModelContext ctx;
    };
    std::vector<Geometry> geoms;
    for (int side = 2; side <= 4; ++side)
        geoms.push_back({"rank_one_side" + std::to_string(side),
                         ModelContext(LatticeBox::from_side(1, side), ModelSpec::rank_one(),
                                      dist)});
    geoms.push_back({"matrix_valued_side2",
                     ModelContext(LatticeBox::from_side(1, 2), ModelSpec::matrix_valued(2),
                                  dist)});

    Csv csv;
    csv.row({"rep", "model", "order", "k", "residual"});
    double max_res = 0;
    for (long rep = 0; rep < cfg.trials; ++rep) {
        RngStream pick(cfg.seed ^ 0x9e3779b97f4a7c15ULL, rep);
        const Geometry& g = geoms[static_cast<std::size_t>(pick.u01() * geoms.size()) %
                                  geoms.size()];
        int k = cfg.tensor_k == 1 ? 1 : (pick.u01() < 0.5 ? 1 : 2);
        Eigen::VectorXd omega = g.ctx.sample(cfg.seed, rep);
        SymmetricMatrix h = g.ctx.hamiltonian(omega);
        Spectrum sp = eigendecompose(h, true);
        long n = sp.values.size();
        std::vector<long> indices;
        for (int s = 0; s < k; ++s)
            indices.push_back(std::min<long>(n - 1, static_cast<long>(pick.u01() * n)));
        double res = tensor_product_residual(h.dense(), sp.vectors, sp.values, indices);
        max_res = std::max(max_res, res);
        csv.row({cell(rep), g.name, cell(n), cell(static_cast<long>(k)), cell(res)});
    }

    CommandOutput out;
    out.csv = std::move(csv.text);
    out.summary["reps"] = cfg.trials;
    out.summary["max_residual"] = max_res;
    out.require("product states are eigenstates", max_res <= 1e-10,
                "max residual " + format_double(max_res));
    return out;
}

CommandOutput run_command(const std::string& name, const RunConfig& cfg) {
    RunConfig c = cfg;
    c.workers = resolve_workers(c.workers);
    if (name == "spectrum") return run_spectrum(c);
    if (name == "wegner") return run_wegner(c);
    if (name == "minami") return run_minami(c);
    if (name == "decorrelate") return run_decorrelate(c);
    if (name == "jacobian") return run_jacobian(c);
    if (name == "independence") return run_independence(c);
    if (name == "multiplicity") return run_multiplicity(c);
    if (name == "alloy-check") return run_alloy_check(c);
    if (name == "gradcheck") return run_gradcheck(c);
    if (name == "tensor-check") return run_tensor_check(c);
    throw ConfigError("unknown subcommand: " + name);
}

int execute_command(const std::string& name, const RunConfig& cfg, std::ostream& log) {
    try {
        validate_config(name, cfg);
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    }
    for (const auto& w : config_warnings(name, cfg)) log << "warning: " << w << "\n";

    CommandOutput out;
    try {
        out = run_command(name, cfg);
    } catch (const ConfigError& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    }

    std::filesystem::path dir = std::filesystem::path(cfg.out) / name;
    std::filesystem::create_directories(dir);
    json summary = std::move(out.summary);
    summary["command"] = name;
    summary["config"] = cfg.to_json();
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    summary["config_hash"] = hash;
    summary["generated_at"] = utc_timestamp();
    json asserts = json::array();
    for (const auto& a : out.assertions)
        asserts.push_back(json{{"name", a.name}, {"pass", a.pass}, {"detail", a.detail}});
    summary["assertions"] = asserts;
    summary["pass"] = out.pass();
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    write_file(dir / "results.csv", out.csv);
    if (!out.trials_csv.empty()) write_file(dir / "trials.csv", out.trials_csv);

    for (const auto& a : out.assertions)
        log << name << ": " << (a.pass ? "pass" : "FAIL") << ": " << a.name << " (" << a.detail
            << ")\n";
    log << name << ": wrote " << (dir / "summary.json").string() << "\n";
    return out.pass() ? 0 : 1;
}

} // namespace levelstat
