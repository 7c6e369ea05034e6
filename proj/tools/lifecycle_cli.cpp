#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <cmath>
#include <memory>

#include "lifecycle/config_io.hpp"
#include "lifecycle/errors.hpp"
#include "lifecycle/policy.hpp"
#include "lifecycle/simulate.hpp"
#include "lifecycle/validate.hpp"
#include "lifecycle/weights.hpp"

namespace fs = std::filesystem;
using namespace lifecycle;

namespace {

enum Exit { kOk = 0, kConfig = 1, kSolver = 2, kAdmissibility = 3, kOracle = 4 };

constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct Global {
    std::string config;
    std::uint64_t seed = 1;
    std::string out = "out";
    unsigned threads = 1;
};

struct Run {
    LoadedConfig cfg;
    RunManifest manifest;
};

Run start(const Global& g, const std::string& sub) {
    Run r{load_config(g.config), {}};
    r.manifest.config_path = g.config;
    r.manifest.config_hash = r.cfg.hash;
    r.manifest.subcommand = sub;
    r.manifest.seed = g.seed;
    r.manifest.tool_version = kToolVersion;
    fs::create_directories(g.out);
    return r;
}

std::ofstream open_out(const Global& g, Run& r, const std::string& name) {
    const fs::path p = fs::path(g.out) / name;
    r.manifest.outputs.push_back(p.string());
    std::ofstream os(p);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

double pick_dt(const LoadedConfig& cfg, double flag) {
    if (flag > 0.0) return flag;
    if (cfg.dt) return *cfg.dt;
    return 1.0 / 50.0;
}

std::shared_ptr<const WeightTable> solve_dense(const ModelConfig& cfg, double dt, Run& run) {
    const auto& inc = cfg.income();
    const AlignedGrids grids = make_aligned_grids(inc.tau_R, inc.d, dt);
    run.manifest.n_t = grids.time.n_t;
    run.manifest.n_z = grids.lag.n_z;
    SolverOptions so;
    so.storage = HStorage::dense;
    return std::make_shared<const WeightTable>(solve_weights(cfg, grids, so));
}

HistoryBuffer history_from(const std::string& arg, const LagGrid& lag, double y0) {
    if (arg.empty()) return HistoryBuffer(lag, y0);
    if (fs::exists(arg)) {
        auto v = read_history_csv(arg);
        if (v.size() != lag.size()) {
            std::ostringstream os;
            os << "history CSV has " << v.size() << " values, lag grid needs " << lag.size();
            throw GridMismatch(os.str());
        }
        return HistoryBuffer(lag, std::move(v));
    }
    try {
        return HistoryBuffer(lag, std::stod(arg));
    } catch (const std::invalid_argument&) {
        throw ConfigError("--hist must be a number or an existing CSV file: " + arg);
    }
}

// weights ---------------------------------------------------------------
struct WeightsArgs {
    std::size_t nt = 0, nz = 0;
    double tol = 1e-10;
    int max_iter = 10'000;
    std::size_t h_stride = 1;
};

int cmd_weights(const Global& g, const WeightsArgs& a) {
    Run run = start(g, "weights");
    const auto& inc = run.cfg.model.income();
    std::size_t nt = a.nt;
    if (nt == 0) nt = static_cast<std::size_t>(std::llround(inc.tau_R / pick_dt(run.cfg, 0.0)));
    const double dt = inc.tau_R / static_cast<double>(nt);
    const AlignedGrids grids = make_aligned_grids(inc.tau_R, inc.d, dt);
    if (a.nz != 0 && a.nz != grids.lag.n_z) {
        std::ostringstream os;
        os << "--nz " << a.nz << " does not match dt = tau_R / nt (needs " << grids.lag.n_z << ")";
        throw GridMismatch(os.str());
    }
    run.manifest.n_t = grids.time.n_t;
    run.manifest.n_z = grids.lag.n_z;
    SolverOptions so;
    so.tol = a.tol;
    so.max_iter = a.max_iter;
    const WeightTable tbl = solve_weights(run.cfg.model, grids, so);
    const ResidualReport res = residual_check(tbl);

    auto wcsv = open_out(g, run, "weights.csv");
    auto hcsv = open_out(g, run, "h.csv");
    auto rtxt = open_out(g, run, "residuals.txt");
    const auto comment = run.manifest.comment_lines();
    write_weights_csv(wcsv, tbl, comment);
    write_h_csv(hcsv, tbl, comment, a.h_stride);
    for (const auto& c : comment) rtxt << "# " << c << '\n';
    rtxt << res.to_text();

    std::cout << std::setprecision(6) << "n_t = " << grids.time.n_t << ", n_z = " << grids.lag.n_z << '\n'
              << "iterations = " << tbl.info().iterations << (tbl.info().windowed ? " (windowed)" : "") << '\n'
              << "final defect = " << tbl.info().defect << '\n'
              << res.to_text();
    return kOk;
}

// policy ----------------------------------------------------------------
struct PolicyArgs {
    double t = 0.0, w = 1.0, y = 1.0, dt = 0.0;
    std::string hist;
};

int cmd_policy(const Global& g, const PolicyArgs& a) {
    Run run = start(g, "policy");
    auto tbl = solve_dense(run.cfg.model, pick_dt(run.cfg, a.dt), run);
    const FeedbackPolicy policy(tbl);
    StateSnapshot s{a.t, a.w, a.y, history_from(a.hist, tbl->lag_grid(), a.y)};
    const double gamma_tw = policy.total_wealth(s);
    const ControlTriple u = policy.feedback_controls(s);
    const ExtendedValue v = policy.value_function(s);
    std::cout << std::setprecision(10) << "Gamma = " << gamma_tw << '\n'
              << "c = " << u.c << '\n'
              << "B = " << u.B << '\n';
    for (Eigen::Index i = 0; i < u.theta.size(); ++i) std::cout << "theta_" << i + 1 << " = " << u.theta[i] << '\n';
    if (v.is_minus_infinity()) std::cout << "V = -inf\n";
    else std::cout << "V = " << v.value() << '\n';
    return kOk;
}

// simulate --------------------------------------------------------------
struct SimArgs {
    double w0 = kUnset, y0 = kUnset, dt = 0.0, horizon = -1.0;
    std::size_t paths = 1000, keep = 10, stride = 1;
    bool antithetic = false;
    std::string hist;
};

int cmd_simulate(const Global& g, const SimArgs& a) {
    Run run = start(g, "simulate");
    const double dt = pick_dt(run.cfg, a.dt);
    auto tbl = solve_dense(run.cfg.model, dt, run);
    const FeedbackPolicy policy(tbl);
    const double w0 = std::isnan(a.w0) ? run.cfg.w0 : a.w0;
    const double y0 = std::isnan(a.y0) ? run.cfg.y0 : a.y0;
    const StateSnapshot s{0.0, w0, y0, history_from(a.hist, tbl->lag_grid(), y0)};
    PathConfig pc;
    pc.dt = dt;
    pc.horizon = a.horizon > 0.0 ? a.horizon : run.cfg.model.income().tau_R;
    pc.n_paths = a.paths;
    pc.seed = g.seed;
    pc.antithetic = a.antithetic;
    pc.threads = g.threads;
    LifecycleOptions opts;
    opts.keep_paths = a.keep;
    opts.keep_stride = a.stride;
    opts.objective = pc.horizon <= run.cfg.model.income().tau_R;
    const SimOutput out = simulate_lifecycle(policy, s, pc, opts);

    auto sum = open_out(g, run, "summary.txt");
    auto paths = open_out(g, run, "paths.csv");
    const auto comment = run.manifest.comment_lines();
    write_summary(sum, out, comment);
    write_paths_csv(paths, out, static_cast<std::size_t>(run.cfg.model.market().n()), comment);
    write_summary(std::cout, out);
    return kOk;
}

// profile ---------------------------------------------------------------
struct ProfileArgs {
    double w0 = kUnset, y0 = kUnset, dt = 0.0;
    std::size_t paths = 10'000, stride = 0;
    bool compare_phi0 = false;
    std::string hist;
};

SimOutput profile_run(const FeedbackPolicy& policy, const StateSnapshot& s, const PathConfig& pc, std::size_t stride) {
    LifecycleOptions opts;
    opts.record_stride = stride;
    return simulate_lifecycle(policy, s, pc, opts);
}

int cmd_profile(const Global& g, const ProfileArgs& a) {
    Run run = start(g, "profile");
    const double dt = pick_dt(run.cfg, a.dt);
    auto tbl = solve_dense(run.cfg.model, dt, run);
    const double w0 = std::isnan(a.w0) ? run.cfg.w0 : a.w0;
    const double y0 = std::isnan(a.y0) ? run.cfg.y0 : a.y0;
    const StateSnapshot s{0.0, w0, y0, history_from(a.hist, tbl->lag_grid(), y0)};
    PathConfig pc;
    pc.dt = dt;
    pc.horizon = run.cfg.model.income().tau_R;
    pc.n_paths = a.paths;
    pc.seed = g.seed;
    pc.threads = g.threads;
    const std::size_t stride = a.stride ? a.stride : std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.25 / dt)));
    const SimOutput out = profile_run(FeedbackPolicy(tbl), s, pc, stride);
    SimOutput base;
    if (a.compare_phi0) {
        auto tbl0 = solve_dense(run.cfg.model.with_kernel(DelayKernel::zero()), dt, run);
        base = profile_run(FeedbackPolicy(tbl0), s, pc, stride);
    }

    const std::size_t n = static_cast<std::size_t>(run.cfg.model.market().n());
    auto csv = open_out(g, run, "profile.csv");
    for (const auto& c : run.manifest.comment_lines()) csv << "# " << c << '\n';
    const std::vector<std::string> cols = [&] {
        std::vector<std::string> c;
        for (std::size_t i = 1; i <= n; ++i) c.push_back("theta_" + std::to_string(i));
        for (std::size_t i = 1; i <= n; ++i) c.push_back("theta_share_" + std::to_string(i));
        for (const char* k : {"c", "B", "Gamma", "y"}) c.push_back(k);
        return c;
    }();
    csv << "t";
    for (const auto& c : cols) csv << ',' << c;
    if (a.compare_phi0)
        for (const auto& c : cols) csv << ',' << c << "_phi0";
    csv << '\n' << std::setprecision(10);
    for (std::size_t k = 0; k < out.times.size(); ++k) {
        csv << out.times[k];
        for (const auto& c : cols) csv << ',' << out.mean_series(c)[k];
        if (a.compare_phi0)
            for (const auto& c : cols) csv << ',' << base.mean_series(c)[k];
        csv << '\n';
    }
    std::cout << "wrote " << (fs::path(g.out) / "profile.csv").string() << " (" << out.times.size() << " rows, "
              << a.paths << " paths)\n";
    return kOk;
}

// validate --------------------------------------------------------------
struct ValidateArgs {
    std::string suite = "all";
    std::size_t paths = 100'000;
    double dt = 0.0;
};

int cmd_validate(const Global& g, const ValidateArgs& a) {
    Run run = start(g, "validate");
    SuiteOptions so;
    so.suite = a.suite;
    so.n_paths = a.paths;
    so.seed = g.seed;
    so.threads = g.threads;
    so.dt = pick_dt(run.cfg, a.dt);
    so.w0 = run.cfg.w0;
    so.y0 = run.cfg.y0;
    const auto validation = validate_hypotheses(run.cfg.model);
    if (!validation.ok()) {
        std::cerr << validation.summary();
        return kConfig;
    }
    const SuiteResult res = run_suite(run.cfg.model, so);
    auto jl = open_out(g, run, "report.jsonl");
    auto txt = open_out(g, run, "summary.txt");
    for (const auto& c : run.manifest.comment_lines()) txt << "# " << c << '\n';
    write_reports_jsonl(jl, res.reports);
    for (auto* os : {static_cast<std::ostream*>(&txt), static_cast<std::ostream*>(&std::cout)}) {
        for (const auto& r : res.reports) {
            const char* verdict = r.probe ? (r.pass ? "UNDETECTED" : "detected") : (r.pass ? "pass" : "FAIL");
            *os << std::left << std::setw(28) << r.name << ' ' << std::setw(10) << verdict << std::setprecision(6)
                << " closed " << r.closed_form << "  est " << r.estimate << "  se " << r.std_error << '\n';
        }
        *os << (res.ok() ? "all checks passed\n" : "some checks failed\n");
    }
    return res.ok() ? kOk : kOracle;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lifecycle: delayed-income lifecycle portfolio engine"};
    app.require_subcommand(1);
    Global g;
    app.add_option("--config", g.config, "model config (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "master RNG seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "worker threads (0 = all cores)");

    WeightsArgs wa;
    auto* weights = app.add_subcommand("weights", "solve (g, h) and write CSVs");
    weights->add_option("--nt", wa.nt, "time steps on [0, tau_R]");
    weights->add_option("--nz", wa.nz, "lag steps on [-d, 0] (must give dz = dt)");
    weights->add_option("--tol", wa.tol, "Picard tolerance");
    weights->add_option("--max-iter", wa.max_iter, "Picard iteration cap");
    weights->add_option("--h-stride", wa.h_stride, "write every k-th time row of h");

    PolicyArgs pa;
    auto* policy = app.add_subcommand("policy", "controls and value at one state");
    policy->add_option("--t", pa.t, "time");
    policy->add_option("--w", pa.w, "financial wealth");
    policy->add_option("--y", pa.y, "current income");
    policy->add_option("--hist-csv", pa.hist, "income history (oldest first), or a constant");
    policy->add_option("--dt", pa.dt, "grid step");

    SimArgs sa;
    auto* simulate = app.add_subcommand("simulate", "closed-loop Monte Carlo of the optimal policy");
    simulate->add_option("--w0", sa.w0, "initial wealth");
    simulate->add_option("--y0", sa.y0, "initial income");
    simulate->add_option("--hist", sa.hist, "income history CSV or constant");
    simulate->add_option("--paths", sa.paths, "number of paths");
    simulate->add_option("--dt", sa.dt, "time step");
    simulate->add_option("--horizon", sa.horizon, "simulated years (default tau_R)");
    simulate->add_option("--keep-paths", sa.keep, "paths written to paths.csv");
    simulate->add_option("--keep-stride", sa.stride, "write every k-th step");
    simulate->add_flag("--antithetic", sa.antithetic, "antithetic pairs");

    ProfileArgs fa;
    auto* profile = app.add_subcommand("profile", "mean allocation profile over the working life");
    profile->add_option("--w0", fa.w0, "initial wealth");
    profile->add_option("--y0", fa.y0, "initial income");
    profile->add_option("--hist", fa.hist, "income history CSV or constant");
    profile->add_option("--paths", fa.paths, "number of paths");
    profile->add_option("--dt", fa.dt, "time step");
    profile->add_option("--stride", fa.stride, "record every k-th step (default 0.25 years)");
    profile->add_flag("--compare-phi0", fa.compare_phi0, "add the no-delay profile columns");

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "run the oracle suite");
    validate->add_option("--suite", va.suite, "all|hjb|substitution|merton|human_capital|value");
    validate->add_option("--paths", va.paths, "Monte Carlo paths");
    validate->add_option("--dt", va.dt, "time step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*weights) return cmd_weights(g, wa);
        if (*policy) return cmd_policy(g, pa);
        if (*simulate) return cmd_simulate(g, sa);
        if (*profile) return cmd_profile(g, fa);
        if (*validate) return cmd_validate(g, va);
    } catch (const NoConvergence& e) {
        std::cerr << "solver: " << e.what() << " (iterations " << e.iterations() << ", defect " << e.defect() << ")\n";
        return kSolver;
    } catch (const AdmissibilityBreach& e) {
        std::cerr << "admissibility: " << e.what() << '\n';
        return kAdmissibility;
    } catch (const ModelError& e) {
        std::cerr << "config: " << e.what() << '\n';
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kConfig;
    }
    return kOk;
}
