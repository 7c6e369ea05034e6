#pragma once

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lifecycle/history.hpp"
#include "lifecycle/params.hpp"
#include "lifecycle/policy.hpp"
#include "lifecycle/weights.hpp"

namespace lifecycle {

struct PathConfig {
    double dt = 1.0 / 500.0;
    double horizon = 1.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    // Pairs (dW, -dW); n_paths counts single paths, so n_paths / 2 draws.
    bool antithetic = false;
    unsigned threads = 1;

    std::size_t steps() const;
    std::size_t draws() const { return antithetic ? n_paths / 2 : n_paths; }
};

// Seed of path `path` under master seed `seed` (splitmix64 mixing of both).
std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path);

// Gaussian increments for one path; reproducible from (seed, path) alone.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path) : engine_(path_seed(seed, path)) {}
    // Fills `dw` with independent N(0, dt) draws.
    void increments(std::span<double> dw, double sqrt_dt) {
        for (double& v : dw) v = sqrt_dt * normal_(engine_);
    }

private:
    std::mt19937_64 engine_;
    boost::random::normal_distribution<double> normal_{0.0, 1.0};  // ziggurat
};

struct PathState {
    double t = 0.0;
    double W = 0.0;
    HistoryBuffer buffer;  // current income at lag 0
    double xi = 1.0;
    double y() const { return buffer.current(); }
};

// Euler-Maruyama steps of the delayed income and wealth equations plus the
// exact lognormal step of the state-price density, for a fixed dt equal to the
// lag spacing.
class Dynamics {
public:
    Dynamics(const ModelConfig& cfg, const LagGrid& lag, double dt);

    const ModelConfig& config() const { return cfg_; }
    double dt() const { return dt_; }
    double sqrt_dt() const { return sqrt_dt_; }
    Eigen::Index n_assets() const { return cfg_.market().n(); }

    // Trapezoid quadrature of int_{-d}^0 phi(zeta) y(t + zeta) dzeta over the buffer.
    double delay_integral(const HistoryBuffer& buf) const;

    // y <- y + (y mu_y + I_phi) dt + y sigma_y^T dW, pushed into the buffer. Returns new y.
    double step_income(PathState& s, std::span<const double> dw) const;

    // Euler step of W with drift (r + delta) W + theta^T (mu - r 1) + (1 - R) y - c - delta B and
    // diffusion theta^T sigma dW; y is read from the buffer (call before step_income).
    double step_wealth(PathState& s, const ControlTriple& u, bool retired, std::span<const double> dw) const;

    // xi <- xi exp(-(r + delta + |kappa|^2 / 2) dt - kappa^T dW).
    double step_state_price(PathState& s, std::span<const double> dw) const;

    double kappa_dot(std::span<const double> dw) const;
    double sigma_y_dot(std::span<const double> dw) const;

private:
    ModelConfig cfg_;
    LagGrid lag_;
    double dt_;
    double sqrt_dt_;
    bool constant_kernel_;
    double kernel_level_ = 0.0;
    std::vector<double> phi_weights_;  // phi_j * trapezoid weight * dz
    Eigen::VectorXd excess_;           // mu - r 1
    double xi_drift_ = 0.0;            // exp(-(r + delta + |kappa|^2/2) dt)
};

struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n_draws = 0;
};

// One row of the long-format time-series output.
struct PathSample {
    std::size_t path_id = 0;
    double t = 0.0;
    double W = 0.0;
    double y = 0.0;
    double gamma = 0.0;
    double c = 0.0;
    double B = 0.0;
    std::vector<double> theta;
};

struct SimOutput {
    PathConfig config;
    std::vector<std::string> estimate_names;
    std::vector<Estimate> estimates;
    // Mean over paths of each recorded observable at `times`.
    std::vector<double> times;
    std::vector<std::string> series_names;
    std::vector<std::vector<double>> series;
    // Per-path records (only for the first `keep_paths` paths).
    std::vector<PathSample> samples;
    // Per-path terminal pairs when requested (e.g. Euler vs exact total wealth).
    std::vector<std::vector<double>> terminal;
    std::vector<std::string> terminal_names;
    // Fraction of path-steps with negative income, min total wealth seen.
    double negative_income_fraction = 0.0;
    double min_total_wealth = 0.0;
    double max_abs_total_wealth = 0.0;
    double max_abs_consumption = 0.0;
    // max |Gamma(t)| / (dt * running max |y|) over all path-steps
    double max_gamma_over_dt_y = 0.0;

    const Estimate& estimate(const std::string& name) const;
    const std::vector<double>& mean_series(const std::string& name) const;
};

// Mean, SE, n, seed and config echo as key/value text.
void write_summary(std::ostream& os, const SimOutput& out, const std::vector<std::string>& comment = {});
// Long-format CSV: path_id,t,W,y,Gamma,c,B,theta_1..theta_n.
void write_paths_csv(std::ostream& os, const SimOutput& out, std::size_t n_assets,
                     const std::vector<std::string>& comment = {});

// Monte Carlo estimate "H" of E[ int_0^{tau_R} xi(u) y(u) du ] by joint simulation of
// (xi, y), with y_now overriding the lag-0 entry of hist. Never touches the weight
// table; pc.horizon is ignored.
SimOutput simulate_human_capital(const ModelConfig& cfg, double y_now, const HistoryBuffer& hist,
                                 const PathConfig& pc);

struct LifecycleOptions {
    // Record mean series every `record_stride` steps (0 disables).
    std::size_t record_stride = 0;
    // Keep full per-step records for this many paths.
    std::size_t keep_paths = 0;
    std::size_t keep_stride = 1;
    // Accumulate the objective J (running utility + terminal Merton value at tau_R).
    bool objective = false;
    // Record per path the terminal Euler total wealth and the exact lognormal
    // total wealth driven by the same increments.
    bool exact_terminal = false;
    // Admissibility allowance; negative selects 10 dt max(Gamma(0), y scale).
    double tol_violation = -1.0;
};

// Closed-loop simulation of (W, y) under the feedback policy from `initial` over
// [initial.t, initial.t + pc.horizon]. AdmissibilityBreach if total wealth drops
// below -tol_violation. Series: W, y, Gamma, c, B, theta_i, theta_share_i.
// Estimates: W_T, Gamma_T, plus J with the objective and Gamma_T_exact,
// strong_error with exact_terminal.
SimOutput simulate_lifecycle(const FeedbackPolicy& policy, const StateSnapshot& initial, const PathConfig& pc,
                             const LifecycleOptions& opts = {});

// int_0^t a(s) ds with a(s) = r + delta + |kappa|^2/gamma - (K^{-b R(s)} + delta k^{-b}) / f(s), in closed form.
double gamma_drift_integral(const ModelConfig& cfg, double t);
// E[Gamma*(t)] = gamma0 exp(int_0^t a).
double gamma_exact_mean(const ModelConfig& cfg, double gamma0, double t);

// Exact lognormal paths of the optimal total wealth on the dt grid up to pc.horizon, with the
// drift integral by trapezoid at dt resolution.
// Series "gamma" (mean), estimates "gamma_T", and per-path minimum in terminal.
SimOutput simulate_gamma_exact(const ModelConfig& cfg, const PathConfig& pc, double gamma0,
                               std::span<const double> report_times = {});

}  // namespace lifecycle
