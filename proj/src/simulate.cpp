#include "lifecycle/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "lifecycle/errors.hpp"

namespace lifecycle {

std::size_t PathConfig::steps() const {
    if (!(dt > 0.0) || !(horizon >= 0.0)) throw ConfigError("path config needs dt > 0 and horizon >= 0");
    const double q = horizon / dt;
    const double n = std::round(q);
    if (std::abs(q - n) > 1e-9 * std::max(1.0, q)) {
        std::ostringstream os;
        os << "horizon " << horizon << " is not a multiple of dt " << dt;
        throw GridMismatch(os.str());
    }
    return static_cast<std::size_t>(n);
}

std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(seed) ^ (path * 0xd1b54a32d192ed03ULL + 1));
}

Dynamics::Dynamics(const ModelConfig& cfg, const LagGrid& lag, double dt)
    : cfg_(cfg), lag_(lag), dt_(dt), sqrt_dt_(std::sqrt(dt)) {
    if (std::abs(dt - lag.dz()) > 1e-12 * dt) {
        std::ostringstream os;
        os << "time step " << dt << " differs from lag spacing " << lag.dz();
        throw GridMismatch(os.str());
    }
    const auto& phi = cfg.income().phi;
    constant_kernel_ = phi.is_constant();
    if (constant_kernel_) {
        kernel_level_ = phi.is_zero() ? 0.0 : phi.level();
    } else {
        phi_weights_ = phi.sample_on(lag);
        for (std::size_t j = 0; j < phi_weights_.size(); ++j)
            phi_weights_[j] *= trapezoid_weight(j, lag.n_z) * lag.dz();
    }
    const auto& m = cfg.market();
    excess_ = m.mu - Eigen::VectorXd::Constant(m.n(), m.r);
    xi_drift_ = std::exp(-(m.r + m.delta + 0.5 * cfg.derived().kappa_sq()) * dt);
}

double Dynamics::delay_integral(const HistoryBuffer& buf) const {
    if (constant_kernel_) {
        if (kernel_level_ == 0.0) return 0.0;
        return kernel_level_ * lag_.dz() * (buf.sum() - 0.5 * (buf.oldest() + buf.current()));
    }
    return buf.weighted_sum(phi_weights_);
}

double Dynamics::sigma_y_dot(std::span<const double> dw) const {
    const auto& sy = cfg_.income().sigma_y;
    double s = 0.0;
    for (Eigen::Index i = 0; i < sy.size(); ++i) s += sy[i] * dw[i];
    return s;
}

double Dynamics::kappa_dot(std::span<const double> dw) const {
    const auto& k = cfg_.derived().kappa;
    double s = 0.0;
    for (Eigen::Index i = 0; i < k.size(); ++i) s += k[i] * dw[i];
    return s;
}

double Dynamics::step_income(PathState& s, std::span<const double> dw) const {
    const double y = s.buffer.current();
    const double drift = cfg_.income().mu_y * y + delay_integral(s.buffer);
    const double y_new = y + drift * dt_ + y * sigma_y_dot(dw);
    s.buffer.push(y_new);
    return y_new;
}

double Dynamics::step_wealth(PathState& s, const ControlTriple& u, bool retired, std::span<const double> dw) const {
    const auto& m = cfg_.market();
    const Eigen::Index n = m.n();
    double excess = 0.0, noise = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        excess += u.theta[i] * excess_[i];
        double col = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) col += m.sigma(i, j) * dw[j];
        noise += u.theta[i] * col;
    }
    const double income = retired ? 0.0 : s.buffer.current();
    const double drift = (m.r + m.delta) * s.W + excess + income - u.c - m.delta * u.B;
    s.W += drift * dt_ + noise;
    return s.W;
}

double Dynamics::step_state_price(PathState& s, std::span<const double> dw) const {
    s.xi *= xi_drift_ * std::exp(-kappa_dot(dw));
    return s.xi;
}

const Estimate& SimOutput::estimate(const std::string& name) const {
    for (std::size_t i = 0; i < estimate_names.size(); ++i)
        if (estimate_names[i] == name) return estimates[i];
    throw std::out_of_range("no estimate named " + name);
}

const std::vector<double>& SimOutput::mean_series(const std::string& name) const {
    for (std::size_t i = 0; i < series_names.size(); ++i)
        if (series_names[i] == name) return series[i];
    throw std::out_of_range("no series named " + name);
}

namespace {

constexpr std::size_t kBlock = 64;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Partial sums of one block of draws. Blocks are merged in index order, so the
// totals do not depend on the thread count.
struct Accum {
    std::vector<double> sum, sumsq;
    std::vector<double> series;  // n_series x n_times, row-major
    std::vector<PathSample> samples;
    std::vector<std::vector<double>> terminal;
    std::size_t neg_steps = 0, steps = 0;
    double min_gamma = kInf, max_abs_gamma = 0.0, max_abs_c = 0.0, max_ratio = 0.0;

    Accum(std::size_t n_est, std::size_t n_series_entries) : sum(n_est, 0.0), sumsq(n_est, 0.0), series(n_series_entries, 0.0) {}

    void add_draw(std::span<const double> v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            sum[i] += v[i];
            sumsq[i] += v[i] * v[i];
        }
    }

    void merge(Accum&& o) {
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += o.sum[i];
            sumsq[i] += o.sumsq[i];
        }
        for (std::size_t i = 0; i < series.size(); ++i) series[i] += o.series[i];
        std::move(o.samples.begin(), o.samples.end(), std::back_inserter(samples));
        std::move(o.terminal.begin(), o.terminal.end(), std::back_inserter(terminal));
        neg_steps += o.neg_steps;
        steps += o.steps;
        min_gamma = std::min(min_gamma, o.min_gamma);
        max_abs_gamma = std::max(max_abs_gamma, o.max_abs_gamma);
        max_abs_c = std::max(max_abs_c, o.max_abs_c);
        max_ratio = std::max(max_ratio, o.max_ratio);
    }
};

unsigned resolve_threads(unsigned t) {
    if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
    return t;
}

// Runs body(draw, accum) for every draw. Rounds of `threads` blocks run in
// parallel; the first failing draw (in draw order) is rethrown.
template <class Body>
Accum run_draws(std::size_t n_draws, unsigned threads, std::size_t n_est, std::size_t n_series_entries, Body body) {
    threads = resolve_threads(threads);
    const std::size_t n_blocks = (n_draws + kBlock - 1) / kBlock;
    Accum total(n_est, n_series_entries);
    for (std::size_t first = 0; first < n_blocks; first += threads) {
        const std::size_t last = std::min(n_blocks, first + threads);
        std::vector<Accum> acc(last - first, Accum(n_est, n_series_entries));
        std::vector<std::exception_ptr> err(last - first);
        auto run_block = [&](std::size_t b) {
            try {
                const std::size_t d0 = b * kBlock, d1 = std::min(n_draws, d0 + kBlock);
                for (std::size_t d = d0; d < d1; ++d) body(d, acc[b - first]);
            } catch (...) {
                err[b - first] = std::current_exception();
            }
        };
        if (last - first == 1) {
            run_block(first);
        } else {
            std::vector<std::thread> pool;
            for (std::size_t b = first; b < last; ++b) pool.emplace_back(run_block, b);
            for (auto& th : pool) th.join();
        }
        for (auto& e : err)
            if (e) std::rethrow_exception(e);
        for (auto& a : acc) total.merge(std::move(a));
    }
    return total;
}

std::vector<Estimate> finish_estimates(const Accum& a, std::size_t n) {
    std::vector<Estimate> out(a.sum.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].n_draws = n;
        if (n == 0) continue;
        const double mean = a.sum[i] / static_cast<double>(n);
        out[i].mean = mean;
        if (n > 1) {
            const double var = std::max(0.0, (a.sumsq[i] - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
            out[i].std_error = std::sqrt(var / static_cast<double>(n));
        }
    }
    return out;
}

void fill_series(SimOutput& out, const Accum& a, std::size_t n_times, double n_paths) {
    out.series.assign(out.series_names.size(), std::vector<double>(n_times, 0.0));
    for (std::size_t s = 0; s < out.series_names.size(); ++s)
        for (std::size_t k = 0; k < n_times; ++k) out.series[s][k] = a.series[s * n_times + k] / n_paths;
}

void check_draws(const PathConfig& pc) {
    if (pc.draws() == 0) throw ConfigError("simulation needs at least one draw");
}

std::size_t legs(const PathConfig& pc) { return pc.antithetic ? 2 : 1; }

HistoryBuffer start_buffer(const HistoryBuffer& hist, double y_now) {
    auto v = hist.values();
    if (v.empty()) throw GridMismatch("empty income history");
    v.back() = y_now;
    return HistoryBuffer(hist.grid(), std::move(v));
}

}  // namespace

SimOutput simulate_human_capital(const ModelConfig& cfg, double y_now, const HistoryBuffer& hist, const PathConfig& pc) {
    check_draws(pc);
    const double tau_R = cfg.income().tau_R;
    PathConfig run = pc;
    run.horizon = tau_R;
    const std::size_t steps = run.steps();
    const Dynamics dyn(cfg, hist.grid(), pc.dt);
    const HistoryBuffer start = start_buffer(hist, y_now);
    const std::size_t n_assets = static_cast<std::size_t>(dyn.n_assets());
    const double dt = pc.dt;

    auto body = [&](std::size_t draw, Accum& acc) {
        std::vector<double> dw(n_assets);
        double total = 0.0;
        for (std::size_t leg = 0; leg < legs(pc); ++leg) {
            PathRng rng(pc.seed, draw);
            const double sign = leg == 0 ? 1.0 : -1.0;
            PathState s{0.0, 0.0, start, 1.0};
            double integral = 0.5 * s.xi * s.y() * dt;
            std::size_t neg = 0;
            for (std::size_t k = 1; k <= steps; ++k) {
                rng.increments(dw, dyn.sqrt_dt());
                if (sign < 0.0)
                    for (double& v : dw) v = -v;
                dyn.step_state_price(s, dw);
                const double y = dyn.step_income(s, dw);
                if (y < 0.0) ++neg;
                integral += (k == steps ? 0.5 : 1.0) * s.xi * y * dt;
            }
            acc.neg_steps += neg;
            acc.steps += steps;
            total += integral;
        }
        const double v = total / static_cast<double>(legs(pc));
        acc.add_draw(std::span<const double>(&v, 1));
    };
    Accum acc = run_draws(pc.draws(), pc.threads, 1, 0, body);

    SimOutput out;
    out.config = pc;
    out.estimate_names = {"H"};
    out.estimates = finish_estimates(acc, pc.draws());
    out.negative_income_fraction = acc.steps ? static_cast<double>(acc.neg_steps) / static_cast<double>(acc.steps) : 0.0;
    return out;
}

SimOutput simulate_lifecycle(const FeedbackPolicy& policy, const StateSnapshot& initial, const PathConfig& pc,
                             const LifecycleOptions& opts) {
    check_draws(pc);
    const WeightTable& tbl = policy.table();
    const ModelConfig& cfg = policy.config();
    const LagGrid& lag = tbl.lag_grid();
    if (!(initial.hist.grid() == lag)) throw GridMismatch("initial history is not on the table's lag grid");
    const Dynamics dyn(cfg, lag, pc.dt);
    if (std::abs(pc.dt - tbl.dt()) > 1e-12 * pc.dt) throw GridMismatch("simulation dt differs from the table's dt");
    const bool post = policy.mode() == PolicyMode::post_retirement;
    if (!post && !tbl.kernel_zero() && tbl.h_row_view(0).empty())
        throw ConfigError("closed-loop simulation needs the weight table stored densely");

    const double dt = pc.dt;
    const double t0 = initial.t;
    const double k0d = std::round(t0 / dt);
    if (std::abs(k0d * dt - t0) > 1e-9 * std::max(1.0, t0)) throw GridMismatch("initial time is not a grid point");
    const std::size_t k0 = static_cast<std::size_t>(k0d);
    const std::size_t steps = pc.steps();
    const std::size_t kE = k0 + steps;
    const double T = static_cast<double>(kE) * dt;
    const std::size_t n_t = tbl.n_t();
    const std::size_t M = lag.n_z;
    const double dz = lag.dz();
    const std::size_t n_assets = static_cast<std::size_t>(dyn.n_assets());

    const auto& pr = cfg.prefs();
    const double gam = pr.gamma;
    const double disc = pr.rho + cfg.market().delta;
    const double K_pow = std::pow(pr.K, -cfg.derived().b);
    const double delta = cfg.market().delta;
    auto util = [gam](double x) { return std::pow(x, 1.0 - gam) / (1.0 - gam); };

    // Running utility is homogeneous in Gamma: integrand = obj_factor * Gamma^{1-gamma}, with
    // trapezoid weights folded in and the left limit of consumption at a final node on tau_R.
    std::vector<double> obj_factor;
    if (opts.objective) {
        obj_factor.resize(steps + 1);
        ControlTriple unit;
        unit.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_assets));
        for (std::size_t rel = 0; rel <= steps; ++rel) {
            const std::size_t k = k0 + rel;
            const double t = static_cast<double>(k) * dt;
            policy.controls_from_total_wealth(t, 1.0, 0.0, 0.0, unit);
            double c = unit.c;
            if (k == kE && k == n_t && !post && policy.retired(t)) c /= K_pow;
            const double w = (rel == 0 || rel == steps) ? 0.5 : 1.0;
            obj_factor[rel] = w * std::exp(-disc * t) * (util(c) + delta * util(pr.k * unit.B));
        }
    }
    const HistoryBuffer start = start_buffer(initial.hist, initial.y_now);
    StateSnapshot init = initial;
    init.hist = start;
    const double gamma0 = policy.total_wealth(init);
    const double y_scale0 = std::abs(initial.y_now);

    // exact comparison path
    const Eigen::VectorXd k_over_g = cfg.derived().kappa / gam;
    const double exact_drift =
        gamma_drift_integral(cfg, T) - gamma_drift_integral(cfg, t0) - 0.5 * k_over_g.squaredNorm() * (T - t0);

    SimOutput out;
    out.config = pc;
    out.series_names = {"W", "y", "Gamma", "c", "B"};
    for (std::size_t i = 0; i < n_assets; ++i) out.series_names.push_back("theta_" + std::to_string(i + 1));
    for (std::size_t i = 0; i < n_assets; ++i) out.series_names.push_back("theta_share_" + std::to_string(i + 1));
    const std::size_t n_series = out.series_names.size();
    const std::size_t n_times = opts.record_stride ? steps / opts.record_stride + 1 : 0;
    for (std::size_t k = 0; k < n_times; ++k) out.times.push_back(static_cast<double>(k0 + k * opts.record_stride) * dt);

    out.estimate_names = {"W_T", "Gamma_T"};
    if (opts.objective) out.estimate_names.push_back("J");
    if (opts.exact_terminal) {
        out.estimate_names.push_back("Gamma_T_exact");
        out.estimate_names.push_back("strong_error");
        out.terminal_names = {"Gamma_T", "Gamma_T_exact"};
    }
    const std::size_t n_est = out.estimate_names.size();

    auto body = [&](std::size_t draw, Accum& acc) {
        std::vector<double> dw(n_assets), z(n_assets), vals(n_est, 0.0);
        ControlTriple u;
        u.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_assets));
        for (std::size_t leg = 0; leg < legs(pc); ++leg) {
            const std::size_t path_id = draw * legs(pc) + leg;
            PathRng rng(pc.seed, draw);
            const double sign = leg == 0 ? 1.0 : -1.0;
            PathState s{t0, initial.w, start, 1.0};
            std::fill(z.begin(), z.end(), 0.0);
            double y_scale = y_scale0;
            double J = 0.0, gamma_tw = 0.0;
            for (std::size_t k = k0;; ++k) {
                const double t = static_cast<double>(k) * dt;
                s.t = t;
                const double y = s.y();
                const bool pre = !post && k < n_t;
                double g_k = 0.0;
                gamma_tw = s.W;
                if (pre) {
                    g_k = tbl.g_at(k);
                    double past = 0.0;
                    const auto row = tbl.h_row_view(k);
                    if (!row.empty())
                        past = dz * (s.buffer.weighted_sum(row) - 0.5 * (row[0] * s.buffer.oldest() + row[M] * y));
                    gamma_tw += g_k * y + past;
                    y_scale = std::max(y_scale, std::abs(y));
                }
                const double tol = opts.tol_violation >= 0.0 ? opts.tol_violation
                                                             : 10.0 * dt * std::max(std::abs(gamma0), y_scale);
                if (gamma_tw < -tol) {
                    std::ostringstream os;
                    os << "total wealth " << gamma_tw << " below -" << tol << " on path " << path_id << " at t = " << t;
                    throw AdmissibilityBreach(os.str(), static_cast<long>(path_id), t, gamma_tw);
                }
                acc.min_gamma = std::min(acc.min_gamma, gamma_tw);
                acc.max_abs_gamma = std::max(acc.max_abs_gamma, std::abs(gamma_tw));
                if (y_scale > 0.0) acc.max_ratio = std::max(acc.max_ratio, std::abs(gamma_tw) / (dt * y_scale));
                const double gc = std::max(gamma_tw, 0.0);
                policy.controls_from_total_wealth(t, gc, y, g_k, u);
                acc.max_abs_c = std::max(acc.max_abs_c, std::abs(u.c));

                const std::size_t rel = k - k0;
                if (opts.record_stride && rel % opts.record_stride == 0) {
                    const std::size_t idx = rel / opts.record_stride;
                    double* ser = acc.series.data();
                    ser[0 * n_times + idx] += s.W;
                    ser[1 * n_times + idx] += y;
                    ser[2 * n_times + idx] += gamma_tw;
                    ser[3 * n_times + idx] += u.c;
                    ser[4 * n_times + idx] += u.B;
                    for (std::size_t i = 0; i < n_assets; ++i) {
                        ser[(5 + i) * n_times + idx] += u.theta[static_cast<Eigen::Index>(i)];
                        if (gamma_tw > 0.0)
                            ser[(5 + n_assets + i) * n_times + idx] += u.theta[static_cast<Eigen::Index>(i)] / gamma_tw;
                    }
                }
                if (path_id < opts.keep_paths && rel % std::max<std::size_t>(1, opts.keep_stride) == 0) {
                    PathSample ps;
                    ps.path_id = path_id;
                    ps.t = t;
                    ps.W = s.W;
                    ps.y = y;
                    ps.gamma = gamma_tw;
                    ps.c = u.c;
                    ps.B = u.B;
                    ps.theta.assign(u.theta.data(), u.theta.data() + n_assets);
                    acc.samples.push_back(std::move(ps));
                }
                if (opts.objective && steps > 0) {
                    double integrand = 0.0;
                    if (gc > 0.0) integrand = obj_factor[rel] * std::pow(gc, 1.0 - gam);
                    else if (gam > 1.0) integrand = -kInf;
                    J += integrand * dt;
                }
                if (k == kE) break;

                rng.increments(dw, dyn.sqrt_dt());
                if (sign < 0.0)
                    for (double& v : dw) v = -v;
                for (std::size_t i = 0; i < n_assets; ++i) z[i] += dw[i];
                dyn.step_wealth(s, u, !pre, dw);
                if (pre) {
                    const double y_new = dyn.step_income(s, dw);
                    if (y_new < 0.0) ++acc.neg_steps;
                    ++acc.steps;
                }
            }
            vals[0] += s.W;
            vals[1] += gamma_tw;
            std::size_t e = 2;
            if (opts.objective) {
                const ExtendedValue term = policy.value_from_total_wealth(T, std::max(gamma_tw, 0.0));
                if (term.is_minus_infinity() || !std::isfinite(J)) {
                    std::ostringstream os;
                    os << "objective is -infinity on path " << path_id << " (total wealth " << gamma_tw << " at t = " << T
                       << ")";
                    throw AdmissibilityBreach(os.str(), static_cast<long>(path_id), T, gamma_tw);
                }
                vals[e++] += J + term.value();
            }
            if (opts.exact_terminal) {
                double kz = 0.0;
                for (std::size_t i = 0; i < n_assets; ++i) kz += k_over_g[static_cast<Eigen::Index>(i)] * z[i];
                const double exact = gamma0 * std::exp(exact_drift + kz);
                vals[e++] += exact;
                vals[e++] += std::abs(gamma_tw - exact);
                acc.terminal.push_back({gamma_tw, exact});
            }
        }
        for (double& v : vals) v /= static_cast<double>(legs(pc));
        acc.add_draw(vals);
    };
    Accum acc = run_draws(pc.draws(), pc.threads, n_est, n_series * n_times, body);

    out.estimates = finish_estimates(acc, pc.draws());
    fill_series(out, acc, n_times, static_cast<double>(pc.draws() * legs(pc)));
    out.samples = std::move(acc.samples);
    out.terminal = std::move(acc.terminal);
    out.negative_income_fraction = acc.steps ? static_cast<double>(acc.neg_steps) / static_cast<double>(acc.steps) : 0.0;
    out.min_total_wealth = acc.min_gamma;
    out.max_abs_total_wealth = acc.max_abs_gamma;
    out.max_abs_consumption = acc.max_abs_c;
    out.max_gamma_over_dt_y = acc.max_ratio;
    return out;
}

double gamma_drift_integral(const ModelConfig& cfg, double t) {
    require_hypothesis(cfg);
    const auto& s = cfg.derived();
    const double r_d = cfg.market().r + cfg.market().delta;
    const double tr = std::min(t, cfg.income().tau_R);
    // int_0^t (K^{-bR} + delta k^{-b}) / f = t / nu - log(f(t ^ tau_R) / f(0))
    return (r_d + s.kappa_sq() / cfg.prefs().gamma - 1.0 / s.nu) * t + std::log(f_factor(cfg, tr) / f_factor(cfg, 0.0));
}

double gamma_exact_mean(const ModelConfig& cfg, double gamma0, double t) {
    return gamma0 * std::exp(gamma_drift_integral(cfg, t));
}

SimOutput simulate_gamma_exact(const ModelConfig& cfg, const PathConfig& pc, double gamma0,
                               std::span<const double> report_times) {
    check_draws(pc);
    const std::size_t steps = pc.steps();
    const double dt = pc.dt;
    const std::size_t n_assets = static_cast<std::size_t>(cfg.market().n());
    const Eigen::VectorXd k_over_g = cfg.derived().kappa / cfg.prefs().gamma;
    const double half_var = 0.5 * k_over_g.squaredNorm() * dt;

    // trapezoid of a(s) per cell; a cell starting before tau_R uses the working-life branch at both ends
    require_hypothesis(cfg);
    const auto& ds = cfg.derived();
    const double tau_R = cfg.income().tau_R;
    const double a0 = cfg.market().r + cfg.market().delta + ds.kappa_sq() / cfg.prefs().gamma;
    const double kb = cfg.market().delta * std::pow(cfg.prefs().k, -ds.b);
    const double Kb = std::pow(cfg.prefs().K, -ds.b);
    auto a = [&](double t, bool retired) { return a0 - ((retired ? Kb : 1.0) + kb) / f_factor(cfg, t); };
    std::vector<double> incr(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double tl = static_cast<double>(k) * dt, tr = static_cast<double>(k + 1) * dt;
        const bool retired = tl >= tau_R * (1.0 - 1e-12);
        incr[k] = 0.5 * dt * (a(tl, retired) + a(tr, retired)) - half_var;
    }

    std::vector<std::size_t> report_idx;
    for (double rt : report_times) {
        const double q = std::round(rt / dt);
        if (q < 0.0 || q > static_cast<double>(steps) || std::abs(q * dt - rt) > 1e-9 * std::max(1.0, rt))
            throw GridMismatch("report time is not a grid point within the horizon");
        report_idx.push_back(static_cast<std::size_t>(q));
    }
    if (report_idx.empty()) report_idx.push_back(steps);

    SimOutput out;
    out.config = pc;
    out.series_names = {"gamma"};
    for (std::size_t i = 0; i < report_idx.size(); ++i) {
        out.times.push_back(static_cast<double>(report_idx[i]) * dt);
        out.estimate_names.push_back(report_times.empty() ? "gamma_T" : "gamma_t" + std::to_string(i));
    }
    out.terminal_names = {"min_gamma", "gamma_T"};
    const std::size_t n_rep = report_idx.size();

    auto body = [&](std::size_t draw, Accum& acc) {
        std::vector<double> dw(n_assets), vals(n_rep, 0.0);
        const double sqrt_dt = std::sqrt(dt);
        for (std::size_t leg = 0; leg < legs(pc); ++leg) {
            PathRng rng(pc.seed, draw);
            const double sign = leg == 0 ? 1.0 : -1.0;
            double lg = std::log(gamma0);
            double mn = gamma0;
            std::size_t r = 0;
            for (std::size_t k = 0;; ++k) {
                const double g = std::exp(lg);
                mn = std::min(mn, g);
                while (r < n_rep && report_idx[r] == k) {
                    vals[r] += g;
                    acc.series[r] += g;
                    ++r;
                }
                if (k == steps) break;
                rng.increments(dw, sqrt_dt);
                double kz = 0.0;
                for (std::size_t i = 0; i < n_assets; ++i) kz += k_over_g[static_cast<Eigen::Index>(i)] * dw[i];
                lg += incr[k] + sign * kz;
            }
            acc.min_gamma = std::min(acc.min_gamma, mn);
            acc.terminal.push_back({mn, std::exp(lg)});
        }
        for (double& v : vals) v /= static_cast<double>(legs(pc));
        acc.add_draw(vals);
    };
    if (!(gamma0 >= 0.0)) throw InadmissibleState("exact total wealth needs gamma0 >= 0");
    // report indices must be visited in order
    std::vector<std::size_t> order(report_idx);
    if (!std::is_sorted(order.begin(), order.end())) throw ConfigError("report times must be increasing");
    Accum acc = run_draws(pc.draws(), pc.threads, n_rep, n_rep, body);
    out.estimates = finish_estimates(acc, pc.draws());
    fill_series(out, acc, n_rep, static_cast<double>(pc.draws() * legs(pc)));
    out.terminal = std::move(acc.terminal);
    out.min_total_wealth = acc.min_gamma;
    return out;
}

void write_summary(std::ostream& os, const SimOutput& out, const std::vector<std::string>& comment) {
    for (const auto& c : comment) os << "# " << c << '\n';
    const auto& pc = out.config;
    os << std::setprecision(12);
    os << "seed=" << pc.seed << '\n'
       << "dt=" << pc.dt << '\n'
       << "horizon=" << pc.horizon << '\n'
       << "n_paths=" << pc.n_paths << '\n'
       << "antithetic=" << (pc.antithetic ? "true" : "false") << '\n';
    for (std::size_t i = 0; i < out.estimates.size(); ++i) {
        const auto& e = out.estimates[i];
        os << out.estimate_names[i] << ".mean=" << e.mean << '\n'
           << out.estimate_names[i] << ".se=" << e.std_error << '\n'
           << out.estimate_names[i] << ".n=" << e.n_draws << '\n';
    }
    os << "negative_income_fraction=" << out.negative_income_fraction << '\n';
    if (!out.samples.empty() || out.max_abs_total_wealth > 0.0)
        os << "min_total_wealth=" << out.min_total_wealth << '\n'
           << "max_abs_consumption=" << out.max_abs_consumption << '\n';
}

void write_paths_csv(std::ostream& os, const SimOutput& out, std::size_t n_assets, const std::vector<std::string>& comment) {
    for (const auto& c : comment) os << "# " << c << '\n';
    os << "path_id,t,W,y,Gamma,c,B";
    for (std::size_t i = 0; i < n_assets; ++i) os << ",theta_" << i + 1;
    os << '\n' << std::setprecision(10);
    for (const auto& s : out.samples) {
        os << s.path_id << ',' << s.t << ',' << s.W << ',' << s.y << ',' << s.gamma << ',' << s.c << ',' << s.B;
        for (double th : s.theta) os << ',' << th;
        os << '\n';
    }
}

}  // namespace lifecycle
