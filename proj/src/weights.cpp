#include "lifecycle/weights.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "lifecycle/errors.hpp"

namespace lifecycle {

namespace {

// Integral over one cell of length h of exp(-rate s) times the linear
// interpolant of (u0, u1): w0 u0 + w1 u1. decay = exp(-rate h).
struct ExpCell {
    double decay;
    double w0;
    double w1;
};

ExpCell exp_cell(double rate, double h) {
    const double x = rate * h;
    double e1;  // (1 - e^{-x}) / x
    double m1;  // (1 - e^{-x}(1 + x)) / x^2
    if (std::abs(x) < 0.5) {
        // Taylor series; the closed forms cancel catastrophically near 0.
        e1 = 0.0;
        m1 = 0.0;
        double pow_nm1 = 1.0;  // x^{n-1}
        double pow_nm2 = 0.0;  // x^{n-2}
        double fact = 1.0;
        for (int n = 1; n <= 20; ++n) {
            fact *= n;
            const double sgn = (n % 2 == 1) ? 1.0 : -1.0;
            e1 += sgn * pow_nm1 / fact;
            if (n >= 2) m1 -= sgn * (n - 1) * pow_nm2 / fact;
            pow_nm2 = pow_nm1;
            pow_nm1 *= x;
        }
    } else {
        e1 = -std::expm1(-x) / x;
        m1 = (1.0 - std::exp(-x) * (1.0 + x)) / (x * x);
    }
    ExpCell c;
    c.decay = std::exp(-x);
    c.w1 = h * m1;
    c.w0 = h * e1 - c.w1;
    return c;
}

class Solver {
public:
    Solver(const ModelConfig& cfg, const TimeGrid& tg, const LagGrid& lg, const std::vector<double>& phi)
        : n_(tg.n_t), m_(lg.n_z), dt_(tg.dt()), phi_(phi) {
        const double a = cfg.market().r + cfg.market().delta;
        cell_ = exp_cell(cfg.derived().beta, dt_);
        // c_k = dt e^{-a k dt} phi(-k dt); phi(-k dt) is lag index m - k
        c_.resize(m_ + 1);
        for (std::size_t k = 0; k <= m_; ++k) c_[k] = dt_ * std::exp(-a * static_cast<double>(k) * dt_) * phi_[m_ - k];
        decay_a_ = std::exp(-a * dt_);
    }

    // g_i for i in [lo, hi) by backward recursion from the fixed value g[hi].
    void update_g(std::vector<double>& g, const std::vector<double>& h0, std::size_t lo, std::size_t hi) const {
        for (std::size_t i = hi; i-- > lo;)
            g[i] = cell_.decay * g[i + 1] + cell_.w0 * (h0[i] + 1.0) + cell_.w1 * (h0[i + 1] + 1.0);
    }

    // h(t_i, 0) for i in [lo, hi) from g.
    void update_h0(const std::vector<double>& g, std::vector<double>& h0, std::size_t lo, std::size_t hi) const {
        for (std::size_t i = lo; i < hi; ++i) h0[i] = h0_at(g, i);
    }

    double h0_at(const std::vector<double>& g, std::size_t i) const {
        const std::size_t len = std::min(m_, n_ - i);
        if (len == 0) return 0.0;
        const double* gi = g.data() + i;
        double acc = 0.5 * (c_[0] * gi[0] + c_[len] * gi[len]);
        for (std::size_t k = 1; k < len; ++k) acc += c_[k] * gi[k];
        return acc;
    }

    // Row i of h from row i+1 along characteristics (t + zeta constant).
    void next_row(const std::vector<double>& g, std::size_t i, std::span<const double> below,
                  std::span<double> row) const {
        row[0] = 0.0;
        const double gi = g[i];
        const double gn = g[i + 1];
        for (std::size_t j = 1; j <= m_; ++j)
            row[j] = decay_a_ * below[j - 1] +
                     0.5 * dt_ * (gi * phi_[j] + decay_a_ * gn * phi_[j - 1]);
    }

    // Direct trapezoid for a single row; O(m^2).
    void direct_row(const std::vector<double>& g, std::size_t i, std::span<double> row) const {
        for (std::size_t j = 0; j <= m_; ++j) {
            const std::size_t len = std::min(n_ - i, j);
            double acc = 0.0;
            double decay = 1.0;
            for (std::size_t k = 0; k <= len && len > 0; ++k) {
                const double w = (k == 0 || k == len) ? 0.5 : 1.0;
                acc += w * decay * g[i + k] * phi_[j - k];
                decay *= decay_a_;
            }
            row[j] = dt_ * acc;
        }
    }

    std::size_t n_;
    std::size_t m_;
    double dt_;
    const std::vector<double>& phi_;
    ExpCell cell_{};
    std::vector<double> c_;
    double decay_a_ = 1.0;
};

double sup_diff(const std::vector<double>& a, const std::vector<double>& b, std::size_t lo, std::size_t hi) {
    double d = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double e = std::abs(a[i] - b[i]);
        if (!(e <= d)) d = e;  // propagates NaN
    }
    return d;
}

// Window length (in steps) on which the operator is comfortably contractive:
// T e^{|beta| T} ||phi||_1 <= 1/2.
std::size_t contraction_window(double beta, double phi_l1, double dt, std::size_t n) {
    double t = static_cast<double>(n) * dt;
    while (t > dt && t * std::exp(std::abs(beta) * t) * phi_l1 > 0.5) t *= 0.5;
    return std::clamp<std::size_t>(static_cast<std::size_t>(t / dt), 1, n);
}

}  // namespace

WeightTable solve_weights(const ModelConfig& cfg, const AlignedGrids& grids, const SolverOptions& opts) {
    if (!(opts.tol > 0.0)) throw ConfigError("solver tolerance must be positive");
    if (opts.max_iter < 1) throw ConfigError("max_iter must be at least 1");
    const auto& tg = grids.time;
    const auto& lg = grids.lag;
    if (std::abs(tg.t_end - cfg.income().tau_R) > 1e-12 * cfg.income().tau_R)
        throw GridMismatch("time grid must end at tau_R");
    if (std::abs(lg.d - cfg.income().d) > 1e-12 * cfg.income().d)
        throw GridMismatch("lag grid must span [-d, 0]");
    if (std::abs(tg.dt() - lg.dz()) > 1e-12 * tg.dt()) throw GridMismatch("time and lag steps must coincide (dt == dz)");

    WeightTable tbl;
    tbl.cfg_ = cfg;
    tbl.tg_ = tg;
    tbl.lg_ = lg;
    tbl.phi_ = cfg.income().phi.sample_on(lg);
    tbl.kernel_zero_ = std::all_of(tbl.phi_.begin(), tbl.phi_.end(), [](double v) { return v == 0.0; });

    const std::size_t n = tg.n_t;
    const std::size_t m = lg.n_z;
    Solver solver(cfg, tg, lg, tbl.phi_);

    std::vector<double> g(n + 1, 0.0), h0(n + 1, 0.0), g_new(n + 1, 0.0), h0_new(n + 1, 0.0);
    SolverInfo& info = tbl.info_;

    auto iterate_window = [&](std::size_t lo, std::size_t hi, int budget, int& used) {
        double defect = std::numeric_limits<double>::infinity();
        for (int it = 0; it < budget; ++it) {
            solver.update_g(g_new, h0, lo, hi);
            solver.update_h0(g_new, h0_new, lo, hi);
            defect = std::max(sup_diff(g_new, g, lo, hi), sup_diff(h0_new, h0, lo, hi));
            std::copy(g_new.begin() + lo, g_new.begin() + hi, g.begin() + lo);
            std::copy(h0_new.begin() + lo, h0_new.begin() + hi, h0.begin() + lo);
            ++used;
            info.defect_history.push_back(defect);
            if (defect <= opts.tol) return defect;
            if (!std::isfinite(defect)) return defect;
        }
        return defect;
    };

    bool converged = false;
    int used = 0;
    if (!opts.force_windowed) {
        const int budget = std::max(1, opts.max_iter / 2);
        info.defect = iterate_window(0, n, budget, used);
        converged = info.defect <= opts.tol;
        if (!converged && opts.max_iter == 1) {
            info.iterations = used;
            throw NoConvergence("weight solver hit max_iter", used, info.defect);
        }
    }
    if (!converged) {
        // March backwards over sub-intervals on which the operator contracts.
        std::fill(g.begin(), g.end(), 0.0);
        std::fill(h0.begin(), h0.end(), 0.0);
        g_new = g;
        h0_new = h0;
        double phi_l1 = 0.0;
        for (std::size_t j = 0; j <= m; ++j) phi_l1 += trapezoid_weight(j, m) * std::abs(tbl.phi_[j]);
        phi_l1 *= lg.dz();
        const std::size_t win = contraction_window(cfg.derived().beta, phi_l1, tg.dt(), n);
        info.windowed = true;
        info.window_steps = win;
        double worst = 0.0;
        for (std::size_t hi = n; hi > 0;) {
            const std::size_t lo = hi > win ? hi - win : 0;
            const int budget = opts.max_iter - used;
            if (budget <= 0) {
                info.iterations = used;
                throw NoConvergence("weight solver hit max_iter", used, info.defect);
            }
            const double d = iterate_window(lo, hi, budget, used);
            if (!(d <= opts.tol)) {
                info.iterations = used;
                info.defect = d;
                throw NoConvergence("weight solver hit max_iter on a sub-interval", used, d);
            }
            worst = std::max(worst, d);
            hi = lo;
        }
        info.defect = worst;
    }
    info.iterations = used;
    tbl.g_ = std::move(g);

    bool want_dense = opts.storage == HStorage::dense ||
                      (opts.storage == HStorage::automatic && (n + 1) * (m + 1) <= opts.dense_limit);
    if (!tbl.kernel_zero_ && want_dense) {
        tbl.h_.assign((n + 1) * (m + 1), 0.0);
        for (std::size_t i = n; i-- > 0;) {
            std::span<const double> below(tbl.h_.data() + (i + 1) * (m + 1), m + 1);
            std::span<double> row(tbl.h_.data() + i * (m + 1), m + 1);
            solver.next_row(tbl.g_, i, below, row);
        }
    }
    return tbl;
}

WeightTable solve_weights(const ModelConfig& cfg, const TimeGrid& tg, const LagGrid& lg, double tol, int max_iter) {
    SolverOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    return solve_weights(cfg, AlignedGrids{tg, lg}, opts);
}

double WeightTable::h_at(std::size_t i, std::size_t j) const {
    if (i >= tg_.n_t || kernel_zero_) return 0.0;
    if (!h_.empty()) return h_[i * (lg_.n_z + 1) + j];
    std::vector<double> row(lg_.size());
    h_row(i, row);
    return row[j];
}

void WeightTable::h_row(std::size_t i, std::span<double> out) const {
    if (out.size() != lg_.size()) throw GridMismatch("row buffer does not match the lag grid");
    if (i >= tg_.n_t || kernel_zero_) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    if (!h_.empty()) {
        std::copy_n(h_.begin() + static_cast<std::ptrdiff_t>(i * lg_.size()), lg_.size(), out.begin());
        return;
    }
    Solver solver(cfg_, tg_, lg_, phi_);
    solver.direct_row(g_, i, out);
}

// ---------------------------------------------------------------- evaluation

namespace {

struct Bracket {
    std::size_t i;
    double w;  // weight of node i + 1
};

Bracket bracket_time(const WeightTable& tbl, double t) {
    const double pos = t / tbl.dt();
    auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= tbl.n_t()) i = tbl.n_t() - 1;
    return {i, pos - static_cast<double>(i)};
}

}  // namespace

double eval_g(const WeightTable& tbl, double t) {
    if (t < 0.0) throw OutOfRange("eval_g: t must be non-negative");
    if (t >= tbl.tau_R()) return 0.0;
    const auto [i, w] = bracket_time(tbl, t);
    return (1.0 - w) * tbl.g_at(i) + w * tbl.g_at(i + 1);
}

double eval_h(const WeightTable& tbl, double t, double zeta) {
    const double d = tbl.lag_grid().d;
    const double slack = 1e-12 * d;
    if (zeta < -d - slack || zeta > slack) throw OutOfRange("eval_h: zeta outside [-d, 0]");
    if (t < 0.0) throw OutOfRange("eval_h: t must be non-negative");
    if (t >= tbl.tau_R()) return 0.0;
    const auto [i, wt] = bracket_time(tbl, t);
    const double pos = std::clamp((zeta + d) / tbl.lag_grid().dz(), 0.0, static_cast<double>(tbl.n_z()));
    auto j = static_cast<std::size_t>(std::floor(pos));
    if (j >= tbl.n_z()) j = tbl.n_z() - 1;
    const double wz = pos - static_cast<double>(j);
    const double lo = (1.0 - wz) * tbl.h_at(i, j) + wz * tbl.h_at(i, j + 1);
    const double hi = (1.0 - wz) * tbl.h_at(i + 1, j) + wz * tbl.h_at(i + 1, j + 1);
    return (1.0 - wt) * lo + wt * hi;
}

double annuity_g1(double beta, double tau_R, double t) {
    const double left = std::max(tau_R - t, 0.0);
    if (left == 0.0) return 0.0;
    if (beta == 0.0) return left;
    return -std::expm1(-beta * left) / beta;
}

AnnuitySplit decompose_g(const WeightTable& tbl, double t) {
    if (t >= tbl.tau_R()) return {0.0, 0.0};
    AnnuitySplit s;
    s.g1 = annuity_g1(tbl.config().derived().beta, tbl.tau_R(), t);
    s.g2 = eval_g(tbl, t) - s.g1;
    return s;
}

void human_capital_weights(const WeightTable& tbl, std::size_t i, std::span<double> out) {
    tbl.h_row(i, out);
    const std::size_t m = tbl.n_z();
    const double dz = tbl.lag_grid().dz();
    for (std::size_t j = 0; j <= m; ++j) out[j] *= trapezoid_weight(j, m) * dz;
}

double human_capital(const WeightTable& tbl, double t, double y_now, const HistoryBuffer& hist) {
    if (!(hist.grid() == tbl.lag_grid())) throw GridMismatch("history grid differs from the weight table's lag grid");
    if (t >= tbl.tau_R()) return 0.0;
    const std::size_t m = tbl.n_z();
    const double dz = tbl.lag_grid().dz();
    std::vector<double> w(m + 1);
    const double pos = t / tbl.dt();
    const double node = std::round(pos);
    if (std::abs(pos - node) < 1e-9) {
        human_capital_weights(tbl, static_cast<std::size_t>(node), w);
    } else {
        const double d = tbl.lag_grid().d;
        for (std::size_t j = 0; j <= m; ++j)
            w[j] = eval_h(tbl, t, j == m ? 0.0 : -d + static_cast<double>(j) * dz) * trapezoid_weight(j, m) * dz;
    }
    return eval_g(tbl, t) * y_now + hist.weighted_sum(w);
}

// ------------------------------------------------------------------- adjoint

std::pair<double, std::vector<double>> adjoint_apply(const ModelConfig& cfg, double z0, std::span<const double> z1,
                                                     const LagGrid& grid, double boundary_tol) {
    if (z1.size() != grid.size()) throw GridMismatch("z1 does not match the lag grid");
    if (std::abs(z1[0]) > boundary_tol) {
        std::ostringstream os;
        os << "z1(-d) = " << z1[0] << " violates the boundary condition z1(-d) = 0";
        throw BoundaryViolation(os.str());
    }
    const std::size_t m = grid.n_z;
    const double dz = grid.dz();
    const auto phi = cfg.income().phi.sample_on(grid);
    std::vector<double> out(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
        double deriv;
        if (j == 0)
            deriv = (z1[1] - z1[0]) / dz;
        else if (j == m)
            deriv = (z1[m] - z1[m - 1]) / dz;
        else
            deriv = (z1[j + 1] - z1[j - 1]) / (2.0 * dz);
        out[j] = -deriv + z0 * phi[j];
    }
    return {cfg.income().mu_y * z0 + z1[m], std::move(out)};
}

// ----------------------------------------------------------------- residuals

ResidualReport residual_check(const WeightTable& tbl) {
    ResidualReport rep;
    const std::size_t n = tbl.n_t();
    const std::size_t m = tbl.n_z();
    const double dt = tbl.dt();
    const double beta = tbl.config().derived().beta;
    const double a = tbl.config().market().r + tbl.config().market().delta;
    const auto& g = tbl.g();
    const auto& phi = tbl.phi_samples();

    std::vector<double> prev(m + 1), cur(m + 1), next(m + 1);
    tbl.h_row(0, cur);
    tbl.h_row(1, next);
    for (std::size_t i = 0; i < n; ++i) {
        double gp = (g[i + 1] - g[i - (i > 0)]) / ((i > 0 ? 2.0 : 1.0) * dt);
        if (i == 0 && n >= 2) gp = (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * dt);
        rep.max_ode_residual = std::max(rep.max_ode_residual, std::abs(gp - beta * g[i] + cur[m] + 1.0));
        for (std::size_t j = 0; j <= m; ++j) {
            const double ht = (i == 0) ? (next[j] - cur[j]) / dt : (next[j] - prev[j]) / (2.0 * dt);
            double hz;
            if (j == 0)
                hz = (cur[1] - cur[0]) / dt;
            else if (j == m)
                hz = (cur[m] - cur[m - 1]) / dt;
            else
                hz = (cur[j + 1] - cur[j - 1]) / (2.0 * dt);
            const double res = -a * cur[j] + ht - hz + g[i] * phi[j];
            rep.max_pde_residual = std::max(rep.max_pde_residual, std::abs(res));
        }
        std::swap(prev, cur);
        std::swap(cur, next);
        tbl.h_row(i + 2, next);
    }
    // second-order one-sided difference at the right end
    rep.g_prime_left = n >= 2 ? (3.0 * g[n] - 4.0 * g[n - 1] + g[n - 2]) / (2.0 * dt) : (g[n] - g[n - 1]) / dt;
    rep.g_prime_right = 0.0;
    return rep;
}

std::string ResidualReport::to_text() const {
    std::ostringstream os;
    os << std::setprecision(12);
    os << "max_ode_residual = " << max_ode_residual << '\n'
       << "max_pde_residual = " << max_pde_residual << '\n'
       << "g_prime_left_at_tau_R = " << g_prime_left << '\n'
       << "g_prime_right_at_tau_R = " << g_prime_right << '\n'
       << "g_prime_jump_at_tau_R = " << jump() << '\n';
    return os.str();
}

double operator_defect(const WeightTable& tbl) {
    const std::size_t n = tbl.n_t();
    const std::size_t m = tbl.n_z();
    Solver solver(tbl.config(), tbl.time_grid(), tbl.lag_grid(), tbl.phi_samples());
    std::vector<double> h0(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) h0[i] = tbl.h_at(i, m);
    std::vector<double> g1 = tbl.g();
    solver.update_g(g1, h0, 0, n);
    double defect = sup_diff(g1, tbl.g(), 0, n + 1);
    // F2 applied to the stored g, streamed row by row
    std::vector<double> below(m + 1, 0.0), row(m + 1), stored(m + 1);
    for (std::size_t i = n; i-- > 0;) {
        solver.next_row(tbl.g(), i, below, row);
        tbl.h_row(i, stored);
        for (std::size_t j = 0; j <= m; ++j) defect = std::max(defect, std::abs(row[j] - stored[j]));
        std::swap(below, row);
    }
    return defect;
}

// ----------------------------------------------------------------------- csv

namespace {

void write_comment(std::ostream& os, const std::vector<std::string>& comment) {
    for (const auto& line : comment) os << "# " << line << '\n';
}

}  // namespace

void write_weights_csv(std::ostream& os, const WeightTable& tbl, const std::vector<std::string>& comment) {
    write_comment(os, comment);
    os << "t,g,g1,g2\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i <= tbl.n_t(); ++i) {
        const double t = tbl.time_grid().at(i);
        const double g = tbl.g_at(i);
        const double g1 = i == tbl.n_t() ? 0.0 : annuity_g1(tbl.config().derived().beta, tbl.tau_R(), t);
        os << t << ',' << g << ',' << g1 << ',' << (g - g1) << '\n';
    }
}

void write_h_csv(std::ostream& os, const WeightTable& tbl, const std::vector<std::string>& comment,
                 std::size_t time_stride) {
    write_comment(os, comment);
    os << "t,zeta,h\n";
    os << std::setprecision(17);
    const std::size_t m = tbl.n_z();
    std::vector<double> row(m + 1);
    time_stride = std::max<std::size_t>(1, time_stride);
    for (std::size_t i = 0; i <= tbl.n_t(); i += time_stride) {
        tbl.h_row(i, row);
        const double t = tbl.time_grid().at(i);
        for (std::size_t j = 0; j <= m; ++j) os << t << ',' << tbl.lag_grid().at(j) << ',' << row[j] << '\n';
    }
}

}  // namespace lifecycle
