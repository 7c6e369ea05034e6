#include "lifecycle/params.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "lifecycle/errors.hpp"

namespace lifecycle {

namespace {

constexpr double kMaxSigmaCondition = 1e12;

std::size_t checked_steps(double length, double dt, const char* what) {
    const double ratio = length / dt;
    const double n = std::round(ratio);
    if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
        std::ostringstream os;
        os << what << " = " << length << " is not an integer multiple of dt = " << dt;
        throw GridMismatch(os.str());
    }
    return static_cast<std::size_t>(n);
}

}  // namespace

AlignedGrids make_aligned_grids(double tau_R, double d, double dt) {
    if (!(dt > 0.0)) throw GridMismatch("dt must be positive");
    AlignedGrids g;
    g.time.n_t = checked_steps(tau_R, dt, "tau_R");
    g.time.t_end = tau_R;
    g.lag.n_z = checked_steps(d, dt, "d");
    g.lag.d = d;
    return g;
}

// ---------------------------------------------------------------- DelayKernel

DelayKernel DelayKernel::zero() { return DelayKernel{}; }

DelayKernel DelayKernel::constant(double level) {
    DelayKernel k;
    k.kind_ = Kind::constant;
    k.level_ = level;
    return k;
}

DelayKernel DelayKernel::samples(std::vector<double> values) {
    if (values.size() < 2) throw ConfigError("sampled delay kernel needs at least two values");
    DelayKernel k;
    k.kind_ = Kind::samples;
    k.values_ = std::move(values);
    return k;
}

DelayKernel DelayKernel::bump(double center, double mass, double width) {
    DelayKernel k;
    k.kind_ = Kind::bump;
    k.center_ = center;
    k.mass_ = mass;
    k.width_ = width;
    return k;
}

namespace {

double raised_cosine(double zeta, double center, double width) {
    const double u = (zeta - center) / width;
    if (std::abs(u) >= 0.5) return 0.0;
    return (1.0 + std::cos(2.0 * std::numbers::pi * u)) / width;
}

}  // namespace

double DelayKernel::value(double zeta, double d) const {
    switch (kind_) {
        case Kind::zero:
            return 0.0;
        case Kind::constant:
            return level_;
        case Kind::samples: {
            const double n = static_cast<double>(values_.size() - 1);
            const double pos = std::clamp((zeta + d) / d * n, 0.0, n);
            const auto j = std::min(static_cast<std::size_t>(pos), values_.size() - 2);
            const double w = pos - static_cast<double>(j);
            return (1.0 - w) * values_[j] + w * values_[j + 1];
        }
        case Kind::bump:
            if (!(width_ > 0.0))
                throw ConfigError("bump kernel without explicit width has no grid-free value");
            return mass_ * raised_cosine(zeta, center_, width_);
    }
    return 0.0;
}

std::vector<double> DelayKernel::sample_on(const LagGrid& grid) const {
    std::vector<double> out(grid.size());
    if (kind_ != Kind::bump) {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = value(grid.at(j), grid.d);
        return out;
    }
    const double dz = grid.dz();
    const double width = width_ > 0.0 ? width_ : default_bump_cells * dz;
    double integral = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = raised_cosine(grid.at(j), center_, width);
        integral += trapezoid_weight(j, grid.n_z) * dz * out[j];
    }
    if (integral <= 0.0) {
        // narrower than a cell: put the whole mass on the nearest node
        std::fill(out.begin(), out.end(), 0.0);
        const double pos = std::clamp((center_ + grid.d) / dz, 0.0, static_cast<double>(grid.n_z));
        const auto j = static_cast<std::size_t>(std::lround(pos));
        out[j] = mass_ / (trapezoid_weight(j, grid.n_z) * dz);
        return out;
    }
    for (double& v : out) v *= mass_ / integral;
    return out;
}

double DelayKernel::l2_norm(const LagGrid& grid) const {
    const auto s = sample_on(grid);
    double acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        if (!std::isfinite(s[j])) return std::numeric_limits<double>::infinity();
        acc += trapezoid_weight(j, grid.n_z) * s[j] * s[j];
    }
    return std::sqrt(acc * grid.dz());
}

bool DelayKernel::operator==(const DelayKernel& o) const {
    if (is_zero() && o.is_zero()) return true;
    return kind_ == o.kind_ && level_ == o.level_ && center_ == o.center_ && mass_ == o.mass_ &&
           width_ == o.width_ && values_ == o.values_;
}

// ------------------------------------------------------------------- scalars

Eigen::VectorXd market_price_of_risk(const MarketParams& market) {
    const Eigen::Index n = market.n();
    if (market.sigma.rows() != n || market.sigma.cols() != n)
        throw ConfigError("sigma must be n x n with n = size of mu");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(market.sigma);
    const auto& sv = svd.singularValues();
    const double smax = sv(0);
    const double smin = sv(n - 1);
    if (!(smin > 0.0) || !(smax / smin < kMaxSigmaCondition)) {
        std::ostringstream os;
        os << "volatility matrix is numerically singular (condition number "
           << (smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity()) << ")";
        throw SingularSigma(os.str());
    }
    const Eigen::VectorXd excess = market.mu - market.r * Eigen::VectorXd::Ones(n);
    return market.sigma.partialPivLu().solve(excess);
}

DerivedScalars derive_scalars(const MarketParams& market, const IncomeParams& income,
                              const PreferenceParams& prefs) {
    DerivedScalars s;
    s.kappa = market_price_of_risk(market);
    const double ksq = s.kappa.squaredNorm();
    s.beta = market.r + market.delta - income.mu_y + income.sigma_y.dot(s.kappa);
    s.b = 1.0 - 1.0 / prefs.gamma;
    s.hypothesis_margin = prefs.rho + market.delta -
                          (1.0 - prefs.gamma) * (market.r + market.delta + ksq / (2.0 * prefs.gamma));
    s.nu = prefs.gamma / s.hypothesis_margin;
    const double bequest = market.delta * std::pow(prefs.k, -s.b);
    s.eta = (1.0 + bequest) * s.nu;
    s.eta_hat = (std::pow(prefs.K, -s.b) + bequest) * s.nu;
    return s;
}

// --------------------------------------------------------------- ModelConfig

ModelConfig ModelConfig::create(MarketParams market, IncomeParams income, PreferenceParams prefs) {
    const Eigen::Index n = market.n();
    if (n < 1) throw ConfigError("need at least one risky asset");
    if (income.sigma_y.size() != n) throw ConfigError("sigma_y must have one entry per risky asset");
    if (!(income.d > 0.0)) throw ConfigError("delay window d must be positive");
    if (!(income.tau_R > 0.0)) throw ConfigError("retirement time tau_R must be positive");
    if (!(prefs.gamma > 0.0) || prefs.gamma == 1.0)
        throw ConfigError("risk aversion gamma must lie in (0,1) or (1,inf)");
    if (!(prefs.k > 0.0)) throw ConfigError("bequest intensity k must be positive");
    if (!(prefs.K > 0.0)) throw ConfigError("consumption weight K must be positive");
    if (!(market.delta >= 0.0)) throw ConfigError("mortality intensity delta must be non-negative");
    if (income.phi.kind() == DelayKernel::Kind::bump &&
        (income.phi.center() < -income.d || income.phi.center() > 0.0))
        throw ConfigError("bump centre must lie in [-d, 0]");

    ModelConfig cfg;
    cfg.derived_ = derive_scalars(market, income, prefs);
    cfg.sigma_t_lu_.compute(Eigen::MatrixXd(market.sigma.transpose()));
    cfg.market_ = std::move(market);
    cfg.income_ = std::move(income);
    cfg.prefs_ = prefs;
    return cfg;
}

ModelConfig ModelConfig::with_kernel(DelayKernel phi) const {
    ModelConfig copy = *this;
    copy.income_.phi = std::move(phi);
    return copy;
}

Eigen::VectorXd ModelConfig::solve_sigma_transpose(const Eigen::VectorXd& v) const {
    return sigma_t_lu_.solve(v);
}

bool ModelConfig::same_except_kernel(const ModelConfig& o) const {
    return market_.r == o.market_.r && market_.delta == o.market_.delta &&
           market_.mu == o.market_.mu && market_.sigma == o.market_.sigma &&
           income_.mu_y == o.income_.mu_y && income_.sigma_y == o.income_.sigma_y &&
           income_.d == o.income_.d && income_.tau_R == o.income_.tau_R &&
           prefs_.gamma == o.prefs_.gamma && prefs_.rho == o.prefs_.rho && prefs_.k == o.prefs_.k &&
           prefs_.K == o.prefs_.K;
}

// ---------------------------------------------------------------- validation

bool ValidationReport::ok() const {
    return std::all_of(items.begin(), items.end(),
                       [](const ValidationItem& i) { return i.pass || i.informational; });
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& i : items) {
        os << (i.informational ? "[info] " : (i.pass ? "[pass] " : "[FAIL] ")) << i.name << ": "
           << i.message << '\n';
    }
    return os.str();
}

ValidationReport validate_hypotheses(const ModelConfig& cfg) {
    const auto& s = cfg.derived();
    ValidationReport rep;
    {
        std::ostringstream os;
        os << "rho + delta - (1-gamma)(r + delta + |kappa|^2/(2 gamma)) = " << s.hypothesis_margin
           << ", nu = " << s.nu;
        if (!(s.hypothesis_margin > 0.0))
            os << "; the value function is infinite, no optimal policy exists";
        rep.items.push_back({"nu_positive", s.hypothesis_margin > 0.0, false, os.str()});
    }
    {
        std::ostringstream os;
        os << "beta = " << s.beta << (s.beta > 0.0 ? " (positive)" : " (non-positive; accepted)");
        rep.items.push_back({"beta_sign", true, true, os.str()});
    }
    {
        std::ostringstream os;
        os << "rho = " << cfg.prefs().rho;
        rep.items.push_back({"rho_positive", cfg.prefs().rho > 0.0, false, os.str()});
    }
    {
        std::ostringstream os;
        os << "K = " << cfg.prefs().K << (cfg.prefs().K > 1.0 ? "" : " (degenerate, K <= 1)");
        rep.items.push_back({"K_above_one", cfg.prefs().K > 1.0, true, os.str()});
    }
    {
        AlignedGrids g{{1, cfg.income().tau_R}, {256, cfg.income().d}};
        double norm = std::numeric_limits<double>::infinity();
        try {
            norm = cfg.income().phi.l2_norm(g.lag);
        } catch (const ConfigError&) {
        }
        std::ostringstream os;
        os << "||phi||_2 = " << norm;
        rep.items.push_back({"phi_square_integrable", std::isfinite(norm), false, os.str()});
    }
    return rep;
}

void require_hypothesis(const ModelConfig& cfg) {
    const auto& s = cfg.derived();
    if (!(s.hypothesis_margin > 0.0) || !std::isfinite(s.nu)) {
        std::ostringstream os;
        os << "nu <= 0: rho + delta - (1-gamma)(r + delta + |kappa|^2/(2 gamma)) = "
           << s.hypothesis_margin << " must be positive for the value function to be finite";
        throw HypothesisViolated(os.str());
    }
}

double f_factor(const ModelConfig& cfg, double t) {
    require_hypothesis(cfg);
    const auto& s = cfg.derived();
    const double left = std::max(cfg.income().tau_R - t, 0.0);
    return (s.eta_hat - s.eta) * std::exp(-left / s.nu) + s.eta;
}

double F_factor(const ModelConfig& cfg, double t) {
    const auto& p = cfg.prefs();
    return std::exp(-(p.rho + cfg.market().delta) * t / p.gamma) * f_factor(cfg, t);
}

double f_factor_derivative(const ModelConfig& cfg, double t) {
    require_hypothesis(cfg);
    const auto& s = cfg.derived();
    if (t > cfg.income().tau_R) return 0.0;
    return (s.eta_hat - s.eta) * std::exp(-(cfg.income().tau_R - t) / s.nu) / s.nu;
}

}  // namespace lifecycle
