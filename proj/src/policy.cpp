#include "lifecycle/policy.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "lifecycle/errors.hpp"

namespace lifecycle {

double ExtendedValue::value() const {
    if (minus_inf_) throw std::logic_error("value function is -infinity at this state");
    return v_;
}

FeedbackPolicy::FeedbackPolicy(std::shared_ptr<const WeightTable> tbl, PolicyMode mode)
    : tbl_(std::move(tbl)), mode_(mode) {
    if (!tbl_) throw std::invalid_argument("FeedbackPolicy needs a weight table");
    const auto& cfg = tbl_->config();
    require_hypothesis(cfg);
    const auto& s = cfg.derived();
    K_pow_ = std::pow(cfg.prefs().K, -s.b);
    k_pow_ = std::pow(cfg.prefs().k, -s.b);
    merton_dir_ = cfg.solve_sigma_transpose(s.kappa / cfg.prefs().gamma);
    hedge_dir_ = cfg.solve_sigma_transpose(cfg.income().sigma_y);
}

FeedbackPolicy FeedbackPolicy::with_consumption_scale(double scale) const {
    FeedbackPolicy p = *this;
    p.c_scale_ = scale;
    return p;
}

bool FeedbackPolicy::retired(double t) const {
    switch (mode_) {
        case PolicyMode::pre_retirement:
            return false;
        case PolicyMode::post_retirement:
            return true;
        case PolicyMode::unified:
            return t >= tbl_->tau_R();
    }
    return false;
}

double FeedbackPolicy::f(double t) const {
    if (mode_ == PolicyMode::post_retirement) return config().derived().eta_hat;
    return f_factor(config(), t);
}

double FeedbackPolicy::total_wealth(const StateSnapshot& s) const {
    if (mode_ == PolicyMode::post_retirement || s.t >= tbl_->tau_R()) return s.w;
    return s.w + human_capital(*tbl_, s.t, s.y_now, s.hist);
}

void FeedbackPolicy::controls_from_total_wealth(double t, double gamma_tw, double y_now, double g_t,
                                                ControlTriple& out) const {
    const double inv_f = 1.0 / f(t);
    const double c_weight = retired(t) ? K_pow_ : 1.0;
    out.c = c_scale_ * c_weight * inv_f * gamma_tw;
    out.B = k_pow_ * inv_f * gamma_tw;
    const double hedge = (mode_ == PolicyMode::post_retirement) ? 0.0 : g_t * y_now;
    out.theta = gamma_tw * merton_dir_ - hedge * hedge_dir_;
}

ControlTriple FeedbackPolicy::feedback_controls(const StateSnapshot& s) const {
    const double gamma_tw = total_wealth(s);
    if (gamma_tw < 0.0) {
        std::ostringstream os;
        os << "total wealth " << gamma_tw << " < 0 at t = " << s.t << ": state is not admissible";
        throw InadmissibleState(os.str());
    }
    ControlTriple out;
    const double g_t = (s.t >= tbl_->tau_R()) ? 0.0 : eval_g(*tbl_, s.t);
    controls_from_total_wealth(s.t, gamma_tw, s.y_now, g_t, out);
    return out;
}

ExtendedValue FeedbackPolicy::value_from_total_wealth(double t, double gamma_tw) const {
    const auto& cfg = config();
    require_hypothesis(cfg);
    if (gamma_tw < 0.0) {
        std::ostringstream os;
        os << "total wealth " << gamma_tw << " < 0: value function undefined";
        throw InadmissibleState(os.str());
    }
    const double g = cfg.prefs().gamma;
    if (gamma_tw == 0.0) return g < 1.0 ? ExtendedValue::finite(0.0) : ExtendedValue::minus_infinity();
    const double F = std::exp(-(cfg.prefs().rho + cfg.market().delta) * t / g) * f(t);
    // F^g Gamma^{1-g} / (1-g), in logs to keep large exponents finite
    const double logv = g * std::log(F) + (1.0 - g) * std::log(gamma_tw);
    return ExtendedValue::finite(std::exp(logv) / (1.0 - g));
}

ExtendedValue FeedbackPolicy::value_function(const StateSnapshot& s) const {
    return value_from_total_wealth(s.t, total_wealth(s));
}

Eigen::VectorXd hedging_demand_delta(const StateSnapshot& s, const WeightTable& tbl_phi, const WeightTable& tbl_zero) {
    if (!tbl_phi.config().same_except_kernel(tbl_zero.config()))
        throw ConfigMismatch("hedging demand tables differ in more than the delay kernel");
    if (!tbl_zero.kernel_zero()) throw ConfigMismatch("reference table must have phi = 0");
    if (!(tbl_phi.lag_grid() == tbl_zero.lag_grid()) || tbl_phi.n_t() != tbl_zero.n_t())
        throw ConfigMismatch("hedging demand tables use different grids");
    const auto& cfg = tbl_phi.config();
    const Eigen::VectorXd k_over_g = cfg.derived().kappa / cfg.prefs().gamma;
    if (s.t >= tbl_phi.tau_R()) return Eigen::VectorXd::Zero(k_over_g.size());
    // g2 relative to the no-delay table, so the identity with two feedback evaluations is exact
    const double g2 = eval_g(tbl_phi, s.t) - eval_g(tbl_zero, s.t);
    const double past = human_capital(tbl_phi, s.t, 0.0, s.hist);
    const Eigen::VectorXd inner = (k_over_g - cfg.income().sigma_y) * (g2 * s.y_now) + k_over_g * past;
    return cfg.solve_sigma_transpose(inner);
}

MertonFractions merton_fractions(const ModelConfig& cfg) {
    require_hypothesis(cfg);
    const auto& s = cfg.derived();
    MertonFractions m;
    m.c_frac = std::pow(cfg.prefs().K, -s.b) / s.eta_hat;
    m.B_frac = std::pow(cfg.prefs().k, -s.b) / s.eta_hat;
    m.theta_frac = cfg.solve_sigma_transpose(s.kappa / cfg.prefs().gamma);
    return m;
}

}  // namespace lifecycle
