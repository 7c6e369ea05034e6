#pragma once

#include <Eigen/Dense>

#include <memory>

#include "lifecycle/history.hpp"
#include "lifecycle/weights.hpp"

namespace lifecycle {

// State (t, w, x) with x = (current income, income history on [-d, 0]).
struct StateSnapshot {
    double t = 0.0;
    double w = 0.0;
    double y_now = 0.0;
    HistoryBuffer hist;
};

struct ControlTriple {
    double c = 0.0;          // consumption rate
    double B = 0.0;          // bequest target
    Eigen::VectorXd theta;   // dollar amounts in the risky assets
};

// Value of V on the closure of the admissible region. For gamma > 1 the
// boundary value is minus infinity, carried as a flag rather than as a float.
class ExtendedValue {
public:
    static ExtendedValue finite(double v) { return ExtendedValue(v, false); }
    static ExtendedValue minus_infinity() { return ExtendedValue(0.0, true); }

    bool is_minus_infinity() const { return minus_inf_; }
    bool is_finite() const { return !minus_inf_; }
    // Throws std::logic_error on the minus-infinity sentinel.
    double value() const;

private:
    ExtendedValue(double v, bool minus_inf) : v_(v), minus_inf_(minus_inf) {}
    double v_;
    bool minus_inf_;
};

enum class PolicyMode { pre_retirement, post_retirement, unified };

// Closed-form optimal feedback map. In unified mode the retirement indicator
// R(t) = 1 iff t >= tau_R switches the consumption scale by K^{-b}.
class FeedbackPolicy {
public:
    explicit FeedbackPolicy(std::shared_ptr<const WeightTable> tbl, PolicyMode mode = PolicyMode::unified);

    const WeightTable& table() const { return *tbl_; }
    std::shared_ptr<const WeightTable> table_ptr() const { return tbl_; }
    const ModelConfig& config() const { return tbl_->config(); }
    PolicyMode mode() const { return mode_; }

    // Suboptimal variant used by optimality probes: consumption multiplied by `scale`.
    FeedbackPolicy with_consumption_scale(double scale) const;
    double consumption_scale() const { return c_scale_; }

    bool retired(double t) const;
    // f(t) for this mode; eta_hat throughout in post-retirement mode.
    double f(double t) const;

    // Gamma = w + g(t) y_now + <h(t), hist>; w once retired.
    double total_wealth(const StateSnapshot& s) const;

    // Throws InadmissibleState if Gamma < 0.
    ControlTriple feedback_controls(const StateSnapshot& s) const;

    // Controls for a known total wealth; g_t is g at the same time. No admissibility check.
    void controls_from_total_wealth(double t, double gamma_tw, double y_now, double g_t, ControlTriple& out) const;

    // F(t)^gamma Gamma^{1-gamma} / (1 - gamma). Throws HypothesisViolated, InadmissibleState.
    ExtendedValue value_function(const StateSnapshot& s) const;
    ExtendedValue value_from_total_wealth(double t, double gamma_tw) const;

    // (sigma^T)^{-1} kappa / gamma and (sigma^T)^{-1} sigma_y.
    const Eigen::VectorXd& merton_direction() const { return merton_dir_; }
    const Eigen::VectorXd& income_hedge_direction() const { return hedge_dir_; }

private:
    std::shared_ptr<const WeightTable> tbl_;
    PolicyMode mode_;
    double c_scale_ = 1.0;
    double K_pow_ = 1.0;  // K^{-b}
    double k_pow_ = 1.0;  // k^{-b}
    Eigen::VectorXd merton_dir_;
    Eigen::VectorXd hedge_dir_;
};

// Theta_{f,phi} - Theta_{f,0} at the same state:
// (sigma^T)^{-1} [(kappa/gamma - sigma_y) g2(t) y_now + (kappa/gamma) <h(t), hist>].
// ConfigMismatch unless the tables differ only in phi (and tbl_zero has phi = 0).
Eigen::VectorXd hedging_demand_delta(const StateSnapshot& s, const WeightTable& tbl_phi, const WeightTable& tbl_zero);

struct MertonFractions {
    double c_frac = 0.0;
    double B_frac = 0.0;
    Eigen::VectorXd theta_frac;
};
// Constant post-retirement fractions of financial wealth.
MertonFractions merton_fractions(const ModelConfig& cfg);

}  // namespace lifecycle
