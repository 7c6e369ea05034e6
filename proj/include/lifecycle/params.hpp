#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "lifecycle/grid.hpp"

namespace lifecycle {

// Weight function phi on [-d, 0] through which past income feeds the income drift.
class DelayKernel {
public:
    enum class Kind { zero, constant, samples, bump };

    static DelayKernel zero();
    static DelayKernel constant(double level);
    // Values on a uniform grid over [-d, 0] (first value at -d, last at 0),
    // linearly interpolated in between. Needs at least two values.
    static DelayKernel samples(std::vector<double> values);
    // Raised-cosine bump centred at `center` with total integral `mass`.
    // width <= 0 selects `default_bump_cells` cells of whatever grid it is sampled on.
    static DelayKernel bump(double center, double mass, double width = 0.0);

    static constexpr int default_bump_cells = 4;

    Kind kind() const { return kind_; }
    double level() const { return level_; }
    double center() const { return center_; }
    double mass() const { return mass_; }
    double width() const { return width_; }
    const std::vector<double>& sample_values() const { return values_; }

    // Pointwise value at zeta in [-d, 0]. A bump without explicit width has no
    // grid-free value and throws ConfigError.
    double value(double zeta, double d) const;

    // Node values on `grid`. Bumps are renormalised so their trapezoid integral
    // equals `mass` exactly.
    std::vector<double> sample_on(const LagGrid& grid) const;

    // Trapezoid L2 norm on `grid`; infinite if any sample is not finite.
    double l2_norm(const LagGrid& grid) const;

    bool is_zero() const { return kind_ == Kind::zero || (kind_ == Kind::constant && level_ == 0.0); }
    bool is_constant() const { return kind_ == Kind::zero || kind_ == Kind::constant; }

    bool operator==(const DelayKernel& o) const;

private:
    Kind kind_ = Kind::zero;
    double level_ = 0.0;
    double center_ = 0.0;
    double mass_ = 0.0;
    double width_ = 0.0;
    std::vector<double> values_;
};

struct MarketParams {
    double r = 0.0;
    Eigen::VectorXd mu;     // drift of the n risky assets
    Eigen::MatrixXd sigma;  // n x n volatility matrix
    double delta = 0.0;     // mortality intensity

    Eigen::Index n() const { return mu.size(); }
};

struct IncomeParams {
    double mu_y = 0.0;
    Eigen::VectorXd sigma_y;
    double d = 1.0;
    double tau_R = 1.0;
    DelayKernel phi;
};

struct PreferenceParams {
    double gamma = 2.0;
    double rho = 0.0;
    double k = 1.0;
    double K = 1.0;
};

struct DerivedScalars {
    Eigen::VectorXd kappa;
    double beta = 0.0;
    double b = 0.0;
    // rho + delta - (1 - gamma)(r + delta + |kappa|^2 / (2 gamma)); nu = gamma / this.
    double hypothesis_margin = 0.0;
    double nu = 0.0;
    double eta = 0.0;
    double eta_hat = 0.0;

    double kappa_sq() const { return kappa.squaredNorm(); }
};

// Solves sigma * kappa = mu - r 1; SingularSigma if sigma is numerically singular.
Eigen::VectorXd market_price_of_risk(const MarketParams& market);

DerivedScalars derive_scalars(const MarketParams& market, const IncomeParams& income,
                              const PreferenceParams& prefs);

class ModelConfig {
public:
    // Checks shapes and the ranges the closed forms cannot do without, then
    // computes the derived scalars. Throws ConfigError or SingularSigma.
    static ModelConfig create(MarketParams market, IncomeParams income, PreferenceParams prefs);

    const MarketParams& market() const { return market_; }
    const IncomeParams& income() const { return income_; }
    const PreferenceParams& prefs() const { return prefs_; }
    const DerivedScalars& derived() const { return derived_; }

    // Copy with a different kernel (same everything else).
    ModelConfig with_kernel(DelayKernel phi) const;

    // (sigma^T)^{-1} v
    Eigen::VectorXd solve_sigma_transpose(const Eigen::VectorXd& v) const;

    bool same_except_kernel(const ModelConfig& o) const;

private:
    MarketParams market_;
    IncomeParams income_;
    PreferenceParams prefs_;
    DerivedScalars derived_;
    Eigen::PartialPivLU<Eigen::MatrixXd> sigma_t_lu_;
};

struct ValidationItem {
    std::string name;
    bool pass = true;
    bool informational = false;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationItem> items;

    // True when every non-informational item passes.
    bool ok() const;
    std::string summary() const;
};

ValidationReport validate_hypotheses(const ModelConfig& cfg);

// Throws HypothesisViolated (with a diagnostic) unless nu > 0.
void require_hypothesis(const ModelConfig& cfg);

// f(t) = (eta_hat - eta) exp(-(tau_R - t)^+ / nu) + eta
double f_factor(const ModelConfig& cfg, double t);
// F(t) = exp(-(rho + delta) t / gamma) f(t)
double F_factor(const ModelConfig& cfg, double t);
// d f / d t, zero for t > tau_R (left derivative at tau_R).
double f_factor_derivative(const ModelConfig& cfg, double t);

}  // namespace lifecycle
