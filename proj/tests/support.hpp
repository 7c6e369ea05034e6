#pragma once

#include <Eigen/Dense>

#include "lifecycle/params.hpp"

namespace testutil {

struct Knobs {
    double r = 0.02;
    double excess = 0.04;  // mu - r for a single asset
    double sigma = 0.2;
    double delta = 0.01;
    double mu_y = 0.01;
    double sigma_y = 0.1;
    double d = 1.0;
    double tau_R = 5.0;
    lifecycle::DelayKernel phi = lifecycle::DelayKernel::constant(0.02);
    double gamma = 3.0;
    double rho = 0.02;
    double k = 1.0;
    double K = 1.2;
};

inline lifecycle::ModelConfig make(const Knobs& p = {}) {
    lifecycle::MarketParams m;
    m.r = p.r;
    m.mu = Eigen::VectorXd::Constant(1, p.r + p.excess);
    m.sigma = Eigen::MatrixXd::Constant(1, 1, p.sigma);
    m.delta = p.delta;
    lifecycle::IncomeParams in;
    in.mu_y = p.mu_y;
    in.sigma_y = Eigen::VectorXd::Constant(1, p.sigma_y);
    in.d = p.d;
    in.tau_R = p.tau_R;
    in.phi = p.phi;
    lifecycle::PreferenceParams pr;
    pr.gamma = p.gamma;
    pr.rho = p.rho;
    pr.k = p.k;
    pr.K = p.K;
    return lifecycle::ModelConfig::create(m, in, pr);
}

// Two correlated assets with income exposed to both.
inline lifecycle::ModelConfig make_two_asset(lifecycle::DelayKernel phi = lifecycle::DelayKernel::constant(0.02)) {
    lifecycle::MarketParams m;
    m.r = 0.02;
    m.mu = Eigen::Vector2d(0.06, 0.045);
    m.sigma = (Eigen::Matrix2d() << 0.2, 0.0, 0.05, 0.15).finished();
    m.delta = 0.01;
    lifecycle::IncomeParams in;
    in.mu_y = 0.01;
    in.sigma_y = Eigen::Vector2d(0.05, 0.04);
    in.d = 1.0;
    in.tau_R = 5.0;
    in.phi = phi;
    lifecycle::PreferenceParams pr;
    pr.gamma = 3.0;
    pr.rho = 0.02;
    pr.k = 1.5;
    pr.K = 1.2;
    return lifecycle::ModelConfig::create(m, in, pr);
}

}  // namespace testutil
