#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "lifecycle/errors.hpp"
#include "lifecycle/policy.hpp"
#include "support.hpp"

using namespace lifecycle;
using testutil::Knobs;

namespace {

std::shared_ptr<const WeightTable> table(const ModelConfig& cfg, double dt = 1.0 / 50) {
    return std::make_shared<const WeightTable>(
        solve_weights(cfg, make_aligned_grids(cfg.income().tau_R, cfg.income().d, dt)));
}

StateSnapshot state(const WeightTable& tbl, double t, double w, double y, double hist_level) {
    return {t, w, y, HistoryBuffer(tbl.lag_grid(), hist_level)};
}

StateSnapshot wavy_state(const WeightTable& tbl, double t, double w, double y) {
    std::vector<double> v(tbl.lag_grid().size());
    for (std::size_t j = 0; j < v.size(); ++j) v[j] = 1.0 + 0.3 * std::sin(0.7 * static_cast<double>(j));
    v.back() = y;
    return {t, w, y, HistoryBuffer(tbl.lag_grid(), std::move(v))};
}

double bpow(const ModelConfig& cfg, double x) { return std::pow(x, -cfg.derived().b); }

}  // namespace

TEST_SUITE("policy") {

TEST_CASE("total wealth examples") {
    const auto tbl = table(testutil::make());
    const FeedbackPolicy pol(tbl);
    CHECK(pol.total_wealth(state(*tbl, 5.0, 2.5, 1.0, 1.0)) == 2.5);
    CHECK(pol.total_wealth(state(*tbl, 6.0, -1.0, 3.0, 3.0)) == -1.0);
    CHECK(pol.total_wealth(state(*tbl, 1.0, 0.7, 0.0, 0.0)) == 0.7);
    const auto s = wavy_state(*tbl, 1.0, 0.5, 1.2);
    CHECK(pol.total_wealth(s) == doctest::Approx(0.5 + human_capital(*tbl, 1.0, 1.2, s.hist)).epsilon(1e-15));

    Knobs k;
    k.phi = DelayKernel::zero();
    const auto flat = table(testutil::make(k));
    const FeedbackPolicy p0(flat);
    CHECK(p0.total_wealth(state(*flat, 2.0, -flat->g()[100], 1.0, 1.0)) == doctest::Approx(0.0));
}

TEST_CASE("boundary controls") {
    const auto tbl = table(testutil::make_two_asset());
    const FeedbackPolicy pol(tbl);
    auto s = wavy_state(*tbl, 1.0, 0.0, 1.3);
    s.w = -pol.total_wealth(s);
    const auto ctl = pol.feedback_controls(s);
    CHECK(ctl.c == 0.0);
    CHECK(ctl.B == 0.0);
    const Eigen::VectorXd expected = -tbl->g()[50] * 1.3 * pol.config().solve_sigma_transpose(pol.config().income().sigma_y);
    CHECK((ctl.theta - expected).norm() <= 1e-12 * expected.norm());
    s.w -= 1e-3;
    CHECK_THROWS_AS(pol.feedback_controls(s), InadmissibleState);
}

TEST_CASE("post-retirement controls are Merton fractions") {
    const auto cfg = testutil::make_two_asset();
    const auto tbl = table(cfg);
    const FeedbackPolicy pol(tbl);
    const double w = 3.0;
    const auto ctl = pol.feedback_controls(state(*tbl, 5.5, w, 2.0, 2.0));
    const double eh = cfg.derived().eta_hat;
    CHECK(ctl.c == doctest::Approx(bpow(cfg, cfg.prefs().K) / eh * w).epsilon(1e-14));
    CHECK(ctl.B == doctest::Approx(bpow(cfg, cfg.prefs().k) / eh * w).epsilon(1e-14));
    const Eigen::VectorXd th = w / cfg.prefs().gamma * cfg.solve_sigma_transpose(cfg.derived().kappa);
    CHECK((ctl.theta - th).norm() <= 1e-14 * th.norm());
    const auto mf = merton_fractions(cfg);
    CHECK(mf.c_frac * w == doctest::Approx(ctl.c));
    CHECK(((mf.theta_frac * w) - ctl.theta).norm() <= 1e-14);
}

TEST_CASE("unit volatility without income risk is pure Merton on total wealth") {
    Knobs k;
    k.sigma = 1.0;
    k.sigma_y = 0.0;
    k.phi = DelayKernel::zero();
    const auto cfg = testutil::make(k);
    const auto tbl = table(cfg);
    const FeedbackPolicy pol(tbl);
    const auto s = state(*tbl, 2.0, 0.4, 1.0, 1.0);
    const double G = pol.total_wealth(s);
    const auto ctl = pol.feedback_controls(s);
    CHECK(ctl.theta[0] == doctest::Approx(cfg.derived().kappa[0] * G / cfg.prefs().gamma).epsilon(1e-14));
}

TEST_CASE("value function examples") {
    const auto cfg = testutil::make();
    const auto tbl = table(cfg);
    const FeedbackPolicy pol(tbl);
    const double w = 2.0;
    const auto v = pol.value_function(state(*tbl, cfg.income().tau_R, w, 1.0, 1.0));
    const double g = cfg.prefs().gamma;
    const double expected = std::exp(-(cfg.prefs().rho + cfg.market().delta) * cfg.income().tau_R) *
                            std::pow(cfg.derived().eta_hat, g) * std::pow(w, 1 - g) / (1 - g);
    CHECK(v.value() == doctest::Approx(expected).epsilon(1e-13));

    auto s = wavy_state(*tbl, 1.0, 0.0, 1.0);
    s.w = -pol.total_wealth(s);
    CHECK(pol.value_function(s).is_minus_infinity());
    CHECK_THROWS_AS(pol.value_function(s).value(), std::logic_error);

    Knobs half;
    half.gamma = 0.5;
    half.rho = 0.05;
    const auto tbl_h = table(testutil::make(half));
    const FeedbackPolicy ph(tbl_h);
    auto sh = wavy_state(*tbl_h, 1.0, 0.0, 1.0);
    sh.w = -ph.total_wealth(sh);
    CHECK(ph.value_function(sh).value() == 0.0);

    Knobs two;
    two.gamma = 2.0;
    const auto tbl_2 = table(testutil::make(two));
    CHECK(FeedbackPolicy(tbl_2).value_from_total_wealth(1.0, 0.0).is_minus_infinity());
    CHECK_THROWS_AS(pol.value_from_total_wealth(1.0, -0.1), InadmissibleState);
}

TEST_CASE("homogeneity of controls and value") {
    const auto cfg = testutil::make_two_asset();
    const auto tbl = table(cfg);
    const FeedbackPolicy pol(tbl);
    const auto s = wavy_state(*tbl, 1.4, 0.8, 1.1);
    const double lam = 2.7;
    std::vector<double> v = s.hist.values();
    for (double& x : v) x *= lam;
    const StateSnapshot big{s.t, lam * s.w, lam * s.y_now, HistoryBuffer(tbl->lag_grid(), v)};
    const auto a = pol.feedback_controls(s);
    const auto b = pol.feedback_controls(big);
    CHECK(b.c == doctest::Approx(lam * a.c).epsilon(1e-13));
    CHECK(b.B == doctest::Approx(lam * a.B).epsilon(1e-13));
    CHECK((b.theta - lam * a.theta).norm() <= 1e-13 * b.theta.norm());
    const double g = cfg.prefs().gamma;
    CHECK(pol.value_function(big).value() ==
          doctest::Approx(std::pow(lam, 1 - g) * pol.value_function(s).value()).epsilon(1e-12));
}

TEST_CASE("hedging demand decomposition") {
    const auto cfg = testutil::make_two_asset();
    const auto tbl_phi = table(cfg);
    const auto tbl_zero = table(cfg.with_kernel(DelayKernel::zero()));
    const auto s = wavy_state(*tbl_phi, 0.9, 0.3, 1.2);
    const Eigen::VectorXd delta = hedging_demand_delta(s, *tbl_phi, *tbl_zero);
    const Eigen::VectorXd direct =
        FeedbackPolicy(tbl_phi).feedback_controls(s).theta - FeedbackPolicy(tbl_zero).feedback_controls(s).theta;
    CHECK((delta - direct).norm() <= 1e-12 * std::max(1.0, direct.norm()));

    const auto zz = hedging_demand_delta(s, *tbl_zero, *tbl_zero);
    CHECK(zz.norm() == 0.0);

    Knobs other;
    other.gamma = 4.0;
    const auto tbl_other = table(testutil::make(other).with_kernel(DelayKernel::zero()));
    CHECK_THROWS_AS(hedging_demand_delta(s, *tbl_phi, *tbl_other), ConfigMismatch);
}

TEST_CASE("hedging demand with sigma_y equal to kappa over gamma") {
    Knobs k;
    k.gamma = 2.0;
    k.sigma_y = (k.excess / k.sigma) / k.gamma;
    const auto cfg = testutil::make(k);
    const auto tbl_phi = table(cfg);
    const auto tbl_zero = table(cfg.with_kernel(DelayKernel::zero()));
    const auto s = wavy_state(*tbl_phi, 1.0, 0.0, 1.0);
    const Eigen::VectorXd delta = hedging_demand_delta(s, *tbl_phi, *tbl_zero);
    double inner = 0.0;
    std::vector<double> w(tbl_phi->lag_grid().size());
    human_capital_weights(*tbl_phi, 50, w);
    inner = s.hist.weighted_sum(w);
    const double expected = (cfg.derived().kappa[0] / k.gamma) * inner / k.sigma;
    CHECK(delta[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("merton fractions") {
    Knobs k;
    k.k = 1.0;
    k.K = 1.0;
    const auto cfg = testutil::make(k);
    const auto mf = merton_fractions(cfg);
    CHECK(mf.c_frac == doctest::Approx(1.0 / cfg.derived().eta_hat));
    CHECK(mf.B_frac == doctest::Approx(1.0 / cfg.derived().eta_hat));
    const auto gen = testutil::make_two_asset();
    const auto mg = merton_fractions(gen);
    CHECK(mg.c_frac * gen.derived().eta_hat * std::pow(gen.prefs().K, gen.derived().b) == doctest::Approx(1.0));
    Knobs stiff;
    stiff.gamma = 1e4;
    const auto ms = merton_fractions(testutil::make(stiff));
    CHECK(std::abs(ms.theta_frac[0]) < 1e-4);
}

TEST_CASE("continuity across retirement") {
    const auto cfg = testutil::make_two_asset();
    const auto tbl = table(cfg, 1.0 / 1000);
    const FeedbackPolicy pol(tbl);
    const double tr = cfg.income().tau_R;
    const auto before = pol.feedback_controls(state(*tbl, tr - 1e-9, 2.0, 1.0, 1.0));
    const auto after = pol.feedback_controls(state(*tbl, tr, 2.0, 1.0, 1.0));
    CHECK(before.B == doctest::Approx(after.B).epsilon(1e-6));
    CHECK((before.theta - after.theta).norm() <= 1e-5);
    CHECK(after.c / before.c == doctest::Approx(bpow(cfg, cfg.prefs().K)).epsilon(1e-6));
    CHECK(pol.retired(tr));
    CHECK_FALSE(pol.retired(tr - 1e-12));
}

TEST_CASE("policy modes") {
    const auto cfg = testutil::make();
    const auto tbl = table(cfg);
    const FeedbackPolicy post(tbl, PolicyMode::post_retirement);
    CHECK(post.f(0.0) == cfg.derived().eta_hat);
    const FeedbackPolicy pre(tbl, PolicyMode::pre_retirement);
    CHECK(pre.f(0.0) == doctest::Approx(f_factor(cfg, 0.0)));
    const auto scaled = FeedbackPolicy(tbl).with_consumption_scale(1.2);
    const auto s = state(*tbl, 1.0, 1.0, 1.0, 1.0);
    CHECK(scaled.feedback_controls(s).c == doctest::Approx(1.2 * FeedbackPolicy(tbl).feedback_controls(s).c));
    CHECK(scaled.consumption_scale() == 1.2);
}

TEST_CASE("controls maximise the Hamiltonian at the closed-form derivatives") {
    // V = F^g G^(1-g)/(1-g): V_w = F^g G^-g, V_ww = -g F^g G^(-g-1); working life only
    const auto cfg = testutil::make_two_asset();
    const auto tbl = table(cfg);
    const FeedbackPolicy pol(tbl);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> tu(0.0, cfg.income().tau_R - 0.05), wu(0.2, 3.0);
    const double g = cfg.prefs().gamma;
    const double disc = cfg.prefs().rho + cfg.market().delta;
    double worst = 0.0;
    for (int n = 0; n < 200; ++n) {
        const double t = std::round(tu(rng) * 50.0) / 50.0;
        const auto s = wavy_state(*tbl, t, wu(rng), 1.0);
        const double G = pol.total_wealth(s);
        const double F = F_factor(cfg, t);
        const double vw = std::pow(F, g) * std::pow(G, -g);
        const double vww = -g * std::pow(F, g) * std::pow(G, -g - 1);
        // u'(c) e^{-disc t} = V_w  =>  c = (e^{disc t} V_w)^{-1/g}; bequest with weight delta k^{1-g}
        const double c = std::pow(std::exp(disc * t) * vw, -1.0 / g);
        const double B = std::pow(std::exp(disc * t) * vw, -1.0 / g) * std::pow(cfg.prefs().k, (1 - g) / g);
        const Eigen::VectorXd th =
            cfg.solve_sigma_transpose(-vw / vww * cfg.derived().kappa - eval_g(*tbl, t) * s.y_now * cfg.income().sigma_y);
        const auto ctl = pol.feedback_controls(s);
        worst = std::max({worst, std::abs(ctl.c / c - 1), std::abs(ctl.B / B - 1),
                          (ctl.theta - th).norm() / th.norm()});
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("consumption and bequest increase with total wealth") {
    const auto tbl = table(testutil::make());
    const FeedbackPolicy pol(tbl);
    double last_c = -1.0, last_B = -1.0;
    for (double w : {-2.0, -1.0, 0.0, 0.5, 3.0}) {
        const auto s = state(*tbl, 0.5, w, 1.0, 1.0);
        if (pol.total_wealth(s) < 0.0) continue;
        const auto ctl = pol.feedback_controls(s);
        CHECK(ctl.c > last_c);
        CHECK(ctl.B > last_B);
        last_c = ctl.c;
        last_B = ctl.B;
    }
}

}  // TEST_SUITE
