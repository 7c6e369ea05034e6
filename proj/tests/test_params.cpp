#include <doctest.h>

#include <cmath>

#include "lifecycle/errors.hpp"
#include "lifecycle/params.hpp"
#include "support.hpp"

using namespace lifecycle;
using testutil::Knobs;

TEST_SUITE("params") {

TEST_CASE("zero excess return gives kappa = 0 and beta = r + delta - mu_y") {
    Knobs k;
    k.excess = 0.0;
    const auto cfg = testutil::make(k);
    CHECK(cfg.derived().kappa.norm() == 0.0);
    CHECK(cfg.derived().beta == doctest::Approx(k.r + k.delta - k.mu_y).epsilon(1e-15));
}

TEST_CASE("beta cancels to zero") {
    Knobs k;
    k.excess = 0.0;
    k.r = 0.02;
    k.delta = 0.01;
    k.mu_y = 0.03;
    const auto cfg = testutil::make(k);
    CHECK(std::abs(cfg.derived().beta) < 1e-15);
}

TEST_CASE("nu by hand: gamma 2, rho 0.02, delta 0.01, r 0.02, |kappa|^2 = 0.09") {
    Knobs k;
    k.gamma = 2.0;
    k.rho = 0.02;
    k.delta = 0.01;
    k.r = 0.02;
    k.sigma = 1.0;
    k.excess = 0.3;
    const auto cfg = testutil::make(k);
    CHECK(cfg.derived().kappa_sq() == doctest::Approx(0.09).epsilon(1e-14));
    CHECK(cfg.derived().hypothesis_margin == doctest::Approx(0.0825).epsilon(1e-13));
    CHECK(cfg.derived().nu == doctest::Approx(2.0 / 0.0825).epsilon(1e-13));
    CHECK(cfg.derived().nu == doctest::Approx(24.2424).epsilon(1e-5));
    const auto rep = validate_hypotheses(cfg);
    CHECK(rep.ok());
}

TEST_CASE("eta and eta_hat formulas") {
    Knobs k;
    k.k = 1.7;
    k.K = 1.4;
    const auto cfg = testutil::make(k);
    const auto& s = cfg.derived();
    CHECK(s.b == doctest::Approx(1.0 - 1.0 / k.gamma));
    CHECK(s.eta == doctest::Approx((1.0 + k.delta * std::pow(k.k, -s.b)) * s.nu).epsilon(1e-14));
    CHECK(s.eta_hat == doctest::Approx((std::pow(k.K, -s.b) + k.delta * std::pow(k.k, -s.b)) * s.nu).epsilon(1e-14));
}

TEST_CASE("hypothesis fails for gamma 0.5, rho 0, delta 0, r 0.1, kappa 0") {
    Knobs k;
    k.gamma = 0.5;
    k.rho = 0.0;
    k.delta = 0.0;
    k.r = 0.1;
    k.excess = 0.0;
    const auto cfg = testutil::make(k);
    CHECK(cfg.derived().hypothesis_margin == doctest::Approx(-0.05).epsilon(1e-14));
    const auto rep = validate_hypotheses(cfg);
    CHECK_FALSE(rep.ok());
    CHECK_THROWS_AS(require_hypothesis(cfg), HypothesisViolated);
    CHECK_THROWS_AS(f_factor(cfg, 0.0), HypothesisViolated);
}

TEST_CASE("negative beta passes with an informational note") {
    Knobs k;
    k.mu_y = 0.08;
    const auto cfg = testutil::make(k);
    REQUIRE(cfg.derived().beta < 0.0);
    const auto rep = validate_hypotheses(cfg);
    CHECK(rep.ok());
    bool saw = false;
    for (const auto& it : rep.items)
        if (it.name == "beta_sign") {
            saw = true;
            CHECK(it.informational);
        }
    CHECK(saw);
}

TEST_CASE("f factor endpoints and plateau") {
    const auto cfg = testutil::make();
    const auto& s = cfg.derived();
    const double tau = cfg.income().tau_R;
    CHECK(f_factor(cfg, tau) == doctest::Approx(s.eta_hat).epsilon(1e-15));
    CHECK(f_factor(cfg, tau + 1e6) == s.eta_hat);
    CHECK(f_factor(cfg, 0.0) == doctest::Approx((s.eta_hat - s.eta) * std::exp(-tau / s.nu) + s.eta));
    CHECK(F_factor(cfg, 2.0) ==
          doctest::Approx(std::exp(-(cfg.prefs().rho + cfg.market().delta) * 2.0 / cfg.prefs().gamma) * f_factor(cfg, 2.0)));
}

TEST_CASE("K = 1 makes f constant") {
    Knobs k;
    k.K = 1.0;
    const auto cfg = testutil::make(k);
    for (double t : {0.0, 1.0, 4.9, 5.0, 50.0}) CHECK(f_factor(cfg, t) == doctest::Approx(cfg.derived().eta).epsilon(1e-14));
    bool flagged = false;
    for (const auto& it : validate_hypotheses(cfg).items)
        if (it.name == "K_above_one") flagged = !it.pass;
    CHECK(flagged);
}

TEST_CASE("f is monotone and bounded by eta and eta_hat") {
    for (double K : {0.8, 1.2, 3.0}) {
        Knobs k;
        k.K = K;
        const auto cfg = testutil::make(k);
        const double lo = std::min(cfg.derived().eta, cfg.derived().eta_hat);
        const double hi = std::max(cfg.derived().eta, cfg.derived().eta_hat);
        double prev = f_factor(cfg, 0.0);
        const double sgn = cfg.derived().eta_hat >= cfg.derived().eta ? 1.0 : -1.0;
        for (int i = 0; i <= 200; ++i) {
            const double t = 0.05 * i;
            const double f = f_factor(cfg, t);
            CHECK(f >= lo * (1 - 1e-15));
            CHECK(f <= hi * (1 + 1e-15));
            CHECK(sgn * (f - prev) >= -1e-15);
            prev = f;
        }
    }
}

TEST_CASE("f derivative matches finite differences") {
    const auto cfg = testutil::make();
    for (double t : {0.3, 2.0, 4.5}) {
        const double h = 1e-5;
        const double fd = (f_factor(cfg, t + h) - f_factor(cfg, t - h)) / (2 * h);
        CHECK(f_factor_derivative(cfg, t) == doctest::Approx(fd).epsilon(1e-7));
    }
    CHECK(f_factor_derivative(cfg, 7.0) == 0.0);
}

TEST_CASE("kappa is invariant under joint scaling of excess return and sigma") {
    const auto cfg = testutil::make_two_asset();
    MarketParams m = cfg.market();
    const double lambda = 2.5;
    m.sigma *= lambda;
    m.mu = Eigen::VectorXd::Constant(2, m.r) + lambda * (cfg.market().mu - Eigen::VectorXd::Constant(2, m.r));
    const Eigen::VectorXd k2 = market_price_of_risk(m);
    CHECK((k2 - cfg.derived().kappa).norm() <= 1e-14 * cfg.derived().kappa.norm());
}

TEST_CASE("kappa by solve and by explicit inverse agree") {
    const auto cfg = testutil::make_two_asset();
    const auto& m = cfg.market();
    const Eigen::VectorXd excess = m.mu - Eigen::VectorXd::Constant(2, m.r);
    const Eigen::VectorXd via_inv = m.sigma.inverse() * excess;
    CHECK((via_inv - cfg.derived().kappa).norm() <= 1e-10 * via_inv.norm());
    CHECK((m.sigma * cfg.derived().kappa - excess).norm() <= 1e-12 * excess.norm());
}

TEST_CASE("sigma transpose solve") {
    const auto cfg = testutil::make_two_asset();
    const Eigen::VectorXd v(Eigen::Vector2d(0.3, -0.7));
    const Eigen::VectorXd x = cfg.solve_sigma_transpose(v);
    CHECK((cfg.market().sigma.transpose() * x - v).norm() < 1e-14);
}

TEST_CASE("singular sigma is rejected") {
    MarketParams m;
    m.r = 0.02;
    m.mu = Eigen::Vector2d(0.05, 0.05);
    m.sigma = (Eigen::Matrix2d() << 0.2, 0.1, 0.4, 0.2).finished();
    CHECK_THROWS_AS(market_price_of_risk(m), SingularSigma);
    IncomeParams in;
    in.sigma_y = Eigen::Vector2d(0.0, 0.0);
    PreferenceParams p;
    p.gamma = 2.0;
    p.rho = 0.02;
    CHECK_THROWS_AS(ModelConfig::create(m, in, p), SingularSigma);
}

TEST_CASE("construction rejects out-of-range parameters") {
    auto bad = [](auto mutate) {
        Knobs k;
        mutate(k);
        return testutil::make(k);
    };
    CHECK_THROWS_AS(bad([](Knobs& k) { k.gamma = 1.0; }), ConfigError);
    CHECK_THROWS_AS(bad([](Knobs& k) { k.gamma = -1.0; }), ConfigError);
    CHECK_THROWS_AS(bad([](Knobs& k) { k.d = 0.0; }), ConfigError);
    CHECK_THROWS_AS(bad([](Knobs& k) { k.tau_R = -1.0; }), ConfigError);
    CHECK_THROWS_AS(bad([](Knobs& k) { k.k = 0.0; }), ConfigError);
    CHECK_THROWS_AS(bad([](Knobs& k) { k.K = 0.0; }), ConfigError);
    CHECK_THROWS_AS(bad([](Knobs& k) { k.delta = -0.01; }), ConfigError);
    CHECK_THROWS_AS(bad([](Knobs& k) { k.phi = DelayKernel::bump(0.5, 0.01); }), ConfigError);

    MarketParams m;
    m.r = 0.02;
    m.mu = Eigen::VectorXd::Constant(1, 0.06);
    m.sigma = Eigen::MatrixXd::Constant(1, 1, 0.2);
    IncomeParams in;
    in.sigma_y = Eigen::Vector2d(0.1, 0.1);
    PreferenceParams p;
    CHECK_THROWS_AS(ModelConfig::create(m, in, p), ConfigError);
}

TEST_CASE("rho = 0 is accepted at construction but fails validation") {
    Knobs k;
    k.rho = 0.0;
    k.gamma = 3.0;
    const auto cfg = testutil::make(k);
    CHECK_FALSE(validate_hypotheses(cfg).ok());
    CHECK(validate_hypotheses(cfg).summary().find("rho") != std::string::npos);
}

TEST_CASE("delay kernels") {
    const LagGrid grid{100, 2.0};
    SUBCASE("zero") {
        const auto z = DelayKernel::zero();
        CHECK(z.is_zero());
        for (double v : z.sample_on(grid)) CHECK(v == 0.0);
        CHECK(z.value(-1.3, 2.0) == 0.0);
    }
    SUBCASE("constant") {
        const auto c = DelayKernel::constant(0.3);
        CHECK(c.value(-0.7, 2.0) == 0.3);
        CHECK(c.l2_norm(grid) == doctest::Approx(0.3 * std::sqrt(2.0)).epsilon(1e-12));
    }
    SUBCASE("samples interpolate linearly") {
        const auto s = DelayKernel::samples({0.0, 1.0, 4.0});
        CHECK(s.value(-2.0, 2.0) == 0.0);
        CHECK(s.value(-1.0, 2.0) == 1.0);
        CHECK(s.value(-0.5, 2.0) == doctest::Approx(2.5));
        CHECK(s.value(0.0, 2.0) == 4.0);
    }
    SUBCASE("bump integrates to its mass on the grid") {
        for (double width : {0.0, 0.1, 0.5}) {
            const auto b = DelayKernel::bump(-1.0, 0.03, width);
            const auto v = b.sample_on(grid);
            double integral = 0.0;
            for (std::size_t j = 0; j < v.size(); ++j) integral += trapezoid_weight(j, grid.n_z) * grid.dz() * v[j];
            CHECK(integral == doctest::Approx(0.03).epsilon(1e-12));
            for (double x : v) CHECK(x >= 0.0);
        }
        // default width spans four cells of whatever grid it is sampled on
        const auto v = DelayKernel::bump(-1.0, 0.03).sample_on(grid);
        int nonzero = 0;
        for (double x : v) nonzero += x > 0.0;
        CHECK(nonzero <= 4);
        CHECK(nonzero >= 2);
    }
    SUBCASE("non-finite samples have infinite norm and fail validation") {
        const auto s = DelayKernel::samples({0.0, std::nan(""), 1.0});
        CHECK_FALSE(std::isfinite(s.l2_norm(grid)));
        Knobs k;
        k.phi = s;
        k.d = 2.0;
        const auto cfg = testutil::make(k);
        CHECK_FALSE(validate_hypotheses(cfg).ok());
    }
}

TEST_CASE("same_except_kernel and with_kernel") {
    const auto a = testutil::make();
    const auto b = a.with_kernel(DelayKernel::zero());
    CHECK(a.same_except_kernel(b));
    CHECK(b.income().phi.is_zero());
    Knobs k;
    k.rho = 0.03;
    CHECK_FALSE(a.same_except_kernel(testutil::make(k)));
}

TEST_CASE("aligned grids") {
    const auto g = make_aligned_grids(40.0, 5.0, 1.0 / 250.0);
    CHECK(g.time.n_t == 10000);
    CHECK(g.lag.n_z == 1250);
    CHECK(g.time.dt() == doctest::Approx(g.lag.dz()).epsilon(1e-15));
    CHECK(g.lag.at(0) == -5.0);
    CHECK(g.lag.at(1250) == 0.0);
    CHECK_THROWS_AS(make_aligned_grids(40.0, 5.0, 0.3), GridMismatch);
}

}  // TEST_SUITE
