#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fkc/rng.hpp"
#include "fkc/schedules.hpp"
#include "test_util.hpp"

using namespace fkc;

TEST_CASE("VE geometric sigma endpoints and midpoint") {
    auto s = NoiseSchedule::ve_geometric(0.01, 500.0, 2);
    CHECK(s.sigma_at(0.0) == Catch::Approx(0.01));
    CHECK(s.sigma_at(1.0) == Catch::Approx(500.0));
    // geometric mean at the midpoint
    CHECK(s.sigma_at(0.5) == Catch::Approx(std::sqrt(0.01 * 500.0)).epsilon(1e-12));
    CHECK(s.sigma_at(0.5) == Catch::Approx(2.2360679774997896).epsilon(1e-12));
}

TEST_CASE("sigma_at rejects times outside [0,1]") {
    auto s = NoiseSchedule::ve_geometric(0.01, 500.0, 1);
    CHECK_THROWS_AS(s.sigma_at(-0.1), DomainError);
    CHECK_THROWS_AS(s.sigma_at(1.1), DomainError);
}

TEST_CASE("VE drift is zero") {
    auto s = NoiseSchedule::ve_geometric(0.01, 500.0, 3);
    std::vector<double> x = {1.0, -2.0, 0.5};
    auto [f, div] = s.drift_at(x, 0.37);
    for (double v : f) CHECK(v == 0.0);
    CHECK(div == 0.0);
}

TEST_CASE("VP drift formula and x-independent divergence") {
    // constant beta_hat = 2
    auto s = NoiseSchedule::vp_linear_beta(2.0, 2.0, 2);
    std::vector<double> x = {1.0, 1.0};
    auto [f, div] = s.drift_at(x, 0.4);
    CHECK(f[0] == Catch::Approx(-1.0));
    CHECK(f[1] == Catch::Approx(-1.0));
    CHECK(div == Catch::Approx(-2.0));

    auto lin = NoiseSchedule::vp_linear_beta(0.1, 20.0, 2);
    CounterRng rng(7, 0);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> x1 = {rng.normal(), rng.normal()};
        std::vector<double> x2 = {rng.normal(), rng.normal()};
        double u = rng.uniform();
        CHECK(lin.drift_at(x1, u).second == lin.drift_at(x2, u).second);
    }
}

TEST_CASE("drift_at checks dimensions") {
    auto s = NoiseSchedule::vp_linear_beta(0.1, 20.0, 2);
    std::vector<double> x = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(s.drift_at(x, 0.5), ShapeError);
}

TEST_CASE("VP marginal params") {
    auto s = NoiseSchedule::vp_linear_beta(1.0, 1.0, 1);
    SECTION("no noise at u = 0") {
        auto [alpha, sigma2] = s.vp_marginal_params(0.0);
        CHECK(alpha == Catch::Approx(1.0));
        CHECK(sigma2 == Catch::Approx(0.0).margin(1e-15));
    }
    SECTION("constant beta_hat = 1 at u = 1") {
        auto [alpha, sigma2] = s.vp_marginal_params(1.0);
        CHECK(alpha == Catch::Approx(std::exp(-0.5)).epsilon(1e-12));
        CHECK(sigma2 == Catch::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    }
    SECTION("alpha^2 + sigma^2 = 1") {
        auto lin = NoiseSchedule::vp_linear_beta(0.1, 20.0, 1);
        for (int i = 0; i <= 50; ++i) {
            auto [a, s2] = lin.vp_marginal_params(i / 50.0);
            CHECK(a * a + s2 == Catch::Approx(1.0).epsilon(1e-12));
        }
    }
    SECTION("unsupported kind") {
        auto ve = NoiseSchedule::ve_geometric(0.01, 500.0, 1);
        CHECK_THROWS_AS(ve.vp_marginal_params(0.5), ParamError);
    }
}

TEST_CASE("VP discrete product matches continuous marginal") {
    // discretization beta_i = beta_hat(i/N)/N, N = 1000
    const int N = 1000;
    auto s = NoiseSchedule::vp_linear_beta(0.1, 2.0, 1);
    double log_prod = 0.0;
    for (int i = 1; i <= N; ++i) {
        double beta_i = s.beta_hat(static_cast<double>(i) / N) / N;
        log_prod += 0.5 * std::log(1.0 - beta_i);
        double alpha_discrete = std::exp(log_prod);
        double sigma2_discrete = 1.0 - std::exp(2.0 * log_prod);
        auto [alpha, sigma2] = s.vp_marginal_params(static_cast<double>(i) / N);
        REQUIRE(std::abs(alpha_discrete - alpha) <= 1e-3);
        REQUIRE(std::abs(sigma2_discrete - sigma2) <= 1e-3);
    }
}

TEST_CASE("VE accumulated variance closed form vs quadrature") {
    auto s = NoiseSchedule::ve_geometric(0.01, 500.0, 1);
    auto integrand = [&](double u) {
        double sig = s.sigma_at(u);
        return sig * sig;
    };
    for (double u : {0.1, 0.25, 0.5, 0.75, 1.0}) {
        double closed = s.accumulated_variance(u);
        double quad = testutil::simpson(integrand, 0.0, u, 20000);
        CHECK(std::abs(closed - quad) <= 1e-6 * std::abs(closed));
    }
    CHECK(s.accumulated_variance(0.0) == 0.0);
    auto vp = NoiseSchedule::vp_linear_beta(0.1, 20.0, 1);
    CHECK_THROWS_AS(vp.accumulated_variance(0.5), ParamError);
}

TEST_CASE("schedule constructors validate parameters") {
    CHECK_THROWS_AS(NoiseSchedule::ve_geometric(-1.0, 500.0, 1), ParamError);
    CHECK_THROWS_AS(NoiseSchedule::ve_geometric(1.0, 0.5, 1), ParamError);
    CHECK_THROWS_AS(NoiseSchedule::ve_geometric(0.01, 500.0, 0), ParamError);
    CHECK_THROWS_AS(NoiseSchedule::vp_linear_beta(0.0, 20.0, 1), ParamError);
}
