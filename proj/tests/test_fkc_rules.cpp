#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "fkc/builders.hpp"
#include "fkc/conversion_rules.hpp"
#include "fkc/pde_residual.hpp"
#include "test_util.hpp"

using namespace fkc;

namespace {

struct ScoreOnlyModel : ScoreModel {
    std::shared_ptr<const ScoreModel> inner;
    explicit ScoreOnlyModel(std::shared_ptr<const ScoreModel> m) : inner(std::move(m)) {}
    int dim() const override { return inner->dim(); }
    void score(std::span<const double> x, double t, std::span<double> out) const override {
        inner->score(x, t, out);
    }
    bool has_log_density() const override { return false; }
    bool has_laplacian() const override { return false; }
};

NoiseSchedule vp2() { return NoiseSchedule::vp_linear_beta(0.1, 12.0, 2); }

std::shared_ptr<DiffusedGaussianMixture> gauss2(const NoiseSchedule& s, double mx, double my,
                                                double v) {
    return std::make_shared<DiffusedGaussianMixture>(GaussianMixture::single({mx, my}, v), s);
}

}  // namespace

TEST_CASE("annealed builder coefficients") {
    auto sched = vp2();
    auto m = gauss2(sched, 0.3, -0.2, 1.2);
    std::vector<double> x = {0.7, -1.1};
    double t = 0.4;
    double sigma = sched.sigma_at(1.0 - t);
    auto s = m->score_vec(x, t);
    auto [f, divf] = sched.drift_at(x, 1.0 - t);

    SECTION("beta = 1 is the unmodified model") {
        for (double a : {0.0, 0.5, 1.3}) {
            auto sde = build_annealed(m, sched, AnnealSpec::fixed(1.0, a));
            CHECK(sde.weight_rate(x, t) == Catch::Approx(0.0).margin(1e-14));
            auto v = sde.drift_vec(x, t);
            for (int i = 0; i < 2; ++i)
                CHECK(v[i] == Catch::Approx(-f[i] + sigma * sigma * s[i]).epsilon(1e-12));
            CHECK(sde.diffusion_scale(t) == Catch::Approx(sigma).epsilon(1e-12));
        }
    }
    SECTION("target score: a = 0, beta = 2") {
        auto sde = build_annealed(m, sched, AnnealSpec::fixed(2.0, 0.0));
        auto v = sde.drift_vec(x, t);
        for (int i = 0; i < 2; ++i)
            CHECK(v[i] == Catch::Approx(-f[i] + 2.0 * sigma * sigma * s[i]).epsilon(1e-12));
        CHECK(sde.diffusion_scale(t) == Catch::Approx(sigma).epsilon(1e-12));
    }
    SECTION("tempered noise: a = 1/2, beta = 2") {
        auto sde = build_annealed(m, sched, AnnealSpec::fixed(2.0, 0.5));
        auto v = sde.drift_vec(x, t);
        for (int i = 0; i < 2; ++i)
            CHECK(v[i] == Catch::Approx(-f[i] + 1.5 * sigma * sigma * s[i]).epsilon(1e-12));
        CHECK(sde.diffusion_scale(t) == Catch::Approx(sigma / std::sqrt(2.0)).epsilon(1e-12));
    }
    SECTION("weight formula") {
        auto sde = build_annealed(m, sched, AnnealSpec::fixed(3.0, 0.0));
        double expected = 2.0 * (divf + 0.5 * sigma * sigma * 3.0 * norm_sq(s));
        CHECK(sde.weight_rate(x, t) == Catch::Approx(expected).epsilon(1e-12));
    }
    SECTION("constraint violation") {
        CHECK_THROWS_AS(build_annealed(m, sched, AnnealSpec::fixed(0.5, -1.0)), ParamError);
        CHECK_THROWS_AS(build_annealed(m, sched, AnnealSpec::fixed(-2.0, 0.0)), ParamError);
    }
    SECTION("time-dependent beta requires log density") {
        auto score_only = std::make_shared<ScoreOnlyModel>(m);
        AnnealSpec spec{BetaSchedule::linear(1.0, 2.0), 0.0};
        CHECK_THROWS_AS(build_annealed(score_only, sched, spec), CapabilityError);
        CHECK_NOTHROW(build_annealed(score_only, sched, AnnealSpec::fixed(2.0, 0.0)));
    }
    SECTION("schedule mismatch is rejected") {
        auto other = NoiseSchedule::vp_linear_beta(0.2, 8.0, 2);
        CHECK_THROWS_AS(build_annealed(m, other, AnnealSpec::fixed(2.0, 0.0)), ConfigError);
    }
}

TEST_CASE("product builder") {
    auto sched = vp2();
    auto m1 = gauss2(sched, -1.0, 0.0, 1.0);
    auto m2 = gauss2(sched, 1.0, 0.5, 0.8);
    std::vector<double> x = {0.2, 0.9};
    double t = 0.6;
    double sig2 = std::pow(sched.sigma_at(1.0 - t), 2);
    auto s1 = m1->score_vec(x, t);
    auto s2 = m2->score_vec(x, t);
    double divf = sched.drift_divergence(1.0 - t);

    SECTION("beta = 1 leaves the score inner product plus divergence") {
        auto sde = build_product(m1, m2, sched, AnnealSpec::fixed(1.0, 0.0));
        CHECK(sde.weight_rate(x, t) ==
              Catch::Approx(sig2 * dot(s1, s2) + divf).epsilon(1e-12));
    }
    SECTION("identical factors at beta = 1 match annealed beta = 2") {
        auto prod = build_product(m1, m1, sched, AnnealSpec::fixed(1.0, 0.0));
        auto ann = build_annealed(m1, sched, AnnealSpec::fixed(2.0, 0.0));
        auto vp = prod.drift_vec(x, t);
        auto va = ann.drift_vec(x, t);
        for (int i = 0; i < 2; ++i) CHECK(vp[i] == Catch::Approx(va[i]).epsilon(1e-12));
        CHECK(prod.weight_rate(x, t) == Catch::Approx(ann.weight_rate(x, t)).epsilon(1e-12));
    }
}

TEST_CASE("geometric builder") {
    auto sched = vp2();
    auto m1 = gauss2(sched, -0.5, 0.4, 1.0);
    auto m2 = gauss2(sched, 0.8, -0.3, 1.5);
    std::vector<double> x = {-0.4, 0.6};
    double t = 0.35;
    double sigma = sched.sigma_at(1.0 - t);
    auto s1 = m1->score_vec(x, t);
    auto s2 = m2->score_vec(x, t);
    auto [f, divf] = sched.drift_at(x, 1.0 - t);

    SECTION("beta = 0 is pure first model") {
        auto sde = build_geometric(m1, m2, sched, 0.0, 0.0);
        CHECK(sde.weight_rate(x, t) == Catch::Approx(0.0).margin(1e-14));
        auto v = sde.drift_vec(x, t);
        for (int i = 0; i < 2; ++i)
            CHECK(v[i] == Catch::Approx(-f[i] + sigma * sigma * s1[i]).epsilon(1e-12));
    }
    SECTION("beta = 1 is pure second model") {
        for (double a : {0.0, 0.7}) {
            auto sde = build_geometric(m1, m2, sched, 1.0, a);
            CHECK(sde.weight_rate(x, t) == Catch::Approx(0.0).margin(1e-14));
            auto v = sde.drift_vec(x, t);
            for (int i = 0; i < 2; ++i)
                CHECK(v[i] == Catch::Approx(-f[i] + sigma * sigma * s2[i]).epsilon(1e-12));
        }
    }
    SECTION("guidance weight 1.4 with a = 0") {
        auto sde = build_geometric(m1, m2, sched, 1.4, 0.0);
        double diff2 = 0.0;
        for (int i = 0; i < 2; ++i) diff2 += (s1[i] - s2[i]) * (s1[i] - s2[i]);
        double expected = 0.28 * sigma * sigma * diff2;
        CHECK(expected >= 0.0);
        CHECK(sde.weight_rate(x, t) == Catch::Approx(expected).epsilon(1e-12));
    }
    SECTION("beta = 0 with nonzero a is rejected") {
        CHECK_THROWS_AS(build_geometric(m1, m2, sched, 0.0, 0.5), ParamError);
    }
}

TEST_CASE("weighted product builder") {
    auto sched = vp2();
    auto m1 = gauss2(sched, -1.0, 0.2, 1.0);
    auto m2 = gauss2(sched, 0.7, -0.6, 1.4);
    std::vector<double> x = {0.1, -0.8};
    double t = 0.52;

    SECTION("single model with beta 1 reduces to the base SDE") {
        auto sde = build_weighted_product({m1}, {1.0}, sched);
        CHECK(sde.weight_rate(x, t) == Catch::Approx(0.0).margin(1e-13));
        auto base = build_annealed(m1, sched, AnnealSpec::fixed(1.0, 0.0));
        auto v = sde.drift_vec(x, t);
        auto vb = base.drift_vec(x, t);
        for (int i = 0; i < 2; ++i) CHECK(v[i] == Catch::Approx(vb[i]).epsilon(1e-12));
    }
    SECTION("(1-beta, beta) reproduces the geometric weight at a = 0") {
        CounterRng rng(23, 0);
        for (int i = 0; i < 200; ++i) {
            double beta = 0.1 + 2.9 * rng.uniform();
            std::vector<double> xp = {2.0 * rng.normal(), 2.0 * rng.normal()};
            double tp = 0.05 + 0.9 * rng.uniform();
            auto wp = build_weighted_product({m1, m2}, {1.0 - beta, beta}, sched);
            auto geo = build_geometric(m1, m2, sched, beta, 0.0);
            REQUIRE(std::abs(wp.weight_rate(xp, tp) - geo.weight_rate(xp, tp)) <= 1e-10);
        }
    }
    SECTION("(beta, beta) reproduces the product weight at a = 0") {
        CounterRng rng(29, 0);
        for (int i = 0; i < 200; ++i) {
            double beta = 0.1 + 2.9 * rng.uniform();
            std::vector<double> xp = {2.0 * rng.normal(), 2.0 * rng.normal()};
            double tp = 0.05 + 0.9 * rng.uniform();
            auto wp = build_weighted_product({m1, m2}, {beta, beta}, sched);
            auto prod = build_product(m1, m2, sched, AnnealSpec::fixed(beta, 0.0));
            REQUIRE(std::abs(wp.weight_rate(xp, tp) - prod.weight_rate(xp, tp)) <= 1e-10);
        }
    }
    SECTION("empty model list") {
        CHECK_THROWS_AS(build_weighted_product({}, {}, sched), ParamError);
    }
}

TEST_CASE("norm-splitting lemma") {
    CounterRng rng(31, 0);
    for (int i = 0; i < 200; ++i) {
        double lambda = 0.1 + 3.0 * rng.uniform();
        double gamma = -0.5 + 2.0 * rng.uniform();
        std::vector<double> u(3), w(3), combo(3);
        for (auto& v : u) v = 2.0 * rng.normal();
        for (auto& v : w) v = 2.0 * rng.normal();
        for (int j = 0; j < 3; ++j)
            combo[j] = lambda * (1.0 - gamma) * u[j] + lambda * gamma * w[j];
        std::vector<double> diff(3);
        for (int j = 0; j < 3; ++j) diff[j] = u[j] - w[j];
        double lhs = -lambda * (1.0 - gamma) * norm_sq(u) - lambda * gamma * norm_sq(w);
        double rhs = -lambda * gamma * (1.0 - gamma) * norm_sq(diff) - norm_sq(combo) / lambda;
        REQUIRE(std::abs(lhs - rhs) <= 1e-10);
    }
}

TEST_CASE("guided product builder") {
    auto sched = vp2();
    auto m0 = gauss2(sched, 0.0, 0.0, 1.0);
    auto m1 = gauss2(sched, -0.8, 0.3, 1.1);
    auto m2 = gauss2(sched, 0.6, -0.5, 0.9);
    std::vector<double> x = {0.4, 0.2};
    double t = 0.45;

    SECTION("beta = 0 matches annealed beta 2 of the unconditional model") {
        auto sde = build_poe_cfg(m0, m1, m2, sched, 0.0);
        auto ann = build_annealed(m0, sched, AnnealSpec::fixed(2.0, 0.0));
        auto v = sde.drift_vec(x, t);
        auto va = ann.drift_vec(x, t);
        for (int i = 0; i < 2; ++i) CHECK(v[i] == Catch::Approx(va[i]).epsilon(1e-12));
        CHECK(sde.weight_rate(x, t) == Catch::Approx(ann.weight_rate(x, t)).epsilon(1e-11));
    }
    SECTION("beta = 1 reduces to the plain product") {
        auto sde = build_poe_cfg(m0, m1, m2, sched, 1.0);
        auto prod = build_product(m1, m2, sched, AnnealSpec::fixed(1.0, 0.0));
        auto v = sde.drift_vec(x, t);
        auto vp = prod.drift_vec(x, t);
        for (int i = 0; i < 2; ++i) CHECK(v[i] == Catch::Approx(vp[i]).epsilon(1e-12));
        CHECK(sde.weight_rate(x, t) == Catch::Approx(prod.weight_rate(x, t)).epsilon(1e-11));
    }
    SECTION("identical conditionals validated by the PDE residual") {
        auto sched1 = NoiseSchedule::ve_geometric(0.05, 2.0, 1);
        GaussianMixture g = GaussianMixture::make(1, {0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0});
        auto u1 = std::make_shared<DiffusedGaussianMixture>(GaussianMixture::single({0.0}, 1.5),
                                                            sched1);
        auto c1 = std::make_shared<DiffusedGaussianMixture>(g, sched1);
        auto sde = build_poe_cfg(u1, c1, c1, sched1, 0.6);
        auto rep = pde_residual(sde, GridSpec{1, -8.0, 8.0, 801}, 0.5, 1e-4);
        CHECK(rep.max_abs <= 1e-3);
        // same target through the weighted product route
        auto wp = build_weighted_product({u1, c1}, {0.8, 1.2}, sched1);
        auto rep2 = pde_residual(wp, sde.target_logdensity_unnorm, GridSpec{1, -8.0, 8.0, 801},
                                 0.5, 1e-4);
        CHECK(rep2.max_abs <= 1e-3);
    }
}

TEST_CASE("reward-tilted builder") {
    auto sched = NoiseSchedule::ve_geometric(0.05, 1.0, 1);
    auto m = std::make_shared<DiffusedGaussianMixture>(GaussianMixture::single({0.0}, 1.0), sched);
    auto reward = [](std::span<const double> x) { return -0.5 * x[0] * x[0]; };
    auto grad_reward = [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
    std::vector<double> x = {0.8};
    double t = 0.3;

    SECTION("zero tilt leaves the base SDE with zero weights") {
        auto sde = build_reward_tilted(m, sched, reward, grad_reward, BetaSchedule::constant(0.0));
        CHECK(sde.weight_rate(x, t) == Catch::Approx(0.0).margin(1e-14));
        auto base = build_annealed(m, sched, AnnealSpec::fixed(1.0, 0.0));
        CHECK(sde.drift_vec(x, t)[0] == Catch::Approx(base.drift_vec(x, t)[0]).epsilon(1e-12));
    }
    SECTION("constant reward only contributes through dbeta/dt") {
        auto const_reward = [](std::span<const double>) { return 2.5; };
        auto zero_grad = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
        auto sde = build_reward_tilted(m, sched, const_reward, zero_grad,
                                       BetaSchedule::linear(0.0, 1.0));
        CHECK(sde.weight_rate(x, t) == Catch::Approx(2.5).epsilon(1e-12));
        auto base = build_annealed(m, sched, AnnealSpec::fixed(1.0, 0.0));
        CHECK(sde.drift_vec(x, t)[0] == Catch::Approx(base.drift_vec(x, t)[0]).epsilon(1e-12));
    }
    SECTION("Gaussian tilt passes the residual oracle") {
        auto sde = build_reward_tilted(m, sched, reward, grad_reward, BetaSchedule::linear(0.0, 1.0));
        auto rep = pde_residual(sde, GridSpec{1, -6.0, 6.0, 601}, 0.5, 1e-4);
        CHECK(rep.max_abs <= 1e-3);
    }
}

TEST_CASE("conversion rules") {
    SECTION("annealed continuity at beta 1 has zero corrector") {
        ConversionInputs in;
        in.beta = 1.0;
        in.div_v = 3.7;
        auto res = conversion_weight(ConversionTerm::AnnealContinuity, in);
        CHECK(res.weight_rate == 0.0);
        CHECK(res.term.kind == SimulatedTerm::Kind::Drift);
    }
    SECTION("annealed diffusion pinned value") {
        ConversionInputs in;
        in.beta = 2.0;
        in.sigma = 1.0;
        in.score = std::vector<double>{2.0};  // |score|^2 = 4
        auto res = conversion_weight(ConversionTerm::AnnealDiffusion, in);
        CHECK(res.weight_rate == Catch::Approx(-4.0));
    }
    SECTION("scaled rows") {
        ConversionInputs in;
        in.beta = 4.0;
        in.sigma = 2.0;
        in.score = std::vector<double>{1.0, 1.0};
        in.v = std::vector<double>{0.5, -0.5};
        auto scaled = conversion_weight(ConversionTerm::AnnealContinuityScaled, in);
        CHECK(scaled.term.drift_scale == Catch::Approx(4.0));
        CHECK(scaled.weight_rate == Catch::Approx(4.0 * 3.0 * (0.5 - 0.5)));
        in.laplacian_log = -1.5;
        auto diff = conversion_weight(ConversionTerm::AnnealDiffusionScaled, in);
        CHECK(diff.term.noise_scale == Catch::Approx(0.5));
        CHECK(diff.weight_rate == Catch::Approx(3.0 * 0.5 * 4.0 * -1.5));
    }
    SECTION("product diffusion pinned value") {
        ConversionInputs in;
        in.sigma = 1.0;
        in.score = std::vector<double>{1.0};
        in.score2 = std::vector<double>{1.0};
        auto res = conversion_weight(ConversionTerm::ProductDiffusion, in);
        CHECK(res.weight_rate == Catch::Approx(-1.0));
    }
    SECTION("reweight rows") {
        ConversionInputs in;
        in.beta = 3.0;
        in.g = 0.4;
        CHECK(conversion_weight(ConversionTerm::AnnealReweight, in).weight_rate ==
              Catch::Approx(1.2));
        in.g2 = -0.1;
        CHECK(conversion_weight(ConversionTerm::ProductReweight, in).weight_rate ==
              Catch::Approx(0.3));
    }
    SECTION("missing capability") {
        ConversionInputs in;
        in.beta = 2.0;
        in.sigma = 1.0;
        CHECK_THROWS_AS(conversion_weight(ConversionTerm::AnnealDiffusionScaled, in),
                        CapabilityError);
        CHECK_THROWS_AS(conversion_weight(ConversionTerm::AnnealDiffusion, in), CapabilityError);
    }
}

TEST_CASE("builders expose consistent diffusion scales") {
    auto sched = vp2();
    auto m = gauss2(sched, 0.0, 0.0, 1.0);
    for (double beta : {0.5, 1.0, 2.0, 3.0}) {
        for (double a : {0.0, 0.5}) {
            auto sde = build_annealed(m, sched, AnnealSpec::fixed(beta, a));
            double prev = sde.diffusion_scale(0.0);
            CHECK(prev >= 0.0);
            for (int i = 1; i <= 40; ++i) {
                double cur = sde.diffusion_scale(i / 40.0);
                CHECK(cur >= 0.0);
                CHECK(std::abs(cur - prev) < 2.0);  // continuity at this resolution
                prev = cur;
            }
        }
    }
}

TEST_CASE("pde_residual base dynamics and refinement") {
    auto sched = NoiseSchedule::ve_geometric(0.05, 2.0, 1);
    GaussianMixture g = GaussianMixture::make(1, {0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0});
    auto model = std::make_shared<DiffusedGaussianMixture>(g, sched);

    SECTION("base denoising SDE against its own path, refining") {
        auto sde = build_annealed(model, sched, AnnealSpec::fixed(1.0, 0.0));
        double coarse = pde_residual(sde, GridSpec{1, -8.0, 8.0, 401}, 0.5, 4e-4).max_abs;
        double fine = pde_residual(sde, GridSpec{1, -8.0, 8.0, 801}, 0.5, 2e-4).max_abs;
        CHECK(coarse < 1e-3);
        CHECK(fine < std::max(coarse, 1e-9));
    }
    SECTION("annealed Gaussian pinned tolerance") {
        auto gm = std::make_shared<DiffusedGaussianMixture>(GaussianMixture::single({0.0}, 1.0),
                                                            sched);
        auto sde = build_annealed(gm, sched, AnnealSpec::fixed(2.0, 0.0));
        auto rep = pde_residual(sde, GridSpec{1, -6.0, 6.0, 601}, 0.5, 1e-4);
        CHECK(rep.max_abs <= 1e-3);
    }
    SECTION("mutation control stays large") {
        auto sde = build_annealed(model, sched, AnnealSpec::fixed(2.0, 0.0));
        WeightedSde broken = sde;
        auto orig = sde.drift_and_weight;
        double sig_ref = 0.0;
        broken.drift_and_weight = [orig, &sched](std::span<const double> x, double t,
                                                 std::span<double> out) {
            orig(x, t, out);
            return 0.0;  // dropped weight term
        };
        (void)sig_ref;
        double good = pde_residual(sde, GridSpec{1, -8.0, 8.0, 801}, 0.5, 1e-4).max_abs;
        double bad = pde_residual(broken, sde.target_logdensity_unnorm,
                                  GridSpec{1, -8.0, 8.0, 801}, 0.5, 1e-4)
                         .max_abs;
        CHECK(bad >= 10.0 * good);
        CHECK(bad >= 10.0 * 1e-3);
    }
    SECTION("parameter errors") {
        auto sde = build_annealed(model, sched, AnnealSpec::fixed(2.0, 0.0));
        CHECK_THROWS_AS(pde_residual(sde, GridSpec{1, -8.0, 8.0, 3}, 0.5, 1e-4), ParamError);
        CHECK_THROWS_AS(pde_residual(sde, GridSpec{1, -8.0, 8.0, 801}, 0.0, 1e-4), ParamError);
        CHECK_THROWS_AS(pde_residual(sde, nullptr, GridSpec{1, -8.0, 8.0, 801}, 0.5, 1e-4),
                        ParamError);
    }
}

TEST_CASE("initial distributions are exact where analytic") {
    SECTION("annealed Gaussian") {
        auto sched = NoiseSchedule::ve_geometric(0.05, 1.0, 1);
        auto m = std::make_shared<DiffusedGaussianMixture>(GaussianMixture::single({0.0}, 1.0),
                                                           sched);
        auto sde = build_annealed(m, sched, AnnealSpec::fixed(4.0, 0.0));
        double v0 = 1.0 + sched.reference_variance();
        REQUIRE(sde.initial.mixture.components() == 1);
        CHECK(sde.initial.mixture.variances[0] == Catch::Approx(v0 / 4.0).epsilon(1e-12));
        double expected_mass = -1.5 * std::log(2.0 * std::numbers::pi * v0) - 0.5 * std::log(4.0);
        CHECK(sde.initial.log_mass == Catch::Approx(expected_mass).epsilon(1e-10));
    }
    SECTION("two-Gaussian product") {
        auto sched = NoiseSchedule::ve_geometric(0.05, 1.0, 1);
        auto m1 = std::make_shared<DiffusedGaussianMixture>(GaussianMixture::single({-1.0}, 1.0),
                                                            sched);
        auto m2 = std::make_shared<DiffusedGaussianMixture>(GaussianMixture::single({1.0}, 1.0),
                                                            sched);
        auto sde = build_product(m1, m2, sched, AnnealSpec::fixed(1.0, 0.0));
        double v0 = 1.0 + sched.reference_variance();
        REQUIRE(sde.initial.mixture.components() == 1);
        CHECK(sde.initial.mixture.variances[0] == Catch::Approx(v0 / 2.0).epsilon(1e-12));
        CHECK(sde.initial.mixture.means[0] == Catch::Approx(0.0).margin(1e-12));
        // mass of N(x|-1,v0) N(x|1,v0): N(-1 | 1, 2 v0)
        double expected = std::log(testutil::normal_pdf(-1.0, 1.0, 2.0 * v0));
        CHECK(sde.initial.log_mass == Catch::Approx(expected).epsilon(1e-10));
    }
    SECTION("integer-power mixture init expands components") {
        auto sched = NoiseSchedule::ve_geometric(0.05, 1.0, 1);
        GaussianMixture g = GaussianMixture::make(1, {0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0});
        auto m = std::make_shared<DiffusedGaussianMixture>(g, sched);
        auto sde = build_annealed(m, sched, AnnealSpec::fixed(3.0, 0.0));
        CHECK(sde.initial.mixture.components() == 8);
    }
}
