#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fkc/common.hpp"
#include "fkc/score_model.hpp"
#include "fkc/weighted_sde.hpp"

namespace fkc {

namespace detail {

struct GenCoeffs {
    double sigma;
    double sigma2;
    double div_f;
};

inline GenCoeffs gen_coeffs(const NoiseSchedule& s, double t) {
    double u = 1.0 - t;
    double sig = s.sigma_at(u);
    return {sig, sig * sig, s.drift_divergence(u)};
}

// out = -f(x, 1-t)
inline void neg_noising_drift(const NoiseSchedule& s, std::span<const double> x, double t,
                              std::span<double> out) {
    s.drift_into(x, 1.0 - t, out);
    for (double& v : out) v = -v;
}

inline bool same_schedule(const NoiseSchedule& a, const NoiseSchedule& b) {
    return a.kind == b.kind && a.dim == b.dim && a.sigma_min == b.sigma_min &&
           a.sigma_max == b.sigma_max && a.beta_hat_min == b.beta_hat_min &&
           a.beta_hat_max == b.beta_hat_max;
}

inline void check_model(const std::shared_ptr<const ScoreModel>& m, const NoiseSchedule& sched,
                        const char* builder) {
    if (!m) throw ParamError(std::string(builder) + ": null model");
    if (m->dim() != sched.dim)
        throw ShapeError(std::string(builder) + ": model dim != schedule dim");
    if (auto* dm = dynamic_cast<const DiffusedGaussianMixture*>(m.get())) {
        if (!same_schedule(dm->schedule(), sched))
            throw ConfigError(builder, "model was diffused under a different schedule");
    }
}

inline double zeta_sq(double beta, double a) {
    if (!(beta > 0.0)) throw ParamError("anneal spec: beta must be positive");
    return (beta + (1.0 - beta) * 2.0 * a) / beta;
}

inline void check_anneal_constraint(const AnnealSpec& spec, const char* builder) {
    // time-dependent schedules are re-checked at evaluation time
    for (double t : {0.0, 0.5, 1.0}) {
        double beta = spec.beta.value(t);
        if (!(beta > 0.0))
            throw ParamError(std::string(builder) + ": beta_t must stay positive");
        if (zeta_sq(beta, spec.a) < 0.0)
            throw ParamError(std::string(builder) +
                             ": (beta + (1-beta)2a)/beta must be nonnegative");
        if (!spec.beta.time_dependent) break;
    }
}

// Exact mixture proportional to prod_i q_i(x, t)^{b_i} when the factors are
// analytic diffused mixtures (single Gaussians with any real exponent, or
// mixtures with positive integer exponents); nullopt otherwise. *log_mass
// receives the log integral of the unnormalized product.
inline std::optional<GaussianMixture> combine_factors(
    const std::vector<std::pair<const DiffusedGaussianMixture*, double>>& factors, double t,
    double* log_mass_out) {
    if (factors.empty()) return std::nullopt;
    const int d = factors.front().first ? factors.front().first->dim() : 0;

    bool analytic = true;
    bool all_single = true;
    bool all_int = true;
    for (const auto& [m, b] : factors) {
        if (!m) { analytic = false; break; }
        if (m->mixture().components() > 1) all_single = false;
        if (std::abs(b - std::round(b)) > 1e-12 || b < 0.5) all_int = false;
    }
    if (!analytic) return std::nullopt;

    if (all_single) {
        // quadratic form of the product of powered Gaussians
        double precision = 0.0, c0 = 0.0;
        std::vector<double> bvec(d, 0.0);
        for (const auto& [m, b] : factors) {
            GaussianMixture g0 = m->components_at(t);
            double v = g0.variances[0];
            auto mu = g0.mean(0);
            precision += b / v;
            double mu2 = 0.0;
            for (int j = 0; j < d; ++j) {
                bvec[j] += b * mu[j] / v;
                mu2 += mu[j] * mu[j];
            }
            c0 += b * (-0.5 * mu2 / v - 0.5 * d * std::log(2.0 * std::numbers::pi * v));
        }
        if (!(precision > 0.0)) return std::nullopt;
        double v_star = 1.0 / precision;
        std::vector<double> mean(d);
        double b2 = 0.0;
        for (int j = 0; j < d; ++j) {
            mean[j] = v_star * bvec[j];
            b2 += bvec[j] * bvec[j];
        }
        if (log_mass_out)
            *log_mass_out =
                c0 + 0.5 * b2 * v_star + 0.5 * d * std::log(2.0 * std::numbers::pi * v_star);
        return GaussianMixture::single(std::move(mean), v_star);
    }
    if (all_int) {
        double log_mass = 0.0;
        GaussianMixture acc;
        bool first = true;
        for (const auto& [m, b] : factors) {
            double lm = 0.0;
            GaussianMixture g0 = m->components_at(t);
            GaussianMixture powed =
                (std::lround(b) == 1) ? g0
                                      : gmm_integer_power(g0, static_cast<int>(std::lround(b)),
                                                          (1u << 20), &lm);
            log_mass += lm;
            if (first) {
                acc = std::move(powed);
                first = false;
            } else {
                double lp = 0.0;
                acc = gmm_product(acc, powed, (1u << 20), &lp);
                log_mass += lp;
            }
        }
        if (log_mass_out) *log_mass_out = log_mass;
        return acc;
    }
    return std::nullopt;
}

// Initial law at t = 0: the exact combined mixture when available, otherwise
// the schedule's reference Gaussian raised to the total exponent.
inline InitialDistribution make_initial(
    const NoiseSchedule& sched,
    const std::vector<std::pair<const DiffusedGaussianMixture*, double>>& factors) {
    const int d = sched.dim;
    double total = 0.0;
    for (const auto& [m, b] : factors) total += b;
    if (!(total > 0.0))
        throw ParamError("initial distribution: total target exponent must be positive");

    double log_mass = 0.0;
    if (auto exact = combine_factors(factors, 0.0, &log_mass))
        return {std::move(*exact), log_mass};

    double v_ref = sched.reference_variance();
    log_mass = 0.5 * d * (1.0 - total) * std::log(2.0 * std::numbers::pi * v_ref) -
               0.5 * d * std::log(total);
    return {GaussianMixture::single(std::vector<double>(d, 0.0), v_ref / total), log_mass};
}

inline const DiffusedGaussianMixture* as_diffused(const std::shared_ptr<const ScoreModel>& m) {
    return dynamic_cast<const DiffusedGaussianMixture*>(m.get());
}

}  // namespace detail

// Annealed target q_t^beta, simulated with the drift/noise split parameter a
// (a = 0 target score, a = 1/2 tempered noise). For time-dependent beta the
// weight gains (dbeta/dt) log q_t, which needs the model's log-density.
inline WeightedSde build_annealed(std::shared_ptr<const ScoreModel> model,
                                  const NoiseSchedule& sched, const AnnealSpec& spec) {
    detail::check_model(model, sched, "build_annealed");
    detail::check_anneal_constraint(spec, "build_annealed");
    if (spec.beta.time_dependent && !model->has_log_density())
        throw CapabilityError("build_annealed: time-dependent beta needs log_density");

    const int d = sched.dim;
    WeightedSde sde;
    sde.dim = d;
    sde.initial = detail::make_initial(
        sched, {{detail::as_diffused(model), spec.beta.value(0.0)}});

    sde.drift_and_weight = [model, sched, spec, d](std::span<const double> x, double t,
                                                   std::span<double> out) {
        double beta = spec.beta.value(t);
        double eta = beta + (1.0 - beta) * spec.a;
        auto c = detail::gen_coeffs(sched, t);
        thread_local std::vector<double> s;
        s.resize(d);
        model->score(x, t, s);
        detail::neg_noising_drift(sched, x, t, out);
        for (int i = 0; i < d; ++i) out[i] += eta * c.sigma2 * s[i];
        double g = (beta - 1.0) * (c.div_f + 0.5 * c.sigma2 * beta * norm_sq(s));
        if (spec.beta.time_dependent)
            g += spec.beta.derivative(t) * model->log_density(x, t);
        return g;
    };
    sde.diffusion_scale = [sched, spec](double t) {
        double z2 = detail::zeta_sq(spec.beta.value(t), spec.a);
        if (z2 < 0.0) throw ParamError("build_annealed: zeta^2 negative at t");
        return std::sqrt(z2) * sched.sigma_at(1.0 - t);
    };
    if (model->has_log_density()) {
        sde.target_logdensity_unnorm = [model, spec](std::span<const double> x, double t) {
            return spec.beta.value(t) * model->log_density(x, t);
        };
    }
    return sde;
}

// Product target (q^1_t q^2_t)^beta under a shared schedule.
inline WeightedSde build_product(std::shared_ptr<const ScoreModel> m1,
                                 std::shared_ptr<const ScoreModel> m2,
                                 const NoiseSchedule& sched, const AnnealSpec& spec) {
    detail::check_model(m1, sched, "build_product");
    detail::check_model(m2, sched, "build_product");
    detail::check_anneal_constraint(spec, "build_product");
    if (spec.beta.time_dependent)
        throw ParamError("build_product: time-dependent beta is not supported");
    const double beta = spec.beta.value(0.0);
    const double a = spec.a;
    const int d = sched.dim;

    WeightedSde sde;
    sde.dim = d;
    sde.initial = detail::make_initial(
        sched, {{detail::as_diffused(m1), beta}, {detail::as_diffused(m2), beta}});

    sde.drift_and_weight = [m1, m2, sched, beta, a, d](std::span<const double> x, double t,
                                                       std::span<double> out) {
        double eta = beta + (1.0 - beta) * a;
        auto c = detail::gen_coeffs(sched, t);
        thread_local std::vector<double> s1, s2, sum;
        s1.resize(d); s2.resize(d); sum.resize(d);
        m1->score(x, t, s1);
        m2->score(x, t, s2);
        for (int i = 0; i < d; ++i) sum[i] = s1[i] + s2[i];
        detail::neg_noising_drift(sched, x, t, out);
        for (int i = 0; i < d; ++i) out[i] += eta * c.sigma2 * sum[i];
        double g = beta * (beta - 1.0) * 0.5 * c.sigma2 * norm_sq(sum) +
                   beta * c.sigma2 * dot(s1, s2) + (2.0 * beta - 1.0) * c.div_f;
        return g;
    };
    sde.diffusion_scale = [sched, beta, a](double t) {
        return std::sqrt(detail::zeta_sq(beta, a)) * sched.sigma_at(1.0 - t);
    };
    if (m1->has_log_density() && m2->has_log_density()) {
        sde.target_logdensity_unnorm = [m1, m2, beta](std::span<const double> x, double t) {
            return beta * (m1->log_density(x, t) + m2->log_density(x, t));
        };
    }
    return sde;
}

// Geometric average target (q^1_t)^{1-beta} (q^2_t)^beta; a = 0 recovers the
// plain guidance corrector.
inline WeightedSde build_geometric(std::shared_ptr<const ScoreModel> m1,
                                   std::shared_ptr<const ScoreModel> m2,
                                   const NoiseSchedule& sched, double beta, double a) {
    detail::check_model(m1, sched, "build_geometric");
    detail::check_model(m2, sched, "build_geometric");
    if (beta == 0.0 && a != 0.0)
        throw ParamError("build_geometric: beta = 0 requires a = 0");
    double drift_gain = (beta == 0.0) ? 1.0 : 1.0 + a * (1.0 - beta) / beta;
    double z2 = (beta == 0.0) ? 1.0 : 1.0 + 2.0 * a * (1.0 - beta) / beta;
    if (z2 < 0.0)
        throw ParamError("build_geometric: (beta + 2a(1-beta))/beta must be nonnegative");
    const int d = sched.dim;

    WeightedSde sde;
    sde.dim = d;
    sde.initial = detail::make_initial(
        sched, {{detail::as_diffused(m1), 1.0 - beta}, {detail::as_diffused(m2), beta}});

    sde.drift_and_weight = [m1, m2, sched, beta, a, drift_gain, d](std::span<const double> x,
                                                                   double t,
                                                                   std::span<double> out) {
        auto c = detail::gen_coeffs(sched, t);
        thread_local std::vector<double> s1, s2;
        s1.resize(d); s2.resize(d);
        m1->score(x, t, s1);
        m2->score(x, t, s2);
        detail::neg_noising_drift(sched, x, t, out);
        for (int i = 0; i < d; ++i)
            out[i] += c.sigma2 * drift_gain * ((1.0 - beta) * s1[i] + beta * s2[i]);
        double diff2 = 0.0;
        for (int i = 0; i < d; ++i) {
            double diff = s1[i] - s2[i];
            diff2 += diff * diff;
        }
        return 0.5 * c.sigma2 * beta * (beta - 1.0) * diff2 +
               2.0 * a * c.sigma2 * (beta - 1.0) * (beta - 1.0) * dot(s1, s2);
    };
    sde.diffusion_scale = [sched, z2](double t) {
        return std::sqrt(z2) * sched.sigma_at(1.0 - t);
    };
    if (m1->has_log_density() && m2->has_log_density()) {
        sde.target_logdensity_unnorm = [m1, m2, beta](std::span<const double> x, double t) {
            return (1.0 - beta) * m1->log_density(x, t) + beta * m2->log_density(x, t);
        };
    }
    return sde;
}

// Weighted product target prod_i (q^i_t)^{beta_i} simulated with its own score.
inline WeightedSde build_weighted_product(std::vector<std::shared_ptr<const ScoreModel>> models,
                                          std::vector<double> betas,
                                          const NoiseSchedule& sched) {
    if (models.empty()) throw ParamError("build_weighted_product: empty model list");
    if (models.size() != betas.size())
        throw ShapeError("build_weighted_product: models/betas length mismatch");
    for (const auto& m : models) detail::check_model(m, sched, "build_weighted_product");
    const int d = sched.dim;
    const size_t n = models.size();

    WeightedSde sde;
    sde.dim = d;
    {
        std::vector<std::pair<const DiffusedGaussianMixture*, double>> factors;
        for (size_t i = 0; i < n; ++i)
            factors.emplace_back(detail::as_diffused(models[i]), betas[i]);
        sde.initial = detail::make_initial(sched, factors);
    }

    sde.drift_and_weight = [models, betas, sched, d, n](std::span<const double> x, double t,
                                                        std::span<double> out) {
        auto c = detail::gen_coeffs(sched, t);
        thread_local std::vector<double> si, combined;
        si.resize(d);
        combined.assign(d, 0.0);
        double sum_beta = 0.0, sum_beta_norms = 0.0;
        for (size_t i = 0; i < n; ++i) {
            models[i]->score(x, t, si);
            for (int j = 0; j < d; ++j) combined[j] += betas[i] * si[j];
            sum_beta += betas[i];
            sum_beta_norms += betas[i] * norm_sq(si);
        }
        detail::neg_noising_drift(sched, x, t, out);
        for (int j = 0; j < d; ++j) out[j] += c.sigma2 * combined[j];
        return (sum_beta - 1.0) * c.div_f + 0.5 * c.sigma2 * norm_sq(combined) -
               0.5 * c.sigma2 * sum_beta_norms;
    };
    sde.diffusion_scale = [sched](double t) { return sched.sigma_at(1.0 - t); };
    bool have_density = true;
    for (const auto& m : models) have_density = have_density && m->has_log_density();
    if (have_density) {
        sde.target_logdensity_unnorm = [models, betas, n](std::span<const double> x, double t) {
            double l = 0.0;
            for (size_t i = 0; i < n; ++i) l += betas[i] * models[i]->log_density(x, t);
            return l;
        };
    }
    return sde;
}

// Guided product target q_t^{2(1-beta)} (q^1_t q^2_t)^beta where q is the
// unconditional model and q^1, q^2 are two conditionals.
inline WeightedSde build_poe_cfg(std::shared_ptr<const ScoreModel> uncond,
                                 std::shared_ptr<const ScoreModel> cond1,
                                 std::shared_ptr<const ScoreModel> cond2,
                                 const NoiseSchedule& sched, double beta) {
    detail::check_model(uncond, sched, "build_poe_cfg");
    detail::check_model(cond1, sched, "build_poe_cfg");
    detail::check_model(cond2, sched, "build_poe_cfg");
    const int d = sched.dim;

    WeightedSde sde;
    sde.dim = d;
    sde.initial = detail::make_initial(sched, {{detail::as_diffused(uncond), 2.0 * (1.0 - beta)},
                                               {detail::as_diffused(cond1), beta},
                                               {detail::as_diffused(cond2), beta}});

    sde.drift_and_weight = [uncond, cond1, cond2, sched, beta, d](std::span<const double> x,
                                                                  double t,
                                                                  std::span<double> out) {
        auto c = detail::gen_coeffs(sched, t);
        thread_local std::vector<double> s0, s1, s2, v1, v2;
        s0.resize(d); s1.resize(d); s2.resize(d); v1.resize(d); v2.resize(d);
        uncond->score(x, t, s0);
        cond1->score(x, t, s1);
        cond2->score(x, t, s2);
        for (int i = 0; i < d; ++i) {
            v1[i] = (1.0 - beta) * s0[i] + beta * s1[i];
            v2[i] = (1.0 - beta) * s0[i] + beta * s2[i];
        }
        detail::neg_noising_drift(sched, x, t, out);
        for (int i = 0; i < d; ++i) out[i] += c.sigma2 * (v1[i] + v2[i]);
        double d1 = 0.0, d2 = 0.0;
        for (int i = 0; i < d; ++i) {
            double a = s0[i] - s1[i], b = s0[i] - s2[i];
            d1 += a * a;
            d2 += b * b;
        }
        return 0.5 * c.sigma2 * beta * (beta - 1.0) * (d1 + d2) + c.sigma2 * dot(v1, v2) +
               c.div_f;
    };
    sde.diffusion_scale = [sched](double t) { return sched.sigma_at(1.0 - t); };
    if (uncond->has_log_density() && cond1->has_log_density() && cond2->has_log_density()) {
        sde.target_logdensity_unnorm = [uncond, cond1, cond2, beta](std::span<const double> x,
                                                                    double t) {
            return 2.0 * (1.0 - beta) * uncond->log_density(x, t) +
                   beta * (cond1->log_density(x, t) + cond2->log_density(x, t));
        };
    }
    return sde;
}

// Reward-tilted target q_t exp(beta_t r(x)); the tilt does not diffuse, so the
// weight tracks the interaction between the reward gradient and the dynamics.
inline WeightedSde build_reward_tilted(std::shared_ptr<const ScoreModel> model,
                                       const NoiseSchedule& sched,
                                       std::function<double(std::span<const double>)> reward,
                                       std::function<void(std::span<const double>, std::span<double>)> grad_reward,
                                       const BetaSchedule& beta_schedule) {
    detail::check_model(model, sched, "build_reward_tilted");
    if (!reward || !grad_reward)
        throw ParamError("build_reward_tilted: reward and gradient required");
    const int d = sched.dim;

    WeightedSde sde;
    sde.dim = d;
    // the tilt is ignored at t = 0; exact when beta_0 = 0
    sde.initial = detail::make_initial(sched, {{detail::as_diffused(model), 1.0}});

    sde.drift_and_weight = [model, sched, reward, grad_reward, beta_schedule, d](
                               std::span<const double> x, double t, std::span<double> out) {
        double bt = beta_schedule.value(t);
        auto c = detail::gen_coeffs(sched, t);
        thread_local std::vector<double> s, gr, f;
        s.resize(d); gr.resize(d); f.resize(d);
        model->score(x, t, s);
        grad_reward(x, gr);
        sched.drift_into(x, 1.0 - t, f);
        for (int i = 0; i < d; ++i) out[i] = -f[i] + c.sigma2 * (s[i] + 0.5 * bt * gr[i]);
        double g = beta_schedule.derivative(t) * reward(x);
        for (int i = 0; i < d; ++i)
            g += bt * gr[i] * (0.5 * c.sigma2 * s[i] - f[i]);
        return g;
    };
    sde.diffusion_scale = [sched](double t) { return sched.sigma_at(1.0 - t); };
    if (model->has_log_density()) {
        sde.target_logdensity_unnorm = [model, reward, beta_schedule](std::span<const double> x,
                                                                      double t) {
            return model->log_density(x, t) + beta_schedule.value(t) * reward(x);
        };
    }
    return sde;
}

}  // namespace fkc
