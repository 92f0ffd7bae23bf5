#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "fkc/common.hpp"
#include "fkc/gaussian_mixture.hpp"
#include "fkc/schedules.hpp"

namespace fkc {

// Exact diffused density of a model under the reference noising dynamics.
// All operations take generation time t (t = 1 is the data distribution,
// t = 0 the reference Gaussian end).
struct ScoreModel {
    virtual ~ScoreModel() = default;
    virtual int dim() const = 0;
    virtual void score(std::span<const double> x, double t, std::span<double> out) const = 0;
    virtual double log_density(std::span<const double> x, double t) const {
        (void)x; (void)t;
        throw CapabilityError("model does not provide log_density");
    }
    virtual double laplacian_log_density(std::span<const double> x, double t) const {
        (void)x; (void)t;
        throw CapabilityError("model does not provide laplacian_log_density");
    }
    virtual bool has_log_density() const { return true; }
    virtual bool has_laplacian() const { return true; }

    std::vector<double> score_vec(std::span<const double> x, double t) const {
        std::vector<double> s(dim());
        score(x, t, s);
        return s;
    }
};

// Gaussian mixture convolved with the schedule's point-mass kernel; closed-form
// density, score, and Laplacian of the log-density at any (x, t).
class DiffusedGaussianMixture : public ScoreModel {
public:
    DiffusedGaussianMixture(GaussianMixture gmm, NoiseSchedule sched)
        : gmm_(std::move(gmm)), sched_(std::move(sched)) {
        if (gmm_.dim != sched_.dim)
            throw ShapeError("diffused mixture: model dim != schedule dim");
    }

    int dim() const override { return gmm_.dim; }
    const GaussianMixture& mixture() const { return gmm_; }
    const NoiseSchedule& schedule() const { return sched_; }

    // (scale, added variance) of the diffusion kernel at generation time t:
    // component k becomes N(scale * mu_k, scale^2 v_k + added).
    std::pair<double, double> kernel_params(double t) const {
        check_time(t);
        double u = 1.0 - t;
        if (sched_.kind == ScheduleKind::VeGeometric)
            return {1.0, sched_.accumulated_variance(u)};
        auto [alpha, sigma2] = sched_.vp_marginal_params(u);
        return {alpha, sigma2};
    }

    // The diffused mixture at generation time t as an explicit mixture.
    GaussianMixture components_at(double t) const {
        auto [scale, added] = kernel_params(t);
        GaussianMixture out = gmm_;
        for (auto& m : out.means) m *= scale;
        for (auto& v : out.variances) v = scale * scale * v + added;
        return out;
    }

    double log_density(std::span<const double> x, double t) const override {
        return eval(x, t, nullptr, nullptr);
    }

    void score(std::span<const double> x, double t, std::span<double> out) const override {
        eval(x, t, &out, nullptr);
    }

    double laplacian_log_density(std::span<const double> x, double t) const override {
        double lap = 0.0;
        thread_local std::vector<double> s;
        s.resize(gmm_.dim);
        std::span<double> sv(s);
        eval(x, t, &sv, &lap);
        return lap;
    }

private:
    // Single pass over components: returns log density; optionally fills the
    // score and the Laplacian of the log-density.
    double eval(std::span<const double> x, double t, std::span<double>* score_out,
                double* lap_out) const {
        check_dim(x, gmm_.dim, "diffused mixture: x");
        auto [scale, added] = kernel_params(t);
        const int K = gmm_.components();
        const int d = gmm_.dim;

        thread_local std::vector<double> lp;
        lp.resize(K);
        double lmax = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
            double v = scale * scale * gmm_.variances[k] + added;
            auto mu = gmm_.mean(k);
            double q = 0.0;
            for (int j = 0; j < d; ++j) {
                double diff = x[j] - scale * mu[j];
                q += diff * diff;
            }
            lp[k] = std::log(gmm_.weights[k]) - 0.5 * q / v -
                    0.5 * d * std::log(2.0 * std::numbers::pi * v);
            lmax = std::max(lmax, lp[k]);
        }
        double sum = 0.0;
        for (int k = 0; k < K; ++k) sum += std::exp(lp[k] - lmax);
        double log_q = lmax + std::log(sum);
        if (!score_out && !lap_out) return log_q;

        // responsibility-weighted score; Laplacian from the exact second
        // moment of the isotropic mixture: lap q / q - |score|^2.
        std::span<double> s = *score_out;
        for (int j = 0; j < d; ++j) s[j] = 0.0;
        double lap_q_over_q = 0.0;
        for (int k = 0; k < K; ++k) {
            double r = std::exp(lp[k] - log_q);
            double v = scale * scale * gmm_.variances[k] + added;
            auto mu = gmm_.mean(k);
            double q = 0.0;
            for (int j = 0; j < d; ++j) {
                double diff = scale * mu[j] - x[j];
                s[j] += r * diff / v;
                q += diff * diff;
            }
            if (lap_out) lap_q_over_q += r * (q / (v * v) - d / v);
        }
        if (lap_out) *lap_out = lap_q_over_q - norm_sq(s);
        return log_q;
    }

    GaussianMixture gmm_;
    NoiseSchedule sched_;
};

inline std::shared_ptr<DiffusedGaussianMixture> diffused_gaussian(std::vector<double> mean,
                                                                  double variance,
                                                                  const NoiseSchedule& sched) {
    return std::make_shared<DiffusedGaussianMixture>(
        GaussianMixture::single(std::move(mean), variance), sched);
}

inline double diffused_log_density(const DiffusedGaussianMixture& m, std::span<const double> x,
                                   double t) {
    return m.log_density(x, t);
}

inline std::vector<double> diffused_score(const DiffusedGaussianMixture& m,
                                          std::span<const double> x, double t) {
    return m.score_vec(x, t);
}

inline double diffused_laplacian_log(const DiffusedGaussianMixture& m, std::span<const double> x,
                                     double t) {
    return m.laplacian_log_density(x, t);
}

}  // namespace fkc
