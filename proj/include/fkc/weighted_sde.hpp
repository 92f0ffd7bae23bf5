#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fkc/common.hpp"
#include "fkc/gaussian_mixture.hpp"
#include "fkc/schedules.hpp"

namespace fkc {

// Annealing exponent, possibly time-dependent in generation time.
struct BetaSchedule {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    bool time_dependent = false;

    static BetaSchedule constant(double beta) {
        BetaSchedule b;
        b.value = [beta](double) { return beta; };
        b.derivative = [](double) { return 0.0; };
        b.time_dependent = false;
        return b;
    }

    // beta_t = from + (to - from) * t
    static BetaSchedule linear(double from, double to) {
        BetaSchedule b;
        b.value = [from, to](double t) { return from + (to - from) * t; };
        b.derivative = [from, to](double) { return to - from; };
        b.time_dependent = true;
        return b;
    }
};

struct AnnealSpec {
    BetaSchedule beta = BetaSchedule::constant(1.0);
    double a = 0.0;  // drift/noise split within the family of equivalent schemes

    static AnnealSpec fixed(double beta, double a = 0.0) {
        return AnnealSpec{BetaSchedule::constant(beta), a};
    }
};

// Distribution of particles at generation time t = 0 together with the log
// mass of the unnormalized target there (folded into the logZ estimate).
struct InitialDistribution {
    GaussianMixture mixture = GaussianMixture::single({0.0}, 1.0);
    double log_mass = 0.0;
};

// Assembled simulation target: drift v_t, effective diffusion zeta*sigma_t and
// the Feynman-Kac weight increment density g_t (uncentered; the particle
// engine subtracts the ensemble mean).
struct WeightedSde {
    int dim = 1;

    // Fills the drift and returns g_t(x); single evaluation point for both so
    // score models are only queried once per particle step.
    std::function<double(std::span<const double>, double, std::span<double>)> drift_and_weight;

    std::function<double(double)> diffusion_scale;  // zeta * sigma at generation time t

    // log of the unnormalized target density path; null when not analytic.
    std::function<double(std::span<const double>, double)> target_logdensity_unnorm;

    InitialDistribution initial;

    void drift(std::span<const double> x, double t, std::span<double> out) const {
        drift_and_weight(x, t, out);
    }

    std::vector<double> drift_vec(std::span<const double> x, double t) const {
        std::vector<double> v(dim);
        drift_and_weight(x, t, v);
        return v;
    }

    double weight_rate(std::span<const double> x, double t) const {
        thread_local std::vector<double> scratch;
        scratch.resize(dim);
        return drift_and_weight(x, t, scratch);
    }
};

}  // namespace fkc
