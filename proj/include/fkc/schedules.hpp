#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fkc/common.hpp"

namespace fkc {

enum class ScheduleKind { VeGeometric, VpLinearBeta };

// Reference noising dynamics dx = f(x,u) du + sigma(u) dW shared by every model
// composed in an experiment. The argument u below is the noising time: u = 0 is
// the data end, u = 1 the noise end. Generation-direction code (score models,
// SDE builders, the particle engine) runs in generation time t and evaluates
// the schedule at u = 1 - t.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::VeGeometric;
    int dim = 1;
    double sigma_min = 0.0, sigma_max = 0.0;        // VE
    double beta_hat_min = 0.0, beta_hat_max = 0.0;  // VP

    static NoiseSchedule ve_geometric(double sigma_min, double sigma_max, int dim) {
        if (!(sigma_min > 0.0) || !(sigma_max > sigma_min))
            throw ParamError("ve_geometric: need 0 < sigma_min < sigma_max");
        if (dim < 1) throw ParamError("ve_geometric: dim must be positive");
        NoiseSchedule s;
        s.kind = ScheduleKind::VeGeometric;
        s.sigma_min = sigma_min;
        s.sigma_max = sigma_max;
        s.dim = dim;
        return s;
    }

    static NoiseSchedule vp_linear_beta(double beta_hat_min, double beta_hat_max, int dim) {
        if (!(beta_hat_min > 0.0) || !(beta_hat_max > 0.0))
            throw ParamError("vp_linear_beta: endpoints must be positive");
        if (dim < 1) throw ParamError("vp_linear_beta: dim must be positive");
        NoiseSchedule s;
        s.kind = ScheduleKind::VpLinearBeta;
        s.beta_hat_min = beta_hat_min;
        s.beta_hat_max = beta_hat_max;
        s.dim = dim;
        return s;
    }

    double beta_hat(double u) const {
        check_time(u);
        return beta_hat_min + (beta_hat_max - beta_hat_min) * u;
    }

    // int_0^u beta_hat(s) ds for the linear schedule.
    double beta_hat_integral(double u) const {
        check_time(u);
        return beta_hat_min * u + 0.5 * (beta_hat_max - beta_hat_min) * u * u;
    }

    double sigma_at(double u) const {
        check_time(u);
        if (kind == ScheduleKind::VeGeometric)
            return sigma_min * std::pow(sigma_max / sigma_min, u);
        return std::sqrt(beta_hat(u));
    }

    // Noising drift and its (state-independent) divergence.
    void drift_into(std::span<const double> x, double u, std::span<double> f_out) const {
        check_dim(x, dim, "drift_at: x");
        check_time(u);
        if (kind == ScheduleKind::VeGeometric) {
            for (size_t i = 0; i < f_out.size(); ++i) f_out[i] = 0.0;
            return;
        }
        double c = -0.5 * beta_hat(u);
        for (size_t i = 0; i < f_out.size(); ++i) f_out[i] = c * x[i];
    }

    double drift_divergence(double u) const {
        check_time(u);
        if (kind == ScheduleKind::VeGeometric) return 0.0;
        return -0.5 * dim * beta_hat(u);
    }

    std::pair<std::vector<double>, double> drift_at(std::span<const double> x, double u) const {
        std::vector<double> f(dim);
        drift_into(x, u, f);
        return {std::move(f), drift_divergence(u)};
    }

    // (alpha_u, sigma_u^2) of the VP conditional marginal N(alpha x0, sigma^2 I).
    std::pair<double, double> vp_marginal_params(double u) const {
        if (kind != ScheduleKind::VpLinearBeta)
            throw ParamError("vp_marginal_params: schedule is not VP");
        check_time(u);
        double integral = beta_hat_integral(u);
        double alpha = std::exp(-0.5 * integral);
        double sigma2 = 1.0 - std::exp(-integral);
        return {alpha, sigma2};
    }

    // Accumulated variance of the VE point-mass marginal,
    // int_0^u sigma(s)^2 ds in closed form for the geometric schedule.
    double accumulated_variance(double u) const {
        if (kind != ScheduleKind::VeGeometric)
            throw ParamError("accumulated_variance: schedule is not VE");
        check_time(u);
        double log_ratio = std::log(sigma_max / sigma_min);
        return sigma_min * sigma_min * (std::exp(2.0 * log_ratio * u) - 1.0) / (2.0 * log_ratio);
    }

    // Variance of the schedule's reference Gaussian (the u = 1 marginal of a
    // point mass for VE; the stationary unit variance for VP).
    double reference_variance() const {
        if (kind == ScheduleKind::VeGeometric) return accumulated_variance(1.0);
        return 1.0;
    }
};

}  // namespace fkc
