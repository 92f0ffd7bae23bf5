#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "fkc/common.hpp"

namespace fkc {

// Pairwise intermolecular potential plus a harmonic tether to the center of
// mass. The pair term is eps/(2 tau) * ((r_m/d)^12 - (r_m/d)^6) summed over
// unordered pairs, which vanishes at d = r_m and diverges to +inf at short
// range so that exp(-E) is normalizable.
struct LennardJonesSystem {
    int n_particles = 13;
    double r_m = 1.0;
    double tau = 1.0;
    double eps = 2.0;
    double c = 1.0;  // harmonic coefficient

    static constexpr double kMinDistance = 1e-9;

    int dof() const { return n_particles * 3; }

    double energy(std::span<const double> x) const {
        check_dim(x, dof(), "lj energy: x");
        const int n = n_particles;
        double pair_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double d2 = 0.0;
                for (int a = 0; a < 3; ++a) {
                    double diff = x[i * 3 + a] - x[j * 3 + a];
                    d2 += diff * diff;
                }
                double d = std::sqrt(d2);
                if (d < kMinDistance)
                    throw DomainError("lj energy: coincident particles");
                double r6 = std::pow(r_m / d, 6);
                pair_sum += r6 * r6 - r6;
            }
        }
        double e = eps / (2.0 * tau) * pair_sum;

        double com[3] = {0, 0, 0};
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a) com[a] += x[i * 3 + a] / n;
        double osc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a) {
                double diff = x[i * 3 + a] - com[a];
                osc += diff * diff;
            }
        return e + c * 0.5 * osc;
    }

    void gradient(std::span<const double> x, std::span<double> grad) const {
        check_dim(x, dof(), "lj gradient: x");
        check_dim(grad, dof(), "lj gradient: out");
        const int n = n_particles;
        for (auto& g : grad) g = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double diff[3];
                double d2 = 0.0;
                for (int a = 0; a < 3; ++a) {
                    diff[a] = x[i * 3 + a] - x[j * 3 + a];
                    d2 += diff[a] * diff[a];
                }
                double d = std::sqrt(d2);
                if (d < kMinDistance)
                    throw DomainError("lj gradient: coincident particles");
                double r6 = std::pow(r_m / d, 6);
                // d/dd of (r12 - r6): (-12 r12 + 6 r6) / d
                double dv_dd = eps / (2.0 * tau) * (-12.0 * r6 * r6 + 6.0 * r6) / d;
                for (int a = 0; a < 3; ++a) {
                    double u = diff[a] / d;
                    grad[i * 3 + a] += dv_dd * u;
                    grad[j * 3 + a] -= dv_dd * u;
                }
            }
        }
        // harmonic term: grad_i = c (x_i - com); the mean of the deviations is 0
        double com[3] = {0, 0, 0};
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a) com[a] += x[i * 3 + a] / n;
        for (int i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a) grad[i * 3 + a] += c * (x[i * 3 + a] - com[a]);
    }
};

inline double lj_energy(std::span<const double> x) {
    return LennardJonesSystem{}.energy(x);
}

inline std::vector<double> lj_energy_grad(std::span<const double> x) {
    LennardJonesSystem sys;
    std::vector<double> g(sys.dof());
    sys.gradient(x, g);
    return g;
}

}  // namespace fkc
