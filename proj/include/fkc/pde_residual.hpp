#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "fkc/common.hpp"
#include "fkc/weighted_sde.hpp"

namespace fkc {

// Regular lattice on [lo, hi]^dims (same extent per axis).
struct GridSpec {
    int dims = 1;
    double lo = -6.0;
    double hi = 6.0;
    int n = 601;

    double h() const { return (hi - lo) / (n - 1); }
};

struct ResidualReport {
    int nx = 0, ny = 0;  // ny = 1 in 1D
    std::vector<double> residual;
    double max_abs = 0.0;
};

// Finite-difference check that an assembled weighted SDE reproduces a given
// unnormalized target density path: on interior nodes,
//   R = d/dt log p - [ (1/p)(-div(p v) + (zeta sigma)^2/2 lap p) + (g - E_p g) ]
// with central differences in t and x and E_p g taken by grid quadrature under
// the normalized density. The spatial ratios are expanded in log space,
//   (1/p) div(p v)  = div v + <grad log p, v>
//   (1/p) lap p     = lap log p + |grad log p|^2,
// which is the same residual but keeps the stencil error bounded in the tails
// where p itself underflows. Max |R| tends to 0 under (dt, h) refinement iff
// the drift/noise/weight triple matches the path.
inline ResidualReport pde_residual(
    const WeightedSde& sde,
    const std::function<double(std::span<const double>, double)>& log_target,
    const GridSpec& grid, double t, double dt) {
    if (grid.dims != 1 && grid.dims != 2)
        throw ParamError("pde_residual: grid must be 1D or 2D");
    if (grid.n < 5) throw ParamError("pde_residual: grid too coarse for the stencil");
    if (!(grid.hi > grid.lo)) throw ParamError("pde_residual: invalid bounds");
    if (!(t - dt >= 0.0 && t + dt <= 1.0))
        throw ParamError("pde_residual: t +/- dt must stay inside [0,1]");
    if (!log_target) throw ParamError("pde_residual: no target density");
    if (grid.dims != sde.dim) throw ShapeError("pde_residual: grid dims != sde dim");

    const int n = grid.n;
    const double h = grid.h();
    const size_t total = (grid.dims == 1) ? static_cast<size_t>(n)
                                          : static_cast<size_t>(n) * n;

    auto node = [&](size_t idx, std::span<double> x) {
        if (grid.dims == 1) {
            x[0] = grid.lo + h * static_cast<double>(idx);
        } else {
            x[0] = grid.lo + h * static_cast<double>(idx % n);
            x[1] = grid.lo + h * static_cast<double>(idx / n);
        }
    };

    std::vector<double> log_m(total), log_0(total), log_p(total);
    std::vector<double> g(total), drift(total * grid.dims);
    {
        std::vector<double> x(grid.dims), v(grid.dims);
        for (size_t i = 0; i < total; ++i) {
            node(i, x);
            log_m[i] = log_target(x, t - dt);
            log_0[i] = log_target(x, t);
            log_p[i] = log_target(x, t + dt);
            g[i] = sde.drift_and_weight(x, t, v);
            for (int a = 0; a < grid.dims; ++a) drift[i * grid.dims + a] = v[a];
        }
    }

    double lmax = -std::numeric_limits<double>::infinity();
    for (double v : log_0) lmax = std::max(lmax, v);
    double mass = 0.0, mass_m = 0.0, mass_p = 0.0, gbar = 0.0;
    for (size_t i = 0; i < total; ++i) {
        double p = std::exp(log_0[i] - lmax);
        mass += p;
        mass_m += std::exp(log_m[i] - lmax);
        mass_p += std::exp(log_p[i] - lmax);
        gbar += g[i] * p;
    }
    gbar /= mass;
    // d/dt log integral of the unnormalized path; converts d/dt log p-tilde
    // into the normalized time derivative the Feynman-Kac PDE is written for
    double dlogz_dt = (std::log(mass_p) - std::log(mass_m)) / (2.0 * dt);

    double zs = sde.diffusion_scale(t);
    double half_zs2 = 0.5 * zs * zs;

    ResidualReport rep;
    rep.nx = n;
    rep.ny = (grid.dims == 1) ? 1 : n;
    rep.residual.assign(total, 0.0);

    auto vel = [&](size_t i, int axis) { return drift[i * grid.dims + axis]; };

    if (grid.dims == 1) {
        for (int i = 1; i + 1 < n; ++i) {
            double dlog_dt = (log_p[i] - log_m[i]) / (2.0 * dt) - dlogz_dt;
            double dlog_dx = (log_0[i + 1] - log_0[i - 1]) / (2.0 * h);
            double lap_log = (log_0[i + 1] - 2.0 * log_0[i] + log_0[i - 1]) / (h * h);
            double div_v = (vel(i + 1, 0) - vel(i - 1, 0)) / (2.0 * h);
            double rhs = -(div_v + dlog_dx * vel(i, 0)) +
                         half_zs2 * (lap_log + dlog_dx * dlog_dx) + g[i] - gbar;
            double r = dlog_dt - rhs;
            rep.residual[i] = r;
            rep.max_abs = std::max(rep.max_abs, std::abs(r));
        }
    } else {
        auto at = [n](int ix, int iy) { return static_cast<size_t>(iy) * n + ix; };
        for (int iy = 1; iy + 1 < n; ++iy) {
            for (int ix = 1; ix + 1 < n; ++ix) {
                size_t i = at(ix, iy);
                double dlog_dt = (log_p[i] - log_m[i]) / (2.0 * dt) - dlogz_dt;
                double gx = (log_0[at(ix + 1, iy)] - log_0[at(ix - 1, iy)]) / (2.0 * h);
                double gy = (log_0[at(ix, iy + 1)] - log_0[at(ix, iy - 1)]) / (2.0 * h);
                double lap_log = (log_0[at(ix + 1, iy)] + log_0[at(ix - 1, iy)] +
                                  log_0[at(ix, iy + 1)] + log_0[at(ix, iy - 1)] -
                                  4.0 * log_0[i]) /
                                 (h * h);
                double div_v = (vel(at(ix + 1, iy), 0) - vel(at(ix - 1, iy), 0) +
                                vel(at(ix, iy + 1), 1) - vel(at(ix, iy - 1), 1)) /
                               (2.0 * h);
                double rhs = -(div_v + gx * vel(i, 0) + gy * vel(i, 1)) +
                             half_zs2 * (lap_log + gx * gx + gy * gy) + g[i] - gbar;
                double r = dlog_dt - rhs;
                rep.residual[i] = r;
                rep.max_abs = std::max(rep.max_abs, std::abs(r));
            }
        }
    }
    return rep;
}

inline ResidualReport pde_residual(const WeightedSde& sde, const GridSpec& grid, double t,
                                   double dt) {
    return pde_residual(sde, sde.target_logdensity_unnorm, grid, t, dt);
}

}  // namespace fkc
