#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fkc/common.hpp"
#include "fkc/rng.hpp"
#include "fkc/weighted_sde.hpp"

namespace fkc {

enum class ResampleScheme { None, SnisFinal, Systematic, Jump, BdcClocks };

inline const char* to_string(ResampleScheme s) {
    switch (s) {
        case ResampleScheme::None: return "none";
        case ResampleScheme::SnisFinal: return "snis_final";
        case ResampleScheme::Systematic: return "systematic";
        case ResampleScheme::Jump: return "jump";
        case ResampleScheme::BdcClocks: return "bdc_clocks";
    }
    return "?";
}

struct ResamplingPolicy {
    ResampleScheme scheme = ResampleScheme::None;
    double t_min = 0.0, t_max = 1.0;  // active interval in generation time
    int cadence = 1;                  // resample every n-th step (systematic)
    std::optional<double> ess_threshold;  // fraction of K triggering adaptive resampling
    bool exclude_outside_from_logz = false;

    void validate() const {
        if (!(0.0 <= t_min && t_min <= t_max && t_max <= 1.0))
            throw ParamError("resampling policy: need 0 <= t_min <= t_max <= 1");
        if (cadence < 1) throw ParamError("resampling policy: cadence must be >= 1");
        if (ess_threshold && !(*ess_threshold > 0.0 && *ess_threshold <= 1.0))
            throw ParamError("resampling policy: ess_threshold must be in (0,1]");
    }
};

struct SimulationConfig {
    int n_particles = 1;
    int n_steps = 1;
    double dt = 0.0;  // 0: derived as (1 - t_start)/n_steps
    uint64_t seed = 0;
    double t_start = 0.0;
    std::optional<double> clip_drift_norm;

    double step_size() const {
        double span = 1.0 - t_start;
        if (dt <= 0.0) return span / n_steps;
        if (std::abs(n_steps * dt - span) > 1e-12)
            throw ParamError("simulation config: n_steps * dt must span [t_start, 1]");
        return dt;
    }

    void validate() const {
        if (n_particles < 1) throw ParamError("simulation config: n_particles must be >= 1");
        if (n_steps < 1) throw ParamError("simulation config: n_steps must be >= 1");
        if (!(t_start >= 0.0 && t_start < 1.0))
            throw ParamError("simulation config: t_start must be in [0,1)");
        (void)step_size();
    }
};

struct EnsembleStats {
    int resample_events = 0;
    long jump_events = 0;
};

struct ParticleEnsemble {
    int n = 0, d = 0;
    double t = 0.0;
    std::vector<double> positions;    // n x d
    std::vector<double> log_weights;  // selection weights since the last resample
    std::vector<CounterRng> streams;  // per-particle counter-based streams
    EnsembleStats stats;

    std::span<const double> position(int k) const {
        return std::span<const double>(positions).subspan(static_cast<size_t>(k) * d, d);
    }
    std::span<double> position(int k) {
        return std::span<double>(positions).subspan(static_cast<size_t>(k) * d, d);
    }
};

struct ResampleEvent {
    int step = 0;
    double t = 0.0;
    std::string kind;
    int count = 0;  // offspring replacements / jumps
};

struct Diagnostics {
    std::vector<double> ess;  // one entry per step
    std::vector<ResampleEvent> events;
};

struct SimulationResult {
    ParticleEnsemble ensemble;
    double log_z = 0.0;
    Diagnostics diagnostics;
};

// (sum e^w)^2 / sum e^{2w}, computed with max subtraction; uniform weights
// give K, a one-hot ensemble gives 1.
inline double ess(std::span<const double> log_weights) {
    double m = -std::numeric_limits<double>::infinity();
    for (double w : log_weights) m = std::max(m, w);
    if (!std::isfinite(m)) throw DegenerateEnsembleError("ess: all weights are -inf");
    double s1 = 0.0, s2 = 0.0;
    for (double w : log_weights) {
        double e = std::exp(w - m);
        s1 += e;
        s2 += e * e;
    }
    return s1 * s1 / s2;
}

inline std::vector<double> softmax(std::span<const double> log_weights) {
    double m = -std::numeric_limits<double>::infinity();
    for (double w : log_weights) m = std::max(m, w);
    if (!std::isfinite(m)) throw DegenerateEnsembleError("softmax: all weights are -inf");
    std::vector<double> p(log_weights.size());
    double s = 0.0;
    for (size_t k = 0; k < p.size(); ++k) {
        p[k] = std::exp(log_weights[k] - m);
        s += p[k];
    }
    for (double& v : p) v /= s;
    return p;
}

// Low-variance offspring selection from a single uniform draw. Offspring
// counts satisfy |N_k - K w_k| < 1; uniform weights return every particle
// exactly once. u0 must lie in [0, 1/K).
inline std::vector<uint32_t> systematic_resample_at(std::span<const double> log_weights,
                                                    double u0) {
    const size_t K = log_weights.size();
    std::vector<double> w = softmax(log_weights);
    std::vector<uint32_t> parents(K);
    size_t k = 0;
    double cdf = w[0];
    for (size_t j = 0; j < K; ++j) {
        double u = u0 + static_cast<double>(j) / static_cast<double>(K);
        // half-open cells [C_{k-1}, C_k) keep the offspring bound strict
        while (u >= cdf && k + 1 < K) {
            ++k;
            cdf += w[k];
        }
        parents[j] = static_cast<uint32_t>(k);
    }
    return parents;
}

inline std::vector<uint32_t> systematic_resample(std::span<const double> log_weights,
                                                 CounterRng& rng) {
    return systematic_resample_at(log_weights,
                                  rng.uniform() / static_cast<double>(log_weights.size()));
}

inline void apply_parents(ParticleEnsemble& ens, std::span<const uint32_t> parents) {
    std::vector<double> next(ens.positions.size());
    for (int j = 0; j < ens.n; ++j) {
        auto src = ens.position(static_cast<int>(parents[j]));
        std::copy(src.begin(), src.end(), next.begin() + static_cast<size_t>(j) * ens.d);
    }
    ens.positions.swap(next);
    std::fill(ens.log_weights.begin(), ens.log_weights.end(), 0.0);
}

// One Euler step of the jump process with rate (g - mean g)^- and empirical
// destination kernel proportional to (g - mean g)^+. Jump probabilities per
// substep are kept below 1/2 by subdividing dt; rates stay frozen at the
// supplied g values. Weights are equalized afterwards.
inline int jump_resample_step(ParticleEnsemble& ens, std::span<const double> g, double dt,
                              CounterRng& rng) {
    const int K = ens.n;
    double gbar = 0.0;
    for (double v : g) gbar += v;
    gbar /= K;
    // excesses at roundoff scale are treated as zero
    double tol = 1e-12 * (1.0 + std::abs(gbar));
    std::vector<double> lambda(K), pos(K);
    double max_lambda = 0.0, total_pos = 0.0;
    for (int k = 0; k < K; ++k) {
        double e = g[k] - gbar;
        if (std::abs(e) <= tol) e = 0.0;
        lambda[k] = std::max(0.0, -e);
        pos[k] = std::max(0.0, e);
        max_lambda = std::max(max_lambda, lambda[k]);
        total_pos += pos[k];
    }
    std::fill(ens.log_weights.begin(), ens.log_weights.end(), 0.0);
    if (max_lambda * dt <= 0.0) return 0;
    if (!(total_pos > 0.0))
        throw std::logic_error("jump_resample_step: positive rate with zero excess mass");

    int substeps = std::max(1, static_cast<int>(std::ceil(max_lambda * dt / 0.5)));
    double sub_dt = dt / substeps;
    int jumps = 0;
    std::vector<std::pair<int, int>> moves;
    std::vector<double> dest;
    for (int s = 0; s < substeps; ++s) {
        moves.clear();
        for (int k = 0; k < K; ++k) {
            if (lambda[k] <= 0.0) continue;
            if (rng.uniform() < lambda[k] * sub_dt) {
                int j = static_cast<int>(rng.categorical(pos));
                moves.emplace_back(k, j);
            }
        }
        // snapshot destinations before mutating so simultaneous jumps read the
        // pre-substep ensemble
        dest.resize(moves.size() * ens.d);
        for (size_t m = 0; m < moves.size(); ++m) {
            auto src = ens.position(moves[m].second);
            std::copy(src.begin(), src.end(), dest.begin() + m * ens.d);
        }
        for (size_t m = 0; m < moves.size(); ++m) {
            auto dst = ens.position(moves[m].first);
            std::copy(dest.begin() + m * ens.d, dest.begin() + (m + 1) * ens.d, dst.begin());
        }
        jumps += static_cast<int>(moves.size());
    }
    ens.stats.jump_events += jumps;
    return jumps;
}

// Birth-death simulation of the same jump process via exponential(1) clocks:
// each particle accumulates its rate and redraws its state when the
// accumulated rate passes the clock threshold.
struct BdcState {
    std::vector<double> accumulated;
    std::vector<double> threshold;

    static BdcState init(int n, CounterRng& rng) {
        BdcState s;
        s.accumulated.assign(n, 0.0);
        s.threshold.resize(n);
        for (auto& t : s.threshold) t = rng.exponential(1.0);
        return s;
    }
};

inline int bdc_clocks_step(ParticleEnsemble& ens, BdcState& state, std::span<const double> g,
                           double dt, CounterRng& rng) {
    const int K = ens.n;
    double gbar = 0.0;
    for (double v : g) gbar += v;
    gbar /= K;
    double tol = 1e-12 * (1.0 + std::abs(gbar));
    std::vector<double> pos(K);
    double total_pos = 0.0;
    for (int k = 0; k < K; ++k) {
        double e = g[k] - gbar;
        pos[k] = (e > tol) ? e : 0.0;
        total_pos += pos[k];
    }
    std::fill(ens.log_weights.begin(), ens.log_weights.end(), 0.0);

    int fires = 0;
    std::vector<std::pair<int, int>> moves;
    for (int k = 0; k < K; ++k) {
        double e = g[k] - gbar;
        double lambda = (e < -tol) ? -e : 0.0;
        state.accumulated[k] += lambda * dt;
        if (state.accumulated[k] >= state.threshold[k]) {
            if (!(total_pos > 0.0))
                throw std::logic_error("bdc_clocks_step: clock fired with zero excess mass");
            int j = static_cast<int>(rng.categorical(pos));
            moves.emplace_back(k, j);
            state.accumulated[k] = 0.0;
            state.threshold[k] = rng.exponential(1.0);
            ++fires;
        }
    }
    std::vector<double> dest(moves.size() * ens.d);
    for (size_t m = 0; m < moves.size(); ++m) {
        auto src = ens.position(moves[m].second);
        std::copy(src.begin(), src.end(), dest.begin() + m * ens.d);
    }
    for (size_t m = 0; m < moves.size(); ++m) {
        auto dst = ens.position(moves[m].first);
        std::copy(dest.begin() + m * ens.d, dest.begin() + (m + 1) * ens.d, dst.begin());
    }
    ens.stats.jump_events += fires;
    return fires;
}

// Softmax-weighted expectation of phi over the ensemble.
inline double snis_expectation(const ParticleEnsemble& ens,
                               const std::function<double(std::span<const double>)>& phi) {
    std::vector<double> w = softmax(ens.log_weights);
    double s = 0.0;
    for (int k = 0; k < ens.n; ++k) s += w[k] * phi(ens.position(k));
    return s;
}

inline size_t snis_select(const ParticleEnsemble& ens, CounterRng& rng) {
    std::vector<double> w = softmax(ens.log_weights);
    return rng.categorical(w);
}

// Euler-Maruyama simulation of a weighted SDE for K particles with log-weight
// accumulation, mean-centering, and the configured resampling scheme.
// Deterministic given (seed, config, policy): particle moves consume only the
// particle's own stream, all reductions run in fixed index order, and
// resampling draws from a dedicated stream.
inline SimulationResult simulate(const WeightedSde& sde, const SimulationConfig& cfg,
                                 const ResamplingPolicy& policy) {
    cfg.validate();
    policy.validate();
    const int K = cfg.n_particles;
    const int d = sde.dim;
    const double dt = cfg.step_size();
    const double sqrt_dt = std::sqrt(dt);

    ParticleEnsemble ens;
    ens.n = K;
    ens.d = d;
    ens.t = cfg.t_start;
    ens.positions.resize(static_cast<size_t>(K) * d);
    ens.log_weights.assign(K, 0.0);
    ens.streams.reserve(K);
    for (int k = 0; k < K; ++k) ens.streams.emplace_back(cfg.seed, static_cast<uint64_t>(k) + 1);
    CounterRng resample_rng(cfg.seed, 0);

    const GaussianMixture& init = sde.initial.mixture;
    if (init.dim != d) throw ShapeError("simulate: initial distribution dimension mismatch");
    parallel_for(static_cast<size_t>(K), [&](size_t k) {
        auto& rng = ens.streams[k];
        size_t comp = rng.categorical(init.weights);
        double sd = std::sqrt(init.variances[comp]);
        auto mu = init.mean(static_cast<int>(comp));
        auto x = ens.position(static_cast<int>(k));
        for (int j = 0; j < d; ++j) x[j] = mu[j] + sd * rng.normal();
    });

    double log_z = sde.initial.log_mass;
    Diagnostics diag;
    diag.ess.reserve(cfg.n_steps);

    std::optional<BdcState> bdc;
    if (policy.scheme == ResampleScheme::BdcClocks) bdc = BdcState::init(K, resample_rng);

    std::vector<double> g(K), drift(static_cast<size_t>(K) * d), delta(K);
    const bool weight_stream = policy.scheme == ResampleScheme::None ||
                               policy.scheme == ResampleScheme::SnisFinal ||
                               policy.scheme == ResampleScheme::Systematic;
    constexpr double kEps = 1e-12;

    for (int step = 0; step < cfg.n_steps; ++step) {
        double t = cfg.t_start + step * dt;
        double scale = sde.diffusion_scale(t);
        std::atomic<int> bad{-1};

        parallel_for(static_cast<size_t>(K), [&](size_t k) {
            auto x = ens.position(static_cast<int>(k));
            std::span<double> v(drift.data() + k * d, d);
            double gk = sde.drift_and_weight(x, t, v);
            bool ok = std::isfinite(gk);
            if (cfg.clip_drift_norm) {
                double nv = std::sqrt(norm_sq(v));
                if (nv > *cfg.clip_drift_norm)
                    for (double& vi : v) vi *= *cfg.clip_drift_norm / nv;
            }
            auto& rng = ens.streams[k];
            for (int j = 0; j < d; ++j) {
                x[j] += v[j] * dt + scale * sqrt_dt * rng.normal();
                ok = ok && std::isfinite(v[j]) && std::isfinite(x[j]);
            }
            g[k] = gk;
            if (!ok) {
                int expected = -1;
                bad.compare_exchange_strong(expected, static_cast<int>(k));
            }
        });
        if (bad.load() >= 0)
            throw SimulationError("non-finite drift, weight, or state", step, bad.load());

        bool in_active = (t >= policy.t_min - kEps) && (t <= policy.t_max + kEps);

        // serial reductions, fixed order
        std::vector<double> w = softmax(ens.log_weights);
        double dmax = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
            delta[k] = g[k] * dt;
            dmax = std::max(dmax, delta[k]);
        }
        double zsum = 0.0, gbar = 0.0;
        for (int k = 0; k < K; ++k) {
            zsum += w[k] * std::exp(delta[k] - dmax);
            gbar += w[k] * g[k];
        }
        if (!(policy.exclude_outside_from_logz && !in_active))
            log_z += dmax + std::log(zsum);

        if (weight_stream && in_active)
            for (int k = 0; k < K; ++k) ens.log_weights[k] += (g[k] - gbar) * dt;

        ens.t = t + dt;
        diag.ess.push_back(weight_stream ? ess(ens.log_weights) : static_cast<double>(K));

        if (policy.scheme == ResampleScheme::Systematic && in_active &&
            (step + 1) % policy.cadence == 0) {
            bool trigger = !policy.ess_threshold ||
                           ess(ens.log_weights) < *policy.ess_threshold * K;
            if (trigger) {
                auto parents = systematic_resample(ens.log_weights, resample_rng);
                int moved = 0;
                for (int j = 0; j < K; ++j)
                    if (parents[j] != static_cast<uint32_t>(j)) ++moved;
                apply_parents(ens, parents);
                ens.stats.resample_events += 1;
                diag.events.push_back({step, ens.t, "systematic", moved});
            }
        } else if (policy.scheme == ResampleScheme::Jump && in_active) {
            int jumps = jump_resample_step(ens, g, dt, resample_rng);
            if (jumps > 0) diag.events.push_back({step, ens.t, "jump", jumps});
        } else if (policy.scheme == ResampleScheme::BdcClocks && in_active) {
            int fires = bdc_clocks_step(ens, *bdc, g, dt, resample_rng);
            if (fires > 0) diag.events.push_back({step, ens.t, "bdc", fires});
        }
    }

    return {std::move(ens), log_z, std::move(diag)};
}

}  // namespace fkc
