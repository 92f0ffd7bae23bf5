#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "fkc/common.hpp"
#include "fkc/rng.hpp"

namespace fkc {

// N points in dimension d with optional probability weights (uniform when
// absent).
struct SampleSet {
    int dim = 1;
    std::vector<double> points;   // N x dim
    std::vector<double> weights;  // empty => uniform

    size_t size() const { return points.size() / static_cast<size_t>(dim); }

    std::span<const double> point(size_t i) const {
        return std::span<const double>(points).subspan(i * dim, dim);
    }

    double weight(size_t i) const {
        return weights.empty() ? 1.0 / static_cast<double>(size()) : weights[i];
    }

    void validate() const {
        if (dim < 1) throw ParamError("sample set: dim must be positive");
        if (size() == 0) throw ParamError("sample set: empty");
        if (points.size() % dim != 0) throw ShapeError("sample set: ragged point array");
        if (!weights.empty()) {
            if (weights.size() != size())
                throw ShapeError("sample set: weight length mismatch");
            double s = 0.0;
            for (double w : weights) {
                if (!(w >= 0.0)) throw ParamError("sample set: negative weight");
                s += w;
            }
            if (std::abs(s - 1.0) > 1e-9)
                throw ParamError("sample set: weights sum to " + std::to_string(s));
        }
    }

    static SampleSet from_1d(std::vector<double> values, std::vector<double> weights = {}) {
        SampleSet s;
        s.dim = 1;
        s.points = std::move(values);
        s.weights = std::move(weights);
        s.validate();
        return s;
    }
};

// Exact W_p between two weighted 1D empirical laws via the quantile coupling.
inline double wasserstein_1d(const SampleSet& a, const SampleSet& b, int p) {
    a.validate();
    b.validate();
    if (a.dim != 1 || b.dim != 1) throw ShapeError("wasserstein_1d: inputs must be 1D");
    if (p != 1 && p != 2) throw ParamError("wasserstein_1d: p must be 1 or 2");

    auto sorted = [](const SampleSet& s) {
        std::vector<size_t> idx(s.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(),
                  [&](size_t i, size_t j) { return s.points[i] < s.points[j]; });
        std::vector<double> v(s.size()), w(s.size());
        for (size_t i = 0; i < idx.size(); ++i) {
            v[i] = s.points[idx[i]];
            w[i] = s.weight(idx[i]);
        }
        return std::pair{std::move(v), std::move(w)};
    };
    auto [va, wa] = sorted(a);
    auto [vb, wb] = sorted(b);

    size_t ia = 0, ib = 0;
    double ca = wa[0], cb = wb[0], u_prev = 0.0, total = 0.0;
    while (true) {
        double u_next = std::min(ca, cb);
        double seg = u_next - u_prev;
        if (seg > 0.0) {
            double diff = std::abs(va[ia] - vb[ib]);
            total += seg * (p == 1 ? diff : diff * diff);
        }
        u_prev = u_next;
        bool advance_a = ca <= cb;
        if (advance_a) {
            if (ia + 1 >= va.size()) break;
            ca += wa[++ia];
        } else {
            if (ib + 1 >= vb.size()) break;
            cb += wb[++ib];
        }
        if (u_prev >= 1.0 - 1e-15) break;
    }
    return p == 1 ? total : std::sqrt(total);
}

// Pushes both sets through a scalar energy function, optionally dropping
// samples above a threshold, then compares the energy laws with W_p.
inline double energy_distance(const SampleSet& a, const SampleSet& b,
                              const std::function<double(std::span<const double>)>& energy,
                              int p, std::optional<double> filter_above = std::nullopt) {
    auto mapped = [&](const SampleSet& s) {
        std::vector<double> e, w;
        for (size_t i = 0; i < s.size(); ++i) {
            double v = energy(s.point(i));
            if (filter_above && v > *filter_above) continue;
            e.push_back(v);
            w.push_back(s.weight(i));
        }
        if (e.empty()) throw ParamError("energy_distance: all samples filtered out");
        double sum = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& x : w) x /= sum;
        return SampleSet::from_1d(std::move(e), std::move(w));
    };
    return wasserstein_1d(mapped(a), mapped(b), p);
}

// 2-Wasserstein between the flattened clouds of all pairwise interparticle
// distances; rows are n-particle 3D configurations.
inline double distance_w2_pairwise(const SampleSet& a, const SampleSet& b) {
    auto flatten = [](const SampleSet& s) {
        if (s.dim % 3 != 0)
            throw ShapeError("distance_w2_pairwise: row length not divisible by 3");
        int n = s.dim / 3;
        size_t pairs = static_cast<size_t>(n) * (n - 1) / 2;
        std::vector<double> d, w;
        d.reserve(s.size() * pairs);
        w.reserve(s.size() * pairs);
        for (size_t r = 0; r < s.size(); ++r) {
            auto x = s.point(r);
            double wr = s.weight(r) / static_cast<double>(pairs);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    double d2 = 0.0;
                    for (int k = 0; k < 3; ++k) {
                        double diff = x[i * 3 + k] - x[j * 3 + k];
                        d2 += diff * diff;
                    }
                    d.push_back(std::sqrt(d2));
                    w.push_back(wr);
                }
        }
        return SampleSet::from_1d(std::move(d), std::move(w));
    };
    return wasserstein_1d(flatten(a), flatten(b), 2);
}

// Unbiased weighted RBF MMD^2 summed over bandwidths, square-rooted with a
// clamp at zero. Kernel: exp(-|x-y|^2 / (2 h^2)).
inline double mmd_rbf(const SampleSet& a, const SampleSet& b,
                      std::span<const double> bandwidths) {
    a.validate();
    b.validate();
    if (a.dim != b.dim) throw ShapeError("mmd_rbf: dimension mismatch");
    if (a.size() < 2 || b.size() < 2)
        throw ParamError("mmd_rbf: unbiased estimator needs N >= 2");
    if (bandwidths.empty()) throw ParamError("mmd_rbf: no bandwidths");

    auto sq_dist = [&](std::span<const double> x, std::span<const double> y) {
        double s = 0.0;
        for (size_t k = 0; k < x.size(); ++k) {
            double d = x[k] - y[k];
            s += d * d;
        }
        return s;
    };
    auto kernel_sum = [&](double d2) {
        double s = 0.0;
        for (double h : bandwidths) s += std::exp(-d2 / (2.0 * h * h));
        return s;
    };

    // within-set terms exclude the diagonal and renormalize by 1 - sum w^2
    auto within = [&](const SampleSet& s) {
        double acc = 0.0, w2 = 0.0;
        size_t n = s.size();
        for (size_t i = 0; i < n; ++i) w2 += s.weight(i) * s.weight(i);
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                acc += 2.0 * s.weight(i) * s.weight(j) * kernel_sum(sq_dist(s.point(i), s.point(j)));
            }
        }
        return acc / (1.0 - w2);
    };
    double cross = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j)
            cross += a.weight(i) * b.weight(j) * kernel_sum(sq_dist(a.point(i), b.point(j)));

    double mmd2 = within(a) + within(b) - 2.0 * cross;
    return std::sqrt(std::max(0.0, mmd2));
}

// Total variation between weighted 2D histograms on a shared grid; points are
// clamped into the bounds.
inline double total_variation_grid(const SampleSet& a, const SampleSet& b, int bins, double lo,
                                   double hi) {
    a.validate();
    b.validate();
    if (a.dim != 2 || b.dim != 2) throw ShapeError("total_variation_grid: inputs must be 2D");
    if (bins < 1) throw ParamError("total_variation_grid: bins must be >= 1");
    if (!(hi > lo)) throw ParamError("total_variation_grid: zero-area bounds");

    double width = (hi - lo) / bins;
    auto histogram = [&](const SampleSet& s) {
        std::vector<double> h(static_cast<size_t>(bins) * bins, 0.0);
        for (size_t i = 0; i < s.size(); ++i) {
            auto x = s.point(i);
            int ix = std::clamp(static_cast<int>((x[0] - lo) / width), 0, bins - 1);
            int iy = std::clamp(static_cast<int>((x[1] - lo) / width), 0, bins - 1);
            h[static_cast<size_t>(iy) * bins + ix] += s.weight(i);
        }
        return h;
    };
    auto ha = histogram(a), hb = histogram(b);
    double tv = 0.0;
    for (size_t i = 0; i < ha.size(); ++i) tv += std::abs(ha[i] - hb[i]);
    return 0.5 * tv;
}

namespace detail {

// Dense shortest-augmenting-path assignment (Jonker-Volgenant style dual
// updates); returns the minimum total cost over perfect matchings.
inline double min_cost_assignment(const std::vector<double>& cost, int n) {
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> match(n + 1, 0);  // column -> row (1-based)
    std::vector<double> minv(n + 1);
    std::vector<int> way(n + 1);
    std::vector<char> used(n + 1);

    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            int i0 = match[j0], j1 = -1;
            double delta = kInf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (int j = 1; j <= n; ++j)
        total += cost[static_cast<size_t>(match[j] - 1) * n + (j - 1)];
    return total;
}

}  // namespace detail

// Exact W_p (p in {1,2}) between equal-size uniform-weight sets via optimal
// assignment.
inline double wasserstein_assignment(const SampleSet& a, const SampleSet& b, int p) {
    a.validate();
    b.validate();
    if (a.dim != b.dim) throw ShapeError("wasserstein_assignment: dimension mismatch");
    if (a.size() != b.size())
        throw ShapeError("wasserstein_assignment: size mismatch in exact mode");
    if (!a.weights.empty() || !b.weights.empty())
        throw ParamError("wasserstein_assignment: exact mode needs uniform weights");
    if (p != 1 && p != 2) throw ParamError("wasserstein_assignment: p must be 1 or 2");
    const int n = static_cast<int>(a.size());
    std::vector<double> cost(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        auto x = a.point(i);
        for (int j = 0; j < n; ++j) {
            auto y = b.point(j);
            double d2 = 0.0;
            for (int k = 0; k < a.dim; ++k) {
                double d = x[k] - y[k];
                d2 += d * d;
            }
            cost[static_cast<size_t>(i) * n + j] = (p == 1) ? std::sqrt(d2) : d2;
        }
    }
    double total = detail::min_cost_assignment(cost, n) / n;
    return p == 1 ? total : std::sqrt(total);
}

// Seeded reduction of an arbitrary weighted set to max_n uniform draws, then
// exact assignment.
inline double wasserstein_assignment_subsampled(const SampleSet& a, const SampleSet& b, int p,
                                                size_t max_n, uint64_t seed) {
    auto reduce = [&](const SampleSet& s, uint64_t stream) {
        if (s.weights.empty() && s.size() <= max_n) return s;
        CounterRng rng(seed, stream);
        std::vector<double> probs(s.size());
        for (size_t i = 0; i < s.size(); ++i) probs[i] = s.weight(i);
        size_t m = std::min(max_n, s.size());
        SampleSet out;
        out.dim = s.dim;
        out.points.reserve(m * s.dim);
        for (size_t i = 0; i < m; ++i) {
            auto x = s.point(rng.categorical(probs));
            out.points.insert(out.points.end(), x.begin(), x.end());
        }
        return out;
    };
    SampleSet ra = reduce(a, 1), rb = reduce(b, 2);
    size_t m = std::min(ra.size(), rb.size());
    ra.points.resize(m * ra.dim);
    rb.points.resize(m * rb.dim);
    return wasserstein_assignment(ra, rb, p);
}

// Monte Carlo sliced W_p: average of 1D projections over random directions.
// Documented approximation for large N.
inline double wasserstein_sliced(const SampleSet& a, const SampleSet& b, int p,
                                 int n_projections, uint64_t seed) {
    a.validate();
    b.validate();
    if (a.dim != b.dim) throw ShapeError("wasserstein_sliced: dimension mismatch");
    CounterRng rng(seed, 0x736c696365ull);
    double acc = 0.0;
    std::vector<double> dir(a.dim);
    for (int s = 0; s < n_projections; ++s) {
        double norm = 0.0;
        for (auto& v : dir) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (auto& v : dir) v /= norm;
        auto project = [&](const SampleSet& set) {
            std::vector<double> vals(set.size());
            for (size_t i = 0; i < set.size(); ++i) vals[i] = dot(set.point(i), dir);
            SampleSet out = SampleSet::from_1d(std::move(vals), set.weights);
            return out;
        };
        double w = wasserstein_1d(project(a), project(b), p);
        acc += (p == 1) ? w : w * w;
    }
    acc /= n_projections;
    return p == 1 ? acc : std::sqrt(acc);
}

enum class WassersteinMethod { ExactAssignment, Sliced };

// Euclidean W_p between point clouds: exact optimal assignment on seeded
// subsamples, or the sliced Monte Carlo approximation for large N.
inline double wasserstein_nd(const SampleSet& a, const SampleSet& b, int p,
                             WassersteinMethod method, int size_param, uint64_t seed) {
    if (method == WassersteinMethod::ExactAssignment)
        return wasserstein_assignment_subsampled(a, b, p, static_cast<size_t>(size_param), seed);
    return wasserstein_sliced(a, b, p, size_param, seed);
}

inline double wasserstein_2d(const SampleSet& a, const SampleSet& b, int p,
                             WassersteinMethod method, int size_param, uint64_t seed) {
    if (a.dim != 2 || b.dim != 2) throw ShapeError("wasserstein_2d: inputs must be 2D");
    return wasserstein_nd(a, b, p, method, size_param, seed);
}

// Median pairwise distance of the pooled sets (subsampled for large inputs);
// the usual base bandwidth for the multi-scale RBF kernel.
inline double median_pairwise_distance(const SampleSet& a, const SampleSet& b,
                                       size_t max_points = 1000, uint64_t seed = 0) {
    std::vector<double> pool;
    int d = a.dim;
    auto take = [&](const SampleSet& s, uint64_t stream) {
        CounterRng rng(seed, stream);
        size_t n = s.size();
        size_t m = std::min(max_points / 2, n);
        for (size_t i = 0; i < m; ++i) {
            size_t idx = (n <= m) ? i : static_cast<size_t>(rng.uniform() * n);
            auto x = s.point(idx);
            pool.insert(pool.end(), x.begin(), x.end());
        }
    };
    take(a, 11);
    take(b, 12);
    size_t n = pool.size() / d;
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double d2 = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = pool[i * d + k] - pool[j * d + k];
                d2 += diff * diff;
            }
            dists.push_back(std::sqrt(d2));
        }
    if (dists.empty()) return 1.0;
    std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
    return dists[dists.size() / 2];
}

}  // namespace fkc
