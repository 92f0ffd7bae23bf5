#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fkc/common.hpp"
#include "fkc/rng.hpp"

namespace fkc {

inline double log_normal_pdf_iso(std::span<const double> x, std::span<const double> mean,
                                 double variance) {
    double q = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - mean[i];
        q += d * d;
    }
    double d = static_cast<double>(x.size());
    return -0.5 * q / variance - 0.5 * d * std::log(2.0 * std::numbers::pi * variance);
}

// Isotropic Gaussian mixture: K components in dimension d, scalar variances.
struct GaussianMixture {
    int dim = 1;
    std::vector<double> weights;    // K, sums to 1
    std::vector<double> means;      // K x d, row-major
    std::vector<double> variances;  // K

    int components() const { return static_cast<int>(weights.size()); }

    std::span<const double> mean(int k) const {
        return std::span<const double>(means).subspan(static_cast<size_t>(k) * dim, dim);
    }

    static GaussianMixture make(int dim, std::vector<double> weights, std::vector<double> means,
                                std::vector<double> variances) {
        GaussianMixture g;
        g.dim = dim;
        g.weights = std::move(weights);
        g.means = std::move(means);
        g.variances = std::move(variances);
        g.validate();
        return g;
    }

    static GaussianMixture single(std::vector<double> mean, double variance) {
        int d = static_cast<int>(mean.size());
        return make(d, {1.0}, std::move(mean), {variance});
    }

    void validate() const {
        if (dim < 1) throw ParamError("mixture: dim must be positive");
        size_t k = weights.size();
        if (k == 0) throw ParamError("mixture: no components");
        if (variances.size() != k || means.size() != k * static_cast<size_t>(dim))
            throw ShapeError("mixture: inconsistent component arrays");
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw ParamError("mixture: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw ParamError("mixture: weights sum to " + std::to_string(sum));
        for (double v : variances)
            if (!(v > 0.0)) throw ParamError("mixture: non-positive variance");
    }

    double log_density(std::span<const double> x) const {
        check_dim(x, dim, "mixture log_density: x");
        double m = -std::numeric_limits<double>::infinity();
        thread_local std::vector<double> lp;
        lp.resize(weights.size());
        for (int k = 0; k < components(); ++k) {
            lp[k] = std::log(weights[k]) + log_normal_pdf_iso(x, mean(k), variances[k]);
            m = std::max(m, lp[k]);
        }
        double s = 0.0;
        for (double v : lp) s += std::exp(v - m);
        return m + std::log(s);
    }

    void sample(size_t n, CounterRng& rng, std::vector<double>& out) const {
        out.resize(n * static_cast<size_t>(dim));
        for (size_t i = 0; i < n; ++i) {
            size_t k = rng.categorical(weights);
            double sd = std::sqrt(variances[k]);
            auto mu = mean(static_cast<int>(k));
            for (int j = 0; j < dim; ++j)
                out[i * dim + j] = mu[j] + sd * rng.normal();
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["dim"] = dim;
        j["weights"] = weights;
        nlohmann::json jm = nlohmann::json::array();
        for (int k = 0; k < components(); ++k) {
            auto mu = mean(k);
            jm.push_back(std::vector<double>(mu.begin(), mu.end()));
        }
        j["means"] = jm;
        j["variances"] = variances;
        return j;
    }

    static GaussianMixture from_json(const nlohmann::json& j) {
        int dim = j.at("dim").get<int>();
        std::vector<double> w = j.at("weights").get<std::vector<double>>();
        std::vector<double> v = j.at("variances").get<std::vector<double>>();
        std::vector<double> m;
        for (const auto& row : j.at("means"))
            for (const auto& x : row) m.push_back(x.get<double>());
        return make(dim, std::move(w), std::move(m), std::move(v));
    }

    // The GMM-40 style benchmark layout: modes drawn uniformly from
    // [-half_width, half_width]^dim from a fixed seed, equal weights.
    static GaussianMixture random_modes(uint64_t seed, int n_modes, double half_width,
                                        double variance, int dim = 2) {
        CounterRng rng(seed, 0x6d6f646573ull);  // "modes"
        std::vector<double> w(n_modes, 1.0 / n_modes);
        std::vector<double> m(static_cast<size_t>(n_modes) * dim);
        std::vector<double> v(n_modes, variance);
        for (auto& x : m) x = (2.0 * rng.uniform() - 1.0) * half_width;
        return make(dim, std::move(w), std::move(m), std::move(v));
    }
};

// i.i.d. samples from the mixture (categorical component pick + Gaussian draw).
inline std::vector<double> sample_mixture(const GaussianMixture& g, size_t n, CounterRng& rng) {
    std::vector<double> out;
    g.sample(n, rng, out);
    return out;
}

// Exact mixture proportional to g(x)^beta for positive integer beta: one
// component per multi-index, with product-of-Gaussians means/variances and the
// Gaussian-product normalization constants folded into the weights. Output
// weights are renormalized; *log_mass (if given) receives log of the total
// mass of the unnormalized expansion, i.e. log integral of g^beta.
inline GaussianMixture gmm_integer_power(const GaussianMixture& g, int beta,
                                         size_t max_components = (1u << 20),
                                         double* log_mass = nullptr) {
    if (beta < 1) throw ParamError("gmm_integer_power: beta must be >= 1");
    const int K = g.components();
    const int d = g.dim;
    double count = std::pow(static_cast<double>(K), beta);
    if (count > static_cast<double>(max_components))
        throw CapacityError("gmm_integer_power: " + std::to_string(count) +
                            " components exceeds cap " + std::to_string(max_components));
    size_t n_out = static_cast<size_t>(count + 0.5);

    std::vector<double> log_w(n_out);
    std::vector<double> means(n_out * d);
    std::vector<double> vars(n_out);

    std::vector<int> idx(beta, 0);
    std::vector<double> mu_star(d);
    for (size_t c = 0; c < n_out; ++c) {
        // product of the selected components as a single Gaussian
        double precision = 0.0, lw = 0.0;
        std::fill(mu_star.begin(), mu_star.end(), 0.0);
        for (int b = 0; b < beta; ++b) {
            int k = idx[b];
            double v = g.variances[k];
            precision += 1.0 / v;
            auto mu = g.mean(k);
            for (int j = 0; j < d; ++j) mu_star[j] += mu[j] / v;
            lw += std::log(g.weights[k]);
        }
        double v_star = 1.0 / precision;
        for (int j = 0; j < d; ++j) mu_star[j] *= v_star;
        // log of the product constant: sum_i log N(mu* | mu_i, v_i) - log N(mu* | mu*, v*)
        double lc = 0.5 * d * std::log(2.0 * std::numbers::pi * v_star);
        for (int b = 0; b < beta; ++b) {
            int k = idx[b];
            lc += log_normal_pdf_iso(mu_star, g.mean(k), g.variances[k]);
        }
        log_w[c] = lw + lc;
        vars[c] = v_star;
        for (int j = 0; j < d; ++j) means[c * d + j] = mu_star[j];
        // odometer over multi-indices
        for (int b = beta - 1; b >= 0; --b) {
            if (++idx[b] < K) break;
            idx[b] = 0;
        }
    }

    double lse = log_sum_exp(log_w);
    if (log_mass) *log_mass = lse;
    std::vector<double> w(n_out);
    for (size_t c = 0; c < n_out; ++c) w[c] = std::exp(log_w[c] - lse);
    return GaussianMixture::make(d, std::move(w), std::move(means), std::move(vars));
}

// Exact mixture proportional to a(x) * b(x); *log_mass receives log of the
// integral of the pointwise product.
inline GaussianMixture gmm_product(const GaussianMixture& a, const GaussianMixture& b,
                                   size_t max_components = (1u << 20),
                                   double* log_mass = nullptr) {
    if (a.dim != b.dim) throw ShapeError("gmm_product: dimension mismatch");
    const int d = a.dim;
    size_t n_out = static_cast<size_t>(a.components()) * b.components();
    if (n_out > max_components)
        throw CapacityError("gmm_product: component count exceeds cap");
    std::vector<double> log_w(n_out), means(n_out * d), vars(n_out);
    std::vector<double> mu_star(d);
    size_t c = 0;
    for (int i = 0; i < a.components(); ++i) {
        for (int j = 0; j < b.components(); ++j, ++c) {
            double precision = 1.0 / a.variances[i] + 1.0 / b.variances[j];
            double v_star = 1.0 / precision;
            auto ma = a.mean(i);
            auto mb = b.mean(j);
            for (int k = 0; k < d; ++k)
                mu_star[k] = v_star * (ma[k] / a.variances[i] + mb[k] / b.variances[j]);
            double lc = 0.5 * d * std::log(2.0 * std::numbers::pi * v_star) +
                        log_normal_pdf_iso(mu_star, ma, a.variances[i]) +
                        log_normal_pdf_iso(mu_star, mb, b.variances[j]);
            log_w[c] = std::log(a.weights[i]) + std::log(b.weights[j]) + lc;
            vars[c] = v_star;
            for (int k = 0; k < d; ++k) means[c * d + k] = mu_star[k];
        }
    }
    double lse = log_sum_exp(log_w);
    if (log_mass) *log_mass = lse;
    std::vector<double> w(n_out);
    for (size_t k = 0; k < n_out; ++k) w[k] = std::exp(log_w[k] - lse);
    return GaussianMixture::make(d, std::move(w), std::move(means), std::move(vars));
}

}  // namespace fkc
