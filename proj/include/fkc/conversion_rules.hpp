#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "fkc/common.hpp"

namespace fkc {

// One row of the conversion table: given a term of the original Feynman-Kac
// PDE, how the simulated term changes for the annealed target q^beta or the
// product target q^1 q^2, plus the additive weight-rate corrector. Correctors
// from different rows add up in weight space.
enum class ConversionTerm {
    AnnealContinuity,
    AnnealContinuityScaled,
    AnnealDiffusion,
    AnnealDiffusionScaled,
    AnnealReweight,
    ProductContinuity,
    ProductDiffusion,
    ProductReweight
};

struct ConversionInputs {
    double beta = 1.0;
    double sigma = 0.0;
    std::optional<std::vector<double>> v;       // flow drift (first model's for product rows)
    std::optional<std::vector<double>> v2;      // second flow drift
    std::optional<double> div_v;                // divergence of v
    std::optional<std::vector<double>> score;   // grad log q (or grad log q^1)
    std::optional<std::vector<double>> score2;  // grad log q^2
    std::optional<double> laplacian_log;        // lap log q
    std::optional<double> g;                    // original weight rate (or first of two)
    std::optional<double> g2;
};

// What the caller should simulate in place of the original term.
struct SimulatedTerm {
    enum class Kind { Drift, Noise, None };
    Kind kind = Kind::None;
    double drift_scale = 1.0;  // multiplier on the original drift(s)
    double noise_scale = 1.0;  // multiplier on the original sigma_t
};

struct ConversionResult {
    SimulatedTerm term;
    double weight_rate = 0.0;
};

namespace detail {
template <typename T>
const T& require(const std::optional<T>& opt, const char* name) {
    if (!opt) throw CapabilityError(std::string("conversion_weight: missing input ") + name);
    return *opt;
}
}  // namespace detail

inline ConversionResult conversion_weight(ConversionTerm term, const ConversionInputs& in) {
    using Kind = SimulatedTerm::Kind;
    const double beta = in.beta;
    const double sig2 = in.sigma * in.sigma;
    switch (term) {
        case ConversionTerm::AnnealContinuity:
            return {{Kind::Drift, 1.0, 1.0},
                    -(beta - 1.0) * detail::require(in.div_v, "div_v")};
        case ConversionTerm::AnnealContinuityScaled: {
            const auto& s = detail::require(in.score, "score");
            const auto& v = detail::require(in.v, "v");
            return {{Kind::Drift, beta, 1.0}, beta * (beta - 1.0) * dot(s, v)};
        }
        case ConversionTerm::AnnealDiffusion: {
            const auto& s = detail::require(in.score, "score");
            return {{Kind::Noise, 1.0, 1.0},
                    -beta * (beta - 1.0) * 0.5 * sig2 * norm_sq(s)};
        }
        case ConversionTerm::AnnealDiffusionScaled: {
            double lap = detail::require(in.laplacian_log, "laplacian_log");
            if (!(beta > 0.0))
                throw ParamError("conversion_weight: scaled diffusion needs beta > 0");
            return {{Kind::Noise, 1.0, 1.0 / std::sqrt(beta)},
                    (beta - 1.0) * 0.5 * sig2 * lap};
        }
        case ConversionTerm::AnnealReweight:
            return {{Kind::None, 1.0, 1.0}, beta * detail::require(in.g, "g")};
        case ConversionTerm::ProductContinuity: {
            const auto& s1 = detail::require(in.score, "score");
            const auto& s2 = detail::require(in.score2, "score2");
            const auto& v1 = detail::require(in.v, "v");
            const auto& v2 = detail::require(in.v2, "v2");
            return {{Kind::Drift, 1.0, 1.0}, dot(s1, v2) + dot(s2, v1)};
        }
        case ConversionTerm::ProductDiffusion: {
            const auto& s1 = detail::require(in.score, "score");
            const auto& s2 = detail::require(in.score2, "score2");
            return {{Kind::Noise, 1.0, 1.0}, -sig2 * dot(s1, s2)};
        }
        case ConversionTerm::ProductReweight:
            return {{Kind::None, 1.0, 1.0},
                    detail::require(in.g, "g") + detail::require(in.g2, "g2")};
    }
    throw ParamError("conversion_weight: unknown term");
}

}  // namespace fkc
