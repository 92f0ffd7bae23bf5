#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fkc/builders.hpp"
#include "fkc/particle_engine.hpp"
#include "fkc/score_model.hpp"

namespace fkc {

using json = nlohmann::json;

namespace cfg_detail {

inline const json& require_field(const json& j, const std::string& key,
                                 const std::string& path) {
    if (!j.contains(key)) throw ConfigError(path + "." + key, "missing field");
    return j.at(key);
}

inline double number_at(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number()) throw ConfigError(path + "." + key, "expected a number");
    return v.get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<double>();
}

inline int int_at(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_number_integer()) throw ConfigError(path + "." + key, "expected an integer");
    return v.get<int>();
}

inline std::string string_at(const json& j, const std::string& key, const std::string& path) {
    const json& v = require_field(j, key, path);
    if (!v.is_string()) throw ConfigError(path + "." + key, "expected a string");
    return v.get<std::string>();
}

}  // namespace cfg_detail

struct RewardSpec {
    std::string type;  // "quadratic": r(x) = scale * |x|^2
    double scale = 0.0;

    std::function<double(std::span<const double>)> reward() const {
        double s = scale;
        return [s](std::span<const double> x) { return s * norm_sq(x); };
    }
    std::function<void(std::span<const double>, std::span<double>)> grad() const {
        double s = scale;
        return [s](std::span<const double> x, std::span<double> out) {
            for (size_t i = 0; i < x.size(); ++i) out[i] = 2.0 * s * x[i];
        };
    }
};

// Target family plus everything needed to assemble it and to derive oracles.
struct TargetSpec {
    std::string type;  // annealed | product | geometric | weighted_product | poe_cfg | reward_tilted
    std::vector<std::string> model_names;
    std::vector<double> betas;
    double a = 0.0;
    BetaSchedule beta_schedule = BetaSchedule::constant(1.0);
    bool time_dependent = false;
    std::optional<RewardSpec> reward;
};

struct MetricsConfig {
    std::vector<std::string> list;
    std::string reference_type = "none";  // oracle | csv | none
    size_t reference_samples = 10000;
    uint64_t reference_seed = 1;
    std::string reference_path;
    int tv_bins = 200;
    double tv_lo = -50.0, tv_hi = 50.0;
    std::vector<double> mmd_scales = {0.5, 1.0, 2.0, 4.0, 8.0};
    size_t mmd_subsample = 4000;
    size_t wasserstein_max_exact = 2000;
    int sliced_projections = 64;
    std::optional<double> energy_filter_above;
};

struct ExperimentConfig {
    NoiseSchedule schedule = NoiseSchedule::ve_geometric(0.01, 500.0, 2);
    std::map<std::string, std::shared_ptr<DiffusedGaussianMixture>> models;
    TargetSpec target;
    SimulationConfig simulation;
    ResamplingPolicy resampling;
    MetricsConfig metrics;
    std::string output_dir = "out";
    std::vector<std::string> output_formats = {"csv", "json"};
    json raw;  // resolved canonical form

    // model factors (model, exponent) describing the unnormalized target
    std::vector<std::pair<const DiffusedGaussianMixture*, double>> target_factors() const {
        std::vector<std::pair<const DiffusedGaussianMixture*, double>> out;
        auto at = [&](size_t i) { return models.at(target.model_names[i]).get(); };
        if (target.type == "annealed") {
            out.emplace_back(at(0), target.beta_schedule.value(1.0));
        } else if (target.type == "product") {
            out.emplace_back(at(0), target.betas[0]);
            out.emplace_back(at(1), target.betas[0]);
        } else if (target.type == "geometric") {
            out.emplace_back(at(0), 1.0 - target.betas[0]);
            out.emplace_back(at(1), target.betas[0]);
        } else if (target.type == "weighted_product") {
            for (size_t i = 0; i < target.model_names.size(); ++i)
                out.emplace_back(at(i), target.betas[i]);
        } else if (target.type == "poe_cfg") {
            out.emplace_back(at(0), 2.0 * (1.0 - target.betas[0]));
            out.emplace_back(at(1), target.betas[0]);
            out.emplace_back(at(2), target.betas[0]);
        } else if (target.type == "reward_tilted") {
            out.emplace_back(at(0), 1.0);
        }
        return out;
    }

    WeightedSde build_target() const {
        auto at = [&](size_t i) -> std::shared_ptr<const ScoreModel> {
            return models.at(target.model_names[i]);
        };
        if (target.type == "annealed")
            return build_annealed(at(0), schedule, AnnealSpec{target.beta_schedule, target.a});
        if (target.type == "product")
            return build_product(at(0), at(1), schedule,
                                 AnnealSpec::fixed(target.betas[0], target.a));
        if (target.type == "geometric")
            return build_geometric(at(0), at(1), schedule, target.betas[0], target.a);
        if (target.type == "weighted_product") {
            std::vector<std::shared_ptr<const ScoreModel>> ms;
            for (size_t i = 0; i < target.model_names.size(); ++i) ms.push_back(at(i));
            return build_weighted_product(ms, target.betas, schedule);
        }
        if (target.type == "poe_cfg")
            return build_poe_cfg(at(0), at(1), at(2), schedule, target.betas[0]);
        if (target.type == "reward_tilted")
            return build_reward_tilted(at(0), schedule, target.reward->reward(),
                                       target.reward->grad(), target.beta_schedule);
        throw ConfigError("target.type", "unknown target type '" + target.type + "'");
    }

    // Exact mixture for the target at the data end (t = 1), when derivable.
    std::optional<GaussianMixture> reference_mixture() const {
        if (target.type == "reward_tilted") {
            // quadratic reward on a single diffused Gaussian stays Gaussian
            const auto* m = models.at(target.model_names[0]).get();
            if (m->mixture().components() != 1 || !target.reward ||
                target.reward->type != "quadratic")
                return std::nullopt;
            GaussianMixture g1 = m->components_at(1.0);
            double beta1 = target.beta_schedule.value(1.0);
            double precision = 1.0 / g1.variances[0] - 2.0 * target.reward->scale * beta1;
            if (!(precision > 0.0)) return std::nullopt;
            double v = 1.0 / precision;
            std::vector<double> mean(g1.mean(0).begin(), g1.mean(0).end());
            for (auto& x : mean) x *= v / g1.variances[0];
            return GaussianMixture::single(std::move(mean), v);
        }
        return detail::combine_factors(target_factors(), 1.0, nullptr);
    }

    // Energy used by the energy-distance metrics: negative log of the first
    // model's (undiffused) mixture density.
    std::function<double(std::span<const double>)> energy_function() const {
        auto m = models.at(target.model_names.at(0));
        return [m](std::span<const double> x) { return -m->mixture().log_density(x); };
    }
};

inline GaussianMixture parse_model(const json& j, int dim, const std::string& path) {
    std::string type = cfg_detail::string_at(j, "type", path);
    if (type == "gaussian") {
        auto mean = cfg_detail::require_field(j, "mean", path).get<std::vector<double>>();
        if (static_cast<int>(mean.size()) != dim)
            throw ConfigError(path + ".mean", "length != schedule.dim");
        double var = cfg_detail::number_at(j, "variance", path);
        return GaussianMixture::single(std::move(mean), var);
    }
    if (type == "gmm") {
        try {
            auto g = GaussianMixture::from_json(j.contains("dim") ? j : [&] {
                json copy = j;
                copy["dim"] = dim;
                return copy;
            }());
            if (g.dim != dim) throw ConfigError(path, "mixture dim != schedule.dim");
            return g;
        } catch (const std::exception& e) {
            throw ConfigError(path, e.what());
        }
    }
    if (type == "gmm_modes") {
        uint64_t seed = j.value("seed", 0);
        int n_modes = j.value("n_modes", 40);
        double half_width = j.value("half_width", 40.0);
        double variance = j.value("variance", 1.0);
        return GaussianMixture::random_modes(seed, n_modes, half_width, variance, dim);
    }
    throw ConfigError(path + ".type", "unknown model type '" + type + "'");
}

inline BetaSchedule parse_beta_schedule(const json& j, const std::string& path) {
    std::string type = cfg_detail::string_at(j, "type", path);
    if (type == "constant") return BetaSchedule::constant(cfg_detail::number_at(j, "value", path));
    if (type == "linear")
        return BetaSchedule::linear(cfg_detail::number_at(j, "from", path),
                                    cfg_detail::number_at(j, "to", path));
    throw ConfigError(path + ".type", "unknown beta schedule '" + type + "'");
}

inline ExperimentConfig parse_config(const json& input) {
    ExperimentConfig cfg;
    cfg.raw = input;

    // schedule
    {
        const json& js = cfg_detail::require_field(input, "schedule", "");
        std::string kind = cfg_detail::string_at(js, "kind", "schedule");
        int dim = cfg_detail::int_at(js, "dim", "schedule");
        try {
            if (kind == "ve_geometric")
                cfg.schedule = NoiseSchedule::ve_geometric(
                    cfg_detail::number_at(js, "sigma_min", "schedule"),
                    cfg_detail::number_at(js, "sigma_max", "schedule"), dim);
            else if (kind == "vp_linear_beta")
                cfg.schedule = NoiseSchedule::vp_linear_beta(
                    cfg_detail::number_at(js, "beta_hat_min", "schedule"),
                    cfg_detail::number_at(js, "beta_hat_max", "schedule"), dim);
            else
                throw ConfigError("schedule.kind", "unknown kind '" + kind + "'");
        } catch (const ParamError& e) {
            throw ConfigError("schedule", e.what());
        }
    }

    // models
    {
        const json& jm = cfg_detail::require_field(input, "models", "");
        if (!jm.is_object() || jm.empty()) throw ConfigError("models", "need a non-empty object");
        for (const auto& [name, spec] : jm.items()) {
            GaussianMixture g = parse_model(spec, cfg.schedule.dim, "models." + name);
            cfg.models[name] =
                std::make_shared<DiffusedGaussianMixture>(std::move(g), cfg.schedule);
        }
    }

    // target
    {
        const json& jt = cfg_detail::require_field(input, "target", "");
        TargetSpec& t = cfg.target;
        t.type = cfg_detail::string_at(jt, "type", "target");
        auto model_ref = [&](const char* key) {
            std::string name = cfg_detail::string_at(jt, key, "target");
            if (!cfg.models.count(name))
                throw ConfigError(std::string("target.") + key,
                                  "unknown model '" + name + "'");
            t.model_names.push_back(name);
        };
        if (t.type == "annealed") {
            model_ref("model");
            t.a = cfg_detail::number_or(jt, "a", 0.0);
            if (jt.contains("beta_schedule")) {
                t.beta_schedule = parse_beta_schedule(jt.at("beta_schedule"),
                                                      "target.beta_schedule");
                t.time_dependent = t.beta_schedule.time_dependent;
            } else {
                t.beta_schedule =
                    BetaSchedule::constant(cfg_detail::number_at(jt, "beta", "target"));
            }
            t.betas = {t.beta_schedule.value(1.0)};
        } else if (t.type == "product" || t.type == "geometric") {
            model_ref("model1");
            model_ref("model2");
            t.betas = {cfg_detail::number_at(jt, "beta", "target")};
            t.a = cfg_detail::number_or(jt, "a", 0.0);
        } else if (t.type == "weighted_product") {
            const json& names = cfg_detail::require_field(jt, "models", "target");
            for (const auto& n : names) {
                std::string name = n.get<std::string>();
                if (!cfg.models.count(name))
                    throw ConfigError("target.models", "unknown model '" + name + "'");
                t.model_names.push_back(name);
            }
            t.betas = cfg_detail::require_field(jt, "betas", "target").get<std::vector<double>>();
            if (t.betas.size() != t.model_names.size())
                throw ConfigError("target.betas", "length mismatch with target.models");
        } else if (t.type == "poe_cfg") {
            model_ref("uncond");
            model_ref("cond1");
            model_ref("cond2");
            t.betas = {cfg_detail::number_at(jt, "beta", "target")};
        } else if (t.type == "reward_tilted") {
            model_ref("model");
            const json& jr = cfg_detail::require_field(jt, "reward", "target");
            RewardSpec r;
            r.type = cfg_detail::string_at(jr, "type", "target.reward");
            if (r.type != "quadratic")
                throw ConfigError("target.reward.type", "unknown reward '" + r.type + "'");
            r.scale = cfg_detail::number_at(jr, "scale", "target.reward");
            t.reward = r;
            t.beta_schedule = parse_beta_schedule(
                cfg_detail::require_field(jt, "beta_schedule", "target"),
                "target.beta_schedule");
            t.time_dependent = true;
            t.betas = {t.beta_schedule.value(1.0)};
        } else {
            throw ConfigError("target.type", "unknown target type '" + t.type + "'");
        }
    }

    // simulation
    {
        const json& js = cfg_detail::require_field(input, "simulation", "");
        cfg.simulation.n_particles = cfg_detail::int_at(js, "n_particles", "simulation");
        cfg.simulation.n_steps = cfg_detail::int_at(js, "n_steps", "simulation");
        cfg.simulation.seed = static_cast<uint64_t>(js.value("seed", 0));
        cfg.simulation.t_start = cfg_detail::number_or(js, "t_start", 0.0);
        cfg.simulation.dt = cfg_detail::number_or(js, "dt", 0.0);
        if (js.contains("clip_drift_norm") && !js.at("clip_drift_norm").is_null())
            cfg.simulation.clip_drift_norm = js.at("clip_drift_norm").get<double>();
        try {
            cfg.simulation.validate();
        } catch (const ParamError& e) {
            throw ConfigError("simulation", e.what());
        }
    }

    // resampling
    {
        const json& jr = cfg_detail::require_field(input, "resampling", "");
        std::string scheme = cfg_detail::string_at(jr, "scheme", "resampling");
        if (scheme == "none") cfg.resampling.scheme = ResampleScheme::None;
        else if (scheme == "snis_final") cfg.resampling.scheme = ResampleScheme::SnisFinal;
        else if (scheme == "systematic") cfg.resampling.scheme = ResampleScheme::Systematic;
        else if (scheme == "jump") cfg.resampling.scheme = ResampleScheme::Jump;
        else if (scheme == "bdc_clocks") cfg.resampling.scheme = ResampleScheme::BdcClocks;
        else throw ConfigError("resampling.scheme", "unknown scheme '" + scheme + "'");
        cfg.resampling.t_min = cfg_detail::number_or(jr, "t_min", 0.0);
        cfg.resampling.t_max = cfg_detail::number_or(jr, "t_max", 1.0);
        cfg.resampling.cadence = static_cast<int>(cfg_detail::number_or(jr, "cadence", 1.0));
        if (jr.contains("ess_threshold") && !jr.at("ess_threshold").is_null())
            cfg.resampling.ess_threshold = jr.at("ess_threshold").get<double>();
        cfg.resampling.exclude_outside_from_logz =
            jr.value("exclude_outside_from_logz", false);
        try {
            cfg.resampling.validate();
        } catch (const ParamError& e) {
            throw ConfigError("resampling", e.what());
        }
    }

    // metrics
    if (input.contains("metrics")) {
        const json& jm = input.at("metrics");
        MetricsConfig& m = cfg.metrics;
        if (jm.contains("list")) m.list = jm.at("list").get<std::vector<std::string>>();
        for (const auto& name : m.list) {
            static const std::vector<std::string> known = {
                "total_variation", "mmd", "w1", "w2", "sliced_w2",
                "energy_w1", "energy_w2", "distance_w2"};
            if (std::find(known.begin(), known.end(), name) == known.end())
                throw ConfigError("metrics.list", "unknown metric '" + name + "'");
        }
        if (jm.contains("reference")) {
            const json& jr = jm.at("reference");
            m.reference_type = cfg_detail::string_at(jr, "type", "metrics.reference");
            if (m.reference_type != "oracle" && m.reference_type != "csv" &&
                m.reference_type != "none")
                throw ConfigError("metrics.reference.type", "must be oracle, csv, or none");
            m.reference_samples = static_cast<size_t>(jr.value("n_samples", 10000));
            m.reference_seed = static_cast<uint64_t>(jr.value("seed", 1));
            m.reference_path = jr.value("path", std::string());
        }
        if (jm.contains("tv")) {
            m.tv_bins = jm.at("tv").value("bins", 200);
            m.tv_lo = jm.at("tv").value("lo", -50.0);
            m.tv_hi = jm.at("tv").value("hi", 50.0);
        }
        if (jm.contains("mmd")) {
            if (jm.at("mmd").contains("scales"))
                m.mmd_scales = jm.at("mmd").at("scales").get<std::vector<double>>();
            m.mmd_subsample = static_cast<size_t>(jm.at("mmd").value("subsample", 4000));
        }
        if (jm.contains("wasserstein")) {
            m.wasserstein_max_exact =
                static_cast<size_t>(jm.at("wasserstein").value("max_exact", 2000));
            m.sliced_projections = jm.at("wasserstein").value("sliced_projections", 64);
        }
        if (jm.contains("energy") && jm.at("energy").contains("filter_above") &&
            !jm.at("energy").at("filter_above").is_null())
            m.energy_filter_above = jm.at("energy").at("filter_above").get<double>();
        if (!m.list.empty() && m.reference_type == "none")
            throw ConfigError("metrics.reference", "metrics requested but no reference source");
    }

    // output
    if (input.contains("output")) {
        cfg.output_dir = input.at("output").value("directory", std::string("out"));
        if (input.at("output").contains("formats"))
            cfg.output_formats =
                input.at("output").at("formats").get<std::vector<std::string>>();
    }

    // cross-field checks: assemble the target once so constraint violations
    // surface as validation errors before any simulation
    try {
        (void)cfg.build_target();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("target", e.what());
    }
    if (cfg.metrics.reference_type == "oracle" && !cfg.reference_mixture())
        throw ConfigError("metrics.reference",
                          "oracle reference is not derivable for this target");

    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot open config file");
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
    }
    return parse_config(j);
}

// Canonical serialized form (nlohmann objects keep keys sorted).
inline std::string canonical_dump(const json& j) { return j.dump(); }

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace fkc
