#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fkc/config.hpp"
#include "fkc/metrics.hpp"
#include "fkc/sample_io.hpp"

namespace fkc {

struct MissingDumpsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MetricRecord {
    std::string metric;
    double value = 0.0;
    json params;
    uint64_t seed = 0;
};

struct RunReport {
    json config;
    std::string config_hash;
    std::string provenance = "fkc 0.1.0";
    double wall_time_s = 0.0;
    uint64_t seed = 0;
    double log_z = 0.0;
    std::vector<MetricRecord> metrics;
    std::string samples_csv, samples_bin, diagnostics_path;

    json to_json() const {
        json j;
        j["provenance"] = provenance;
        j["config"] = config;
        j["config_hash"] = config_hash;
        j["wall_time_s"] = wall_time_s;
        j["seed"] = seed;
        j["log_z"] = log_z;
        json jm = json::array();
        for (const auto& m : metrics)
            jm.push_back({{"metric", m.metric},
                          {"value", m.value},
                          {"params", m.params},
                          {"seed", m.seed}});
        j["metrics"] = jm;
        j["files"] = {{"samples_csv", samples_csv},
                      {"samples_bin", samples_bin},
                      {"diagnostics", diagnostics_path}};
        return j;
    }
};

inline SampleSet reference_samples(const ExperimentConfig& cfg) {
    const MetricsConfig& m = cfg.metrics;
    if (m.reference_type == "oracle") {
        auto mixture = cfg.reference_mixture();
        if (!mixture)
            throw ConfigError("metrics.reference", "oracle reference not derivable");
        CounterRng rng(m.reference_seed, 0x726566ull);  // "ref"
        SampleSet s;
        s.dim = mixture->dim;
        s.points = sample_mixture(*mixture, m.reference_samples, rng);
        return s;
    }
    if (m.reference_type == "csv") {
        // either a sample dump (with index/log_weight columns) or a flat
        // numeric table, e.g. 39-column particle-system configurations
        std::ifstream probe(m.reference_path);
        std::string first;
        std::getline(probe, first);
        if (first.rfind("index,", 0) == 0) {
            auto ens = read_samples_csv(m.reference_path);
            bool weighted = false;
            for (double w : ens.log_weights)
                if (w != 0.0) weighted = true;
            return ensemble_to_sample_set(ens, weighted);
        }
        return read_flat_csv(m.reference_path);
    }
    throw ConfigError("metrics.reference", "no reference configured");
}

inline SampleSet subsample(const SampleSet& s, size_t max_n, uint64_t seed, uint64_t stream) {
    if (s.weights.empty() && s.size() <= max_n) return s;
    CounterRng rng(seed, stream);
    std::vector<double> probs(s.size());
    for (size_t i = 0; i < s.size(); ++i) probs[i] = s.weight(i);
    SampleSet out;
    out.dim = s.dim;
    size_t m = std::min(max_n, s.size());
    out.points.reserve(m * s.dim);
    for (size_t i = 0; i < m; ++i) {
        auto x = s.point(rng.categorical(probs));
        out.points.insert(out.points.end(), x.begin(), x.end());
    }
    return out;
}

inline std::vector<MetricRecord> compute_metrics(const ExperimentConfig& cfg,
                                                 const SampleSet& samples,
                                                 const SampleSet& reference, uint64_t seed) {
    std::vector<MetricRecord> out;
    const MetricsConfig& m = cfg.metrics;
    for (const auto& name : m.list) {
        MetricRecord rec;
        rec.metric = name;
        rec.seed = seed;
        if (name == "total_variation") {
            rec.value = total_variation_grid(samples, reference, m.tv_bins, m.tv_lo, m.tv_hi);
            rec.params = {{"bins", m.tv_bins}, {"lo", m.tv_lo}, {"hi", m.tv_hi}};
        } else if (name == "mmd") {
            SampleSet a = subsample(samples, m.mmd_subsample, seed, 0x6d6d6431ull);
            SampleSet b = subsample(reference, m.mmd_subsample, seed, 0x6d6d6432ull);
            double med = median_pairwise_distance(a, b, 1000, seed);
            std::vector<double> scales;
            for (double s : m.mmd_scales) scales.push_back(s * med);
            rec.value = mmd_rbf(a, b, scales);
            rec.params = {{"scales", m.mmd_scales},
                          {"median_distance", med},
                          {"subsample", m.mmd_subsample}};
        } else if (name == "w1" || name == "w2") {
            int p = (name == "w1") ? 1 : 2;
            if (samples.dim == 1) {
                rec.value = wasserstein_1d(samples, reference, p);
                rec.params = {{"method", "quantile"}};
            } else {
                rec.value = wasserstein_assignment_subsampled(samples, reference, p,
                                                              m.wasserstein_max_exact, seed);
                rec.params = {{"max_exact", m.wasserstein_max_exact}};
            }
        } else if (name == "sliced_w2") {
            rec.value = wasserstein_sliced(samples, reference, 2, m.sliced_projections, seed);
            rec.params = {{"projections", m.sliced_projections}};
        } else if (name == "energy_w1" || name == "energy_w2") {
            int p = (name == "energy_w1") ? 1 : 2;
            std::optional<double> filter = m.energy_filter_above;
            rec.value = energy_distance(samples, reference, cfg.energy_function(), p, filter);
            rec.params = {{"filter_above", filter ? json(*filter) : json(nullptr)}};
        } else if (name == "distance_w2") {
            rec.value = distance_w2_pairwise(samples, reference);
            rec.params = json::object();
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline RunReport run_experiment(const ExperimentConfig& cfg, uint64_t seed,
                                const std::filesystem::path& out_dir) {
    auto t0 = std::chrono::steady_clock::now();
    std::filesystem::create_directories(out_dir);

    WeightedSde sde = cfg.build_target();
    SimulationConfig sim = cfg.simulation;
    sim.seed = seed;
    auto result = simulate(sde, sim, cfg.resampling);

    bool use_weights = cfg.resampling.scheme != ResampleScheme::None;
    SampleSet samples = ensemble_to_sample_set(result.ensemble, use_weights);

    RunReport report;
    report.config = cfg.raw;
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0')
         << fnv1a64(canonical_dump(cfg.raw));
    report.config_hash = hash.str();
    report.seed = seed;
    report.log_z = result.log_z;

    if (!cfg.metrics.list.empty()) {
        SampleSet reference = reference_samples(cfg);
        report.metrics = compute_metrics(cfg, samples, reference, seed);
    }

    for (const auto& fmt : cfg.output_formats) {
        if (fmt == "csv") {
            auto p = out_dir / "samples.csv";
            write_samples_csv(p, result.ensemble);
            report.samples_csv = p.string();
        } else if (fmt == "binary") {
            auto p = out_dir / "samples.bin";
            write_samples_binary(p, result.ensemble);
            report.samples_bin = p.string();
        }
    }
    {
        auto p = out_dir / "diagnostics.json";
        write_diagnostics_json(p, result.diagnostics, result.log_z);
        report.diagnostics_path = p.string();
    }
    if (!report.metrics.empty()) {
        std::ostringstream csv;
        csv << std::setprecision(17) << "metric,value,seed\n";
        for (const auto& m : report.metrics)
            csv << m.metric << ',' << m.value << ',' << m.seed << '\n';
        write_file_atomic(out_dir / "metrics.csv", csv.str());
    }

    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_file_atomic(out_dir / "report.json", report.to_json().dump(2) + "\n");
    return report;
}

// One run per seed (seed0 .. seed0 + n - 1) plus an aggregate mean/std table.
inline std::vector<RunReport> run_with_seeds(const ExperimentConfig& cfg, int n_seeds,
                                             const std::filesystem::path& out_dir) {
    std::vector<RunReport> reports;
    for (int s = 0; s < n_seeds; ++s) {
        uint64_t seed = cfg.simulation.seed + static_cast<uint64_t>(s);
        auto dir = (n_seeds == 1) ? out_dir : out_dir / ("seed_" + std::to_string(seed));
        reports.push_back(run_experiment(cfg, seed, dir));
    }
    if (n_seeds > 1) {
        std::map<std::string, std::vector<double>> by_metric;
        for (const auto& r : reports) {
            by_metric["log_z"].push_back(r.log_z);
            for (const auto& m : r.metrics) by_metric[m.metric].push_back(m.value);
        }
        std::ostringstream csv;
        csv << std::setprecision(17) << "metric,mean,std,n\n";
        for (const auto& [name, vals] : by_metric) {
            double mean = 0.0;
            for (double v : vals) mean += v;
            mean /= static_cast<double>(vals.size());
            double var = 0.0;
            for (double v : vals) var += (v - mean) * (v - mean);
            var = vals.size() > 1 ? var / static_cast<double>(vals.size() - 1) : 0.0;
            csv << name << ',' << mean << ',' << std::sqrt(var) << ',' << vals.size() << '\n';
        }
        std::filesystem::create_directories(out_dir);
        write_file_atomic(out_dir / "metrics_aggregate.csv", csv.str());
    }
    return reports;
}

namespace sweep_detail {

inline void set_path(json& j, const std::string& dotted, const json& value) {
    json* cur = &j;
    size_t start = 0;
    while (true) {
        size_t dot = dotted.find('.', start);
        std::string key = dotted.substr(start, dot - start);
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        start = dot + 1;
    }
}

}  // namespace sweep_detail

// Cartesian grid over the declared axes; one row per cell per seed with
// deterministic cell ordering (axes sorted by path, values in listed order).
inline std::string run_sweep(const json& base, const std::filesystem::path& out_dir) {
    if (!base.contains("sweep"))
        throw ConfigError("sweep", "config has no sweep block");
    const json& js = base.at("sweep");
    std::map<std::string, std::vector<json>> axes;
    if (js.contains("axes"))
        for (const auto& [path, values] : js.at("axes").items()) {
            if (!values.is_array() || values.empty())
                throw ConfigError("sweep.axes." + path, "need a non-empty array");
            axes[path] = std::vector<json>(values.begin(), values.end());
        }
    size_t cells = 1;
    for (const auto& [p, vs] : axes) cells *= vs.size();
    size_t max_cells = js.value("max_cells", 64);
    if (cells > max_cells)
        throw ConfigError("sweep", "grid has " + std::to_string(cells) +
                                       " cells exceeding the cap of " +
                                       std::to_string(max_cells));
    int n_seeds = js.value("seeds", 1);

    std::vector<std::string> paths;
    for (const auto& [p, vs] : axes) paths.push_back(p);

    std::ostringstream csv;
    csv << std::setprecision(17) << "cell,seed";
    for (const auto& p : paths) csv << ',' << p;
    csv << ",metric,value\n";

    for (size_t cell = 0; cell < cells; ++cell) {
        json cell_cfg = base;
        cell_cfg.erase("sweep");
        size_t rem = cell;
        std::vector<std::string> cell_values;
        // row-major: last axis varies fastest
        std::vector<size_t> idx(paths.size(), 0);
        for (size_t a = paths.size(); a-- > 0;) {
            size_t n = axes[paths[a]].size();
            idx[a] = rem % n;
            rem /= n;
        }
        for (size_t a = 0; a < paths.size(); ++a) {
            const json& v = axes[paths[a]][idx[a]];
            sweep_detail::set_path(cell_cfg, paths[a], v);
            cell_values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        }
        ExperimentConfig cfg = parse_config(cell_cfg);
        for (int s = 0; s < n_seeds; ++s) {
            uint64_t seed = cfg.simulation.seed + static_cast<uint64_t>(s);
            WeightedSde sde = cfg.build_target();
            SimulationConfig sim = cfg.simulation;
            sim.seed = seed;
            auto result = simulate(sde, sim, cfg.resampling);
            bool use_weights = cfg.resampling.scheme != ResampleScheme::None;
            SampleSet samples = ensemble_to_sample_set(result.ensemble, use_weights);
            std::vector<MetricRecord> recs;
            if (!cfg.metrics.list.empty()) {
                SampleSet reference = reference_samples(cfg);
                recs = compute_metrics(cfg, samples, reference, seed);
            }
            auto row_prefix = [&](std::ostringstream& o) {
                o << cell << ',' << seed;
                for (const auto& v : cell_values) o << ',' << v;
            };
            {
                std::ostringstream o;
                row_prefix(o);
                o << ",log_z," << result.log_z << '\n';
                csv << o.str();
            }
            for (const auto& r : recs) {
                std::ostringstream o;
                row_prefix(o);
                o << ',' << r.metric << ',' << r.value << '\n';
                csv << o.str();
            }
        }
    }
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir / "sweep.csv", csv.str());
    return (out_dir / "sweep.csv").string();
}

// Plot-ready flat files derived from a finished run directory: ESS curve,
// sample scatter, target-density heatmap on the TV grid, energy histograms.
inline void emit_plot_data(const std::filesystem::path& run_dir) {
    auto report_path = run_dir / "report.json";
    if (!std::filesystem::exists(report_path))
        throw MissingDumpsError("missing " + report_path.string());
    json report;
    {
        std::ifstream in(report_path);
        in >> report;
    }
    ExperimentConfig cfg = parse_config(report.at("config"));

    // ESS curve: exactly n_steps rows
    auto diag_path = run_dir / "diagnostics.json";
    if (!std::filesystem::exists(diag_path))
        throw MissingDumpsError("missing " + diag_path.string());
    json diag;
    {
        std::ifstream in(diag_path);
        in >> diag;
    }
    {
        std::ostringstream out;
        out << std::setprecision(17) << "step,t,ess\n";
        auto ess_curve = diag.at("ess").get<std::vector<double>>();
        double dt = cfg.simulation.step_size();
        for (size_t i = 0; i < ess_curve.size(); ++i)
            out << i << ',' << cfg.simulation.t_start + (i + 1) * dt << ',' << ess_curve[i]
                << '\n';
        write_file_atomic(run_dir / "ess_curve.csv", out.str());
    }

    auto samples_path = run_dir / "samples.csv";
    if (!std::filesystem::exists(samples_path))
        throw MissingDumpsError("missing " + samples_path.string());
    auto ens = read_samples_csv(samples_path);
    {
        std::ostringstream out;
        out << std::setprecision(17);
        for (int j = 0; j < ens.d; ++j) out << (j ? "," : "") << 'x' << j;
        out << ",weight\n";
        auto w = softmax(ens.log_weights);
        for (int k = 0; k < ens.n; ++k) {
            auto x = ens.position(k);
            for (int j = 0; j < ens.d; ++j) out << (j ? "," : "") << x[j];
            out << ',' << w[k] << '\n';
        }
        write_file_atomic(run_dir / "scatter.csv", out.str());
    }

    // target density heatmap on the same grid the TV metric uses
    if (cfg.schedule.dim == 2) {
        WeightedSde sde = cfg.build_target();
        if (sde.target_logdensity_unnorm) {
            int bins = cfg.metrics.tv_bins;
            double lo = cfg.metrics.tv_lo, hi = cfg.metrics.tv_hi;
            double w = (hi - lo) / bins;
            std::vector<double> logd(static_cast<size_t>(bins) * bins);
            double lmax = -std::numeric_limits<double>::infinity();
            for (int iy = 0; iy < bins; ++iy)
                for (int ix = 0; ix < bins; ++ix) {
                    std::vector<double> x = {lo + (ix + 0.5) * w, lo + (iy + 0.5) * w};
                    double v = sde.target_logdensity_unnorm(x, 1.0);
                    logd[static_cast<size_t>(iy) * bins + ix] = v;
                    lmax = std::max(lmax, v);
                }
            double total = 0.0;
            for (double v : logd) total += std::exp(v - lmax);
            std::ostringstream out;
            out << std::setprecision(10) << "ix,iy,x,y,density\n";
            for (int iy = 0; iy < bins; ++iy)
                for (int ix = 0; ix < bins; ++ix)
                    out << ix << ',' << iy << ',' << lo + (ix + 0.5) * w << ','
                        << lo + (iy + 0.5) * w << ','
                        << std::exp(logd[static_cast<size_t>(iy) * bins + ix] - lmax) / total
                        << '\n';
            write_file_atomic(run_dir / "heatmap.csv", out.str());
        }
    }

    // energy histogram overlay: oracle reference vs run samples
    if (cfg.metrics.reference_type == "oracle") {
        auto energy = cfg.energy_function();
        SampleSet ref = reference_samples(cfg);
        bool use_weights = cfg.resampling.scheme != ResampleScheme::None;
        SampleSet smp = ensemble_to_sample_set(ens, use_weights);
        std::vector<double> er(ref.size()), es(smp.size());
        for (size_t i = 0; i < ref.size(); ++i) er[i] = energy(ref.point(i));
        for (size_t i = 0; i < smp.size(); ++i) es[i] = energy(smp.point(i));
        double lo = 1e300, hi = -1e300;
        for (double e : er) { lo = std::min(lo, e); hi = std::max(hi, e); }
        for (double e : es) { lo = std::min(lo, e); hi = std::max(hi, e); }
        int bins = 100;
        double width = (hi - lo) / bins;
        if (width <= 0.0) width = 1.0;
        std::vector<double> hr(bins, 0.0), hs(bins, 0.0);
        for (size_t i = 0; i < er.size(); ++i) {
            int b = std::clamp(static_cast<int>((er[i] - lo) / width), 0, bins - 1);
            hr[b] += ref.weight(i);
        }
        for (size_t i = 0; i < es.size(); ++i) {
            int b = std::clamp(static_cast<int>((es[i] - lo) / width), 0, bins - 1);
            hs[b] += smp.weight(i);
        }
        std::ostringstream out;
        out << std::setprecision(10) << "bin_lo,bin_hi,reference,sample\n";
        for (int b = 0; b < bins; ++b)
            out << lo + b * width << ',' << lo + (b + 1) * width << ',' << hr[b] << ','
                << hs[b] << '\n';
        write_file_atomic(run_dir / "energy_hist.csv", out.str());
    }
}

}  // namespace fkc
