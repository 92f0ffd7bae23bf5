#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fkc/common.hpp"
#include "fkc/metrics.hpp"
#include "fkc/particle_engine.hpp"

namespace fkc {

// Atomic file write: write to a temp sibling, then rename into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
    std::filesystem::rename(tmp, path);
}

// One row per particle: index, coordinates, log-weight.
inline void write_samples_csv(const std::filesystem::path& path, const ParticleEnsemble& ens) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "index";
    for (int j = 0; j < ens.d; ++j) out << ",x" << j;
    out << ",log_weight\n";
    for (int k = 0; k < ens.n; ++k) {
        out << k;
        auto x = ens.position(k);
        for (int j = 0; j < ens.d; ++j) out << ',' << x[j];
        out << ',' << ens.log_weights[k] << '\n';
    }
    write_file_atomic(path, out.str());
}

// Compact binary layout, little-endian float64:
//   magic "FKC1" | u64 K | u64 d | f64 t | K*d positions | K log-weights
inline void write_samples_binary(const std::filesystem::path& path,
                                 const ParticleEnsemble& ens) {
    std::string buf;
    buf.reserve(4 + 16 + 8 + ens.positions.size() * 8 + ens.log_weights.size() * 8);
    buf.append("FKC1", 4);
    auto put = [&buf](const void* p, size_t n) {
        buf.append(reinterpret_cast<const char*>(p), n);
    };
    uint64_t k = static_cast<uint64_t>(ens.n), d = static_cast<uint64_t>(ens.d);
    put(&k, 8);
    put(&d, 8);
    put(&ens.t, 8);
    put(ens.positions.data(), ens.positions.size() * 8);
    put(ens.log_weights.data(), ens.log_weights.size() * 8);
    write_file_atomic(path, buf);
}

inline ParticleEnsemble read_samples_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "FKC1", 4) != 0)
        throw std::runtime_error(path.string() + ": bad magic");
    uint64_t k = 0, d = 0;
    double t = 0;
    in.read(reinterpret_cast<char*>(&k), 8);
    in.read(reinterpret_cast<char*>(&d), 8);
    in.read(reinterpret_cast<char*>(&t), 8);
    ParticleEnsemble ens;
    ens.n = static_cast<int>(k);
    ens.d = static_cast<int>(d);
    ens.t = t;
    ens.positions.resize(k * d);
    ens.log_weights.resize(k);
    in.read(reinterpret_cast<char*>(ens.positions.data()),
            static_cast<std::streamsize>(k * d * 8));
    in.read(reinterpret_cast<char*>(ens.log_weights.data()), static_cast<std::streamsize>(k * 8));
    if (!in) throw std::runtime_error(path.string() + ": truncated");
    return ens;
}

inline ParticleEnsemble read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string header;
    std::getline(in, header);
    int d = 0;
    {
        size_t pos = 0;
        while ((pos = header.find(",x", pos)) != std::string::npos) {
            ++d;
            ++pos;
        }
    }
    if (d == 0) throw std::runtime_error(path.string() + ": no coordinate columns");
    ParticleEnsemble ens;
    ens.d = d;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');  // index
        for (int j = 0; j < d; ++j) {
            std::getline(row, cell, ',');
            ens.positions.push_back(std::stod(cell));
        }
        std::getline(row, cell, ',');
        ens.log_weights.push_back(std::stod(cell));
    }
    ens.n = static_cast<int>(ens.log_weights.size());
    return ens;
}

// Flat numeric CSV, one configuration per row (e.g. 13-particle 3D systems as
// 39 columns). No header, no index or weight columns.
inline SampleSet read_flat_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    SampleSet s;
    std::string line;
    int cols = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        int n = 0;
        while (std::getline(row, cell, ',')) {
            s.points.push_back(std::stod(cell));
            ++n;
        }
        if (cols < 0) cols = n;
        if (n != cols) throw std::runtime_error(path.string() + ": ragged rows");
    }
    if (cols <= 0) throw std::runtime_error(path.string() + ": empty file");
    s.dim = cols;
    return s;
}

inline void write_flat_csv(const std::filesystem::path& path, const SampleSet& s) {
    std::ostringstream out;
    out << std::setprecision(17);
    for (size_t i = 0; i < s.size(); ++i) {
        auto x = s.point(i);
        for (int j = 0; j < s.dim; ++j) out << (j ? "," : "") << x[j];
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

inline void write_diagnostics_json(const std::filesystem::path& path, const Diagnostics& diag,
                                   double log_z) {
    nlohmann::json j;
    j["log_z"] = log_z;
    j["ess"] = diag.ess;
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : diag.events)
        events.push_back({{"step", e.step}, {"t", e.t}, {"kind", e.kind}, {"count", e.count}});
    j["events"] = events;
    write_file_atomic(path, j.dump(2) + "\n");
}

inline SampleSet ensemble_to_sample_set(const ParticleEnsemble& ens, bool use_weights) {
    SampleSet s;
    s.dim = ens.d;
    s.points = ens.positions;
    if (use_weights) s.weights = softmax(ens.log_weights);
    return s;
}

}  // namespace fkc
