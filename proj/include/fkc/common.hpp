#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fkc {

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Vector length does not match the declared dimension.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Invalid or inconsistent parameters (constraint violations included).
struct ParamError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A model is missing an operation required by the requested construction.
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested expansion would exceed a configured size cap.
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateEnsembleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimulationError : std::runtime_error {
    int step      = -1;
    int particle  = -1;
    SimulationError(const std::string& msg, int step_, int particle_)
        : std::runtime_error(msg + " (step " + std::to_string(step_) +
                             ", particle " + std::to_string(particle_) + ")"),
          step(step_), particle(particle_) {}
};

struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(const std::string& field_path, const std::string& msg)
        : std::runtime_error(field_path + ": " + msg), field(field_path) {}
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm_sq(std::span<const double> a) { return dot(a, a); }

inline void check_dim(std::span<const double> x, int dim, const char* what) {
    if (static_cast<int>(x.size()) != dim)
        throw ShapeError(std::string(what) + ": expected length " + std::to_string(dim) +
                         ", got " + std::to_string(x.size()));
}

inline void check_time(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("time outside [0,1]: " + std::to_string(t));
}

// log(sum(exp(v))) with max subtraction.
inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Thread cap for internal data-parallel loops; FKC_THREADS overrides (default 1).
inline int thread_cap() {
    if (const char* env = std::getenv("FKC_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return 1;
}

// Chunked parallel loop over [0, n). Work items must be independent; callers do
// any order-sensitive reductions serially afterwards so results do not depend
// on the thread count.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn) {
    int nt = thread_cap();
    if (nt <= 1 || n < 2048) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    nt = std::min<int>(nt, static_cast<int>(std::thread::hardware_concurrency() > 0
                                                ? std::thread::hardware_concurrency()
                                                : 1));
    std::vector<std::thread> workers;
    size_t chunk = (n + nt - 1) / nt;
    for (int w = 0; w < nt; ++w) {
        size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        workers.emplace_back([lo, hi, &fn] {
            for (size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : workers) th.join();
}

}  // namespace fkc
