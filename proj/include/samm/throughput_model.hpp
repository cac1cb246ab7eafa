#pragma once

// Serial-fraction throughput model for sharded execution: speedup under a
// partially parallel workload, least-squares recovery of the parallel
// fraction from throughput measurements, and the resulting ceiling.

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "samm/amm_core.hpp"

namespace samm {

struct AmdahlParams {
    Real t_single = 0.0;    // throughput with one execution unit
    Real p_parallel = 0.0;  // fraction of the workload that scales
};

// Speedup with n units when fraction p of the work parallelizes.
inline Real speedup(Real p_parallel, Real n) {
    if (!(p_parallel >= 0.0) || p_parallel > 1.0)
        throw std::invalid_argument("parallel fraction must lie in [0, 1]");
    if (!(n >= 1.0)) throw std::invalid_argument("unit count must be at least 1");
    return 1.0 / ((1.0 - p_parallel) + p_parallel / n);
}

inline Real predict_throughput(const AmdahlParams& a, Real n) {
    return a.t_single * speedup(a.p_parallel, n);
}

// Throughput ceiling as n grows without bound; infinite when everything
// parallelizes.
inline Real asymptotic_bound(const AmdahlParams& a) {
    if (a.p_parallel >= 1.0) return std::numeric_limits<Real>::infinity();
    return a.t_single / (1.0 - a.p_parallel);
}

// One throughput measurement: unit count and observed throughput.
struct ThroughputObservation {
    Real n = 1.0;
    Real throughput = 0.0;
};

struct FitReport {
    AmdahlParams params;
    Real r_squared = 0.0;
    long points = 0;
};

namespace detail {

// Sum of squared residuals at a given parallel fraction, with the scale
// t_single profiled out in closed form.
inline Real fit_sse(const std::vector<ThroughputObservation>& obs, Real p, Real* t_out) {
    Real st2 = 0.0, sty = 0.0;
    for (const ThroughputObservation& o : obs) {
        const Real s = speedup(p, o.n);
        st2 += s * s;
        sty += s * o.throughput;
    }
    const Real t = sty / st2;
    if (t_out) *t_out = t;
    Real sse = 0.0;
    for (const ThroughputObservation& o : obs) {
        const Real r = o.throughput - t * speedup(p, o.n);
        sse += r * r;
    }
    return sse;
}

}  // namespace detail

// Least-squares fit of the parallel fraction and single-unit throughput.
// Coarse scan over [0, 1] followed by golden-section refinement; needs
// measurements at three or more distinct unit counts.
inline FitReport fit_p(const std::vector<ThroughputObservation>& obs) {
    std::vector<Real> distinct;
    for (const ThroughputObservation& o : obs) {
        if (!(o.n >= 1.0)) throw std::invalid_argument("unit count must be at least 1");
        if (!(o.throughput > 0.0)) throw std::invalid_argument("throughput must be positive");
        bool seen = false;
        for (Real d : distinct) seen = seen || d == o.n;
        if (!seen) distinct.push_back(o.n);
    }
    if (distinct.size() < 3)
        throw std::invalid_argument("need measurements at three or more distinct unit counts");

    constexpr int coarse = 40;
    Real best_p = 0.0, best_sse = std::numeric_limits<Real>::infinity();
    for (int i = 0; i <= coarse; ++i) {
        const Real p = Real(i) / coarse;
        const Real sse = detail::fit_sse(obs, p, nullptr);
        if (sse < best_sse) {
            best_sse = sse;
            best_p = p;
        }
    }
    Real a = std::max(Real(0.0), best_p - 1.0 / coarse);
    Real b = std::min(Real(1.0), best_p + 1.0 / coarse);
    constexpr Real inv_phi = 0.6180339887498949;
    Real c1 = b - inv_phi * (b - a), c2 = a + inv_phi * (b - a);
    Real f1 = detail::fit_sse(obs, c1, nullptr), f2 = detail::fit_sse(obs, c2, nullptr);
    for (int it = 0; it < 100 && b - a > 1e-15; ++it) {
        if (f1 < f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - inv_phi * (b - a);
            f1 = detail::fit_sse(obs, c1, nullptr);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + inv_phi * (b - a);
            f2 = detail::fit_sse(obs, c2, nullptr);
        }
    }
    FitReport rep;
    rep.points = static_cast<long>(obs.size());
    rep.params.p_parallel = 0.5 * (a + b);
    const Real sse = detail::fit_sse(obs, rep.params.p_parallel, &rep.params.t_single);
    Real mean = 0.0;
    for (const ThroughputObservation& o : obs) mean += o.throughput;
    mean /= Real(obs.size());
    Real sst = 0.0;
    for (const ThroughputObservation& o : obs) sst += (o.throughput - mean) * (o.throughput - mean);
    rep.r_squared = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
    return rep;
}

// CSV loader for `n,throughput` rows; a leading header line is accepted.
inline std::vector<ThroughputObservation> load_observations(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<ThroughputObservation> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": expected n,throughput");
        try {
            std::size_t u1 = 0, u2 = 0;
            const std::string a = line.substr(0, comma), b = line.substr(comma + 1);
            const Real n = std::stod(a, &u1);
            const Real t = std::stod(b, &u2);
            if (u1 != a.size() || u2 != b.size()) throw std::invalid_argument(line);
            out.push_back({n, t});
        } catch (const std::exception&) {
            if (lineno == 1) continue;  // header line
            throw std::runtime_error(path + ": line " + std::to_string(lineno) +
                                     ": bad number in '" + line + "'");
        }
    }
    if (out.empty()) throw std::runtime_error(path + ": no observations");
    return out;
}

}  // namespace samm
