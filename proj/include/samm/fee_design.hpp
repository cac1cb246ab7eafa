#pragma once

// Bounded-ratio fee schedule and the machinery that certifies a per-shard
// trade-size budget c: necessary conditions, sufficient conditions, the
// closed-form budget bound, a minimal-fee parameter solver, and a sampled
// property suite for the two incentive properties the fee must deliver
// (splitting never pays, larger pools always charge less).

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "samm/amm_core.hpp"

namespace samm {

// Fee-ratio coefficients. The charged ratio on an output of O tokens A is
//   clamp(beta1 * R_A^beta2 * R_B^beta3 * O^beta4 + beta5, r_min, r_max)
// and the fee itself is that ratio times the reported-price cost of O.
struct FeeParams {
    Real beta1 = 0.0;
    Real beta2 = 0.0;
    Real beta3 = 0.0;
    Real beta4 = 0.0;
    Real beta5 = 0.0;
    Real r_min = 0.0;
    Real r_max = 0.0;
    std::optional<Real> certified_c;  // trade-size budget the params are certified for
};

// Slack below this counts as sitting on a condition boundary; such
// conditions still pass but are reported as marginal.
inline constexpr Real feas_eps = 1e-12;

// Outcome of the feasibility checks. necessary_ok order:
//   [0] beta3 == 0
//   [1] beta2 + beta4 == 0
//   [2] beta1 < 0
//   [3] 0 < beta4 <= 1
//   [4] r_min < beta5 <= r_max
//   [5] (beta5 - r_min) / (-beta1) >= c^beta4
// sufficient_ok order:
//   [0] beta1*beta4*(beta4+1)*c^(beta4-1)*(1-c)^3 <= -2
//   [1] -beta1*beta4 >= c^(1-beta4) / (1-c)^2
struct FeasibilityReport {
    std::array<bool, 6> necessary_ok{};
    std::array<bool, 6> necessary_marginal{};
    std::array<bool, 2> sufficient_ok{};
    std::array<bool, 2> sufficient_marginal{};
    bool corollary_ok = false;  // closed-form bound certifies the requested c
    Real max_c = std::numeric_limits<Real>::quiet_NaN();

    bool all_necessary() const {
        for (bool b : necessary_ok)
            if (!b) return false;
        return true;
    }
    bool all_sufficient() const { return sufficient_ok[0] && sufficient_ok[1]; }
    bool feasible() const { return all_necessary() && all_sufficient(); }
};

namespace detail {

struct Cond {
    bool ok = false;
    bool marginal = false;
};

inline Cond strictly_less(Real x, Real y) {
    return {x < y - feas_eps, std::abs(x - y) <= feas_eps};
}
inline Cond at_most(Real x, Real y) {
    return {x <= y + feas_eps, std::abs(x - y) <= feas_eps};
}
inline Cond at_least(Real x, Real y) {
    return {x >= y - feas_eps, std::abs(x - y) <= feas_eps};
}
inline Cond equals(Real x, Real y) {
    return {std::abs(x - y) <= feas_eps, false};
}
inline Cond both(Cond a, Cond b) {
    return {a.ok && b.ok, a.marginal || b.marginal};
}

inline void require_budget(Real c) {
    if (!(c > 0.0) || !(c < 1.0))
        throw std::invalid_argument("budget c must lie in (0, 1)");
}

}  // namespace detail

// Fee ratio before scaling by the reported-price cost.
inline Real fee_ratio(const ShardState& s, Real output_a, const FeeParams& p) {
    Real mono;
    if (p.beta2 == -1.0 && p.beta3 == 0.0 && p.beta4 == 1.0) {
        mono = p.beta1 * output_a / s.reserve_a;  // common family, avoids pow
    } else {
        mono = p.beta1 * std::pow(s.reserve_a, p.beta2) *
               std::pow(s.reserve_b, p.beta3) * std::pow(output_a, p.beta4);
    }
    return std::clamp(mono + p.beta5, p.r_min, p.r_max);
}

// Fee, in token B, charged on top of the net payment for output_a.
inline Real tf_brp(const ShardState& s, Real output_a, const FeeParams& p) {
    detail::require_active(s);
    if (output_a < 0.0)
        throw std::domain_error("negative output amount");
    if (output_a >= s.reserve_a)
        throw std::domain_error("output amount would drain the pool");
    if (output_a == 0.0) return 0.0;
    return reported_price(s) * output_a * fee_ratio(s, output_a, p);
}

// Total payment: fee plus the constant-product net amount.
inline Real gross_samm(const ShardState& s, Real output_a, const FeeParams& p) {
    return tf_brp(s, output_a, p) + net_amount(s, output_a);
}

// Checks the six necessary conditions for the incentive properties to hold
// on trades up to c * reserve_a per shard.
inline FeasibilityReport necessary_check(const FeeParams& p, Real c) {
    detail::require_budget(c);
    FeasibilityReport rep;
    const detail::Cond conds[6] = {
        detail::equals(p.beta3, 0.0),
        detail::equals(p.beta2 + p.beta4, 0.0),
        detail::strictly_less(p.beta1, 0.0),
        detail::both(detail::strictly_less(0.0, p.beta4), detail::at_most(p.beta4, 1.0)),
        detail::both(detail::strictly_less(p.r_min, p.beta5), detail::at_most(p.beta5, p.r_max)),
        p.beta1 < 0.0
            ? detail::at_least((p.beta5 - p.r_min) / (-p.beta1), std::pow(c, p.beta4))
            : detail::Cond{false, false},
    };
    for (int i = 0; i < 6; ++i) {
        rep.necessary_ok[i] = conds[i].ok;
        rep.necessary_marginal[i] = conds[i].marginal;
    }
    return rep;
}

// Checks the two sufficient conditions (concavity up to the budget, and the
// larger-pool-charges-less slope bound).
inline FeasibilityReport sufficiency_check(const FeeParams& p, Real c) {
    detail::require_budget(c);
    FeasibilityReport rep;
    const Real omc = 1.0 - c;
    const Real lhs0 =
        p.beta1 * p.beta4 * (p.beta4 + 1.0) * std::pow(c, p.beta4 - 1.0) * omc * omc * omc;
    const Real rhs1 = std::pow(c, 1.0 - p.beta4) / (omc * omc);
    const detail::Cond conds[2] = {
        detail::at_most(lhs0, -2.0),
        detail::at_least(-p.beta1 * p.beta4, rhs1),
    };
    for (int i = 0; i < 2; ++i) {
        rep.sufficient_ok[i] = conds[i].ok;
        rep.sufficient_marginal[i] = conds[i].marginal;
    }
    return rep;
}

namespace detail {

// The closed-form budget bound applies to the specialized family
// beta2 = -1, beta3 = 0, beta4 = 1, beta5 = r_max.
inline bool specialized_family(const FeeParams& p) {
    return equals(p.beta2, -1.0).ok && equals(p.beta3, 0.0).ok &&
           equals(p.beta4, 1.0).ok && equals(p.beta5, p.r_max).ok;
}

}  // namespace detail

// Largest certified budget for the specialized family:
//   min(1 - (-beta1)^(-1/3), (r_max - r_min) / (-beta1)).
inline Real max_c(const FeeParams& p) {
    if (!detail::specialized_family(p))
        throw std::invalid_argument(
            "budget bound requires beta2 = -1, beta3 = 0, beta4 = 1, beta5 = r_max");
    if (!(p.beta1 < -1.0))
        throw std::domain_error("budget bound requires beta1 < -1");
    const Real a = 1.0 - std::pow(-p.beta1, -1.0 / 3.0);
    const Real b = (p.r_max - p.r_min) / (-p.beta1);
    return std::min(a, b);
}

// Runs every check against the requested budget. corollary_ok is set when
// the closed-form bound applies and covers c.
inline FeasibilityReport check_feasibility(const FeeParams& p, Real c) {
    FeasibilityReport rep = necessary_check(p, c);
    const FeasibilityReport suf = sufficiency_check(p, c);
    rep.sufficient_ok = suf.sufficient_ok;
    rep.sufficient_marginal = suf.sufficient_marginal;
    if (detail::specialized_family(p) && p.beta1 < -1.0) {
        rep.max_c = max_c(p);
        rep.corollary_ok = detail::at_least(rep.max_c, c).ok;
    }
    return rep;
}

// Cheapest feasible parameters in the specialized family for budget c with
// a fixed cap-to-floor ratio: minimizes r_max subject to every condition,
// which lands exactly on the concavity and slope boundaries.
inline FeeParams solve_params_for_c(Real c, Real ratio = 5.0) {
    detail::require_budget(c);
    if (!(ratio > 1.0))
        throw std::invalid_argument("cap-to-floor ratio must exceed 1");
    FeeParams p;
    const Real omc = 1.0 - c;
    p.beta1 = -1.0 / (omc * omc * omc);
    p.beta2 = -1.0;
    p.beta3 = 0.0;
    p.beta4 = 1.0;
    p.r_max = ratio / (ratio - 1.0) * c * (-p.beta1);
    p.r_min = p.r_max / ratio;
    p.beta5 = p.r_max;
    p.certified_c = c;
    if (!check_feasibility(p, c).feasible())
        throw std::domain_error("no feasible parameters for the requested budget");
    return p;
}

// --- flat key-value (de)serialization -------------------------------------

inline std::string params_to_kv(const FeeParams& p) {
    std::ostringstream os;
    os.precision(17);
    os << "beta1 = " << p.beta1 << "\n"
       << "beta2 = " << p.beta2 << "\n"
       << "beta3 = " << p.beta3 << "\n"
       << "beta4 = " << p.beta4 << "\n"
       << "beta5 = " << p.beta5 << "\n"
       << "r_min = " << p.r_min << "\n"
       << "r_max = " << p.r_max << "\n";
    if (p.certified_c) os << "c = " << *p.certified_c << "\n";
    return os.str();
}

inline FeeParams params_from_kv(const std::string& text) {
    FeeParams p;
    std::map<std::string, Real*> fields = {
        {"beta1", &p.beta1}, {"beta2", &p.beta2}, {"beta3", &p.beta3},
        {"beta4", &p.beta4}, {"beta5", &p.beta5}, {"r_min", &p.r_min},
        {"r_max", &p.r_max},
    };
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        const auto b = s.find_first_not_of(ws);
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(ws) - b + 1);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        Real parsed;
        try {
            std::size_t used = 0;
            parsed = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument(val);
        } catch (const std::exception&) {
            throw std::runtime_error("line " + std::to_string(lineno) + ": bad number '" + val + "'");
        }
        if (key == "c") {
            p.certified_c = parsed;
        } else if (auto it = fields.find(key); it != fields.end()) {
            *it->second = parsed;
        } else {
            throw std::runtime_error("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
    }
    return p;
}

inline void save_params(const FeeParams& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << params_to_kv(p);
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

inline FeeParams load_params(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    try {
        return params_from_kv(buf.str());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

// --- sampled property suite ------------------------------------------------

// Randomized check that, within the certified budget, splitting a trade
// never beats sending it whole and a strictly smaller shard is always the
// cheaper venue. Margins are the worst observed slack (positive means the
// property held with room to spare).
struct PropertySuiteReport {
    long samples = 0;
    long non_splitting_violations = 0;
    long smaller_better_violations = 0;
    Real min_split_margin = std::numeric_limits<Real>::infinity();
    Real min_size_margin = std::numeric_limits<Real>::infinity();

    bool clean() const {
        return non_splitting_violations == 0 && smaller_better_violations == 0;
    }
};

inline PropertySuiteReport run_property_suite(const FeeParams& p, Real c, long samples,
                                              unsigned long long seed) {
    detail::require_budget(c);
    if (samples <= 0) throw std::invalid_argument("sample count must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> u_reserve(1.0, 1e9);
    std::uniform_real_distribution<Real> u_price(0.1, 10.0);
    std::uniform_real_distribution<Real> u_unit(0.0, 1.0);
    std::uniform_int_distribution<int> u_parts(2, 5);
    std::uniform_real_distribution<Real> u_scale(1.0001, 10.0);

    PropertySuiteReport rep;
    rep.samples = samples;
    for (long it = 0; it < samples; ++it) {
        const Real ra = u_reserve(rng);
        const Real q = u_price(rng);
        const ShardState shard{ra, q * ra, ra};
        // output in (0, c * reserve_a]; keep parts away from underflow
        const Real out = std::max(u_unit(rng), 1e-6) * c * ra;

        // splitting the same output across m withdrawals from equal shards
        const int m = u_parts(rng);
        Real weights[5];
        Real wsum = 0.0;
        for (int i = 0; i < m; ++i) {
            weights[i] = -std::log(std::max(u_unit(rng), 1e-12));
            wsum += weights[i];
        }
        Real split_cost = 0.0;
        for (int i = 0; i < m; ++i)
            split_cost += gross_samm(shard, out * weights[i] / wsum, p);
        const Real whole_cost = gross_samm(shard, out, p);
        const Real split_margin = split_cost - whole_cost;
        rep.min_split_margin = std::min(rep.min_split_margin, split_margin);
        if (split_margin < 0.0) ++rep.non_splitting_violations;

        // the same output is strictly dearer at a strictly larger shard
        const Real scale = u_scale(rng);
        const ShardState bigger{ra * scale, q * ra * scale, ra * scale};
        const Real size_margin = gross_samm(bigger, out, p) - whole_cost;
        rep.min_size_margin = std::min(rep.min_size_margin, size_margin);
        if (size_margin < 0.0) ++rep.smaller_better_violations;
    }
    return rep;
}

}  // namespace samm
