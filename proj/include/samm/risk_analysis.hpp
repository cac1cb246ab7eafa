#pragma once

// Adversarial analyses: sandwich-attack revenue against a victim trade under
// a slippage tolerance, its sensitivity to pool size, and the explicit
// counterexample showing multiplicative-fee pools reward splitting and
// larger pools.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "samm/amm_core.hpp"

namespace samm {

// A victim selling victim_input_a tokens A whose order executes as long as
// it receives min_output_b tokens B. When min_output_b is unset it is
// derived from the tolerance: (1 - slippage_tolerance) times the fee-free
// quote. Prices are assumed arbitrage-consistent with the pool.
struct SandwichScenario {
    Real victim_input_a = 0.0;
    Real slippage_tolerance = 0.0;
    ShardState pool;
    MarketPrices prices;
    std::optional<Real> min_output_b;
};

// Fee-free quote for selling input_a tokens A into the pool.
inline Real expected_output(const ShardState& s, Real input_a) {
    detail::require_active(s);
    if (input_a < 0.0) throw std::domain_error("negative input amount");
    return s.reserve_b * input_a / (s.reserve_a + input_a);
}

namespace detail {

// Effective tolerance s in [0, 1]: the fraction of the quoted output the
// victim is willing to forgo. Negative means the floor is not achievable.
inline Real effective_tolerance(const SandwichScenario& sc) {
    if (!(sc.victim_input_a > 0.0))
        throw std::invalid_argument("victim input must be positive");
    require_prices(sc.prices);
    const Real quote = expected_output(sc.pool, sc.victim_input_a);
    if (sc.min_output_b) {
        if (*sc.min_output_b < 0.0) throw std::invalid_argument("negative output floor");
        return 1.0 - *sc.min_output_b / quote;
    }
    if (sc.slippage_tolerance < 0.0 || sc.slippage_tolerance > 1.0)
        throw std::invalid_argument("slippage tolerance must lie in [0, 1]");
    return sc.slippage_tolerance;
}

}  // namespace detail

// Attacker profit, in tokens A, from front-running the victim just enough
// that the victim's output floor binds, then unwinding.
inline Real sandwich_revenue(const SandwichScenario& sc) {
    const Real s = detail::effective_tolerance(sc);
    if (s < 0.0) throw std::domain_error("output floor exceeds the attainable output");
    const Real i = sc.victim_input_a;
    const Real r = sc.pool.reserve_a;
    return i * s * (i + r) / (i * s + r);
}

// The same profit written against the external price of the output floor:
//   input - value(floor) - value(floor)^2 / (reserve_a - value(floor)).
// Agrees with sandwich_revenue when the pool sits at the external price.
inline Real sandwich_revenue_closed_form(const SandwichScenario& sc) {
    const Real s = detail::effective_tolerance(sc);
    if (s < 0.0) throw std::domain_error("output floor exceeds the attainable output");
    const Real floor_b =
        sc.min_output_b ? *sc.min_output_b
                        : (1.0 - s) * expected_output(sc.pool, sc.victim_input_a);
    const Real v = floor_b * sc.prices.price_b / sc.prices.price_a;
    if (!(v < sc.pool.reserve_a))
        throw std::domain_error("output floor exceeds pool liquidity");
    return sc.victim_input_a - v - v * v / (sc.pool.reserve_a - v);
}

struct SensitivityPoint {
    Real reserve_a = 0.0;
    Real revenue = 0.0;
    bool feasible = false;  // the fixed output floor is attainable at this size
};

// Revenue as a function of pool size with the victim order held fixed: the
// output floor is frozen at the base scenario's absolute value and the pool
// is rescaled along the no-arbitrage line. Infeasible sizes are flagged
// rather than extrapolated.
inline std::vector<SensitivityPoint> revenue_pool_size_sensitivity(
    const SandwichScenario& base, const std::vector<Real>& reserve_a_values) {
    const Real s0 = detail::effective_tolerance(base);
    if (s0 < 0.0) throw std::domain_error("output floor exceeds the attainable output");
    const Real floor_b =
        base.min_output_b ? *base.min_output_b
                          : (1.0 - s0) * expected_output(base.pool, base.victim_input_a);
    const Real price_ratio = base.pool.reserve_b / base.pool.reserve_a;

    std::vector<SensitivityPoint> out;
    out.reserve(reserve_a_values.size());
    for (Real ra : reserve_a_values) {
        SensitivityPoint pt;
        pt.reserve_a = ra;
        if (!(ra > 0.0)) {
            out.push_back(pt);
            continue;
        }
        SandwichScenario sc = base;
        sc.pool.reserve_a = ra;
        sc.pool.reserve_b = ra * price_ratio;
        sc.min_output_b = floor_b;
        const Real quote = expected_output(sc.pool, sc.victim_input_a);
        if (floor_b > quote) {
            out.push_back(pt);  // floor not achievable at this pool size
            continue;
        }
        pt.feasible = true;
        pt.revenue = sandwich_revenue(sc);
        out.push_back(pt);
    }
    return out;
}

// Demonstration that a multiplicative fee breaks both incentive properties:
// splitting a budget-sized trade across identical pools is strictly cheaper,
// and a strictly smaller pool is strictly more expensive, at any fee level.
struct CpmmCounterexample {
    Real probe = 0.0;       // trade size used, budget times reserve_a
    Real split_gain = 0.0;  // whole-trade cost minus two-way-split cost
    Real size_gain = 0.0;   // half-pool cost minus full-pool cost
    bool splitting_pays = false;
    bool larger_cheaper = false;
};

inline CpmmCounterexample cpmm_counterexample(Real c, const ShardState& state, Real gamma) {
    detail::require_active(state);
    if (!(c > 0.0) || !(c < 1.0)) throw std::invalid_argument("budget c must lie in (0, 1)");
    CpmmCounterexample out;
    out.probe = c * state.reserve_a;

    const Real whole = cpmm_gross(state, out.probe, gamma);
    const Real halves = 2.0 * cpmm_gross(state, out.probe / 2.0, gamma);
    out.split_gain = whole - halves;
    out.splitting_pays = out.split_gain > 0.0;

    ShardState half = state;
    half.reserve_a *= 0.5;
    half.reserve_b *= 0.5;
    const Real small_probe = c * half.reserve_a;
    out.size_gain = cpmm_gross(half, small_probe, gamma) - cpmm_gross(state, small_probe, gamma);
    out.larger_cheaper = out.size_gain > 0.0;
    return out;
}

}  // namespace samm
