#pragma once

// Best responses over a sharded pool: smallest-shard routing for budget-sized
// trades, cost-minimizing splits for larger ones, the proportional split that
// multiplicative-fee pools induce, water-filling deposits, and the fee share
// a provider earns from the next trade.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "samm/amm_core.hpp"
#include "samm/fee_design.hpp"

namespace samm {

struct SystemState {
    std::vector<ShardState> shards;
    MarketPrices prices;
};

// Token-A outputs requested per shard (zero means the shard is untouched).
struct TradeAction {
    std::vector<Real> outputs;
};

// Token-A deposits per shard; the token-B legs follow the external price
// ratio so the deposit is value-balanced.
struct LpAction {
    std::vector<Real> deposits_a;
};

inline Real deposit_b_for(Real deposit_a, const MarketPrices& p) {
    detail::require_prices(p);
    return deposit_a * p.price_a / p.price_b;
}

namespace detail {

inline void require_system(const SystemState& st) {
    if (st.shards.empty()) throw std::invalid_argument("no shards");
    for (const ShardState& s : st.shards) require_active(s);
    require_prices(st.prices);
}

inline void require_same_size(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("action size does not match shard count");
}

// Keep searched outputs strictly inside the pool.
inline Real output_cap(const ShardState& s) { return s.reserve_a * (1.0 - 1e-9); }

inline Real shard_gross(const ShardState& s, Real o, const FeeParams& p) {
    if (o <= 0.0) return 0.0;
    if (o >= output_cap(s)) return std::numeric_limits<Real>::infinity();
    return gross_samm(s, o, p);
}

}  // namespace detail

// Value, at external prices, of the total payment a trader makes for the
// requested outputs. Zero action costs zero.
inline Real trader_cost(const SystemState& st, const TradeAction& a, const FeeParams& p) {
    detail::require_system(st);
    detail::require_same_size(a.outputs.size(), st.shards.size());
    Real total_b = 0.0;
    for (std::size_t i = 0; i < st.shards.size(); ++i) {
        const Real o = a.outputs[i];
        if (o < 0.0) throw std::domain_error("negative output amount");
        if (o == 0.0) continue;
        total_b += gross_samm(st.shards[i], o, p);
    }
    return st.prices.price_b * total_b;
}

// Indices of the shards whose token-A reserve ties the minimum (relative
// tolerance, so equal-by-construction shards stay tied after arithmetic).
inline std::vector<std::size_t> smallest_shard_tie_set(const SystemState& st) {
    detail::require_system(st);
    Real lo = std::numeric_limits<Real>::infinity();
    for (const ShardState& s : st.shards) lo = std::min(lo, s.reserve_a);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < st.shards.size(); ++i)
        if (st.shards[i].reserve_a <= lo * (1.0 + 1e-12)) out.push_back(i);
    return out;
}

// Proportional-to-reserves split: the dominant strategy when every shard
// charges the same multiplicative fee.
inline TradeAction best_trade_cpmm(const SystemState& st, Real demand) {
    detail::require_system(st);
    if (demand < 0.0) throw std::domain_error("negative demand");
    Real total = 0.0;
    for (const ShardState& s : st.shards) total += s.reserve_a;
    if (demand >= total * (1.0 - 1e-9))
        throw std::domain_error("demand exceeds pool liquidity");
    TradeAction a;
    a.outputs.resize(st.shards.size());
    for (std::size_t i = 0; i < st.shards.size(); ++i)
        a.outputs[i] = demand * st.shards[i].reserve_a / total;
    return a;
}

namespace detail {

// Minimizes shard_gross(i, x+t) + shard_gross(j, y-t) over the transfer t.
// Coarse scan to bracket, then golden-section. Handles the clamp kinks by
// scanning; golden only refines the bracketed basin.
inline Real best_transfer(const ShardState& si, const ShardState& sj, Real x, Real y,
                          const FeeParams& p) {
    const Real lo = -x;
    const Real hi = y;
    if (!(hi > lo)) return 0.0;
    auto g = [&](Real t) { return shard_gross(si, x + t, p) + shard_gross(sj, y - t, p); };

    constexpr int scan = 25;
    Real best_t = 0.0;
    Real best_v = g(0.0);
    for (int k = 0; k <= scan; ++k) {
        const Real t = lo + (hi - lo) * k / scan;
        const Real v = g(t);
        if (v < best_v) {
            best_v = v;
            best_t = t;
        }
    }
    const Real step = (hi - lo) / scan;
    Real a = std::max(lo, best_t - step);
    Real b = std::min(hi, best_t + step);
    constexpr Real inv_phi = 0.6180339887498949;
    Real c1 = b - inv_phi * (b - a);
    Real c2 = a + inv_phi * (b - a);
    Real f1 = g(c1), f2 = g(c2);
    for (int it = 0; it < 60 && b - a > 1e-14 * (std::abs(x) + std::abs(y) + 1.0); ++it) {
        if (f1 < f2) {
            b = c2;
            c2 = c1;
            f2 = f1;
            c1 = b - inv_phi * (b - a);
            f1 = g(c1);
        } else {
            a = c1;
            c1 = c2;
            f1 = f2;
            c2 = a + inv_phi * (b - a);
            f2 = g(c2);
        }
    }
    const Real mid = 0.5 * (a + b);
    return g(mid) < best_v ? mid : best_t;
}

// Pairwise coordinate descent from a feasible split until the cost stops
// improving in relative terms.
inline void polish_split(const SystemState& st, const FeeParams& p, std::vector<Real>& x) {
    const std::size_t n = st.shards.size();
    auto cost_of = [&](const std::vector<Real>& v) {
        Real c = 0.0;
        for (std::size_t i = 0; i < n; ++i) c += shard_gross(st.shards[i], v[i], p);
        return c;
    };
    Real cost = cost_of(x);
    for (int sweep = 0; sweep < 40; ++sweep) {
        const Real before = cost;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const Real t = best_transfer(st.shards[i], st.shards[j], x[i], x[j], p);
                if (t == 0.0) continue;
                const Real gi0 = shard_gross(st.shards[i], x[i], p);
                const Real gj0 = shard_gross(st.shards[j], x[j], p);
                const Real gi1 = shard_gross(st.shards[i], x[i] + t, p);
                const Real gj1 = shard_gross(st.shards[j], x[j] - t, p);
                if (gi1 + gj1 < gi0 + gj0) {
                    x[i] += t;
                    x[j] -= t;
                    cost += (gi1 + gj1) - (gi0 + gj0);
                }
            }
        }
        if (before - cost <= 1e-10 * std::max(cost, Real(1e-300))) break;
    }
}

// Fills shards in ascending reserve order up to cap * reserve each, then
// spreads any remainder proportionally. A feasible start for budgets where
// the fee clamp makes per-shard cost concave below the cap.
inline std::vector<Real> capped_fill(const SystemState& st, Real demand, Real cap) {
    const std::size_t n = st.shards.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return st.shards[a].reserve_a < st.shards[b].reserve_a;
    });
    std::vector<Real> x(n, 0.0);
    Real left = demand;
    for (std::size_t idx : order) {
        if (left <= 0.0) break;
        const Real take = std::min(left, cap * st.shards[idx].reserve_a);
        x[idx] = take;
        left -= take;
    }
    if (left > 0.0) {
        Real total = 0.0;
        for (const ShardState& s : st.shards) total += s.reserve_a;
        for (std::size_t i = 0; i < n; ++i) x[i] += left * st.shards[i].reserve_a / total;
    }
    return x;
}

}  // namespace detail

// Cost-minimizing split of a token-A demand. Demands within the certified
// budget of the smallest shard (at arbitrage-balanced prices) route whole to
// the lowest-index smallest shard; anything else goes through a multi-start
// coordinate-descent search. Outputs sum to the demand exactly.
inline TradeAction best_trade_samm(const SystemState& st, Real demand, const FeeParams& p) {
    detail::require_system(st);
    if (demand < 0.0) throw std::domain_error("negative demand");
    const std::size_t n = st.shards.size();
    TradeAction a;
    a.outputs.assign(n, 0.0);
    if (demand == 0.0) return a;

    Real total_cap = 0.0;
    Real min_reserve = std::numeric_limits<Real>::infinity();
    Real q_lo = std::numeric_limits<Real>::infinity(), q_hi = 0.0;
    for (const ShardState& s : st.shards) {
        total_cap += detail::output_cap(s);
        min_reserve = std::min(min_reserve, s.reserve_a);
        const Real q = reported_price(s);
        q_lo = std::min(q_lo, q);
        q_hi = std::max(q_hi, q);
    }
    if (demand >= total_cap) throw std::domain_error("demand exceeds pool liquidity");

    const Real c = p.certified_c.value_or(0.0);
    const bool balanced = q_hi <= q_lo * (1.0 + 1e-6);
    if (c > 0.0 && balanced && demand <= c * min_reserve) {
        const std::vector<std::size_t> ties = smallest_shard_tie_set(st);
        a.outputs[ties.front()] = demand;
        return a;
    }

    // Multi-start: proportional, feasible one-hots, even over the k smallest
    // shards, and a budget-capped greedy fill.
    std::vector<std::vector<Real>> starts;
    {
        Real total = 0.0;
        for (const ShardState& s : st.shards) total += s.reserve_a;
        std::vector<Real> prop(n);
        for (std::size_t i = 0; i < n; ++i) prop[i] = demand * st.shards[i].reserve_a / total;
        starts.push_back(std::move(prop));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (demand < detail::output_cap(st.shards[i])) {
            std::vector<Real> one(n, 0.0);
            one[i] = demand;
            starts.push_back(std::move(one));
        }
    }
    {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
            return st.shards[x].reserve_a < st.shards[y].reserve_a;
        });
        for (std::size_t k = 2; k <= n; ++k) {
            std::vector<Real> even(n, 0.0);
            bool ok = true;
            for (std::size_t j = 0; j < k; ++j) {
                const Real share = demand / Real(k);
                if (share >= detail::output_cap(st.shards[order[j]])) {
                    ok = false;
                    break;
                }
                even[order[j]] = share;
            }
            if (ok) starts.push_back(std::move(even));
        }
    }
    if (c > 0.0) starts.push_back(detail::capped_fill(st, demand, c));

    auto cost_of = [&](const std::vector<Real>& v) {
        Real s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += detail::shard_gross(st.shards[i], v[i], p);
        return s;
    };
    std::vector<Real> best;
    Real best_cost = std::numeric_limits<Real>::infinity();
    for (std::vector<Real>& x : starts) {
        if (!std::isfinite(cost_of(x))) continue;
        detail::polish_split(st, p, x);
        const Real cst = cost_of(x);
        if (cst < best_cost) {
            best_cost = cst;
            best = std::move(x);
        }
    }
    if (best.empty()) throw std::domain_error("demand exceeds pool liquidity");

    // Drop numerical dust, then nudge the largest leg until the re-summed
    // total reproduces the demand bit-for-bit (a couple of rounds suffice).
    std::size_t big = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (best[i] < demand * 1e-12) best[i] = 0.0;
        if (best[i] > best[big]) big = i;
    }
    for (int rounds = 0; rounds < 8; ++rounds) {
        Real sum = 0.0;
        for (Real v : best) sum += v;
        if (sum == demand) break;
        best[big] += demand - sum;
    }
    a.outputs = std::move(best);
    return a;
}

// Water-filling deposit: raises the lowest token-A reserves to a common
// level, spending the endowment exactly.
inline LpAction fillup_action(const SystemState& st, Real endowment_a) {
    detail::require_system(st);
    if (endowment_a < 0.0) throw std::invalid_argument("negative endowment");
    const std::size_t n = st.shards.size();
    LpAction act;
    act.deposits_a.assign(n, 0.0);
    if (endowment_a == 0.0) return act;

    std::vector<Real> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = st.shards[i].reserve_a;
    std::vector<Real> sorted = r;
    std::sort(sorted.begin(), sorted.end());

    // Find the level L with sum(max(0, L - r_i)) = endowment.
    Real level = sorted.back() + endowment_a;  // fallback: everything funded
    Real spent = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        const Real next = (k < n) ? sorted[k] : std::numeric_limits<Real>::infinity();
        const Real step = (next - sorted[k - 1]) * Real(k);
        if (spent + step >= endowment_a || k == n) {
            level = sorted[k - 1] + (endowment_a - spent) / Real(k);
            break;
        }
        spent += step;
    }

    Real paid = 0.0;
    std::size_t last_funded = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Real d = std::max(Real(0.0), level - r[i]);
        act.deposits_a[i] = d;
        paid += d;
        if (d > 0.0) last_funded = i;
    }
    act.deposits_a[last_funded] += endowment_a - paid;  // exact conservation
    return act;
}

// Value, at external prices, of the provider's share of the fees the given
// trade pays, with the provider's deposits already seated in each shard.
inline Real lp_revenue(const SystemState& st, const LpAction& lp, const TradeAction& trade,
                       const FeeParams& p) {
    detail::require_system(st);
    detail::require_same_size(lp.deposits_a.size(), st.shards.size());
    detail::require_same_size(trade.outputs.size(), st.shards.size());
    Real total_b = 0.0;
    for (std::size_t i = 0; i < st.shards.size(); ++i) {
        const Real la = lp.deposits_a[i];
        if (la < 0.0) throw std::invalid_argument("negative deposit");
        const Real o = trade.outputs[i];
        if (o <= 0.0 || la == 0.0) continue;
        ShardState seated = st.shards[i];
        seated.reserve_a += la;
        seated.reserve_b += deposit_b_for(la, st.prices);
        if (o >= seated.reserve_a) continue;  // trade cannot execute there
        total_b += tf_brp(seated, o, p) * la / (la + st.shards[i].reserve_a);
    }
    return st.prices.price_b * total_b;
}

}  // namespace samm
