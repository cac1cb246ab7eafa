#pragma once

// Sequential trading game over a sharded pool: a seeded scheduler draws
// providers and traders, applies their best responses, and lets an
// arbitrageur rebalance after every action. Also hosts the brute-force
// grid verifiers for the equilibrium claims and the expected-revenue
// quadrature they share.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "samm/amm_core.hpp"
#include "samm/fee_design.hpp"
#include "samm/strategy.hpp"

namespace samm {

// Scalar demand / endowment distributions the scheduler can draw from.
struct Distribution {
    enum class Kind { constant, uniform, exponential };
    Kind kind = Kind::constant;
    Real a = 0.0;  // constant value, uniform lower bound, or exponential mean
    Real b = 0.0;  // uniform upper bound

    static Distribution constant(Real v) { return {Kind::constant, v, v}; }
    static Distribution uniform(Real lo, Real hi) {
        if (!(hi > lo)) throw std::invalid_argument("uniform needs lo < hi");
        return {Kind::uniform, lo, hi};
    }
    static Distribution exponential(Real mean) {
        if (!(mean > 0.0)) throw std::invalid_argument("exponential needs a positive mean");
        return {Kind::exponential, mean, 0.0};
    }

    Real draw(std::mt19937_64& rng) const {
        switch (kind) {
            case Kind::constant:
                return a;
            case Kind::uniform:
                return std::uniform_real_distribution<Real>(a, b)(rng);
            case Kind::exponential:
                return std::exponential_distribution<Real>(1.0 / a)(rng);
        }
        return a;
    }
};

struct SchedulerConfig {
    Real p_lp = 0.2;
    Real p_trader_ab = 0.4;
    Real p_trader_ba = 0.4;
    Distribution lp_endowment = Distribution::constant(0.0);
    Distribution demand_ab = Distribution::constant(0.0);
    Distribution demand_ba = Distribution::constant(0.0);
    std::uint64_t seed = 0;
};

enum class Actor { liquidity_provider, trader_ab, trader_ba };

// One scheduler step: who moved, what they drew, the per-shard action they
// took (token-A deposits, or outputs on the bought side), and the reserves
// before the action and after the closing arbitrage.
struct GameStep {
    long index = 0;
    Actor actor = Actor::trader_ba;
    Real drawn = 0.0;
    std::vector<Real> action;
    Real utility = 0.0;
    Real fee_paid = 0.0;  // value at external prices
    bool skipped = false;
    std::string skip_reason;
    std::vector<ShardState> before;
    std::vector<ShardState> after;
};

struct GameTrace {
    std::vector<GameStep> steps;
    SystemState final_state;
};

// Mirrors the system so a sell-side trader can be handled by buy-side code.
inline ShardState swap_roles(const ShardState& s) {
    return {s.reserve_b, s.reserve_a, s.shares_outstanding};
}
inline SystemState swap_roles(const SystemState& st) {
    SystemState out;
    out.prices = {st.prices.price_b, st.prices.price_a};
    out.shards.reserve(st.shards.size());
    for (const ShardState& s : st.shards) out.shards.push_back(swap_roles(s));
    return out;
}

// Routing decision for a buy-side demand: either the whole-trade fast path
// with the tie set it may randomize over, or a computed split.
struct RoutedTrade {
    TradeAction action;
    std::vector<std::size_t> ties;  // non-empty only on the fast path
};

inline RoutedTrade route_demand(const SystemState& st, Real demand, const FeeParams& p) {
    detail::require_system(st);
    RoutedTrade r;
    const Real c = p.certified_c.value_or(0.0);
    Real min_reserve = std::numeric_limits<Real>::infinity();
    Real q_lo = std::numeric_limits<Real>::infinity(), q_hi = 0.0;
    for (const ShardState& s : st.shards) {
        min_reserve = std::min(min_reserve, s.reserve_a);
        const Real q = reported_price(s);
        q_lo = std::min(q_lo, q);
        q_hi = std::max(q_hi, q);
    }
    if (c > 0.0 && q_hi <= q_lo * (1.0 + 1e-6) && demand > 0.0 && demand <= c * min_reserve) {
        r.ties = smallest_shard_tie_set(st);
        r.action.outputs.assign(st.shards.size(), 0.0);
        r.action.outputs[r.ties.front()] = demand;
    } else {
        r.action = best_trade_samm(st, demand, p);
    }
    return r;
}

// Executes a buy-side action against the system in place. Returns the total
// fee collected (token B); fees stay out of the reserves.
inline Real settle_trade(SystemState& st, const TradeAction& a, const FeeParams& p) {
    detail::require_same_size(a.outputs.size(), st.shards.size());
    Real fee_b = 0.0;
    for (std::size_t i = 0; i < st.shards.size(); ++i) {
        const Real o = a.outputs[i];
        if (o <= 0.0) continue;
        fee_b += tf_brp(st.shards[i], o, p);
        Trade t;
        t.output_a = o;
        t.input_b = net_amount(st.shards[i], o);
        st.shards[i] = apply_trade(st.shards[i], t);
    }
    return fee_b;
}

// Seats a value-balanced deposit and mints shares in place.
inline void settle_deposit(SystemState& st, const LpAction& lp) {
    detail::require_same_size(lp.deposits_a.size(), st.shards.size());
    for (std::size_t i = 0; i < st.shards.size(); ++i) {
        const Real la = lp.deposits_a[i];
        if (la < 0.0) throw std::invalid_argument("negative deposit");
        if (la == 0.0) continue;
        const Real lb = deposit_b_for(la, st.prices);
        ShardState& s = st.shards[i];
        s.shares_outstanding += mint_shares(s, la, lb);
        s.reserve_a += la;
        s.reserve_b += lb;
    }
}

namespace detail {

// Revenue the provider earns from one buy-side trade of size x, averaging
// over the trader's tie-break. preferred is the pre-deposit lowest-index
// smallest shard; the trader stays there if it still ties the minimum.
inline Real lp_revenue_for_demand(const SystemState& pre, const LpAction& lp,
                                  const FeeParams& p, Real x, std::size_t preferred) {
    if (x <= 0.0) return 0.0;
    SystemState post = pre;
    for (std::size_t i = 0; i < post.shards.size(); ++i) {
        post.shards[i].reserve_a += lp.deposits_a[i];
        post.shards[i].reserve_b += deposit_b_for(lp.deposits_a[i], pre.prices);
    }
    const RoutedTrade routed = route_demand(post, x, p);
    if (routed.ties.empty())
        return lp_revenue(pre, lp, routed.action, p);
    for (std::size_t i : routed.ties) {
        if (i == preferred) {
            TradeAction a;
            a.outputs.assign(post.shards.size(), 0.0);
            a.outputs[i] = x;
            return lp_revenue(pre, lp, a, p);
        }
    }
    Real acc = 0.0;
    for (std::size_t i : routed.ties) {
        TradeAction a;
        a.outputs.assign(post.shards.size(), 0.0);
        a.outputs[i] = x;
        acc += lp_revenue(pre, lp, a, p);
    }
    return acc / Real(routed.ties.size());
}

// Adaptive-Simpson integral of f over [lo, hi]. Recursion subdivides where
// the local rule disagrees with its refinement, which keeps kinks (routing
// transitions) and steep quantile tails accurate without a global fine grid.
template <class F>
Real adaptive_simpson_rec(F& f, Real a, Real b, Real fa, Real fm, Real fb, Real whole, Real tol,
                          int depth) {
    const Real m = 0.5 * (a + b);
    const Real flm = f(0.5 * (a + m));
    const Real frm = f(0.5 * (m + b));
    const Real left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const Real right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const Real split = left + right;
    if (depth <= 0 || std::abs(split - whole) <= 15.0 * tol)
        return split + (split - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
Real adaptive_integral(F&& f, Real lo, Real hi) {
    const Real fa = f(lo);
    const Real fb = f(hi);
    const Real fm = f(0.5 * (lo + hi));
    const Real whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    const Real tol = std::max(1e-9 * std::abs(whole), 1e-15);
    return adaptive_simpson_rec(f, lo, hi, fa, fm, fb, whole, tol, 30);
}

}  // namespace detail

// Expected value of the provider's next-trade revenue when the buy-side
// demand follows dist. Exact for constant demand; adaptive Simpson for
// uniform; exponential is integrated on the probability scale, truncated
// at the 1 - 1e-9 quantile.
inline Real expected_lp_revenue(const SystemState& pre, const LpAction& lp, const FeeParams& p,
                                const Distribution& dist) {
    detail::require_system(pre);
    detail::require_same_size(lp.deposits_a.size(), pre.shards.size());
    const std::size_t preferred = smallest_shard_tie_set(pre).front();
    auto rev = [&](Real x) { return detail::lp_revenue_for_demand(pre, lp, p, x, preferred); };
    switch (dist.kind) {
        case Distribution::Kind::constant:
            return rev(dist.a);
        case Distribution::Kind::uniform:
            return detail::adaptive_integral(rev, dist.a, dist.b) / (dist.b - dist.a);
        case Distribution::Kind::exponential: {
            const Real u_hi = 1.0 - 1e-9;
            auto by_quantile = [&](Real u) { return rev(-dist.a * std::log1p(-u)); };
            return detail::adaptive_integral(by_quantile, 0.0, u_hi);
        }
    }
    return 0.0;
}

// Runs the scheduled game. Infeasible draws are recorded as skipped steps;
// every applied action is followed by an arbitrage rebalance.
inline GameTrace run_game(const SystemState& initial, const SchedulerConfig& cfg, long steps,
                          const FeeParams& params) {
    detail::require_system(initial);
    if (steps < 0) throw std::invalid_argument("negative step count");
    if (cfg.p_lp < 0.0 || cfg.p_trader_ab < 0.0 || cfg.p_trader_ba < 0.0 ||
        std::abs(cfg.p_lp + cfg.p_trader_ab + cfg.p_trader_ba - 1.0) > 1e-9)
        throw std::invalid_argument("actor probabilities must be nonnegative and sum to 1");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<Real> unit(0.0, 1.0);
    GameTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(steps));
    SystemState st = initial;

    for (long k = 0; k < steps; ++k) {
        GameStep step;
        step.index = k;
        step.before = st.shards;
        const Real roll = unit(rng);
        step.actor = roll < cfg.p_lp ? Actor::liquidity_provider
                     : roll < cfg.p_lp + cfg.p_trader_ab ? Actor::trader_ab
                                                         : Actor::trader_ba;
        if (step.actor == Actor::liquidity_provider) {
            step.drawn = cfg.lp_endowment.draw(rng);
            if (!(step.drawn > 0.0)) {
                step.skipped = true;
                step.skip_reason = "zero endowment";
            } else {
                const LpAction act = fillup_action(st, step.drawn);
                step.action = act.deposits_a;
                step.utility = expected_lp_revenue(st, act, params, cfg.demand_ba);
                settle_deposit(st, act);
            }
        } else {
            const bool sells_a = step.actor == Actor::trader_ab;
            step.drawn = (sells_a ? cfg.demand_ab : cfg.demand_ba).draw(rng);
            SystemState view = sells_a ? swap_roles(st) : st;
            Real cap = 0.0;
            for (const ShardState& s : view.shards) cap += detail::output_cap(s);
            if (!(step.drawn > 0.0)) {
                step.skipped = true;
                step.skip_reason = "zero demand";
            } else if (step.drawn >= cap) {
                step.skipped = true;
                step.skip_reason = "demand exceeds pool liquidity";
            } else {
                RoutedTrade routed = route_demand(view, step.drawn, params);
                if (routed.ties.size() > 1) {
                    std::uniform_int_distribution<std::size_t> pick(0, routed.ties.size() - 1);
                    const std::size_t shard = routed.ties[pick(rng)];
                    routed.action.outputs.assign(view.shards.size(), 0.0);
                    routed.action.outputs[shard] = step.drawn;
                }
                step.action = routed.action.outputs;
                const Real cost = trader_cost(view, routed.action, params);
                step.utility = -cost;
                const Real fee = settle_trade(view, routed.action, params);
                step.fee_paid = view.prices.price_b * fee;
                st = sells_a ? swap_roles(view) : view;
            }
        }
        for (ShardState& s : st.shards) s = arbitrage_rebalance(s, st.prices);
        step.after = st.shards;
        trace.steps.push_back(std::move(step));
    }
    trace.final_state = st;
    return trace;
}

// --- grid verifiers ---------------------------------------------------------

// Exhaustive check of the trader claim on one state: every enumerated split
// of the demand (grid cells per shard) is compared against parking the whole
// demand on a smallest shard. margin > 0 means every deviation costs
// strictly more.
struct TraderSpneReport {
    bool pass = false;
    Real margin = 0.0;            // cheapest deviation minus costliest equilibrium action
    Real equilibrium_cost = 0.0;  // worst cost over smallest-shard one-hots
    Real deviation_cost = 0.0;    // best cost over everything else
    long actions = 0;
    std::vector<std::size_t> smallest;
    std::vector<Real> best_action;  // overall cheapest enumerated split
    Real best_cost = 0.0;
};

namespace detail {

template <class ShardCost>
TraderSpneReport verify_trader_grid(const SystemState& st, Real demand, int grid,
                                    ShardCost&& cost_of) {
    require_system(st);
    if (!(demand > 0.0)) throw std::invalid_argument("demand must be positive");
    if (grid < 2) throw std::invalid_argument("grid must be at least 2");
    const std::size_t n = st.shards.size();

    // cost of putting k grid cells on shard i
    std::vector<std::vector<Real>> cell(n, std::vector<Real>(grid + 1));
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k <= grid; ++k) cell[i][k] = cost_of(i, demand * k / grid);

    TraderSpneReport rep;
    rep.smallest = smallest_shard_tie_set(st);
    std::vector<bool> is_smallest(n, false);
    for (std::size_t i : rep.smallest) is_smallest[i] = true;

    Real eq_worst = -std::numeric_limits<Real>::infinity();
    Real dev_best = std::numeric_limits<Real>::infinity();
    Real best_cost = std::numeric_limits<Real>::infinity();
    std::vector<int> counts(n, 0);
    std::vector<int> best_counts(n, 0);
    long actions = 0;

    auto visit = [&](const std::vector<int>& ks) {
        ++actions;
        Real cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) cost += cell[i][ks[i]];
        if (!std::isfinite(cost)) return;
        int hot = -1;
        bool one_hot = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (ks[i] == grid) hot = static_cast<int>(i);
            else if (ks[i] != 0) one_hot = false;
        }
        const bool equilibrium = one_hot && hot >= 0 && is_smallest[hot];
        if (equilibrium)
            eq_worst = std::max(eq_worst, cost);
        else
            dev_best = std::min(dev_best, cost);
        if (cost < best_cost) {
            best_cost = cost;
            best_counts = ks;
        }
    };
    // enumerate compositions of grid into n parts
    auto rec = [&](auto&& self, std::size_t i, int left) -> void {
        if (i + 1 == n) {
            counts[i] = left;
            visit(counts);
            return;
        }
        for (int k = 0; k <= left; ++k) {
            counts[i] = k;
            self(self, i + 1, left - k);
        }
    };
    rec(rec, 0, grid);

    rep.actions = actions;
    rep.equilibrium_cost = eq_worst;
    rep.deviation_cost = dev_best;
    rep.margin = dev_best - eq_worst;
    rep.pass = std::isfinite(eq_worst) && rep.margin > 0.0;
    rep.best_cost = best_cost;
    rep.best_action.resize(n);
    for (std::size_t i = 0; i < n; ++i) rep.best_action[i] = demand * best_counts[i] / grid;
    return rep;
}

}  // namespace detail

inline TraderSpneReport verify_trader_spne(const SystemState& st, Real demand,
                                           const FeeParams& p, int grid) {
    return detail::verify_trader_grid(st, demand, grid, [&](std::size_t i, Real o) {
        return detail::shard_gross(st.shards[i], o, p);
    });
}

// Negative control: the same enumeration under a multiplicative fee, where
// parking the trade on one shard is not optimal.
inline TraderSpneReport verify_trader_spne_cpmm(const SystemState& st, Real demand, Real gamma,
                                                int grid) {
    return detail::verify_trader_grid(st, demand, grid, [&](std::size_t i, Real o) {
        if (o <= 0.0) return Real(0.0);
        if (o >= detail::output_cap(st.shards[i]))
            return std::numeric_limits<Real>::infinity();
        return cpmm_gross(st.shards[i], o, gamma);
    });
}

// Exhaustive check of the provider claim on one state: enumerate deposit
// allocations of the endowment on a grid and compare the expected-revenue
// maximizer against water-filling. Passes when water-filling is within one
// grid cell of the argmax or beats the grid outright.
struct LpSpneReport {
    bool pass = false;
    Real fillup_revenue = 0.0;
    Real grid_max_revenue = 0.0;
    Real gap = 0.0;   // grid_max_revenue - fillup_revenue
    Real cell = 0.0;  // endowment / grid
    long actions = 0;
    std::vector<Real> fillup;
    std::vector<Real> grid_argmax;
};

inline LpSpneReport verify_lp_spne(const SystemState& st, Real endowment, const FeeParams& p,
                                   const Distribution& demand, int grid) {
    detail::require_system(st);
    if (!(endowment > 0.0)) throw std::invalid_argument("endowment must be positive");
    if (grid < 2) throw std::invalid_argument("grid must be at least 2");
    const std::size_t n = st.shards.size();

    LpSpneReport rep;
    rep.cell = endowment / grid;
    const LpAction fill = fillup_action(st, endowment);
    rep.fillup = fill.deposits_a;
    rep.fillup_revenue = expected_lp_revenue(st, fill, p, demand);

    Real best = -std::numeric_limits<Real>::infinity();
    std::vector<int> counts(n, 0), best_counts(n, 0);
    long actions = 0;
    auto visit = [&](const std::vector<int>& ks) {
        ++actions;
        LpAction act;
        act.deposits_a.resize(n);
        for (std::size_t i = 0; i < n; ++i) act.deposits_a[i] = endowment * ks[i] / grid;
        const Real rev = expected_lp_revenue(st, act, p, demand);
        if (rev > best) {
            best = rev;
            best_counts = ks;
        }
    };
    auto rec = [&](auto&& self, std::size_t i, int left) -> void {
        if (i + 1 == n) {
            counts[i] = left;
            visit(counts);
            return;
        }
        for (int k = 0; k <= left; ++k) {
            counts[i] = k;
            self(self, i + 1, left - k);
        }
    };
    rec(rec, 0, grid);

    rep.actions = actions;
    rep.grid_max_revenue = best;
    rep.gap = best - rep.fillup_revenue;
    rep.grid_argmax.resize(n);
    Real linf = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rep.grid_argmax[i] = endowment * best_counts[i] / grid;
        linf = std::max(linf, std::abs(rep.grid_argmax[i] - rep.fillup[i]));
    }
    const Real scale = std::max(std::abs(best), Real(1e-300));
    rep.pass = linf <= rep.cell + 1e-12 * endowment || rep.gap <= 1e-12 * scale;
    return rep;
}

}  // namespace samm
