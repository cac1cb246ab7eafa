#pragma once

// Trade-trace tooling: CSV loading, calibrated synthetic generation, replay
// of a trace against a sharded pool under per-second transaction caps, and
// the static volume-capacity and size-distribution analyses.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "samm/amm_core.hpp"
#include "samm/fee_design.hpp"
#include "samm/game_sim.hpp"
#include "samm/strategy.hpp"
#include "samm/throughput_model.hpp"

namespace samm {

struct TraceRecord {
    enum class Side { ab, ba };
    long long timestamp = 0;  // seconds
    Side side = Side::ba;
    Real output_amount = 0.0;
    std::optional<Real> price_a, price_b;  // external prices at trade time
};

struct TraceData {
    std::vector<TraceRecord> records;
    bool reordered = false;  // input timestamps were not monotone
};

// --- loading ----------------------------------------------------------------

// Parses `timestamp,side,output_amount[,price_a,price_b]` rows. A header
// line is accepted. Out-of-order timestamps are stably sorted and flagged;
// malformed rows fail with their line number.
inline TraceData load_trace(std::istream& in, const std::string& origin = "trace") {
    TraceData out;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& what) {
        throw std::runtime_error(origin + ": line " + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            cols.push_back(line.substr(pos, comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (lineno == 1 && cols.front() == "timestamp") continue;
        if (cols.size() != 3 && cols.size() != 5)
            fail("expected timestamp,side,output_amount[,price_a,price_b]");
        TraceRecord rec;
        try {
            std::size_t used = 0;
            rec.timestamp = std::stoll(cols[0], &used);
            if (used != cols[0].size()) throw std::invalid_argument(cols[0]);
        } catch (const std::exception&) {
            fail("bad timestamp '" + cols[0] + "'");
        }
        std::string side = cols[1];
        for (char& ch : side) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (side == "ab")
            rec.side = TraceRecord::Side::ab;
        else if (side == "ba")
            rec.side = TraceRecord::Side::ba;
        else
            fail("bad side '" + cols[1] + "' (want AB or BA)");
        auto num = [&](const std::string& s) {
            try {
                std::size_t used = 0;
                const Real v = std::stod(s, &used);
                if (used != s.size()) throw std::invalid_argument(s);
                return v;
            } catch (const std::exception&) {
                fail("bad number '" + s + "'");
                return Real(0.0);
            }
        };
        rec.output_amount = num(cols[2]);
        if (!(rec.output_amount > 0.0)) fail("output amount must be positive");
        if (cols.size() == 5) {
            rec.price_a = num(cols[3]);
            rec.price_b = num(cols[4]);
            if (!(*rec.price_a > 0.0) || !(*rec.price_b > 0.0)) fail("prices must be positive");
        }
        out.records.push_back(rec);
    }
    if (out.records.empty()) throw std::runtime_error(origin + ": no trades");
    for (std::size_t i = 1; i < out.records.size(); ++i)
        if (out.records[i].timestamp < out.records[i - 1].timestamp) {
            out.reordered = true;
            break;
        }
    if (out.reordered)
        std::stable_sort(out.records.begin(), out.records.end(),
                         [](const TraceRecord& a, const TraceRecord& b) {
                             return a.timestamp < b.timestamp;
                         });
    return out;
}

inline TraceData load_trace_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    return load_trace(f, path);
}

inline void save_trace(const TraceData& trace, std::ostream& out) {
    out << "timestamp,side,output_amount\n";
    std::ostringstream num;
    num.precision(17);
    for (const TraceRecord& r : trace.records) {
        num.str("");
        num << r.output_amount;
        out << r.timestamp << ',' << (r.side == TraceRecord::Side::ab ? "AB" : "BA") << ','
            << num.str() << '\n';
    }
}

// --- synthesis ---------------------------------------------------------------

// Lognormal trade-size model expressed as a fraction of the output-side
// reserve, calibrated so roughly 99% of trades stay below 0.52% of the pool
// with a sub-0.1% mean. Arrivals are Poisson.
struct SyntheticConfig {
    long n_trades = 100000;
    Real reference_reserve = 1e6;  // converts size fractions into amounts
    Real log_mu = std::log(3.5e-4);
    Real log_sigma = 1.1;
    Real trades_per_second = 300.0;
    Real ba_fraction = 0.5;
    std::uint64_t seed = 0;
};

inline TraceData synthesize_trace(const SyntheticConfig& cfg) {
    if (cfg.n_trades <= 0) throw std::invalid_argument("trade count must be positive");
    if (!(cfg.reference_reserve > 0.0)) throw std::invalid_argument("reference reserve must be positive");
    if (!(cfg.trades_per_second > 0.0)) throw std::invalid_argument("arrival rate must be positive");
    if (cfg.ba_fraction < 0.0 || cfg.ba_fraction > 1.0)
        throw std::invalid_argument("side fraction must lie in [0, 1]");
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<Real> gauss(0.0, 1.0);
    std::exponential_distribution<Real> gap(cfg.trades_per_second);
    std::uniform_real_distribution<Real> unit(0.0, 1.0);

    TraceData out;
    out.records.reserve(static_cast<std::size_t>(cfg.n_trades));
    Real clock = 0.0;
    for (long i = 0; i < cfg.n_trades; ++i) {
        clock += gap(rng);
        TraceRecord rec;
        rec.timestamp = static_cast<long long>(clock);
        rec.side = unit(rng) < cfg.ba_fraction ? TraceRecord::Side::ba : TraceRecord::Side::ab;
        const Real ratio =
            std::min(std::exp(cfg.log_mu + cfg.log_sigma * gauss(rng)), Real(0.45));
        rec.output_amount = ratio * cfg.reference_reserve;
        out.records.push_back(rec);
    }
    return out;
}

// --- size statistics ----------------------------------------------------------

struct RatioStats {
    long n = 0;
    Real mean = 0.0, p50 = 0.0, p90 = 0.0, p99 = 0.0, max = 0.0;
};

namespace detail {

inline Real quantile_sorted(const std::vector<Real>& sorted, Real q) {
    if (sorted.empty()) return 0.0;
    const auto idx = static_cast<std::size_t>(
        std::min<long long>(static_cast<long long>(sorted.size()) - 1,
                            std::max<long long>(0, static_cast<long long>(
                                                       std::ceil(q * sorted.size())) -
                                                       1)));
    return sorted[idx];
}

}  // namespace detail

// Distribution of trade size as a fraction of the reference reserve.
inline RatioStats ratio_statistics(const TraceData& trace, Real reference_reserve) {
    if (!(reference_reserve > 0.0)) throw std::invalid_argument("reference reserve must be positive");
    if (trace.records.empty()) throw std::invalid_argument("empty trace");
    std::vector<Real> r;
    r.reserve(trace.records.size());
    for (const TraceRecord& rec : trace.records) r.push_back(rec.output_amount / reference_reserve);
    std::sort(r.begin(), r.end());
    RatioStats st;
    st.n = static_cast<long>(r.size());
    for (Real v : r) st.mean += v;
    st.mean /= Real(r.size());
    st.p50 = detail::quantile_sorted(r, 0.50);
    st.p90 = detail::quantile_sorted(r, 0.90);
    st.p99 = detail::quantile_sorted(r, 0.99);
    st.max = r.back();
    return st;
}

inline Real ratio_fraction_below(const TraceData& trace, Real reference_reserve, Real cutoff) {
    if (!(reference_reserve > 0.0)) throw std::invalid_argument("reference reserve must be positive");
    if (trace.records.empty()) throw std::invalid_argument("empty trace");
    long below = 0;
    for (const TraceRecord& rec : trace.records)
        if (rec.output_amount / reference_reserve < cutoff) ++below;
    return Real(below) / Real(trace.records.size());
}

// --- replay -------------------------------------------------------------------

struct ReplayConfig {
    int n_shards = 1;
    FeeParams params;
    // transactions per second by shard count; counts absent from the map
    // fall back to 214 * speedup(0.8, n), the measured single-shard rate
    // scaled by the fitted parallel fraction
    std::map<int, Real> throughput_caps;
    bool unlimited_throughput = false;
    long warmup_seconds = 0;
    long measure_seconds = 60;
    long start_index = 0;
    int repetitions = 1;
    std::uint64_t seed = 0;
    Real init_reserve_a = 1e6;
    Real init_reserve_b = 1e6;
    Real baseline_gamma = 0.997;  // single-pool multiplicative-fee comparison
};

struct ReplayReport {
    int n_shards = 1;
    int repetitions = 1;
    long trades_seen = 0;      // records inside the measurement windows
    long trades_executed = 0;  // executed (not dropped) measured trades
    long trades_dropped = 0;
    long transactions = 0;  // executed per-shard legs
    Real split_ratio = 0.0;
    Real extra_trade_ratio = 0.0;
    Real trader_cost_ratio = 0.0;  // mean gross value over external value
    Real lp_revenue_ratio = 0.0;   // fee value over baseline fee value
    Real fee_total_value = 0.0;    // trade-side fee accounting
    Real shard_fee_value = 0.0;    // shard-side fee accounting
    long baseline_executed = 0;
    long baseline_dropped = 0;
    Real baseline_fee_value = 0.0;
    std::vector<long> shard_trade_counts;
    Real max_count_deviation = 0.0;
    std::array<Real, 3> capacity_thresholds{0.005, 0.01, 0.015};
    std::array<Real, 3> capacity_exceedance{};
    RatioStats ratios;  // trade size over total output-side initial reserve
    bool reordered_input = false;
};

inline Real default_throughput_cap(int n_shards) {
    return 214.0 * speedup(0.8, Real(n_shards));
}

namespace detail {

inline Real cap_for(const ReplayConfig& cfg, int n) {
    const auto it = cfg.throughput_caps.find(n);
    return it != cfg.throughput_caps.end() ? it->second : default_throughput_cap(n);
}

}  // namespace detail

// Replays the trace against a fresh n-shard pool with 1/n of the liquidity
// in each shard, enforcing the per-second transaction cap. Trades that do
// not fit in the current second are dropped, never queued. A single-pool
// multiplicative-fee baseline runs alongside under its own cap.
inline ReplayReport run_replay(const TraceData& trace, const ReplayConfig& cfg) {
    if (cfg.n_shards < 1) throw std::invalid_argument("shard count must be at least 1");
    if (cfg.repetitions < 1) throw std::invalid_argument("repetition count must be at least 1");
    if (cfg.warmup_seconds < 0 || cfg.measure_seconds <= 0)
        throw std::invalid_argument("bad replay window");
    if (trace.records.empty()) throw std::invalid_argument("empty trace");
    if (cfg.start_index < 0 || cfg.start_index >= static_cast<long>(trace.records.size()))
        throw std::invalid_argument("start index outside the trace");
    if (!(cfg.init_reserve_a > 0.0) || !(cfg.init_reserve_b > 0.0))
        throw std::invalid_argument("initial reserves must be positive");

    const int n = cfg.n_shards;
    const Real cap = detail::cap_for(cfg, n);
    const Real base_cap = detail::cap_for(cfg, 1);

    std::mt19937_64 rng(cfg.seed);
    std::vector<long> starts;
    if (cfg.repetitions == 1) {
        starts.push_back(cfg.start_index);
    } else {
        std::uniform_int_distribution<long> pick(
            cfg.start_index, static_cast<long>(trace.records.size()) - 1);
        for (int r = 0; r < cfg.repetitions; ++r) starts.push_back(pick(rng));
    }

    ReplayReport rep;
    rep.n_shards = n;
    rep.repetitions = cfg.repetitions;
    rep.shard_trade_counts.assign(static_cast<std::size_t>(n), 0);
    rep.reordered_input = trace.reordered;
    Real cost_ratio_sum = 0.0;
    std::vector<Real> size_ratios;

    for (const long start : starts) {
        SystemState st;
        st.prices.price_a = cfg.init_reserve_b / cfg.init_reserve_a;
        st.prices.price_b = 1.0;
        for (int i = 0; i < n; ++i)
            st.shards.push_back({cfg.init_reserve_a / n, cfg.init_reserve_b / n,
                                 cfg.init_reserve_a / n});
        ShardState base{cfg.init_reserve_a, cfg.init_reserve_b, cfg.init_reserve_a};

        const long long t0 = trace.records[static_cast<std::size_t>(start)].timestamp;
        const long long measure_from = t0 + cfg.warmup_seconds;
        const long long end_at = measure_from + cfg.measure_seconds;
        long long current_second = std::numeric_limits<long long>::min();
        Real budget = 0.0, base_budget = 0.0;

        for (std::size_t i = static_cast<std::size_t>(start); i < trace.records.size(); ++i) {
            const TraceRecord& rec = trace.records[i];
            if (rec.timestamp >= end_at) break;
            const bool measured = rec.timestamp >= measure_from;
            if (rec.timestamp != current_second) {
                current_second = rec.timestamp;
                budget = cap;
                base_budget = base_cap;
            }
            if (rec.price_a && rec.price_b) {
                st.prices = {*rec.price_a, *rec.price_b};
                for (ShardState& s : st.shards) s = arbitrage_rebalance(s, st.prices);
                base = arbitrage_rebalance(base, st.prices);
            }
            if (measured) ++rep.trades_seen;

            const bool sells_a = rec.side == TraceRecord::Side::ab;
            SystemState view = sells_a ? swap_roles(st) : st;
            Real view_cap = 0.0;
            for (const ShardState& s : view.shards) view_cap += detail::output_cap(s);
            bool executed = false;
            if (rec.output_amount < view_cap) {
                RoutedTrade routed = route_demand(view, rec.output_amount, cfg.params);
                if (routed.ties.size() > 1) {
                    std::uniform_int_distribution<std::size_t> pick(0, routed.ties.size() - 1);
                    const std::size_t shard = routed.ties[pick(rng)];
                    routed.action.outputs.assign(view.shards.size(), 0.0);
                    routed.action.outputs[shard] = rec.output_amount;
                }
                long legs = 0;
                for (Real o : routed.action.outputs)
                    if (o > 0.0) ++legs;
                if (cfg.unlimited_throughput || Real(legs) <= budget) {
                    if (!cfg.unlimited_throughput) budget -= Real(legs);
                    executed = true;
                    const Real gross_b = trader_cost(view, routed.action, cfg.params) /
                                         view.prices.price_b;
                    Real net_b = 0.0;  // trade-side fee accounting: gross minus net
                    for (std::size_t k = 0; k < routed.action.outputs.size(); ++k)
                        if (routed.action.outputs[k] > 0.0)
                            net_b += net_amount(view.shards[k], routed.action.outputs[k]);
                    const Real fee_b = settle_trade(view, routed.action, cfg.params);
                    st = sells_a ? swap_roles(view) : view;
                    for (ShardState& s : st.shards) s = arbitrage_rebalance(s, st.prices);
                    if (measured) {
                        ++rep.trades_executed;
                        rep.transactions += legs;
                        if (legs > 1) ++rep.split_ratio;  // count; normalized below
                        for (std::size_t k = 0; k < routed.action.outputs.size(); ++k)
                            if (routed.action.outputs[k] > 0.0)
                                ++rep.shard_trade_counts[k];
                        // external value of the bought amount, in B units of the view
                        const Real ext_b = rec.output_amount * view.prices.price_a /
                                           view.prices.price_b;
                        const Real ratio = gross_b / ext_b;
                        cost_ratio_sum += ratio;
                        for (std::size_t t = 0; t < rep.capacity_thresholds.size(); ++t)
                            if (ratio - 1.0 > rep.capacity_thresholds[t])
                                ++rep.capacity_exceedance[t];  // count; normalized below
                        rep.fee_total_value += view.prices.price_b * (gross_b - net_b);
                        rep.shard_fee_value += view.prices.price_b * fee_b;
                        const Real side_reserve =
                            sells_a ? cfg.init_reserve_b : cfg.init_reserve_a;
                        size_ratios.push_back(rec.output_amount / side_reserve);
                    }
                }
            }
            if (!executed && measured) ++rep.trades_dropped;

            // single-pool baseline under its own budget
            ShardState base_view = sells_a ? swap_roles(base) : base;
            if (rec.output_amount < detail::output_cap(base_view)) {
                if (cfg.unlimited_throughput || base_budget >= 1.0) {
                    if (!cfg.unlimited_throughput) base_budget -= 1.0;
                    const Real net = net_amount(base_view, rec.output_amount);
                    const Real fee = net * (1.0 / cfg.baseline_gamma - 1.0);
                    Trade t;
                    t.output_a = rec.output_amount;
                    t.input_b = net;
                    base_view = apply_trade(base_view, t);
                    base = sells_a ? swap_roles(base_view) : base_view;
                    base = arbitrage_rebalance(base, st.prices);
                    if (measured) {
                        ++rep.baseline_executed;
                        rep.baseline_fee_value +=
                            fee * (sells_a ? st.prices.price_a : st.prices.price_b);
                    }
                } else if (measured) {
                    ++rep.baseline_dropped;
                }
            } else if (measured) {
                ++rep.baseline_dropped;
            }
        }
    }

    if (rep.trades_executed > 0) {
        rep.split_ratio /= Real(rep.trades_executed);
        rep.extra_trade_ratio = Real(rep.transactions) / Real(rep.trades_executed) - 1.0;
        rep.trader_cost_ratio = cost_ratio_sum / Real(rep.trades_executed);
        for (Real& f : rep.capacity_exceedance) f /= Real(rep.trades_executed);
        Real mean = 0.0;
        for (long cnt : rep.shard_trade_counts) mean += Real(cnt);
        mean /= Real(n);
        if (mean > 0.0)
            for (long cnt : rep.shard_trade_counts)
                rep.max_count_deviation =
                    std::max(rep.max_count_deviation, std::abs(Real(cnt) - mean) / mean);
        std::sort(size_ratios.begin(), size_ratios.end());
        rep.ratios.n = static_cast<long>(size_ratios.size());
        for (Real v : size_ratios) rep.ratios.mean += v;
        rep.ratios.mean /= Real(size_ratios.size());
        rep.ratios.p50 = detail::quantile_sorted(size_ratios, 0.50);
        rep.ratios.p90 = detail::quantile_sorted(size_ratios, 0.90);
        rep.ratios.p99 = detail::quantile_sorted(size_ratios, 0.99);
        rep.ratios.max = size_ratios.back();
    }
    rep.lp_revenue_ratio =
        rep.baseline_fee_value > 0.0 ? rep.fee_total_value / rep.baseline_fee_value : 0.0;
    return rep;
}

// --- static volume-capacity analysis -------------------------------------------

struct VolumeCapacityRow {
    Real threshold = 0.0;
    Real cpmm_exceedance = 0.0;  // single multiplicative-fee pool
    Real samm_exceedance = 0.0;  // n-shard pool, cost-minimizing routing
};

// Fraction of trades whose total cost increase over the external market
// exceeds each threshold, evaluated per trade against a fresh pool (the
// sharded pool holds 1/n of the liquidity per shard). The sharded column
// does not depend on the shard count.
inline std::vector<VolumeCapacityRow> volume_capacity(
    const TraceData& trace, int n_shards, const FeeParams& params, Real init_reserve_a,
    Real init_reserve_b, Real baseline_gamma,
    const std::vector<Real>& thresholds = {0.005, 0.01, 0.015}) {
    if (n_shards < 1) throw std::invalid_argument("shard count must be at least 1");
    if (trace.records.empty()) throw std::invalid_argument("empty trace");
    if (!(init_reserve_a > 0.0) || !(init_reserve_b > 0.0))
        throw std::invalid_argument("initial reserves must be positive");

    SystemState st;
    st.prices.price_a = init_reserve_b / init_reserve_a;
    st.prices.price_b = 1.0;
    for (int i = 0; i < n_shards; ++i)
        st.shards.push_back({init_reserve_a / n_shards, init_reserve_b / n_shards,
                             init_reserve_a / n_shards});
    const SystemState swapped = swap_roles(st);
    const ShardState base{init_reserve_a, init_reserve_b, init_reserve_a};
    const ShardState base_swapped = swap_roles(base);

    std::vector<long> cpmm_over(thresholds.size(), 0), samm_over(thresholds.size(), 0);
    long counted = 0;
    for (const TraceRecord& rec : trace.records) {
        const bool sells_a = rec.side == TraceRecord::Side::ab;
        const SystemState& view = sells_a ? swapped : st;
        const ShardState& base_view = sells_a ? base_swapped : base;
        Real view_cap = 0.0;
        for (const ShardState& s : view.shards) view_cap += detail::output_cap(s);
        if (!(rec.output_amount < view_cap) ||
            !(rec.output_amount < detail::output_cap(base_view)))
            continue;  // beyond either pool: not comparable
        ++counted;
        const Real ext = rec.output_amount * reported_price(base_view);
        const TradeAction split = best_trade_samm(view, rec.output_amount, params);
        Real samm_cost = 0.0;
        for (std::size_t i = 0; i < view.shards.size(); ++i)
            if (split.outputs[i] > 0.0)
                samm_cost += gross_samm(view.shards[i], split.outputs[i], params);
        const Real cpmm_cost = cpmm_gross(base_view, rec.output_amount, baseline_gamma);
        for (std::size_t t = 0; t < thresholds.size(); ++t) {
            if (samm_cost / ext - 1.0 > thresholds[t]) ++samm_over[t];
            if (cpmm_cost / ext - 1.0 > thresholds[t]) ++cpmm_over[t];
        }
    }
    if (counted == 0) throw std::domain_error("no trade in the trace fits the pool");

    std::vector<VolumeCapacityRow> rows;
    for (std::size_t t = 0; t < thresholds.size(); ++t)
        rows.push_back({thresholds[t], Real(cpmm_over[t]) / Real(counted),
                        Real(samm_over[t]) / Real(counted)});
    return rows;
}

}  // namespace samm
