#pragma once

// JSON views of the report structs. Keys are emitted in nlohmann's sorted
// order so serialized output is byte-stable for identical inputs.

#include <json.hpp>

#include "samm/fee_design.hpp"
#include "samm/game_sim.hpp"
#include "samm/risk_analysis.hpp"
#include "samm/throughput_model.hpp"
#include "samm/trace_replay.hpp"

namespace samm {

using json = nlohmann::json;

inline json to_json(const FeeParams& p) {
    json j{{"beta1", p.beta1}, {"beta2", p.beta2}, {"beta3", p.beta3},
           {"beta4", p.beta4}, {"beta5", p.beta5}, {"r_min", p.r_min},
           {"r_max", p.r_max}};
    if (p.certified_c) j["c"] = *p.certified_c;
    return j;
}

inline json to_json(const FeasibilityReport& r) {
    json j;
    j["necessary_ok"] = r.necessary_ok;
    j["necessary_marginal"] = r.necessary_marginal;
    j["sufficient_ok"] = r.sufficient_ok;
    j["sufficient_marginal"] = r.sufficient_marginal;
    j["corollary_ok"] = r.corollary_ok;
    j["feasible"] = r.feasible();
    if (std::isfinite(r.max_c)) j["max_c"] = r.max_c;
    return j;
}

inline json to_json(const PropertySuiteReport& r) {
    return {{"samples", r.samples},
            {"non_splitting_violations", r.non_splitting_violations},
            {"smaller_better_violations", r.smaller_better_violations},
            {"min_split_margin", r.min_split_margin},
            {"min_size_margin", r.min_size_margin},
            {"clean", r.clean()}};
}

inline json to_json(const ShardState& s) {
    return {{"reserve_a", s.reserve_a},
            {"reserve_b", s.reserve_b},
            {"shares_outstanding", s.shares_outstanding}};
}

inline json to_json(const TraderSpneReport& r) {
    return {{"pass", r.pass},
            {"margin", r.margin},
            {"equilibrium_cost", r.equilibrium_cost},
            {"deviation_cost", r.deviation_cost},
            {"actions", r.actions},
            {"smallest", r.smallest},
            {"best_action", r.best_action},
            {"best_cost", r.best_cost}};
}

inline json to_json(const LpSpneReport& r) {
    return {{"pass", r.pass},
            {"fillup_revenue", r.fillup_revenue},
            {"grid_max_revenue", r.grid_max_revenue},
            {"gap", r.gap},
            {"cell", r.cell},
            {"actions", r.actions},
            {"fillup", r.fillup},
            {"grid_argmax", r.grid_argmax}};
}

inline const char* actor_name(Actor a) {
    switch (a) {
        case Actor::liquidity_provider: return "lp";
        case Actor::trader_ab: return "trader_ab";
        case Actor::trader_ba: return "trader_ba";
    }
    return "?";
}

inline json to_json(const GameStep& s) {
    json j{{"index", s.index},       {"actor", actor_name(s.actor)},
           {"drawn", s.drawn},       {"skipped", s.skipped},
           {"utility", s.utility},   {"fee_paid", s.fee_paid},
           {"action", s.action}};
    if (s.skipped) j["skip_reason"] = s.skip_reason;
    json before = json::array(), after = json::array();
    for (const ShardState& sh : s.before) before.push_back(to_json(sh));
    for (const ShardState& sh : s.after) after.push_back(to_json(sh));
    j["before"] = before;
    j["after"] = after;
    return j;
}

// One JSON object per line, one line per step.
inline std::string game_trace_jsonl(const GameTrace& t) {
    std::string out;
    for (const GameStep& s : t.steps) {
        out += to_json(s).dump();
        out += '\n';
    }
    return out;
}

inline json to_json(const RatioStats& r) {
    return {{"n", r.n},   {"mean", r.mean}, {"p50", r.p50},
            {"p90", r.p90}, {"p99", r.p99},   {"max", r.max}};
}

inline json to_json(const ReplayReport& r) {
    json caps = json::array();
    for (std::size_t i = 0; i < r.capacity_thresholds.size(); ++i)
        caps.push_back({{"threshold", r.capacity_thresholds[i]},
                        {"exceedance", r.capacity_exceedance[i]}});
    return {{"n_shards", r.n_shards},
            {"repetitions", r.repetitions},
            {"trades_seen", r.trades_seen},
            {"trades_executed", r.trades_executed},
            {"trades_dropped", r.trades_dropped},
            {"transactions", r.transactions},
            {"split_ratio", r.split_ratio},
            {"extra_trade_ratio", r.extra_trade_ratio},
            {"trader_cost_ratio", r.trader_cost_ratio},
            {"lp_revenue_ratio", r.lp_revenue_ratio},
            {"fee_total_value", r.fee_total_value},
            {"shard_fee_value", r.shard_fee_value},
            {"baseline_executed", r.baseline_executed},
            {"baseline_dropped", r.baseline_dropped},
            {"baseline_fee_value", r.baseline_fee_value},
            {"shard_trade_counts", r.shard_trade_counts},
            {"max_count_deviation", r.max_count_deviation},
            {"volume_capacity", caps},
            {"ratios", to_json(r.ratios)},
            {"reordered_input", r.reordered_input}};
}

inline json to_json(const std::vector<VolumeCapacityRow>& rows) {
    json arr = json::array();
    for (const VolumeCapacityRow& r : rows)
        arr.push_back({{"threshold", r.threshold},
                       {"cpmm_exceedance", r.cpmm_exceedance},
                       {"samm_exceedance", r.samm_exceedance}});
    return arr;
}

inline json to_json(const FitReport& r) {
    return {{"t_single", r.params.t_single},
            {"p_parallel", r.params.p_parallel},
            {"r_squared", r.r_squared},
            {"points", r.points}};
}

inline json to_json(const CpmmCounterexample& r) {
    return {{"probe", r.probe},
            {"split_gain", r.split_gain},
            {"size_gain", r.size_gain},
            {"splitting_pays", r.splitting_pays},
            {"larger_cheaper", r.larger_cheaper}};
}

inline json to_json(const std::vector<SensitivityPoint>& pts) {
    json arr = json::array();
    for (const SensitivityPoint& p : pts)
        arr.push_back(
            {{"reserve_a", p.reserve_a}, {"revenue", p.revenue}, {"feasible", p.feasible}});
    return arr;
}

}  // namespace samm
