#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "samm/reports.hpp"
#include "samm/trace_replay.hpp"

using namespace samm;

namespace {

TraceData trace_from(const std::string& text) {
    std::istringstream in(text);
    return load_trace(in, "test");
}

}  // namespace

TEST_CASE("traces parse from csv text") {
    const TraceData t = trace_from(
        "timestamp,side,output_amount\n"
        "0,BA,100.5\n"
        "1,Ab,7\n"
        "\n"
        "3,ba,2.25\n");
    REQUIRE(t.records.size() == 3);
    CHECK_FALSE(t.reordered);
    CHECK(t.records[0].timestamp == 0);
    CHECK(t.records[0].side == TraceRecord::Side::ba);
    CHECK(t.records[0].output_amount == 100.5);
    CHECK_FALSE(t.records[0].price_a.has_value());
    CHECK(t.records[1].side == TraceRecord::Side::ab);
    CHECK(t.records[2].timestamp == 3);
}

TEST_CASE("price columns and windows line endings are accepted") {
    const TraceData t = trace_from("0,BA,5,2.0,1.5\r\n1,AB,6,2.1,1.5\r\n");
    REQUIRE(t.records.size() == 2);
    REQUIRE(t.records[0].price_a.has_value());
    CHECK(*t.records[0].price_a == 2.0);
    CHECK(*t.records[0].price_b == 1.5);
}

TEST_CASE("malformed rows report their line number") {
    CHECK_THROWS_WITH(trace_from("timestamp,side,output_amount\n0,BA,1\n1,XX,1\n"),
                      Catch::Matchers::ContainsSubstring("line 3"));
    CHECK_THROWS_WITH(trace_from("0,BA,1\nnope,BA,1\n"),
                      Catch::Matchers::ContainsSubstring("bad timestamp"));
    CHECK_THROWS_WITH(trace_from("12.5,BA,1\n"),
                      Catch::Matchers::ContainsSubstring("bad timestamp"));
    CHECK_THROWS_WITH(trace_from("0,BA,zero\n"),
                      Catch::Matchers::ContainsSubstring("bad number"));
    CHECK_THROWS_WITH(trace_from("0,BA,0\n"),
                      Catch::Matchers::ContainsSubstring("positive"));
    CHECK_THROWS_WITH(trace_from("0,BA,-2\n"),
                      Catch::Matchers::ContainsSubstring("positive"));
    CHECK_THROWS_WITH(trace_from("0,BA,1,2\n"),
                      Catch::Matchers::ContainsSubstring("expected timestamp"));
    CHECK_THROWS_WITH(trace_from("0,BA,1,0,1\n"),
                      Catch::Matchers::ContainsSubstring("prices"));
    CHECK_THROWS_WITH(trace_from(""), Catch::Matchers::ContainsSubstring("no trades"));
    CHECK_THROWS_WITH(trace_from("timestamp,side,output_amount\n"),
                      Catch::Matchers::ContainsSubstring("no trades"));
    CHECK_THROWS_AS(load_trace_file("missing_trace.csv"), std::runtime_error);
}

TEST_CASE("out-of-order timestamps are flagged and stably sorted") {
    const TraceData t = trace_from("5,BA,1\n2,AB,2\n5,BA,3\n2,BA,4\n");
    CHECK(t.reordered);
    REQUIRE(t.records.size() == 4);
    CHECK(t.records[0].timestamp == 2);
    CHECK(t.records[0].output_amount == 2.0);  // stable within equal stamps
    CHECK(t.records[1].output_amount == 4.0);
    CHECK(t.records[2].output_amount == 1.0);
    CHECK(t.records[3].output_amount == 3.0);
}

TEST_CASE("saved traces reload bit-identically") {
    SyntheticConfig cfg;
    cfg.n_trades = 500;
    cfg.seed = 7;
    const TraceData t = synthesize_trace(cfg);
    std::ostringstream out;
    save_trace(t, out);
    std::istringstream in(out.str());
    const TraceData back = load_trace(in, "roundtrip");
    REQUIRE(back.records.size() == t.records.size());
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        CHECK(back.records[i].timestamp == t.records[i].timestamp);
        CHECK(back.records[i].side == t.records[i].side);
        CHECK(back.records[i].output_amount == t.records[i].output_amount);
    }
}

TEST_CASE("synthetic traces are deterministic and calibrated") {
    SyntheticConfig cfg;
    cfg.n_trades = 20000;
    cfg.seed = 0;
    const TraceData a = synthesize_trace(cfg);
    const TraceData b = synthesize_trace(cfg);
    REQUIRE(a.records.size() == 20000);
    CHECK(a.records[12345].output_amount == b.records[12345].output_amount);
    CHECK(a.records[12345].timestamp == b.records[12345].timestamp);

    long long prev = -1;
    for (const TraceRecord& r : a.records) {
        CHECK(r.timestamp >= prev);
        prev = r.timestamp;
    }
    // about 300 trades per second
    const double seconds = double(a.records.back().timestamp) + 1.0;
    CHECK(20000.0 / seconds == Catch::Approx(300.0).epsilon(0.1));

    const RatioStats st = ratio_statistics(a, cfg.reference_reserve);
    CHECK(st.n == 20000);
    CHECK(st.mean < 1e-3);
    CHECK(st.p99 > 3e-3);
    CHECK(st.p99 < 8e-3);
    CHECK(st.max <= 0.45);
    CHECK(ratio_fraction_below(a, cfg.reference_reserve, 0.0052) >= 0.99);

    long ba = 0;
    for (const TraceRecord& r : a.records)
        if (r.side == TraceRecord::Side::ba) ++ba;
    CHECK(std::abs(ba / 20000.0 - 0.5) < 0.02);

    cfg.ba_fraction = 0.0;
    for (const TraceRecord& r : synthesize_trace(cfg).records)
        REQUIRE(r.side == TraceRecord::Side::ab);

    cfg.n_trades = 0;
    CHECK_THROWS_AS(synthesize_trace(cfg), std::invalid_argument);
    cfg.n_trades = 10;
    cfg.ba_fraction = 1.5;
    CHECK_THROWS_AS(synthesize_trace(cfg), std::invalid_argument);
    cfg.ba_fraction = 0.5;
    cfg.trades_per_second = 0.0;
    CHECK_THROWS_AS(synthesize_trace(cfg), std::invalid_argument);
}

TEST_CASE("size statistics use order statistics on the sorted ratios") {
    TraceData t;
    for (int i = 1; i <= 10; ++i) t.records.push_back({i, TraceRecord::Side::ba, Real(i)});
    const RatioStats st = ratio_statistics(t, 100.0);
    CHECK(st.n == 10);
    CHECK(st.mean == Catch::Approx(0.055));
    CHECK(st.p50 == Catch::Approx(0.05));
    CHECK(st.p90 == Catch::Approx(0.09));
    CHECK(st.p99 == Catch::Approx(0.10));
    CHECK(st.max == Catch::Approx(0.10));
    CHECK(ratio_fraction_below(t, 100.0, 0.055) == Catch::Approx(0.5));

    CHECK_THROWS_AS(ratio_statistics(t, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(ratio_statistics(TraceData{}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ratio_fraction_below(TraceData{}, 1.0, 0.01), std::invalid_argument);
}

TEST_CASE("default per-second caps follow the fitted scaling curve") {
    CHECK(default_throughput_cap(1) == Catch::Approx(214.0));
    CHECK(default_throughput_cap(2) == Catch::Approx(214.0 / 0.6));
    CHECK(default_throughput_cap(4) == Catch::Approx(535.0));
    CHECK(default_throughput_cap(8) == Catch::Approx(214.0 / 0.3));
}

TEST_CASE("single-shard replay matches per-trade hand accounting") {
    const FeeParams p = solve_params_for_c(0.005);
    const TraceData t = trace_from("0,BA,1000\n0,BA,2000\n");
    ReplayConfig cfg;
    cfg.n_shards = 1;
    cfg.params = p;
    cfg.unlimited_throughput = true;
    const ReplayReport rep = run_replay(t, cfg);

    CHECK(rep.trades_seen == 2);
    CHECK(rep.trades_executed == 2);
    CHECK(rep.trades_dropped == 0);
    CHECK(rep.transactions == 2);
    CHECK(rep.split_ratio == 0.0);
    CHECK(rep.extra_trade_ratio == 0.0);
    REQUIRE(rep.shard_trade_counts.size() == 1);
    CHECK(rep.shard_trade_counts[0] == 2);
    CHECK(rep.max_count_deviation == 0.0);

    // the closing arbitrage restores the pool, so each trade sees fresh
    // reserves and the aggregate ratios follow from single-trade quotes
    const ShardState fresh{1e6, 1e6, 1e6};
    const Real r1 = gross_samm(fresh, 1000.0, p) / 1000.0;
    const Real r2 = gross_samm(fresh, 2000.0, p) / 2000.0;
    CHECK(rep.trader_cost_ratio == Catch::Approx(0.5 * (r1 + r2)).epsilon(1e-9));
    CHECK(rep.capacity_exceedance[0] == 1.0);  // both quotes sit above 0.5%
    CHECK(rep.capacity_exceedance[1] == 0.0);
    CHECK(rep.capacity_exceedance[2] == 0.0);

    const Real fee1 = tf_brp(fresh, 1000.0, p);
    const Real fee2 = tf_brp(fresh, 2000.0, p);
    CHECK(rep.fee_total_value == Catch::Approx(fee1 + fee2).epsilon(1e-9));
    CHECK(rep.shard_fee_value == Catch::Approx(rep.fee_total_value).epsilon(1e-9));

    const Real bfee = (net_amount(fresh, 1000.0) + net_amount(fresh, 2000.0)) *
                      (1.0 / 0.997 - 1.0);
    CHECK(rep.baseline_executed == 2);
    CHECK(rep.baseline_fee_value == Catch::Approx(bfee).epsilon(1e-6));
    CHECK(rep.lp_revenue_ratio ==
          Catch::Approx(rep.fee_total_value / rep.baseline_fee_value).epsilon(1e-12));

    CHECK(rep.ratios.n == 2);
    CHECK(rep.ratios.mean == Catch::Approx(0.0015));
    CHECK(rep.ratios.max == Catch::Approx(0.002));
}

TEST_CASE("oversized demand splits across shards and both fee books agree") {
    const FeeParams p = solve_params_for_c(0.005);
    const TraceData t = trace_from("0,BA,50000\n");
    ReplayConfig cfg;
    cfg.n_shards = 2;
    cfg.params = p;
    cfg.unlimited_throughput = true;
    const ReplayReport rep = run_replay(t, cfg);

    CHECK(rep.trades_executed == 1);
    CHECK(rep.transactions == 2);
    CHECK(rep.split_ratio == 1.0);
    CHECK(rep.extra_trade_ratio == 1.0);
    CHECK(rep.shard_trade_counts[0] == 1);
    CHECK(rep.shard_trade_counts[1] == 1);
    CHECK(rep.max_count_deviation == 0.0);
    CHECK(rep.shard_fee_value == Catch::Approx(rep.fee_total_value).epsilon(1e-9));
    // a 5% drain is expensive on every book
    CHECK(rep.capacity_exceedance[2] == 1.0);
    CHECK(rep.trader_cost_ratio > 1.015);
}

TEST_CASE("per-second caps drop trades and reset on the next second") {
    const FeeParams p = solve_params_for_c(0.005);
    const TraceData t = trace_from(
        "0,BA,1000\n0,BA,1000\n0,BA,1000\n0,BA,1000\n1,BA,1000\n");
    ReplayConfig cfg;
    cfg.n_shards = 1;
    cfg.params = p;
    cfg.throughput_caps = {{1, 2.0}};
    const ReplayReport rep = run_replay(t, cfg);
    CHECK(rep.trades_seen == 5);
    CHECK(rep.trades_executed == 3);  // two in second 0, one in second 1
    CHECK(rep.trades_dropped == 2);
    CHECK(rep.baseline_executed == 3);
    CHECK(rep.baseline_dropped == 2);
}

TEST_CASE("warmup trades execute but are not measured") {
    const FeeParams p = solve_params_for_c(0.005);
    const TraceData t = trace_from("0,BA,1000\n0,BA,1000\n1,BA,2000\n");
    ReplayConfig cfg;
    cfg.n_shards = 1;
    cfg.params = p;
    cfg.unlimited_throughput = true;
    cfg.warmup_seconds = 1;
    const ReplayReport rep = run_replay(t, cfg);
    CHECK(rep.trades_seen == 1);
    CHECK(rep.trades_executed == 1);
    CHECK(rep.ratios.n == 1);
    CHECK(rep.ratios.max == Catch::Approx(0.002));
}

TEST_CASE("trades beyond pool liquidity are dropped on both books") {
    const FeeParams p = solve_params_for_c(0.005);
    const TraceData t = trace_from("0,BA,1000000\n");
    ReplayConfig cfg;
    cfg.n_shards = 2;
    cfg.params = p;
    cfg.unlimited_throughput = true;
    const ReplayReport rep = run_replay(t, cfg);
    CHECK(rep.trades_executed == 0);
    CHECK(rep.trades_dropped == 1);
    CHECK(rep.baseline_dropped == 1);
    CHECK(rep.lp_revenue_ratio == 0.0);
}

TEST_CASE("per-record prices move the pools before the trade") {
    const FeeParams p = solve_params_for_c(0.005);
    const TraceData t = trace_from("0,BA,1000,2.0,1.0\n1,AB,1000,2.5,1.0\n");
    ReplayConfig cfg;
    cfg.n_shards = 2;
    cfg.params = p;
    cfg.unlimited_throughput = true;
    const ReplayReport rep = run_replay(t, cfg);
    CHECK(rep.trades_executed == 2);
    CHECK(rep.fee_total_value > 0.0);
    CHECK(rep.shard_fee_value == Catch::Approx(rep.fee_total_value).epsilon(1e-9));
}

TEST_CASE("replay propagates the reorder flag and validates its inputs") {
    const FeeParams p = solve_params_for_c(0.005);
    const TraceData t = trace_from("5,BA,100\n0,BA,100\n");
    REQUIRE(t.reordered);
    ReplayConfig cfg;
    cfg.n_shards = 1;
    cfg.params = p;
    cfg.unlimited_throughput = true;
    CHECK(run_replay(t, cfg).reordered_input);

    cfg.n_shards = 0;
    CHECK_THROWS_AS(run_replay(t, cfg), std::invalid_argument);
    cfg.n_shards = 1;
    cfg.measure_seconds = 0;
    CHECK_THROWS_AS(run_replay(t, cfg), std::invalid_argument);
    cfg.measure_seconds = 60;
    cfg.start_index = 99;
    CHECK_THROWS_AS(run_replay(t, cfg), std::invalid_argument);
    cfg.start_index = 0;
    CHECK_THROWS_AS(run_replay(TraceData{}, cfg), std::invalid_argument);
}

TEST_CASE("repeated replays with one seed reproduce the whole report") {
    SyntheticConfig scfg;
    scfg.n_trades = 3000;
    scfg.seed = 5;
    const TraceData t = synthesize_trace(scfg);
    ReplayConfig cfg;
    cfg.n_shards = 4;
    cfg.params = solve_params_for_c(0.005);
    cfg.repetitions = 3;
    cfg.measure_seconds = 2;
    cfg.seed = 17;
    const json a = to_json(run_replay(t, cfg));
    const json b = to_json(run_replay(t, cfg));
    CHECK(a.dump() == b.dump());
    CHECK(a.at("trades_executed").get<long>() > 0);
}

TEST_CASE("a single trade lands on the right side of each capacity threshold") {
    const FeeParams p = solve_params_for_c(0.005);
    const TraceData t = trace_from("0,BA,5000\n");
    const auto rows = volume_capacity(t, 2, p, 1e6, 1e6, 0.997);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].threshold == 0.005);
    // a budget-sized trade costs about 0.63% over the external market on the
    // sharded book and about 0.80% on the single multiplicative-fee pool
    CHECK(rows[0].samm_exceedance == 1.0);
    CHECK(rows[0].cpmm_exceedance == 1.0);
    CHECK(rows[1].samm_exceedance == 0.0);
    CHECK(rows[1].cpmm_exceedance == 0.0);
    CHECK(rows[2].samm_exceedance == 0.0);
    CHECK(rows[2].cpmm_exceedance == 0.0);
}

TEST_CASE("capacity exceedance does not depend on the shard count") {
    SyntheticConfig scfg;
    scfg.n_trades = 2000;
    scfg.seed = 9;
    const TraceData t = synthesize_trace(scfg);
    const FeeParams p = solve_params_for_c(0.005);
    const auto r1 = volume_capacity(t, 1, p, 1e6, 1e6, 0.997);
    const auto r2 = volume_capacity(t, 2, p, 1e6, 1e6, 0.997);
    const auto r8 = volume_capacity(t, 8, p, 1e6, 1e6, 0.997);
    for (std::size_t i = 0; i < r1.size(); ++i) {
        CHECK(r1[i].samm_exceedance == r2[i].samm_exceedance);
        CHECK(r1[i].samm_exceedance == r8[i].samm_exceedance);
        CHECK(r1[i].cpmm_exceedance == r2[i].cpmm_exceedance);
    }

    TraceData huge;
    huge.records.push_back({0, TraceRecord::Side::ba, 2e6});
    CHECK_THROWS_AS(volume_capacity(huge, 2, p, 1e6, 1e6, 0.997), std::domain_error);
}
