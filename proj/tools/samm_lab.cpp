// Command-line front end for the sharded-pool mechanism laboratory.
//
// Subcommands: params (solve fee parameters), verify (feasibility,
// property sampling, equilibrium grids, game traces), replay (trace
// replay and volume-capacity analysis), throughput (scaling model),
// risk (sandwich and multiplicative-fee analyses).
//
// Data goes to standard output (or --output); logs go to standard error.
// Exit codes: 0 success, 1 usage or I/O failure, 2 a requested
// verification did not hold.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "samm/samm.hpp"

namespace {

constexpr int kExitVerify = 2;

struct VerifyFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void emit(const std::string& data, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << data;
        if (!data.empty() && data.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << data;
    if (!data.empty() && data.back() != '\n') f << '\n';
    if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<samm::Real> parse_reals(const std::string& csv, const char* what) {
    std::vector<samm::Real> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw std::runtime_error(std::string("bad ") + what + " '" + item + "'");
        }
    }
    if (out.empty()) throw std::runtime_error(std::string("empty ") + what + " list");
    return out;
}

samm::Distribution parse_dist(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos)
        throw std::runtime_error("bad distribution '" + text +
                                 "' (want const:V, uniform:LO,HI or exp:MEAN)");
    const std::string kind = text.substr(0, colon);
    const std::vector<samm::Real> args = parse_reals(text.substr(colon + 1), "distribution value");
    if (kind == "const" || kind == "constant") {
        if (args.size() != 1) throw std::runtime_error("const takes one value");
        return samm::Distribution::constant(args[0]);
    }
    if (kind == "uniform") {
        if (args.size() != 2) throw std::runtime_error("uniform takes lo,hi");
        return samm::Distribution::uniform(args[0], args[1]);
    }
    if (kind == "exp" || kind == "exponential") {
        if (args.size() != 1) throw std::runtime_error("exp takes the mean");
        return samm::Distribution::exponential(args[0]);
    }
    throw std::runtime_error("unknown distribution '" + kind + "'");
}

// Balanced system: token-B reserves follow one shared reported price.
samm::SystemState balanced_state(const std::vector<samm::Real>& reserves_a,
                                 samm::Real price_a, samm::Real price_b) {
    samm::SystemState st;
    st.prices = {price_a, price_b};
    for (samm::Real ra : reserves_a) {
        if (!(ra > 0.0)) throw std::runtime_error("reserves must be positive");
        st.shards.push_back({ra, ra * price_a / price_b, ra});
    }
    return st;
}

// Shared fee-parameter source: an explicit file, a budget to solve for, or
// both (flags override what the file certifies).
struct ParamsSource {
    std::string file;
    double c = 0.0;  // 0 means unset
    double ratio = 5.0;

    samm::FeeParams resolve() const {
        if (!file.empty()) {
            samm::FeeParams p = samm::load_params(file);
            if (c > 0.0) p.certified_c = c;
            return p;
        }
        if (c > 0.0) return samm::solve_params_for_c(c, ratio);
        throw std::runtime_error("need --params FILE or --c BUDGET");
    }
    samm::Real budget(const samm::FeeParams& p) const {
        if (c > 0.0) return c;
        if (p.certified_c) return *p.certified_c;
        throw std::runtime_error("no budget: pass --c or certify one in the params file");
    }
};

void add_params_source(CLI::App* cmd, ParamsSource& src) {
    cmd->add_option("--params", src.file, "fee parameter file (key = value lines)");
    cmd->add_option("--c", src.c, "per-shard trade-size budget");
    cmd->add_option("--ratio", src.ratio, "fee cap over floor when solving (default 5)");
}

int run_params(const ParamsSource& src, const std::string& format, const std::string& output,
               bool check_only) {
    samm::FeeParams p = src.resolve();
    const samm::Real c = src.budget(p);
    const samm::FeasibilityReport rep = samm::check_feasibility(p, c);
    if (check_only) {
        samm::json j = samm::to_json(rep);
        j["params"] = samm::to_json(p);
        j["c"] = c;
        emit(j.dump(2), output);
        if (!rep.feasible()) {
            std::cerr << "infeasible: the checks reject budget " << c << "\n";
            return kExitVerify;
        }
        std::cerr << "feasible at budget " << c << "\n";
        return 0;
    }
    if (!rep.feasible()) {
        std::cerr << "infeasible: no certified parameters at budget " << c << "\n";
        return kExitVerify;
    }
    if (format == "json")
        emit(samm::to_json(p).dump(2), output);
    else
        emit(samm::params_to_kv(p), output);
    std::cerr << "params: budget " << c << ", cap " << p.r_max << ", floor " << p.r_min << "\n";
    return 0;
}

int run_verify(const ParamsSource& src, const std::string& mode, const std::string& reserves_csv,
               double price_a, double price_b, double demand, double endowment, int grid,
               const std::string& dist_text, long samples, std::uint64_t seed, bool cpmm,
               double gamma, const std::string& output) {
    if (mode == "feasibility") return run_params(src, "kv", output, true);

    samm::FeeParams params = src.resolve();
    if (mode == "properties") {
        const samm::Real c = src.budget(params);
        const samm::PropertySuiteReport rep = samm::run_property_suite(params, c, samples, seed);
        emit(samm::to_json(rep).dump(2), output);
        if (!rep.clean()) {
            std::cerr << "property suite found violations\n";
            return kExitVerify;
        }
        std::cerr << "property suite clean over " << samples << " samples\n";
        return 0;
    }

    const samm::SystemState st =
        balanced_state(parse_reals(reserves_csv, "reserve"), price_a, price_b);
    if (mode == "trader") {
        const samm::TraderSpneReport rep =
            cpmm ? samm::verify_trader_spne_cpmm(st, demand, gamma, grid)
                 : samm::verify_trader_spne(st, demand, params, grid);
        emit(samm::to_json(rep).dump(2), output);
        if (!rep.pass) {
            std::cerr << "trader check failed (margin " << rep.margin << ")\n";
            return kExitVerify;
        }
        std::cerr << "trader check passed (margin " << rep.margin << ")\n";
        return 0;
    }
    if (mode == "lp") {
        const samm::LpSpneReport rep =
            samm::verify_lp_spne(st, endowment, params, parse_dist(dist_text), grid);
        emit(samm::to_json(rep).dump(2), output);
        if (!rep.pass) {
            std::cerr << "deposit check failed (gap " << rep.gap << ")\n";
            return kExitVerify;
        }
        std::cerr << "deposit check passed\n";
        return 0;
    }
    throw std::runtime_error("unknown --mode '" + mode + "'");
}

int run_verify_game(const ParamsSource& src, const std::string& reserves_csv, double price_a,
                    double price_b, long steps, double p_lp, double p_ab, double p_ba,
                    const std::string& lp_dist, const std::string& ab_dist,
                    const std::string& ba_dist, std::uint64_t seed, const std::string& output) {
    samm::FeeParams params = src.resolve();
    samm::SchedulerConfig cfg;
    cfg.p_lp = p_lp;
    cfg.p_trader_ab = p_ab;
    cfg.p_trader_ba = p_ba;
    cfg.lp_endowment = parse_dist(lp_dist);
    cfg.demand_ab = parse_dist(ab_dist);
    cfg.demand_ba = parse_dist(ba_dist);
    cfg.seed = seed;
    const samm::SystemState st =
        balanced_state(parse_reals(reserves_csv, "reserve"), price_a, price_b);
    const samm::GameTrace trace = samm::run_game(st, cfg, steps, params);
    emit(samm::game_trace_jsonl(trace), output);
    std::cerr << "game: " << trace.steps.size() << " steps\n";
    return 0;
}

int run_replay(const ParamsSource& src, const std::string& mode, const std::string& trace_path,
               bool synthetic, long trades, double tps, double ref_reserve, double mu_ratio,
               double sigma, double ba_frac, const std::string& dump_trace, int shards,
               long warmup, long measure, long start, int reps, std::uint64_t seed,
               const std::vector<std::string>& caps, bool unlimited, double reserve_a,
               double reserve_b, double gamma, const std::string& thresholds_csv,
               const std::string& output) {
    samm::TraceData trace;
    if (synthetic) {
        samm::SyntheticConfig sc;
        sc.n_trades = trades;
        sc.trades_per_second = tps;
        sc.reference_reserve = ref_reserve;
        if (mu_ratio > 0.0) sc.log_mu = std::log(mu_ratio);
        if (sigma > 0.0) sc.log_sigma = sigma;
        sc.ba_fraction = ba_frac;
        sc.seed = seed;
        trace = samm::synthesize_trace(sc);
        std::cerr << "synthesized " << trace.records.size() << " trades\n";
        if (!dump_trace.empty()) {
            std::ofstream f(dump_trace);
            if (!f) throw std::runtime_error("cannot open '" + dump_trace + "' for writing");
            samm::save_trace(trace, f);
        }
    } else {
        if (trace_path.empty()) throw std::runtime_error("need --trace FILE or --synthetic");
        trace = samm::load_trace_file(trace_path);
        if (trace.reordered)
            std::cerr << "warning: trace timestamps were out of order; stable-sorted\n";
        std::cerr << "loaded " << trace.records.size() << " trades\n";
    }

    if (mode == "stats") {
        samm::json j = samm::to_json(samm::ratio_statistics(trace, ref_reserve));
        j["fraction_below_0.0052"] = samm::ratio_fraction_below(trace, ref_reserve, 0.0052);
        emit(j.dump(2), output);
        return 0;
    }

    samm::FeeParams params = src.resolve();
    if (mode == "capacity") {
        const std::vector<samm::Real> thresholds = parse_reals(thresholds_csv, "threshold");
        const auto rows = samm::volume_capacity(trace, shards, params, reserve_a, reserve_b,
                                                gamma, thresholds);
        emit(samm::to_json(rows).dump(2), output);
        return 0;
    }
    if (mode != "replay") throw std::runtime_error("unknown --mode '" + mode + "'");

    samm::ReplayConfig rc;
    rc.n_shards = shards;
    rc.params = params;
    rc.warmup_seconds = warmup;
    rc.measure_seconds = measure;
    rc.start_index = start;
    rc.repetitions = reps;
    rc.seed = seed;
    rc.init_reserve_a = reserve_a;
    rc.init_reserve_b = reserve_b;
    rc.baseline_gamma = gamma;
    rc.unlimited_throughput = unlimited;
    for (const std::string& cap : caps) {
        const auto eq = cap.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad --cap '" + cap + "' (want N=TPS)");
        rc.throughput_caps[std::stoi(cap.substr(0, eq))] = std::stod(cap.substr(eq + 1));
    }
    const samm::ReplayReport rep = samm::run_replay(trace, rc);
    emit(samm::to_json(rep).dump(2), output);
    std::cerr << "replay: " << rep.trades_executed << " executed, " << rep.trades_dropped
              << " dropped\n";
    return 0;
}

int run_throughput(const std::string& fit_csv, double p, double t1, const std::string& n_csv,
                   const std::string& output) {
    samm::json j;
    samm::AmdahlParams ap{t1, p};
    if (!fit_csv.empty()) {
        const samm::FitReport rep = samm::fit_p(samm::load_observations(fit_csv));
        ap = rep.params;
        j = samm::to_json(rep);
    } else {
        j["t_single"] = ap.t_single;
        j["p_parallel"] = ap.p_parallel;
    }
    const samm::Real bound = samm::asymptotic_bound(ap);
    j["asymptotic_bound"] = std::isfinite(bound) ? samm::json(bound) : samm::json("inf");
    if (!n_csv.empty()) {
        samm::json rows = samm::json::array();
        for (samm::Real n : parse_reals(n_csv, "shard count"))
            rows.push_back({{"n", n},
                            {"speedup", samm::speedup(ap.p_parallel, n)},
                            {"throughput", samm::predict_throughput(ap, n)}});
        j["predictions"] = rows;
    }
    emit(j.dump(2), output);
    return 0;
}

int run_risk(const std::string& mode, double input_a, double tolerance, double min_output,
             double reserve_a, double reserve_b, double price_a, double price_b,
             const std::string& sizes_csv, double c, double gamma, const std::string& output) {
    if (mode == "counterexample") {
        const samm::CpmmCounterexample ce =
            samm::cpmm_counterexample(c, {reserve_a, reserve_b, reserve_a}, gamma);
        emit(samm::to_json(ce).dump(2), output);
        if (!(ce.splitting_pays && ce.larger_cheaper)) {
            std::cerr << "counterexample did not materialize\n";
            return kExitVerify;
        }
        return 0;
    }

    samm::SandwichScenario sc;
    sc.victim_input_a = input_a;
    sc.slippage_tolerance = tolerance;
    sc.pool = {reserve_a, reserve_b, reserve_a};
    sc.prices = {price_a > 0.0 ? price_a : reserve_b / reserve_a,
                 price_b > 0.0 ? price_b : 1.0};
    if (min_output > 0.0) sc.min_output_b = min_output;

    if (mode == "sandwich") {
        samm::json j;
        j["expected_output"] = samm::expected_output(sc.pool, sc.victim_input_a);
        j["revenue"] = samm::sandwich_revenue(sc);
        j["revenue_closed_form"] = samm::sandwich_revenue_closed_form(sc);
        emit(j.dump(2), output);
        return 0;
    }
    if (mode == "sensitivity") {
        const auto pts =
            samm::revenue_pool_size_sensitivity(sc, parse_reals(sizes_csv, "pool size"));
        emit(samm::to_json(pts).dump(2), output);
        return 0;
    }
    throw std::runtime_error("unknown --mode '" + mode + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sharded constant-product pool laboratory"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    if (const char* env = std::getenv("SAMM_LAB_SEED")) {
        try {
            seed = std::stoull(env);
        } catch (const std::exception&) {
            std::cerr << "bad SAMM_LAB_SEED '" << env << "'\n";
            return 1;
        }
    }

    std::string output;
    app.add_option("--output,-o", output, "write data here instead of standard output");
    app.fallthrough();  // let subcommands pass --output up to the app

    ParamsSource src;
    std::string format = "kv";
    bool check_only = false;
    CLI::App* params = app.add_subcommand("params", "solve or check fee parameters");
    add_params_source(params, src);
    params->add_option("--format", format, "kv or json (default kv)");
    params->add_flag("--check", check_only, "emit the feasibility report instead of params");
    params->add_option("--seed", seed, "unused here; accepted for uniformity");

    std::string mode = "feasibility", reserves = "1000", dist_text = "const:1";
    double price_a = 1.0, price_b = 1.0, demand = 1.0, endowment = 1.0;
    double gamma = 0.997, p_lp = 0.2, p_ab = 0.4, p_ba = 0.4;
    int grid = 64;
    long samples = 10000, steps = 100;
    bool cpmm = false;
    CLI::App* verify = app.add_subcommand("verify", "feasibility, properties, and equilibria");
    add_params_source(verify, src);
    verify->add_option("--mode", mode, "feasibility|properties|trader|lp|game");
    verify->add_option("--reserves", reserves, "token-A reserves, comma separated");
    verify->add_option("--price-a", price_a, "external price of token A");
    verify->add_option("--price-b", price_b, "external price of token B");
    verify->add_option("--demand", demand, "trader demand (mode trader)");
    verify->add_option("--endowment", endowment, "provider endowment (mode lp)");
    verify->add_option("--grid", grid, "grid cells per dimension (default 64)");
    verify->add_option("--dist", dist_text, "demand/endowment distribution");
    verify->add_option("--samples", samples, "property-suite sample count");
    verify->add_flag("--cpmm", cpmm, "use the multiplicative-fee control (mode trader)");
    verify->add_option("--gamma", gamma, "multiplicative fee keep ratio");
    verify->add_option("--seed", seed, "random seed");

    std::string lp_dist = "const:1", ab_dist = "const:0", ba_dist = "const:1";
    CLI::App* game = app.add_subcommand("game", "run the scheduled game, JSON lines out");
    add_params_source(game, src);
    game->add_option("--reserves", reserves, "token-A reserves, comma separated");
    game->add_option("--price-a", price_a, "external price of token A");
    game->add_option("--price-b", price_b, "external price of token B");
    game->add_option("--steps", steps, "scheduler steps");
    game->add_option("--p-lp", p_lp, "provider probability");
    game->add_option("--p-ab", p_ab, "sell-side trader probability");
    game->add_option("--p-ba", p_ba, "buy-side trader probability");
    game->add_option("--lp-dist", lp_dist, "endowment distribution");
    game->add_option("--ab-dist", ab_dist, "sell-side demand distribution");
    game->add_option("--ba-dist", ba_dist, "buy-side demand distribution");
    game->add_option("--seed", seed, "random seed");

    std::string replay_mode = "replay", trace_path, dump_trace, thresholds = "0.005,0.01,0.015";
    bool synthetic = false, unlimited = false;
    long trades = 100000, warmup = 0, measure = 60, start = 0;
    int shards = 1, reps = 1;
    double tps = 300.0, ref_reserve = 1e6, mu_ratio = 0.0, sigma = 0.0, ba_frac = 0.5;
    double reserve_a = 1e6, reserve_b = 1e6;
    std::vector<std::string> caps;
    CLI::App* replay = app.add_subcommand("replay", "replay a trade trace against shards");
    add_params_source(replay, src);
    replay->add_option("--mode", replay_mode, "replay|capacity|stats");
    replay->add_option("--trace", trace_path, "trace CSV (timestamp,side,output_amount)");
    replay->add_flag("--synthetic", synthetic, "generate a calibrated synthetic trace");
    replay->add_option("--trades", trades, "synthetic trade count");
    replay->add_option("--tps", tps, "synthetic arrival rate per second");
    replay->add_option("--ref-reserve", ref_reserve, "synthetic reference reserve");
    replay->add_option("--mu-ratio", mu_ratio, "synthetic median size ratio");
    replay->add_option("--sigma", sigma, "synthetic lognormal scale");
    replay->add_option("--ba-frac", ba_frac, "synthetic buy-side fraction");
    replay->add_option("--dump-trace", dump_trace, "also write the synthetic trace CSV here");
    replay->add_option("--shards", shards, "shard count");
    replay->add_option("--warmup", warmup, "warmup seconds");
    replay->add_option("--measure", measure, "measured seconds");
    replay->add_option("--start", start, "first trace index");
    replay->add_option("--reps", reps, "repetitions with random starts");
    replay->add_option("--cap", caps, "per-second transaction cap, N=TPS (repeatable)");
    replay->add_flag("--unlimited", unlimited, "disable throughput caps");
    replay->add_option("--reserve-a", reserve_a, "initial token-A liquidity");
    replay->add_option("--reserve-b", reserve_b, "initial token-B liquidity");
    replay->add_option("--gamma", gamma, "baseline multiplicative keep ratio");
    replay->add_option("--thresholds", thresholds, "capacity thresholds (mode capacity)");
    replay->add_option("--seed", seed, "random seed");

    std::string fit_csv, n_csv;
    double p_parallel = 0.8, t_single = 214.0;
    CLI::App* throughput = app.add_subcommand("throughput", "scaling model fit and prediction");
    throughput->add_option("--fit", fit_csv, "observations CSV (n,throughput)");
    throughput->add_option("--p", p_parallel, "parallel fraction (no --fit)");
    throughput->add_option("--t1", t_single, "single-unit throughput (no --fit)");
    throughput->add_option("--predict", n_csv, "shard counts to predict, comma separated");
    throughput->add_option("--seed", seed, "unused here; accepted for uniformity");

    std::string risk_mode = "sandwich", sizes = "";
    double input_a = 0.0, tolerance = 0.0, min_output = 0.0, risk_c = 0.01;
    double risk_ra = 1e6, risk_rb = 1e6, risk_pa = 0.0, risk_pb = 0.0;
    CLI::App* risk = app.add_subcommand("risk", "sandwich and multiplicative-fee analyses");
    risk->add_option("--mode", risk_mode, "sandwich|sensitivity|counterexample");
    risk->add_option("--input", input_a, "victim input of token A");
    risk->add_option("--tolerance", tolerance, "victim slippage tolerance in [0,1]");
    risk->add_option("--min-output", min_output, "victim output floor (overrides tolerance)");
    risk->add_option("--reserve-a", risk_ra, "pool token-A reserve");
    risk->add_option("--reserve-b", risk_rb, "pool token-B reserve");
    risk->add_option("--price-a", risk_pa, "external price of token A");
    risk->add_option("--price-b", risk_pb, "external price of token B");
    risk->add_option("--sizes", sizes, "pool sizes for sensitivity, comma separated");
    risk->add_option("--c", risk_c, "probe budget (mode counterexample)");
    risk->add_option("--gamma", gamma, "multiplicative fee keep ratio");
    risk->add_option("--seed", seed, "unused here; accepted for uniformity");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (params->parsed()) return run_params(src, format, output, check_only);
        if (verify->parsed())
            return run_verify(src, mode, reserves, price_a, price_b, demand, endowment, grid,
                              dist_text, samples, seed, cpmm, gamma, output);
        if (game->parsed())
            return run_verify_game(src, reserves, price_a, price_b, steps, p_lp, p_ab, p_ba,
                                   lp_dist, ab_dist, ba_dist, seed, output);
        if (replay->parsed())
            return run_replay(src, replay_mode, trace_path, synthetic, trades, tps, ref_reserve,
                              mu_ratio, sigma, ba_frac, dump_trace, shards, warmup, measure,
                              start, reps, seed, caps, unlimited, reserve_a, reserve_b, gamma,
                              thresholds, output);
        if (throughput->parsed()) {
            if (fit_csv.empty() && throughput->count("--p") == 0 &&
                throughput->count("--t1") == 0) {
                std::cerr << "error: need --fit FILE or --p and --t1\n";
                return 1;
            }
            return run_throughput(fit_csv, p_parallel, t_single, n_csv, output);
        }
        if (risk->parsed())
            return run_risk(risk_mode, input_a, tolerance, min_output, risk_ra, risk_rb, risk_pa,
                            risk_pb, sizes, risk_c, gamma, output);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const VerifyFailed& e) {
        std::cerr << e.what() << "\n";
        return kExitVerify;
    } catch (const std::domain_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitVerify;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
