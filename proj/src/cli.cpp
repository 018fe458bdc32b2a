#include "dynprice/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "dynprice/ancillary.h"
#include "dynprice/equilibrium.h"
#include "dynprice/finite_game.h"
#include "dynprice/golden.h"
#include "dynprice/scenario_io.h"
#include "dynprice/twostage.h"

namespace dynprice::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
    std::string out;
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;
};

std::uint64_t resolve_seed(const Common& c) {
    if (c.seed) return *c.seed;
    if (const char* env = std::getenv(kSeedEnv); env && *env) {
        char* end = nullptr;
        const auto v = std::strtoull(env, &end, 10);
        if (*end != '\0') throw ConfigError(fmt::format("{}='{}' is not an unsigned integer", kSeedEnv, env));
        return v;
    }
    return kDefaultSeed;
}

/// Writes to `path`, or to `fallback` when the path is empty.
class Sink {
  public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (path.empty()) return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw ConfigError("cannot write " + path);
        os_ = file_.get();
    }
    std::ostream& operator*() { return *os_; }

  private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

void add_common(CLI::App* app, Common& c, bool with_seed) {
    app->add_option("--out", c.out, "Output path (default: stdout)");
    app->add_option("--threads", c.threads, "Worker threads (0 = all cores)");
    if (with_seed) app->add_option("--seed", c.seed, fmt::format("Master seed (default {} or ${})", kDefaultSeed, kSeedEnv));
}

Scenario load_checked(const std::string& path) {
    Scenario sc = load_scenario(path);
    const auto report = validate(sc);
    if (!report.ok()) throw ConfigError("scenario invalid: " + report.summary());
    return sc;
}

// ---- solve -----------------------------------------------------------------

struct SolveArgs {
    Common common;
    std::string scenario;
    std::string mechanism = "proposed";
    std::optional<double> rate;
    std::optional<double> tol;
    std::optional<int> max_iters;
    std::optional<int> s0;
};

int do_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
    Scenario sc = load_checked(a.scenario);
    const StateIndex s0 = a.s0 ? static_cast<StateIndex>(*a.s0) : sc.chain.initial_state;
    ContinuumGame game(std::move(sc), s0);
    const Mechanism mech = parse_mechanism(a.mechanism);

    SolveReport rep;
    int code = kOk;
    try {
        if (mech == Mechanism::Proposed) {
            DoeConfig cfg;
            if (a.tol) cfg.tol = *a.tol;
            if (a.max_iters) cfg.max_iters = *a.max_iters;
            rep = solve_doe(game, cfg);
        } else {
            McpConfig cfg;
            if (a.tol) cfg.tol = *a.tol;
            if (a.max_iters) cfg.max_iters = *a.max_iters;
            rep = solve_mcp(game, cfg);
            if (mech == Mechanism::FlatRate) {
                const double rate = a.rate ? *a.rate : average_retail_price(game.tree(), rep.demand, rep.prices, false);
                rep = solve_flat(game, rate);
            }
        }
    } catch (const NonConvergence& e) {
        err << fmt::format("dynprice: convergence error: {}\n", e.what());
        rep = e.best();
        code = kNonConvergence;
    }
    Sink sink(a.common.out, out);
    write_solve_csv_header(*sink);
    write_solve_csv(*sink, game, rep);
    err << fmt::format("solve: {} welfare {:.10g} kkt {:.3g} iterations {}{}\n", to_string(rep.mechanism),
                       rep.welfare.total, rep.kkt_residual, rep.iterations, rep.non_concave ? " (starts disagree)" : "");
    return code;
}

// ---- simulate --------------------------------------------------------------

struct SimulateArgs {
    Common common;
    std::string scenario;
    std::string experiment = "all";
    std::vector<int> n;
    long draws = 1000;
    long deviation_draws = 64;
    int action_grid = DeviationConfig{}.action_grid;
    int state_grid = DeviationConfig{}.state_grid;
    std::optional<double> tol;
};

std::vector<SampleStats> finite_experiments(const ContinuumGame& game, const Strategy& nu, const std::string& which,
                                            const std::vector<int>& n_override, long draws, long deviation_draws,
                                            const DeviationConfig& grid, std::uint64_t seed, unsigned threads) {
    auto ns = [&](std::vector<int> fallback) { return n_override.empty() ? fallback : n_override; };
    std::vector<SampleStats> rows;
    const bool all = which == "all";
    if (all || which == "realized") {
        for (int n : ns({10, 40, 160, 640})) rows.push_back(simulate_symmetric(game, nu, n, draws, seed, threads));
    }
    if (all || which == "gap") {
        const auto n_list = ns({25, 100, 400});
        for (auto& s : welfare_gap(game, nu, n_list, draws, seed, threads)) rows.push_back(std::move(s));
    }
    if (all || which == "deviation") {
        DeviationConfig cfg = grid;
        cfg.draws = deviation_draws;
        for (int n : ns({5, 50, 500})) rows.push_back(deviation_gain(game, nu, n, seed, cfg, threads).gain);
    }
    if (rows.empty()) throw ConfigError(fmt::format("unknown experiment '{}'", which));
    return rows;
}

int do_simulate(const SimulateArgs& a, std::ostream& out, std::ostream&) {
    Scenario sc = a.scenario.empty() ? build_two_type() : load_checked(a.scenario);
    const StateIndex s0 = sc.chain.initial_state;
    ContinuumGame game(std::move(sc), s0);
    DoeConfig doe;
    if (a.tol) doe.tol = *a.tol;
    const auto nu = solve_doe(game, doe).strategy;
    DeviationConfig grid;
    grid.action_grid = a.action_grid;
    grid.state_grid = a.state_grid;
    const auto rows = finite_experiments(game, nu, a.experiment, a.n, a.draws, a.deviation_draws, grid,
                                         resolve_seed(a.common), a.common.threads);
    Sink sink(a.common.out, out);
    write_stats_csv_header(*sink);
    for (const auto& r : rows) write_stats_csv(*sink, r);
    return kOk;
}

// ---- ancillary -------------------------------------------------------------

struct AncillaryArgs {
    Common common;
    double r_b = 0.02;
    double r_d = 0.1;
    std::vector<double> ratio_grid{0.5, 6.0, 0.5};
    long trials = 100000;
    int horizon = 24;
};

std::vector<ErrorPoint> ancillary_curve(double r_b, double r_d, const std::vector<double>& grid, long trials,
                                        int horizon, std::uint64_t seed, unsigned threads) {
    const auto ratios = linear_grid(grid.at(0), grid.at(1), grid.at(2));
    return error_experiment(r_b, r_d, ratios, trials, seed, horizon, threads);
}

int do_ancillary(const AncillaryArgs& a, std::ostream& out, std::ostream&) {
    const auto points = ancillary_curve(a.r_b, a.r_d, a.ratio_grid, a.trials, a.horizon, resolve_seed(a.common),
                                        a.common.threads);
    Sink sink(a.common.out, out);
    write_error_csv_header(*sink);
    write_error_csv(*sink, points);
    return kOk;
}

// ---- twostage --------------------------------------------------------------

struct TwoStageArgs {
    Common common;
    double E = 0.0;
    double b0 = 1.12;
    std::optional<double> rate;
    std::vector<double> E_grid;
    std::vector<double> b0_grid;
};

int do_twostage(const TwoStageArgs& a, std::ostream& out, std::ostream&) {
    Sink sink(a.common.out, out);
    write_tables_csv_header(*sink);
    if (a.E_grid.empty() && a.b0_grid.empty()) {
        write_tables_csv(*sink, run_tables({a.E, a.b0}, a.rate));
        return kOk;
    }
    const auto Es = a.E_grid.empty() ? std::vector<double>{a.E} : linear_grid(a.E_grid[0], a.E_grid[1], a.E_grid[2]);
    const auto bs =
        a.b0_grid.empty() ? std::vector<double>{a.b0} : linear_grid(a.b0_grid[0], a.b0_grid[1], a.b0_grid[2]);
    for (const auto& t : sweep(Es, bs, a.common.threads)) write_tables_csv(*sink, t);
    return kOk;
}

// ---- verify ----------------------------------------------------------------

struct VerifyArgs {
    Common common;
    std::string golden;
    long trials = 100000;
    long draws = 1000;
    long deviation_draws = 64;
};

struct Tally {
    std::ostream& os;
    int total = 0;
    int failed = 0;

    void record(bool pass, const std::string& what) {
        ++total;
        if (!pass) ++failed;
        os << fmt::format("{:<8} {}\n", pass ? "ok" : "MISMATCH", what);
    }
};

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    body(f);
}

int do_verify(const VerifyArgs& a, std::ostream& out, std::ostream&) {
    std::string text;
    if (a.golden.empty()) {
        text = embedded_golden();
    } else {
        std::ifstream in(a.golden);
        if (!in) throw ConfigError("file not found: " + a.golden);
        text.assign(std::istreambuf_iterator<char>(in), {});
    }
    const auto entries = parse_golden(text);
    const unsigned threads = a.common.threads;
    const std::uint64_t seed = resolve_seed(a.common);
    Tally tally{out};

    std::vector<TwoStageTables> instances;
    for (const auto& c : check_golden(entries, &instances, threads)) {
        const auto& e = c.entry;
        tally.record(c.pass, fmt::format("E={:g} b0={:g} {:<8} {:<14} expected {:<9g} got {:.6f} tol {:g}", e.E, e.b0,
                                         to_string(e.mechanism), e.field, e.expected, c.actual, e.tolerance));
    }

    const auto E_grid = linear_grid(0.0, 0.1, 0.01);
    const std::vector<double> b0_pair{1.12, 1.2};
    const auto by_E = sweep(E_grid, b0_pair, threads);
    int ordered = 0;
    for (const auto& t : by_E) {
        if (t.proposed.welfare >= t.mcp.welfare - 1e-6 && t.mcp.welfare >= t.flat.welfare - 1e-6) ++ordered;
    }
    tally.record(ordered == static_cast<int>(by_E.size()),
                 fmt::format("welfare proposed >= mcp >= flat at {}/{} sweep points", ordered, by_E.size()));

    const auto b0_grid = linear_grid(1.12, 1.2, 0.01);
    const std::vector<double> E_peak{0.1};
    const auto by_b0 = sweep(E_peak, b0_grid, threads);
    int in_band = 0;
    double lo = 1e300, hi = -1e300;
    for (const auto& t : by_b0) {
        const double gap = t.proposed.peak_reduction_pct - t.mcp.peak_reduction_pct;
        lo = std::min(lo, gap);
        hi = std::max(hi, gap);
        if (gap >= 1.0 && gap <= 2.0) ++in_band;
    }
    tally.record(in_band == static_cast<int>(by_b0.size()),
                 fmt::format("peak reduction gap proposed - mcp in [1, 2] pp at E=0.1: {}/{} (range {:.3f}..{:.3f})",
                             in_band, by_b0.size(), lo, hi));

    if (!a.common.out.empty()) {
        const fs::path dir(a.common.out);
        fs::create_directories(dir);
        write_file(dir / "tables.csv", [&](std::ostream& os) {
            write_tables_csv_header(os);
            for (const auto& t : instances) write_tables_csv(os, t);
        });
        write_file(dir / "sweep_E.csv", [&](std::ostream& os) {
            write_tables_csv_header(os);
            for (const auto& t : by_E) write_tables_csv(os, t);
        });
        write_file(dir / "sweep_b0.csv", [&](std::ostream& os) {
            write_tables_csv_header(os);
            for (const auto& t : by_b0) write_tables_csv(os, t);
        });
        write_file(dir / "ancillary.csv", [&](std::ostream& os) {
            write_error_csv_header(os);
            for (auto [rb, rd] : {std::pair{0.02, 0.1}, std::pair{0.05, 0.25}})
                write_error_csv(os, ancillary_curve(rb, rd, {0.5, 6.0, 0.5}, a.trials, 24, seed, threads));
        });
        write_file(dir / "finite.csv", [&](std::ostream& os) {
            ContinuumGame game(build_two_type(), 0);
            const auto nu = solve_doe(game).strategy;
            write_stats_csv_header(os);
            for (const auto& r : finite_experiments(game, nu, "all", {}, a.draws, a.deviation_draws, {}, seed, threads))
                write_stats_csv(os, r);
        });
    }

    out << fmt::format("verify: {} checks, {} mismatches\n", tally.total, tally.failed);
    return tally.failed == 0 ? kOk : kGoldenMismatch;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic pricing for demand-side management: equilibria, experiments and reference tables"};
    app.require_subcommand(1);

    SolveArgs solve;
    auto* s = app.add_subcommand("solve", "Solve one mechanism on a scenario file and write the report CSV");
    s->add_option("--scenario", solve.scenario, "Scenario JSON")->required();
    s->add_option("--mechanism", solve.mechanism, "proposed | mcp | flat")
        ->check(CLI::IsMember({"proposed", "mcp", "flat"}));
    s->add_option("--rate", solve.rate, "Flat rate (default: MCP average price)");
    s->add_option("--tol", solve.tol, "Solver tolerance");
    s->add_option("--max-iters", solve.max_iters, "Iteration budget");
    s->add_option("--s0", solve.s0, "Initial exogenous state (default: from scenario)");
    add_common(s, solve.common, false);

    SimulateArgs sim;
    auto* m = app.add_subcommand("simulate", "Finite-population experiments around the continuum DOE");
    m->add_option("--scenario", sim.scenario, "Scenario JSON (default: built-in two-type market)");
    m->add_option("--experiment", sim.experiment, "realized | gap | deviation | all")
        ->check(CLI::IsMember({"realized", "gap", "deviation", "all"}));
    m->add_option("--n", sim.n, "Population sizes (default per experiment)");
    m->add_option("--draws", sim.draws, "Type draws for realized welfare and gap");
    m->add_option("--deviation-draws", sim.deviation_draws, "Type draws for the deviation gain");
    m->add_option("--action-grid", sim.action_grid, "Deviation DP action grid");
    m->add_option("--state-grid", sim.state_grid, "Deviation DP state grid");
    m->add_option("--tol", sim.tol, "DOE tolerance");
    add_common(m, sim.common, true);

    AncillaryArgs anc;
    auto* n = app.add_subcommand("ancillary", "Dispatch cost vs quadratic surrogate error curve");
    n->add_option("--rb", anc.r_b, "Ramping rate of base plants");
    n->add_option("--rd", anc.r_d, "Ramping rate of peakers");
    n->add_option("--ratios", anc.ratio_grid, "omega/r_b grid: lo hi step")->expected(3);
    n->add_option("--draws", anc.trials, "Trajectories per point");
    n->add_option("--horizon", anc.horizon, "Stages per trajectory");
    add_common(n, anc.common, true);

    TwoStageArgs two;
    auto* t = app.add_subcommand("twostage", "Two-stage example: tables for one instance or a sweep");
    t->add_option("--E", two.E, "Demand substitutability in [0, 0.1]");
    t->add_option("--b0", two.b0, "Stage-0 reserve factor");
    t->add_option("--rate", two.rate, "Flat rate (default: MCP average price)");
    t->add_option("--E-grid", two.E_grid, "Sweep E: lo hi step")->expected(3);
    t->add_option("--b0-grid", two.b0_grid, "Sweep b0: lo hi step")->expected(3);
    add_common(t, two.common, false);

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "Check the pinned reference tables; with --out DIR also write all CSVs");
    v->add_option("--golden", ver.golden, "Fixture file (default: built in)");
    v->add_option("--draws", ver.draws, "Type draws for the finite-population CSV");
    v->add_option("--trials", ver.trials, "Trajectories per ancillary point");
    add_common(v, ver.common, true);

    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (*s) return do_solve(solve, out, err);
        if (*m) return do_simulate(sim, out, err);
        if (*n) return do_ancillary(anc, out, err);
        if (*t) return do_twostage(two, out, err);
        if (*v) return do_verify(ver, out, err);
    } catch (const NonConvergence& e) {
        err << fmt::format("dynprice: convergence error: {}\n", e.what());
        return kNonConvergence;
    } catch (const ConvergenceError& e) {
        err << fmt::format("dynprice: convergence error: {}\n", e.what());
        return kNonConvergence;
    } catch (const ConfigError& e) {
        err << fmt::format("dynprice: config error: {}\n", e.what());
    } catch (const DomainError& e) {
        err << fmt::format("dynprice: domain error: {}\n", e.what());
    } catch (const CapacityError& e) {
        err << fmt::format("dynprice: capacity error: {}\n", e.what());
    } catch (const std::exception& e) {
        err << fmt::format("dynprice: error: {}\n", e.what());
    }
    return kInvalid;
}

}  // namespace dynprice::cli
