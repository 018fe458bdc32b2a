// One line per acceptance criterion; exit status is nonzero if any fails.
#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "dynprice/ancillary.h"
#include "dynprice/cli.h"
#include "dynprice/equilibrium.h"
#include "dynprice/finite_game.h"
#include "dynprice/golden.h"
#include "dynprice/twostage.h"
#include "support.h"

using namespace dynprice;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Golden rows for one instance, checked against a fresh solve.
Outcome tables_match(double E, double b0, double time_limit) {
    std::vector<GoldenEntry> mine;
    for (const auto& e : parse_golden(embedded_golden()))
        if (e.E == E && e.b0 == b0) mine.push_back(e);
    const auto t0 = std::chrono::steady_clock::now();
    const auto checks = check_golden(mine, nullptr, 1);
    const double secs = seconds_since(t0);
    int bad = 0;
    std::string first;
    for (const auto& c : checks) {
        if (c.pass) continue;
        if (bad++ == 0)
            first = fmt::format("; first miss {} {} got {:.6g} want {:.6g}", to_string(c.entry.mechanism), c.entry.field,
                                c.actual, c.entry.expected);
    }
    return {!mine.empty() && bad == 0 && secs < time_limit,
            fmt::format("{}/{} entries within tolerance, {:.2f} s (limit {} s){}", checks.size() - bad, checks.size(),
                        secs, time_limit, first)};
}

Outcome closed_form_demand() {
    const double expected = 84.224 / 77.264;
    const double a0 = run_tables({0.0, 1.12}).proposed.a0;
    const double err = std::abs(a0 - expected);
    return {err <= 1e-4, fmt::format("a0 = {:.9f}, closed form {:.9f}, |diff| = {:.2e}", a0, expected, err)};
}

Outcome doe_dominance() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20140601);
    double worst_margin = 1e300, worst_kkt = 0.0;
    int flagged = 0;
    for (int rep = 0; rep < 20; ++rep) {
        const ContinuumGame g(testing::random_concave_scenario(rng), 0);
        const auto doe = solve_doe(g);
        worst_kkt = std::max(worst_kkt, doe.kkt_residual);
        flagged += doe.non_concave;
        for (int k = 0; k < 100; ++k) {
            const auto s = testing::random_strategy(g, rng);
            worst_margin = std::min(worst_margin, doe.welfare.total - continuum_welfare(g, s).total);
        }
    }
    const double secs = seconds_since(t0);
    return {worst_margin >= -1e-6 && worst_kkt <= 1e-6 && secs < 120.0,
            fmt::format("20 scenarios x 100 strategies: min W(DOE)-W(s) = {:.3e}, max KKT residual = {:.2e}, "
                        "{} flagged non-concave, {:.1f} s",
                        worst_margin, worst_kkt, flagged, secs)};
}

/// U_t = d_t a - a^2/2 with d = (2, 3), C = A^2, H = 2 (A_1 - A_0)^2.
Outcome smooth_instance() {
    Scenario sc;
    sc.chain.states = {"s"};
    sc.chain.transition = {{1.0}};
    sc.chain.horizon = 1;
    ConsumerTypeSpec t;
    t.id = "smooth";
    t.initial_state = 1.0;
    t.eta = {1.0};
    t.utility.capped = false;
    t.utility.slope = StageStateTable({{2.0}, {3.0}});
    t.utility.curvature = StageStateTable(1.0);
    t.transition.base = StageStateTable(1.0);
    sc.types.push_back(t);
    sc.costs.primary = {CostFunction{{0.0, 0.0, 1.0}, {}}};
    sc.costs.ancillary0 = {CostFunction{}};
    sc.costs.ancillary = {CostFunction{{}, {HingeTerm{2.0, 1.0, 1.0, 0.0}, HingeTerm{2.0, -1.0, -1.0, 0.0}}}};
    sc.bounds = Bounds{1.0, 2.0, 50.0, 10.0};

    const ContinuumGame g(sc, 0);
    const auto doe = solve_doe(g);
    const double a0 = doe.strategy.at(0, 0), a1 = doe.strategy.at(0, 1);
    const double r0 = std::abs((2.0 - a0) - (2.0 * a0 - 4.0 * (a1 - a0)));
    const double r1 = std::abs((3.0 - a1) - (2.0 * a1 + 4.0 * (a1 - a0)));

    auto W = [](double x, double y) {
        return 2.0 * x - 0.5 * x * x + 3.0 * y - 0.5 * y * y - x * x - y * y - 2.0 * (y - x) * (y - x);
    };
    double bx = 0.0, by = 0.0, bw = -1e300;
    for (int i = 0; i <= 10000; ++i) {
        const double x = i * 1e-4;
        for (int j = 0; j <= 10000; ++j) {
            const double y = j * 1e-4;
            const double w = W(x, y);
            if (w > bw) {
                bw = w;
                bx = x;
                by = y;
            }
        }
    }
    for (double step = 1e-5; step >= 1e-9; step /= 10.0) {
        const double cx = bx, cy = by;
        for (int i = -10; i <= 10; ++i)
            for (int j = -10; j <= 10; ++j) {
                const double x = std::clamp(cx + i * step, 0.0, 1.0), y = std::clamp(cy + j * step, 0.0, 1.0);
                const double w = W(x, y);
                if (w > bw) {
                    bw = w;
                    bx = x;
                    by = y;
                }
            }
    }
    const double dw = std::abs(doe.welfare.total - bw);
    return {r0 <= 1e-6 && r1 <= 1e-6 && dw <= 1e-6,
            fmt::format("residuals {:.1e}, {:.1e}; DOE ({:.6f}, {:.6f}) W = {:.9f}; grid search ({:.6f}, {:.6f}) "
                        "W = {:.9f}",
                        r0, r1, a0, a1, doe.welfare.total, bx, by, bw)};
}

const ContinuumGame& two_type() {
    static const ContinuumGame g(build_two_type(), 0);
    return g;
}

const Strategy& two_type_doe() {
    static const Strategy s = solve_doe(two_type()).strategy;
    return s;
}

Outcome deviation_decay() {
    const auto t0 = std::chrono::steady_clock::now();
    DeviationConfig cfg;
    cfg.draws = 1000;
    std::vector<DeviationResult> r;
    for (int n : {5, 50, 500}) r.push_back(deviation_gain(two_type(), two_type_doe(), n, cli::kDefaultSeed, cfg));
    const double secs = seconds_since(t0);
    const double ratio = r[2].gain.mean / r[0].gain.mean;
    bool floor_ok = true;
    for (const auto& x : r) floor_ok = floor_ok && x.min_gain >= -x.grid_error;
    return {r[0].gain.mean > 0.0 && ratio <= 0.1 && floor_ok && secs < 600.0,
            fmt::format("gain n=5: {:.4g}, n=50: {:.4g}, n=500: {:.4g}; ratio {:.4f}; min gains {:.2e}/{:.2e}/{:.2e} "
                        "vs grid error {:.2e}/{:.2e}/{:.2e}; {:.1f} s",
                        r[0].gain.mean, r[1].gain.mean, r[2].gain.mean, ratio, r[0].min_gain, r[1].min_gain,
                        r[2].min_gain, r[0].grid_error, r[1].grid_error, r[2].grid_error, secs)};
}

Outcome welfare_gap_decay() {
    const std::vector<int> ns{25, 400};
    const auto a = welfare_gap(two_type(), two_type_doe(), ns, 1000, cli::kDefaultSeed);
    const auto b = welfare_gap(two_type(), two_type_doe(), ns, 1000, cli::kDefaultSeed + 1);
    const double ratio = a[1].mean / a[0].mean;
    bool agree = true;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const double se = std::hypot(a[i].stderr_, b[i].stderr_);
        agree = agree && std::abs(a[i].mean - b[i].mean) <= 2.0 * se;
    }
    return {ratio <= 0.5 && agree,
            fmt::format("gap n=25: {:.4e} +- {:.1e} (seed 2: {:.4e}), n=400: {:.4e} +- {:.1e} (seed 2: {:.4e}); "
                        "ratio {:.4f}",
                        a[0].mean, a[0].stderr_, b[0].mean, a[1].mean, a[1].stderr_, b[1].mean, ratio)};
}

Outcome ancillary_error() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto ratios = linear_grid(0.25, 6.0, 0.25);
    const auto lo = error_experiment(0.02, 0.1, ratios, 100000, cli::kDefaultSeed, 24);
    const auto hi = error_experiment(0.05, 0.25, ratios, 100000, cli::kDefaultSeed, 24);
    const double secs = seconds_since(t0);
    double worst_small = 0.0, worst_noshed = 0.0, worst_pair = 0.0, at = 0.0;
    for (const auto* curve : {&lo, &hi}) {
        for (const auto& p : *curve) {
            if (p.omega_over_rb <= 2.0 + 1e-9) worst_small = std::max(worst_small, p.mean_rel_error);
            if (p.shed_rate == 0.0 && p.mean_rel_error > worst_noshed) {
                worst_noshed = p.mean_rel_error;
                at = p.omega_over_rb;
            }
        }
    }
    for (std::size_t i = 0; i < ratios.size(); ++i)
        if (lo[i].shed_rate == 0.0 && hi[i].shed_rate == 0.0)
            worst_pair = std::max(worst_pair, std::abs(lo[i].mean_rel_error - hi[i].mean_rel_error));
    return {worst_small <= 0.01 && worst_noshed <= 0.10 && worst_pair <= 0.01 && secs < 120.0,
            fmt::format("max error ratio<=2: {:.2e}; max error without shedding: {:.4f} at ratio {}; "
                        "max curve difference: {:.2e}; {:.1f} s",
                        worst_small, worst_noshed, at, worst_pair, secs)};
}

Outcome sweep_properties() {
    const auto Es = linear_grid(0.0, 0.1, 0.01);
    const std::vector<double> bs{1.12, 1.2};
    int order_bad = 0;
    for (const auto& t : sweep(Es, bs))
        order_bad += !(t.proposed.welfare >= t.mcp.welfare - 1e-6 && t.mcp.welfare >= t.flat.welfare - 1e-6);

    const auto axis = linear_grid(1.12, 1.2, 0.01);
    const std::vector<double> E{0.1};
    int peak_bad = 0;
    double gmin = 1e300, gmax = -1e300;
    for (const auto& t : sweep(E, axis)) {
        const double gap = t.proposed.peak_reduction_pct - t.mcp.peak_reduction_pct;
        gmin = std::min(gmin, gap);
        gmax = std::max(gmax, gap);
        const double peak_prop = std::max(t.proposed.a0, t.proposed.a1);
        const double peak_mcp = std::max(t.mcp.a0, t.mcp.a1);
        peak_bad += !(peak_prop <= peak_mcp + 1e-9 && gap >= 1.0 && gap <= 2.0);
    }
    return {order_bad == 0 && peak_bad == 0,
            fmt::format("welfare ordering violated at {}/{} grid points; peak gap at E=0.1 over b0 1.12..1.2 in "
                        "[{:.3f}, {:.3f}] pp, {} violations",
                        order_bad, Es.size() * bs.size(), gmin, gmax, peak_bad)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Outcome cli_determinism() {
    const auto root = fs::temp_directory_path() / fmt::format("dynprice_accept_{}", ::getpid());
    const fs::path d1 = root / "t1", d4 = root / "t4";
    std::ostringstream out, err;
    auto verify = [&](const fs::path& dir, const char* threads) {
        return cli::run({"dynprice", "verify", "--seed", "7", "--threads", threads, "--out", dir.string()}, out, err);
    };
    const int c1 = verify(d1, "1"), c4 = verify(d4, "4");
    int files = 0, differ = 0;
    for (const auto& e : fs::directory_iterator(d1)) {
        ++files;
        const auto other = d4 / e.path().filename();
        differ += !fs::exists(other) || slurp(e.path()) != slurp(other);
    }
    int extra = 0;
    for (const auto& e : fs::directory_iterator(d4)) extra += !fs::exists(d1 / e.path().filename());
    fs::remove_all(root);
    return {c1 == cli::kOk && c4 == cli::kOk && files > 0 && differ == 0 && extra == 0,
            fmt::format("exit codes {}/{}; {} CSV files, {} differ", c1, c4, files, differ + extra)};
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"demand, welfare and prices at E=0, b0=1.12", [] { return tables_match(0.0, 1.12, 5.0); }},
        {"demand, welfare and prices at E=0.08, b0=1.2", [] { return tables_match(0.08, 1.2, 5.0); }},
        {"closed-form stage-0 demand at E=0", closed_form_demand},
        {"DOE dominates random strategies and meets KKT", doe_dominance},
        {"smooth instance marginal conditions and grid optimum", smooth_instance},
        {"finite-population deviation gain decays", deviation_decay},
        {"finite-population welfare gap decays and is seed-stable", welfare_gap_decay},
        {"ancillary cost surrogate error", ancillary_error},
        {"welfare ordering and peak-load gap over the sweeps", sweep_properties},
        {"CLI verify output independent of thread count", cli_determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o = {false, fmt::format("threw: {}", e.what())};
        }
        failed += !o.pass;
        fmt::print("[{}] {} {}: {}\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail);
        std::fflush(stdout);
    }
    fmt::print("acceptance: {}/{} criteria pass\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
