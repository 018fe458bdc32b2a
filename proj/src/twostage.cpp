#include "dynprice/twostage.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "dynprice/parallel.h"

namespace dynprice {

Scenario build_two_stage(const TwoStageParams& params) {
    if (!(params.E >= 0.0 && params.E <= 0.1)) throw DomainError(fmt::format("E = {} outside [0, 0.1]", params.E));
    if (!(params.b0 > 0.0)) throw DomainError("b0 must be positive");
    Scenario sc;
    sc.chain.states = {"s"};
    sc.chain.transition = {{1.0}};
    sc.chain.horizon = 1;

    ConsumerTypeSpec t;
    t.id = "consumer";
    t.initial_state = 1.0 + params.E;
    t.eta = {1.0};
    t.utility.capped = true;
    t.utility.slope = StageStateTable({{10.0}, {12.0}});
    t.transition.base = StageStateTable({{0.0}, {1.2 - params.E}});
    t.transition.carry = 1.0;
    t.transition.floor = 1.0;
    sc.types.push_back(std::move(t));

    sc.costs.primary = {CostFunction{{0.0, 0.0, 1.0}, {}}};
    sc.costs.ancillary0 = {CostFunction{{}, {HingeTerm{10.0, params.b0, 0.0, 1.12}}}};
    sc.costs.ancillary = {CostFunction{{}, {HingeTerm{20.0, kTwoStageB1, params.b0, 0.0}}}};
    sc.costs.reserve_policy = "G_t = b_t A_t";
    sc.bounds = Bounds{2.0, 1.3, 200.0, 20.0};
    return sc;
}

Scenario build_two_type(double b0, double E_low, double E_high) {
    Scenario sc = build_two_stage({E_low, b0});
    ConsumerTypeSpec high = build_two_stage({E_high, b0}).types.front();
    sc.types.front().id = "low";
    sc.types.front().eta = {0.5};
    high.id = "high";
    high.eta = {0.5};
    sc.types.push_back(std::move(high));
    return sc;
}

namespace {

TableRow row_of(const ContinuumGame& game, const SolveReport& rep) {
    TableRow r;
    r.mechanism = rep.mechanism;
    r.a0 = rep.strategy.at(0, 0);
    r.a1 = rep.strategy.at(0, 1);
    r.welfare = rep.welfare.total;
    r.p0w0 = rep.prices[0].marginal();
    r.p1w1 = rep.prices[1].marginal();
    r.q1 = rep.prices[1].q;
    r.avg_price_exq = average_retail_price(game.tree(), rep.demand, rep.prices, false);
    r.avg_price_incq = average_retail_price(game.tree(), rep.demand, rep.prices, true);
    const double peak = *std::max_element(rep.demand.begin(), rep.demand.end());
    r.peak_reduction_pct = (kReferencePeak - peak) / kReferencePeak * 100.0;
    return r;
}

}  // namespace

TwoStageTables run_tables(const TwoStageParams& params, std::optional<double> flat_rate) {
    const ContinuumGame game(build_two_stage(params), 0);
    TwoStageTables out;
    out.params = params;
    const auto doe = solve_doe(game);
    const auto mcp = solve_mcp(game);
    out.proposed = row_of(game, doe);
    out.mcp = row_of(game, mcp);
    out.flat_rate = flat_rate.value_or(out.mcp.avg_price_exq);
    out.flat = row_of(game, solve_flat(game, out.flat_rate));
    return out;
}

std::vector<TwoStageTables> sweep(std::span<const double> E_grid, std::span<const double> b0_grid, unsigned threads) {
    if (E_grid.empty() || b0_grid.empty()) throw DomainError("sweep grid is empty");
    std::vector<TwoStageTables> out(E_grid.size() * b0_grid.size());
    parallel_for(out.size(), threads, [&](std::size_t i) {
        out[i] = run_tables({E_grid[i / b0_grid.size()], b0_grid[i % b0_grid.size()]});
    });
    return out;
}

std::vector<double> linear_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) throw DomainError("bad grid");
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = lo + step * static_cast<double>(i);
    return g;
}

void write_tables_csv_header(std::ostream& os) {
    os << "E,b0,mechanism,a0,a1,welfare,p0w0,p1w1,q1,avg_price_exq,avg_price_incq,peak_reduction_pct\n";
}

void write_tables_csv(std::ostream& os, const TwoStageTables& t) {
    for (const TableRow* r : {&t.proposed, &t.mcp, &t.flat}) {
        os << fmt::format("{:.10g},{:.10g},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g}\n",
                          t.params.E, t.params.b0, to_string(r->mechanism), r->a0, r->a1, r->welfare, r->p0w0,
                          r->p1w1, r->q1, r->avg_price_exq, r->avg_price_incq, r->peak_reduction_pct);
    }
}

}  // namespace dynprice
