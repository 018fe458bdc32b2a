#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dynprice/equilibrium.h"
#include "dynprice/pricing.h"
#include "dynprice/twostage.h"
#include "support.h"

using namespace dynprice;
using dynprice::testing::central_difference;

namespace {

ContinuumGame two_stage(double E, double b0) { return ContinuumGame(build_two_stage({E, b0}), 0); }

Strategy path(const ContinuumGame& g, double a0, double a1) {
    Strategy s(g);
    s.at(0, 0) = a0;
    s.at(0, 1) = a1;
    return s;
}

PricePath uniform_prices(std::size_t nodes, double r) {
    PricePath p;
    p.nodes.assign(nodes, NodePrices{r, 0.0, 0.0});
    return p;
}

}  // namespace

TEST_CASE("prices at the published proposed demand") {
    const auto g = two_stage(0.0, 1.12);
    const std::vector<double> A{1.0901, 1.2};
    const auto P = induced_prices(g.scenario().costs, g.tree(), A);
    CHECK(std::abs(P[0].marginal() - 4.4401) <= 2e-3);
    CHECK(std::abs(P[1].q - -4.4401) <= 2e-3);
    CHECK(std::abs(P[1].marginal() - 6.7609) <= 2e-3);
    CHECK(P[0].q == 0.0);
}

TEST_CASE("zero demand with inactive hinges gives zero prices") {
    const auto g = two_stage(0.0, 1.12);
    const auto P = induced_prices(g.scenario().costs, g.tree(), std::vector<double>{0.0, 0.0});
    for (const auto& p : P.nodes) {
        CHECK(p.p == 0.0);
        CHECK(p.w == 0.0);
        CHECK(p.q == 0.0);
    }
}

TEST_CASE("negative demand is a domain error") {
    const auto g = two_stage(0.0, 1.12);
    CHECK_THROWS_AS(induced_prices(g.scenario().costs, g.tree(), std::vector<double>{1.0, -0.1}), DomainError);
}

TEST_CASE("prices match finite differences of node costs on random instances") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        const auto sc = dynprice::testing::random_concave_scenario(rng);
        const ContinuumGame g(sc, 0);
        const auto& tree = g.tree();
        std::vector<double> A(tree.size());
        for (double& a : A) a = u(rng);
        const auto P = induced_prices(sc.costs, tree, A);
        const std::size_t S = sc.chain.size();
        for (NodeId id = 0; id < tree.size(); ++id) {
            const auto& node = tree.node(id);
            const auto& C = sc.costs.primary_at(node.state);
            CHECK(std::abs(P[id].p - central_difference([&](double a) { return C.value(0.0, a); }, A[id])) <= 1e-4);
            if (id == 0) {
                const auto& H0 = sc.costs.initial_ancillary_at(node.state);
                CHECK(std::abs(P[id].w - central_difference([&](double a) { return H0.value(0.0, a); }, A[id])) <=
                      1e-4);
                CHECK(P[id].q == 0.0);
                continue;
            }
            const auto& parent = tree.node(node.parent);
            const auto& H = sc.costs.ancillary_at(parent.state, node.state, S);
            const double prev = A[node.parent];
            auto total = [&](double before, double now) { return C.value(0.0, now) + H.value(before, now); };
            CHECK(std::abs(P[id].marginal() - central_difference([&](double a) { return total(prev, a); }, A[id])) <=
                  1e-4);
            CHECK(std::abs(P[id].q - central_difference([&](double a) { return total(a, A[id]); }, prev)) <= 1e-4);
        }
    }
}

TEST_CASE("q is nondecreasing in the previous demand for convex ancillary costs") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        const auto sc = dynprice::testing::random_concave_scenario(rng);
        for (const auto& H : sc.costs.ancillary) {
            for (double cur = 0.0; cur <= 1.0; cur += 0.1) {
                double last = -1e300;
                for (double prev = 0.0; prev <= 1.0; prev += 0.02) {
                    const double q = H.d_prev(prev, cur);
                    CHECK(q >= last - 1e-12);
                    last = q;
                }
            }
        }
    }
}

TEST_CASE("stage payoff under each mode") {
    const auto sc = build_two_stage({0.0, 1.12});
    const auto& type = sc.types[0];
    const NodePrices stage1{6.7609, 0.0, -4.4401};
    const double payoff = stage_payoff(type, 1, 0, 1.2, 1.2, 1.0901, stage1, PaymentMode::proposed());
    CHECK(payoff == doctest::Approx(14.4 - 6.7609 * 1.2 + 4.4401 * 1.0901));
    CHECK(std::abs(6.7609 * 1.2 - 8.1131) <= 5e-3);
    CHECK(std::abs(4.4401 * 1.0901 - 4.8402) <= 5e-3);

    CHECK(stage_payoff(type, 0, 0, 1.0, 1.0, 0.0, NodePrices{}, PaymentMode::proposed()) == doctest::Approx(10.0));
    CHECK(stage_payoff(type, 0, 0, 1.0, 1.0, 0.0, NodePrices{2.0, 0.0, 0.0}, PaymentMode::marginal_cost()) ==
          doctest::Approx(8.0));
    CHECK(stage_payoff(type, 1, 0, 1.2, 1.2, 1.0, stage1, PaymentMode::marginal_cost()) ==
          doctest::Approx(14.4 - 6.7609 * 1.2));
    CHECK(stage_payoff(type, 1, 0, 1.2, 1.2, 1.0, stage1, PaymentMode::flat(7.0)) == doctest::Approx(14.4 - 8.4));
    CHECK(stage_payoff(5.0, 1.0, 1.0, NodePrices{1.0, 1.0, 1.0}, PaymentMode::proposed()) == doctest::Approx(2.0));
    CHECK_THROWS_AS(PaymentMode::flat(-1.0), DomainError);
}

TEST_CASE("charged price per mode") {
    const NodePrices p{1.0, 2.0, 5.0};
    CHECK(charged_price(p, PaymentMode::proposed()) == 3.0);
    CHECK(charged_price(p, PaymentMode::marginal_cost()) == 3.0);
    CHECK(charged_price(p, PaymentMode::flat(4.0)) == 4.0);
}

TEST_CASE("average retail price") {
    const auto g = two_stage(0.0, 1.12);
    const std::vector<double> A{1.0, 1.2};
    const auto flat = uniform_prices(2, 3.5);
    CHECK(average_retail_price(g.tree(), A, flat, false) == doctest::Approx(3.5));
    CHECK(average_retail_price(g.tree(), A, flat, true) == doctest::Approx(3.5));

    PricePath mcp;
    mcp.nodes = {NodePrices{2.0, 0.0, 0.0}, NodePrices{2.4, 8.8, 0.0}};
    CHECK(std::abs(average_retail_price(g.tree(), A, mcp, false) - 7.0182) <= 2e-3);

    PricePath prop;
    prop.nodes = {NodePrices{2.0, 2.0, 0.0}, NodePrices{3.0, 3.0, -4.0}};
    const double exq = (4.0 * 1.0 + 6.0 * 1.2) / 2.2;
    CHECK(average_retail_price(g.tree(), A, prop, false) == doctest::Approx(exq));
    CHECK(average_retail_price(g.tree(), A, prop, true) == doctest::Approx(exq - 4.0 / 2.2));
    CHECK_THROWS_AS(average_retail_price(g.tree(), std::vector<double>{0.0, 0.0}, prop, true), DomainError);
}

TEST_CASE("accounting identity under the proposed mechanism") {
    for (auto [E, b0] : {std::pair{0.0, 1.12}, std::pair{0.08, 1.2}}) {
        const auto g = two_stage(E, b0);
        const auto rep = solve_doe(g);
        const auto acc = accounting(g, rep.strategy, rep.demand, rep.prices, PaymentMode::proposed());
        CHECK(acc.residual <= 1e-9);
        CHECK(acc.welfare == doctest::Approx(rep.welfare.total).epsilon(1e-12));
    }
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 10; ++rep) {
        const ContinuumGame g(dynprice::testing::random_concave_scenario(rng), 0);
        const auto s = dynprice::testing::random_strategy(g, rng);
        const auto A = aggregate_demand(g, s);
        const auto P = induced_prices(g.scenario().costs, g.tree(), A);
        CHECK(accounting(g, s, A, P, PaymentMode::proposed()).residual <= 1e-9);
    }
}

TEST_CASE("accounting with zero costs and zero prices") {
    auto sc = build_two_stage({0.0, 1.12});
    sc.costs.primary = {CostFunction{}};
    sc.costs.ancillary0 = {CostFunction{}};
    sc.costs.ancillary = {CostFunction{}};
    const ContinuumGame g(sc, 0);
    const auto s = path(g, 1.0, 1.2);
    const auto A = aggregate_demand(g, s);
    const auto P = induced_prices(sc.costs, g.tree(), A);
    const auto acc = accounting(g, s, A, P, PaymentMode::proposed());
    CHECK(acc.revenue == 0.0);
    CHECK(acc.consumer_surplus == doctest::Approx(acc.total_utility));
    CHECK(acc.total_utility == doctest::Approx(24.4));
}

TEST_CASE("flat-rate payment at the published average price") {
    const auto g = two_stage(0.0, 1.12);
    const auto s = path(g, 1.0, 1.2);
    const auto A = aggregate_demand(g, s);
    const auto P = induced_prices(g.scenario().costs, g.tree(), A);
    const auto acc = accounting(g, s, A, P, PaymentMode::flat(7.0182));
    CHECK(std::abs(acc.revenue - 15.44) <= 1e-3);
}

TEST_CASE("flat and MCP reports never carry q") {
    const auto g = two_stage(0.08, 1.2);
    for (const auto& rep : {solve_mcp(g), solve_flat(g, 5.0)}) {
        for (const auto& p : rep.prices.nodes) CHECK(p.q == 0.0);
    }
}

TEST_CASE("price CSV") {
    const auto g = two_stage(0.0, 1.12);
    PricePath p;
    p.nodes = {NodePrices{1.0, 0.5, 0.0}, NodePrices{2.0, 0.25, -1.0}};
    std::ostringstream os;
    write_price_csv(os, g.tree(), p);
    CHECK(os.str() == "stage,history_id,p,w,q,p_plus_w\n0,0,1,0.5,0,1.5\n1,0-0,2,0.25,-1,2.25\n");
}
