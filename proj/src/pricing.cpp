#include "dynprice/pricing.h"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "dynprice/errors.h"

namespace dynprice {

PaymentMode PaymentMode::flat(double rate) {
    if (rate < 0.0) throw DomainError("flat rate must be non-negative");
    return {Mechanism::FlatRate, rate};
}

const char* to_string(Mechanism m) {
    switch (m) {
        case Mechanism::Proposed: return "proposed";
        case Mechanism::MarginalCost: return "mcp";
        case Mechanism::FlatRate: return "flat";
    }
    return "?";
}

PricePath induced_prices(const CostModel& costs, const HistoryTree& tree, std::span<const double> demand) {
    if (demand.size() != tree.size()) {
        throw DomainError(fmt::format("demand has {} entries for {} nodes", demand.size(), tree.size()));
    }
    const std::size_t n_states = tree.state_count();
    PricePath out;
    out.nodes.resize(tree.size());
    for (NodeId id = 0; id < tree.size(); ++id) {
        const double a = demand[id];
        if (a < 0.0) throw DomainError(fmt::format("negative demand {} at node {}", a, tree.label(id)));
        const auto& node = tree.node(id);
        NodePrices& np = out.nodes[id];
        np.p = costs.primary_at(node.state).d_cur(0.0, a);
        if (id == 0) {
            np.w = costs.initial_ancillary_at(node.state).d_cur(0.0, a);
            np.q = 0.0;
        } else {
            const auto& parent = tree.node(node.parent);
            const auto& h = costs.ancillary_at(parent.state, node.state, n_states);
            const double prev = demand[node.parent];
            np.w = h.d_cur(prev, a);
            np.q = h.d_prev(prev, a);
        }
    }
    return out;
}

double charged_price(const NodePrices& prices, const PaymentMode& mode) {
    return mode.mechanism == Mechanism::FlatRate ? mode.rate : prices.marginal();
}

double stage_payoff(double utility, double action, double prev_action, const NodePrices& prices,
                    const PaymentMode& mode) {
    switch (mode.mechanism) {
        case Mechanism::Proposed: return utility - prices.marginal() * action - prices.q * prev_action;
        case Mechanism::MarginalCost: return utility - prices.marginal() * action;
        case Mechanism::FlatRate: return utility - mode.rate * action;
    }
    return utility;
}

double stage_payoff(const ConsumerTypeSpec& type, int stage, StateIndex s, double z, double action,
                    double prev_action, const NodePrices& prices, const PaymentMode& mode) {
    return stage_payoff(type.utility.value(stage, s, z, action), action, prev_action, prices, mode);
}

AccountingReport accounting(const ContinuumGame& game, const Strategy& strategy, std::span<const double> demand,
                            const PricePath& prices, const PaymentMode& mode) {
    const auto& tree = game.tree();
    const auto& costs = game.scenario().costs;
    const std::size_t n_states = game.scenario().chain.size();
    const auto weights = game.weights();
    AccountingReport r;

    for (std::size_t x = 0; x < game.types(); ++x) {
        if (weights[x] == 0.0) continue;
        const auto traj = trajectory(game, strategy, x);
        double payoff = 0.0;
        double utility = 0.0;
        for (NodeId id = 0; id < tree.size(); ++id) {
            const auto& node = tree.node(id);
            const double prev = id == 0 ? 0.0 : strategy.at(x, node.parent);
            payoff += node.probability * stage_payoff(traj.utility[id], strategy.at(x, id), prev, prices[id], mode);
            utility += node.probability * traj.utility[id];
        }
        r.consumer_surplus += weights[x] * payoff;
        r.total_utility += weights[x] * utility;
    }

    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& node = tree.node(id);
        const double a = demand[id];
        const double prev = id == 0 ? 0.0 : demand[node.parent];
        r.primary_cost += node.probability * costs.primary_at(node.state).value(0.0, a);
        if (id == 0) {
            r.ancillary_cost += node.probability * costs.initial_ancillary_at(node.state).value(0.0, a);
        } else {
            const auto& h = costs.ancillary_at(tree.node(node.parent).state, node.state, n_states);
            r.ancillary_cost += node.probability * h.value(prev, a);
        }
        double paid = charged_price(prices[id], mode) * a;
        if (mode.mechanism == Mechanism::Proposed) paid += prices[id].q * prev;
        r.revenue += node.probability * paid;
    }
    r.welfare = r.total_utility - r.primary_cost - r.ancillary_cost;
    r.residual = std::abs(r.consumer_surplus + (r.revenue - r.primary_cost - r.ancillary_cost) - r.welfare);
    return r;
}

double average_retail_price(const HistoryTree& tree, std::span<const double> demand, const PricePath& prices,
                            bool include_q) {
    double paid = 0.0;
    double total = 0.0;
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& node = tree.node(id);
        paid += node.probability * prices[id].marginal() * demand[id];
        if (include_q && id != 0) paid += node.probability * prices[id].q * demand[node.parent];
        total += node.probability * demand[id];
    }
    if (total == 0.0) throw DomainError("average retail price undefined: total demand is zero");
    return paid / total;
}

void write_price_csv(std::ostream& os, const HistoryTree& tree, const PricePath& prices) {
    os << "stage,history_id,p,w,q,p_plus_w\n";
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& np = prices[id];
        os << fmt::format("{},{},{:.10g},{:.10g},{:.10g},{:.10g}\n", tree.node(id).stage, tree.label(id), np.p, np.w,
                          np.q, np.marginal());
    }
}

}  // namespace dynprice
