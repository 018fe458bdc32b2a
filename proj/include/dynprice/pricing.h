#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "dynprice/game.h"

namespace dynprice {

/// Prices at one history node. `q` is charged at this node on the previous
/// stage's action; it is zero at the root.
struct NodePrices {
    double p = 0.0;
    double w = 0.0;
    double q = 0.0;

    double marginal() const { return p + w; }
};

struct PricePath {
    std::vector<NodePrices> nodes;

    const NodePrices& operator[](NodeId id) const { return nodes[id]; }
    std::size_t size() const { return nodes.size(); }
};

enum class Mechanism { Proposed, MarginalCost, FlatRate };

struct PaymentMode {
    Mechanism mechanism = Mechanism::Proposed;
    double rate = 0.0;  // FlatRate only

    static PaymentMode proposed() { return {Mechanism::Proposed, 0.0}; }
    static PaymentMode marginal_cost() { return {Mechanism::MarginalCost, 0.0}; }
    static PaymentMode flat(double rate);
};

const char* to_string(Mechanism m);

/// p = C'(A_t), w = dH/dA_t (H_0' at the root), q = dH/dA_{t-1}, evaluated
/// analytically at each node's (parent demand, demand, state pair).
/// Throws DomainError on negative demand.
PricePath induced_prices(const CostModel& costs, const HistoryTree& tree, std::span<const double> demand);

/// Unit price a consumer pays on the current action at `node`.
double charged_price(const NodePrices& prices, const PaymentMode& mode);

/// Stage payoff given the utility already evaluated:
///   Proposed: U - (p+w) a - q a_prev;  MCP: U - (p+w) a;  flat: U - rate a.
double stage_payoff(double utility, double action, double prev_action, const NodePrices& prices,
                    const PaymentMode& mode);

/// Same, evaluating U_t(z, s, a) of `type` first.
double stage_payoff(const ConsumerTypeSpec& type, int stage, StateIndex s, double z, double action,
                    double prev_action, const NodePrices& prices, const PaymentMode& mode);

struct AccountingReport {
    double consumer_surplus = 0.0;  // sum_x eta(x) E[sum_t payoff]
    double total_utility = 0.0;
    double revenue = 0.0;           // expected payments collected by the supplier
    double primary_cost = 0.0;
    double ancillary_cost = 0.0;
    double welfare = 0.0;           // utility - primary - ancillary
    double residual = 0.0;          // |surplus + revenue - costs - welfare|
};

/// Consumer/supplier split of expected welfare. Under the proposed mechanism
/// the split reproduces welfare exactly; `residual` reports the gap.
AccountingReport accounting(const ContinuumGame& game, const Strategy& strategy, std::span<const double> demand,
                            const PricePath& prices, const PaymentMode& mode);

/// Expected money paid per unit demanded, sum (p+w) A [+ sum q A_prev] / sum A.
/// Throws DomainError when total demand is zero.
double average_retail_price(const HistoryTree& tree, std::span<const double> demand, const PricePath& prices,
                            bool include_q);

/// CSV columns: stage, history_id, p, w, q, p_plus_w
void write_price_csv(std::ostream& os, const HistoryTree& tree, const PricePath& prices);

}  // namespace dynprice
