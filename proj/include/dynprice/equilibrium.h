#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dynprice/errors.h"
#include "dynprice/game.h"
#include "dynprice/pricing.h"

namespace dynprice {

/// A_t(h) = sum_x eta(x) nu_t(x, h) for every node.
DemandPath aggregate_demand(const ContinuumGame& game, const Strategy& strategy);

struct StageWelfare {
    double utility = 0.0;
    double primary_cost = 0.0;
    double ancillary_cost = 0.0;
    double welfare = 0.0;
};

struct WelfareReport {
    std::vector<StageWelfare> stages;  // expected contribution of each stage
    double utility = 0.0;
    double primary_cost = 0.0;
    double ancillary_cost = 0.0;
    double total = 0.0;
};

WelfareReport continuum_welfare(const ContinuumGame& game, const Strategy& strategy);

/// Expected total payoff of `type` playing `actions` (one per node) at fixed prices.
double consumer_value(const ContinuumGame& game, std::size_t type, std::span<const double> actions,
                      const PricePath& prices, const PaymentMode& mode);

struct SolveReport {
    Mechanism mechanism = Mechanism::Proposed;
    Strategy strategy;
    DemandPath demand;
    PricePath prices;  // prices as charged: q is zero unless the mechanism charges it
    WelfareReport welfare;
    double kkt_residual = 0.0;  // DOE: welfare KKT residual; MCP/flat: best-response gap
    int iterations = 0;
    bool converged = false;
    bool non_concave = false;            // multi-start disagreement (DOE only)
    std::vector<double> residual_history;  // fixed-point residuals (MCP only)
};

/// Thrown when a solver exhausts its iteration budget; carries the best iterate.
class NonConvergence : public ConvergenceError {
  public:
    NonConvergence(const std::string& what, SolveReport best) : ConvergenceError(what), best_(std::move(best)) {}
    const SolveReport& best() const { return best_; }

  private:
    SolveReport best_;
};

struct DoeConfig {
    double tol = 1e-9;
    int max_iters = 20000;  // sweeps per start
    int random_starts = 2;
    std::uint64_t seed = 7;
    std::vector<Strategy> extra_starts;
};

/// Maximizes continuum welfare over [0,B]^(types x nodes). Starts from zero,
/// B, B/2, the consume-to-cap path and `random_starts` random points, keeps
/// the best. Throws NonConvergence if the best start misses `tol`.
SolveReport solve_doe(const ContinuumGame& game, const DoeConfig& config = {});

struct McpConfig {
    double tol = 1e-8;
    int max_iters = 100000;
    double damping = 0.5;    // lambda
    double proximal = 0.25;  // initial step gamma of the regularized best response
};

/// Damped fixed point nu <- (1-lambda) nu + lambda T(nu), where T is the
/// best response at the MCP prices induced by nu, regularized by
/// |a - nu|^2 / (2 gamma). gamma halves whenever the residual grows.
SolveReport solve_mcp(const ContinuumGame& game, const McpConfig& config = {});

/// Demand of consumers facing a constant unit price, with the marginal costs
/// that demand induces (q reported as zero).
SolveReport solve_flat(const ContinuumGame& game, double rate);

struct BestResponseConfig {
    int action_grid = 2001;
    int state_grid = 201;
};

struct BestResponse {
    std::vector<double> actions;  // per node
    double value = 0.0;           // exact expected payoff of `actions`
};

/// Backward induction over (node, own state z) on a grid, forward recovery at
/// the realized states, then exact local polishing. Among equally good
/// actions the smallest wins, unless `incumbent` is given and is as good.
BestResponse best_response(const ContinuumGame& game, const PricePath& prices, std::size_t type,
                           const PaymentMode& mode, const BestResponseConfig& config = {},
                           std::optional<std::span<const double>> incumbent = std::nullopt);

enum class BoundState { Lower, Interior, Upper };

struct KKTEntry {
    double du_plus = 0.0;   // right derivative of U_t in a
    double du_minus = 0.0;  // left derivative
    double price = 0.0;     // p + w
    double g_plus = 0.0;    // E[q_next] - future utility change per unit raise
    double g_minus = 0.0;   // E[q_next] - future utility change per unit cut
    double r_plus = 0.0;    // max(0, du_plus - price - g_plus) if nu < B
    double r_minus = 0.0;   // max(0, price + g_minus - du_minus) if nu > 0
    BoundState bound = BoundState::Interior;

    double residual() const { return std::max(r_plus, r_minus); }
};

struct KKTResidual {
    std::vector<KKTEntry> entries;  // type-major, like Strategy
    double max = 0.0;
};

/// One-sided optimality conditions of the welfare program at `strategy`.
KKTResidual kkt_residual(const ContinuumGame& game, const Strategy& strategy);

/// CSV rows: mechanism, E, b0, stage, history_id, type, action, A, p, w, q, welfare, kkt_residual.
void write_solve_csv_header(std::ostream& os);
void write_solve_csv(std::ostream& os, const ContinuumGame& game, const SolveReport& report,
                     std::optional<double> E = std::nullopt, std::optional<double> b0 = std::nullopt);

}  // namespace dynprice
