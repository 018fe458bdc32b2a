#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dynprice/one_sided.h"

namespace dynprice {

using StateIndex = std::size_t;
using NodeId = std::size_t;

/// Finite Markov chain driving the exogenous state s_t over stages 0..T.
struct ExogenousChain {
    std::vector<std::string> states;
    std::vector<std::vector<double>> transition;  // row-stochastic, S x S
    int horizon = 0;                               // T
    StateIndex initial_state = 0;

    std::size_t size() const { return states.size(); }
};

struct HistoryNode {
    int stage = 0;
    StateIndex state = 0;
    NodeId parent = 0;       // self for the root
    double probability = 1;  // P(h_t | s_0)
    double edge_probability = 1;
    std::vector<NodeId> children;
};

inline constexpr std::size_t kDefaultNodeBudget = 1'000'000;

/// Positive-probability exogenous histories rooted at one initial state.
/// Nodes are stored breadth first, so every parent precedes its children and
/// layer t is a contiguous id range.
class HistoryTree {
  public:
    HistoryTree() = default;
    HistoryTree(std::vector<HistoryNode> nodes, std::vector<std::vector<NodeId>> layers, std::size_t state_count);

    std::size_t size() const { return nodes_.size(); }
    int horizon() const { return static_cast<int>(layers_.size()) - 1; }
    const HistoryNode& node(NodeId id) const { return nodes_[id]; }
    const std::vector<HistoryNode>& nodes() const { return nodes_; }
    std::span<const NodeId> layer(int stage) const { return layers_[static_cast<std::size_t>(stage)]; }
    bool is_root(NodeId id) const { return id == 0; }
    StateIndex root_state() const { return nodes_.front().state; }
    /// Size S of the exogenous state space the tree was built from.
    std::size_t state_count() const { return state_count_; }

    /// States s_0..s_t along the path to `id`.
    std::vector<StateIndex> history(NodeId id) const;
    /// Stable text label such as "0-1-1".
    std::string label(NodeId id) const;

  private:
    std::vector<HistoryNode> nodes_;
    std::vector<std::vector<NodeId>> layers_;
    std::size_t state_count_ = 0;
};

/// enumerate_histories throws CapacityError when S^T exceeds `node_budget`.
HistoryTree enumerate_histories(const ExogenousChain& chain, StateIndex s0,
                                std::size_t node_budget = kDefaultNodeBudget);

/// Coefficients indexed by (stage, exogenous state). A table with a single
/// row (column) broadcasts over stages (states).
class StageStateTable {
  public:
    StageStateTable() = default;
    StageStateTable(double constant) : rows_{{constant}} {}
    StageStateTable(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {}

    double at(int stage, StateIndex state) const;
    const std::vector<std::vector<double>>& rows() const { return rows_; }
    bool empty() const { return rows_.empty(); }

  private:
    std::vector<std::vector<double>> rows_;
};

/// U_t(z, s, a) = slope * min(a, z) - curvature/2 * a^2 + state_gain * z
/// (without the cap when `capped` is false).
struct UtilitySpec {
    bool capped = true;
    StageStateTable slope{0.0};
    StageStateTable curvature{0.0};
    StageStateTable state_gain{0.0};

    Directional evaluate(int stage, StateIndex s, Directional z, Directional a) const;
    double value(int stage, StateIndex s, double z, double a) const;
};

/// z' = clamp(base(t+1, s') + state_coef*z + action_coef*a
///            + carry * max{0, z - max{a, floor}}, 0, Z)
struct TransitionSpec {
    StageStateTable base{0.0};
    double state_coef = 0.0;
    double action_coef = 0.0;
    double carry = 0.0;
    double floor = 0.0;

    Directional evaluate(int next_stage, StateIndex next_state, Directional z, Directional a,
                         double z_max) const;
    double value(int next_stage, StateIndex next_state, double z, double a, double z_max) const;
};

struct ConsumerTypeSpec {
    std::string id;
    double initial_state = 0.0;  // z_0
    std::vector<double> eta;     // weight of this type for each initial exogenous state
    UtilitySpec utility;
    TransitionSpec transition;
};

/// weight * (max{lead*A_cur - lag*A_prev - offset, 0})^2
struct HingeTerm {
    double weight = 0.0;
    double lead = 0.0;
    double lag = 0.0;
    double offset = 0.0;
};

/// Polynomial in the current demand plus hinge-quadratic terms that may also
/// involve the previous demand. Analytic first derivatives throughout.
struct CostFunction {
    std::vector<double> poly;  // poly[k] * A^k
    std::vector<HingeTerm> hinges;

    double value(double prev, double cur) const;
    double d_cur(double prev, double cur) const;
    double d_prev(double prev, double cur) const;
    double d2_cur(double prev, double cur) const;
    Directional evaluate(Directional prev, Directional cur) const;
};

struct CostModel {
    std::vector<CostFunction> primary;     // C(A, s): size 1 or S
    std::vector<CostFunction> ancillary0;  // H_0(A, s_0): size 1 or S
    std::vector<CostFunction> ancillary;   // H(A, A', s, s'): size 1 or S*S, row-major in (s, s')
    std::string reserve_policy;            // documentation only

    const CostFunction& primary_at(StateIndex s) const;
    const CostFunction& initial_ancillary_at(StateIndex s) const;
    const CostFunction& ancillary_at(StateIndex s_prev, StateIndex s, std::size_t n_states) const;
};

struct Bounds {
    double action_max = 1.0;    // B
    double state_max = 1.0;     // Z
    double marginal_cost = 1.0; // P
    double utility_max = 1.0;   // Q
};

struct Scenario {
    ExogenousChain chain;
    std::vector<ConsumerTypeSpec> types;
    CostModel costs;
    Bounds bounds;

    std::size_t type_count() const { return types.size(); }
    /// eta_{s0}(x) for every type x.
    std::vector<double> type_weights(StateIndex s0) const;
};

struct Violation {
    std::string invariant;
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

/// Number of grid points per axis used by the sampled checks (monotonicity,
/// convexity, cost/utility ranges, state range under the transition).
inline constexpr int kValidationGrid = 41;

ValidationReport validate(const Scenario& scenario);

/// Cost model of the n-consumer game: C^n(A) = n C(A/n), likewise H_0, H.
CostModel scale_to_n(const CostModel& costs, int n);

}  // namespace dynprice
