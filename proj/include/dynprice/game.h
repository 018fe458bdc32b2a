#pragma once

#include <span>
#include <vector>

#include "dynprice/scenario.h"

namespace dynprice {

/// A scenario bound to one initial exogenous state: its history tree and the
/// initial type distribution (eta_{s0}, or an empirical f_0^n).
class ContinuumGame {
  public:
    ContinuumGame(Scenario scenario, StateIndex s0, std::size_t node_budget = kDefaultNodeBudget);
    ContinuumGame(Scenario scenario, StateIndex s0, std::vector<double> weights,
                  std::size_t node_budget = kDefaultNodeBudget);

    const Scenario& scenario() const { return scenario_; }
    const HistoryTree& tree() const { return tree_; }
    std::span<const double> weights() const { return weights_; }
    StateIndex initial_state() const { return tree_.root_state(); }

    std::size_t types() const { return scenario_.types.size(); }
    std::size_t nodes() const { return tree_.size(); }
    std::size_t dimension() const { return types() * nodes(); }
    std::size_t index(std::size_t type, NodeId node) const { return type * nodes() + node; }

    /// Same game with a different initial type distribution.
    ContinuumGame reweighted(std::vector<double> weights) const;

  private:
    Scenario scenario_;
    HistoryTree tree_;
    std::vector<double> weights_;
};

/// Oblivious strategy nu_t(x_0, h_t): one action per (type, history node),
/// stored type-major.
class Strategy {
  public:
    Strategy() = default;
    Strategy(std::size_t types, std::size_t nodes, double fill = 0.0)
        : types_(types), nodes_(nodes), actions_(types * nodes, fill) {}
    explicit Strategy(const ContinuumGame& game, double fill = 0.0) : Strategy(game.types(), game.nodes(), fill) {}

    std::size_t types() const { return types_; }
    std::size_t nodes() const { return nodes_; }
    double& at(std::size_t type, NodeId node) { return actions_[type * nodes_ + node]; }
    double at(std::size_t type, NodeId node) const { return actions_[type * nodes_ + node]; }
    std::span<double> actions() { return actions_; }
    std::span<const double> actions() const { return actions_; }
    std::span<const double> of_type(std::size_t type) const {
        return std::span<const double>(actions_).subspan(type * nodes_, nodes_);
    }

    friend bool operator==(const Strategy&, const Strategy&) = default;

  private:
    std::size_t types_ = 0;
    std::size_t nodes_ = 0;
    std::vector<double> actions_;
};

/// Consumer states z and stage utilities of one type along every history
/// node when it follows `strategy` (the maps l_{nu,h_t} / k_{h_t}).
struct TypeTrajectory {
    std::vector<double> state;
    std::vector<double> utility;
};

TypeTrajectory trajectory(const ContinuumGame& game, const Strategy& strategy, std::size_t type);

/// Per-node average demand, A_t = sum_x eta(x) nu_t(x, h_t).
using DemandPath = std::vector<double>;

}  // namespace dynprice
