#include "dynprice/game.h"

#include <fmt/format.h>

#include "dynprice/errors.h"

namespace dynprice {

ContinuumGame::ContinuumGame(Scenario scenario, StateIndex s0, std::size_t node_budget)
    : scenario_(std::move(scenario)),
      tree_(enumerate_histories(scenario_.chain, s0, node_budget)),
      weights_(scenario_.type_weights(s0)) {}

ContinuumGame::ContinuumGame(Scenario scenario, StateIndex s0, std::vector<double> weights, std::size_t node_budget)
    : scenario_(std::move(scenario)),
      tree_(enumerate_histories(scenario_.chain, s0, node_budget)),
      weights_(std::move(weights)) {
    if (weights_.size() != scenario_.types.size()) {
        throw DomainError(fmt::format("{} type weights for {} types", weights_.size(), scenario_.types.size()));
    }
}

ContinuumGame ContinuumGame::reweighted(std::vector<double> weights) const {
    ContinuumGame copy = *this;
    if (weights.size() != copy.weights_.size()) throw DomainError("reweighted: wrong number of type weights");
    copy.weights_ = std::move(weights);
    return copy;
}

TypeTrajectory trajectory(const ContinuumGame& game, const Strategy& strategy, std::size_t type) {
    const auto& tree = game.tree();
    const auto& spec = game.scenario().types.at(type);
    const double z_max = game.scenario().bounds.state_max;
    TypeTrajectory out;
    out.state.resize(tree.size());
    out.utility.resize(tree.size());
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& node = tree.node(id);
        if (id == 0) {
            out.state[id] = spec.initial_state;
        } else {
            out.state[id] = spec.transition.value(node.stage, node.state, out.state[node.parent],
                                                  strategy.at(type, node.parent), z_max);
        }
        out.utility[id] = spec.utility.value(node.stage, node.state, out.state[id], strategy.at(type, id));
    }
    return out;
}

}  // namespace dynprice
