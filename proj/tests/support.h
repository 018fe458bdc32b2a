#pragma once

#include <cstdint>
#include <functional>
#include <random>

#include "dynprice/equilibrium.h"
#include "dynprice/scenario.h"

namespace dynprice::testing {

inline double central_difference(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

struct RandomScenarioLimits {
    int max_states = 3;
    int max_horizon = 3;
    int max_types = 3;
};

/// Concave welfare by construction: capped or uncapped utilities with
/// nonnegative slopes, affine transitions that never clamp on [0,Z], convex
/// polynomial and hinge costs.
inline Scenario random_concave_scenario(std::mt19937_64& rng, RandomScenarioLimits lim = {}) {
    auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto I = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    Scenario sc;
    const int S = I(1, lim.max_states);
    const int T = I(1, lim.max_horizon);
    const int X = I(1, lim.max_types);
    for (int s = 0; s < S; ++s) sc.chain.states.push_back("s" + std::to_string(s));
    sc.chain.horizon = T;
    sc.chain.transition.assign(S, std::vector<double>(S));
    for (auto& row : sc.chain.transition) {
        double sum = 0.0;
        for (double& p : row) sum += (p = U(0.1, 1.0));
        for (double& p : row) p /= sum;
    }

    auto table = [&](double lo, double hi) {
        std::vector<std::vector<double>> rows(T + 1, std::vector<double>(S));
        for (auto& r : rows)
            for (double& v : r) v = U(lo, hi);
        return StageStateTable(rows);
    };

    std::vector<std::vector<double>> eta(S, std::vector<double>(X));
    for (auto& row : eta) {
        double sum = 0.0;
        for (double& w : row) sum += (w = U(0.1, 1.0));
        for (double& w : row) w /= sum;
    }
    for (int x = 0; x < X; ++x) {
        ConsumerTypeSpec t;
        t.id = "t" + std::to_string(x);
        t.initial_state = U(0.5, 1.5);
        for (int s = 0; s < S; ++s) t.eta.push_back(eta[s][x]);
        t.utility.capped = U(0.0, 1.0) < 0.5;
        t.utility.slope = table(2.0, 8.0);
        t.utility.curvature = table(0.0, 2.0);
        t.transition.base = table(0.5, 1.0);
        t.transition.state_coef = U(0.0, 0.3);
        t.transition.action_coef = U(-0.2, 0.0);
        sc.types.push_back(std::move(t));
    }

    for (int s = 0; s < S; ++s) {
        sc.costs.primary.push_back(CostFunction{{0.0, U(0.0, 1.0), U(0.5, 2.0)}, {}});
        sc.costs.ancillary0.push_back(CostFunction{{}, {HingeTerm{U(0.0, 10.0), U(0.8, 1.2), 0.0, U(0.0, 1.0)}}});
    }
    for (int k = 0; k < S * S; ++k) {
        sc.costs.ancillary.push_back(
            CostFunction{{}, {HingeTerm{U(0.0, 20.0), U(0.8, 1.2), U(0.8, 1.2), U(0.0, 0.5)}}});
    }
    sc.bounds = Bounds{1.0, 2.0, 200.0, 40.0};
    return sc;
}

inline Strategy random_strategy(const ContinuumGame& game, std::mt19937_64& rng) {
    Strategy s(game);
    std::uniform_real_distribution<double> u(0.0, game.scenario().bounds.action_max);
    for (double& a : s.actions()) a = u(rng);
    return s;
}

}  // namespace dynprice::testing
