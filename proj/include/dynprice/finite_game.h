#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dynprice/equilibrium.h"

namespace dynprice {

/// n initial types drawn i.i.d. from eta; reproducible from (seed, index).
struct PopulationSample {
    int n = 0;
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
    std::vector<std::size_t> types;  // types[0] is the tagged consumer
    std::vector<int> counts;
    std::vector<double> empirical;   // f_0^n

    /// max_x |f_0^n(x) - eta(x)|
    double distance(std::span<const double> eta) const;
};

PopulationSample sample_population(std::span<const double> eta, int n, std::uint64_t seed, std::uint64_t index);

/// W^n / n for a population with the given type counts, all playing `nu`:
/// exact expectation over the history tree, costs scaled to n consumers.
double finite_welfare(const ContinuumGame& game, const Strategy& nu, std::span<const int> counts);

struct SampleStats {
    std::string experiment;
    std::string metric;
    int n = 0;
    long draws = 0;
    std::uint64_t seed = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    std::vector<double> values;  // per draw, in draw order
};

/// Realized per-consumer welfare over `draws` populations of size n.
SampleStats simulate_symmetric(const ContinuumGame& game, const Strategy& nu, int n, long draws,
                               std::uint64_t seed, unsigned threads = 0);

struct DeviationConfig {
    long draws = 32;
    int action_grid = 201;
    int state_grid = 201;
    double budget = 4e9;  // cap on nodes x z-grid x action-grid^2
};

struct DeviationResult {
    SampleStats gain;          // V_best - V_conform per draw
    double grid_error = 0.0;   // max |DP value - exact value of the recovered path|
    double min_gain = 0.0;
};

/// Payoff improvement available to one tagged consumer when the other n-1
/// follow `nu` under the proposed mechanism of the n-consumer game. The
/// comparator is a history-dependent strategy found by backward induction
/// over (node, own z, own previous action); grids contain the conforming
/// actions and states. Throws CapacityError above `budget`.
DeviationResult deviation_gain(const ContinuumGame& game, const Strategy& nu, int n, std::uint64_t seed,
                               const DeviationConfig& config = {}, unsigned threads = 0);

/// Per n: mean over draws of W^n(opt for f_0^n)/n - W^n(nu)/n, where the
/// optimum solves the welfare program with initial weights f_0^n.
std::vector<SampleStats> welfare_gap(const ContinuumGame& game, const Strategy& nu, std::span<const int> n_list,
                                     long draws, std::uint64_t seed, unsigned threads = 0);

/// CSV: experiment, n, draws, seed, mean, stderr, metric
void write_stats_csv_header(std::ostream& os);
void write_stats_csv(std::ostream& os, const SampleStats& stats);

}  // namespace dynprice
