#pragma once

#include <cstdint>
#include <vector>

#include "dynprice/game.h"

namespace dynprice::detail {

/// Objective over a type-major action table. In welfare form the variables
/// cover every type and costs act on aggregate demand; in consumer form the
/// variables are one type's actions facing frozen unit prices, optionally
/// with a proximal term  prox_weight/2 * (a - center)^2  per node.
struct Program {
    const ContinuumGame* game = nullptr;
    bool welfare = true;
    std::size_t consumer_type = 0;
    std::vector<double> unit_price;
    std::vector<double> prox_center;
    double prox_weight = 0.0;

    std::size_t blocks() const { return welfare ? game->types() : 1; }
    std::size_t type_of(std::size_t block) const { return welfare ? block : consumer_type; }
};

Program welfare_program(const ContinuumGame& game);
Program consumer_program(const ContinuumGame& game, std::size_t type, std::vector<double> unit_price);

struct AscentOptions {
    double tol = 1e-9;            // normalized stationarity target
    int max_sweeps = 20000;
    int scan_points = 32;         // global 1-D scan on the first sweep
    double derivative_floor = 1e-12;
};

struct AscentResult {
    std::vector<double> x;
    double objective = 0.0;
    double residual = 0.0;  // max normalized one-sided stationarity violation
    int sweeps = 0;
    bool converged = false;
};

/// Coordinate ascent with exact one-sided line searches. Actions that land on
/// their own consumption cap (a = z) are tied to it, so later moves of
/// ancestors carry them along the cap; ties are released as soon as a free
/// move of the tied action would pay.
class Ascent {
  public:
    Ascent(Program program, AscentOptions options);

    AscentResult run(std::vector<double> start);

    /// Objective of `x` with no ties.
    double objective(const std::vector<double>& x);
    /// Normalized one-sided violations (up, down) of entry (block, node)
    /// with every other entry held fixed.
    std::pair<double, double> violations(const std::vector<double>& x, std::size_t block, NodeId node);

  private:
    Directional local(std::size_t k, NodeId h, Directional a, bool follow);
    void recompute();
    /// Ties every action of block k in the subtree of h that sits on its cap.
    void tie_on_cap(std::size_t k, NodeId h);
    double line_search(std::size_t k, NodeId h, bool follow, bool scan, double& gain);
    double bracket_root(std::size_t k, NodeId h, bool follow, double v0, int dir, double span);
    double max_residual();
    double weight(std::size_t k) const;

    Program prog_;
    AscentOptions opt_;
    const HistoryTree* tree_;
    const Scenario* sc_;
    std::size_t n_;
    std::size_t blocks_;
    double bound_;
    std::vector<std::vector<NodeId>> subtree_;
    std::vector<double> x_;
    std::vector<std::uint8_t> tied_;
    std::vector<double> z_;
    std::vector<double> demand_;
    std::vector<Directional> zs_, as_, ds_;
};

}  // namespace dynprice::detail
