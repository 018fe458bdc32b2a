#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dynprice/equilibrium.h"

namespace dynprice {

/// Two-stage, single-type instance: consumer wants 1+E at stage 0 and 1.2-E
/// at stage 1, and may shift up to E of the stage-0 load to stage 1.
struct TwoStageParams {
    double E = 0.0;     // substitutability, in [0, 0.1]
    double b0 = 1.12;   // stage-0 reserve factor
};

inline constexpr double kTwoStageB1 = 1.1;
inline constexpr double kReferencePeak = 1.2;

/// U_0 = 10 min{a, 1+E}, U_1 = 12 min{a, x_1}, x_1 = 1.2 - E + max{0, x_0 - max{a_0, 1}},
/// C = A^2, H_0 = 10 (b0 A - 1.12)_+^2, H = 20 (1.1 A_1 - b0 A_0)_+^2.
Scenario build_two_stage(const TwoStageParams& params);

/// Same market with two equally likely consumer types of substitutability
/// E_low and E_high (each type keeps its own caps and shift rule).
Scenario build_two_type(double b0 = 1.2, double E_low = 0.0, double E_high = 0.08);

struct TableRow {
    Mechanism mechanism = Mechanism::Proposed;
    double a0 = 0.0;
    double a1 = 0.0;
    double welfare = 0.0;
    double p0w0 = 0.0;
    double p1w1 = 0.0;
    double q1 = 0.0;
    double avg_price_exq = 0.0;
    double avg_price_incq = 0.0;
    double peak_reduction_pct = 0.0;  // (1.2 - max stage demand) / 1.2 * 100
};

struct TwoStageTables {
    TwoStageParams params;
    double flat_rate = 0.0;
    TableRow flat;
    TableRow mcp;
    TableRow proposed;
};

/// Solves all three mechanisms. The flat rate defaults to the MCP average
/// price (q excluded) of the same instance.
TwoStageTables run_tables(const TwoStageParams& params, std::optional<double> flat_rate = std::nullopt);

/// One run_tables per (E, b0) pair, E-major. Deterministic for any `threads`.
std::vector<TwoStageTables> sweep(std::span<const double> E_grid, std::span<const double> b0_grid,
                                  unsigned threads = 0);

/// Evenly spaced grid lo, lo+step, ..., hi (inclusive up to rounding).
std::vector<double> linear_grid(double lo, double hi, double step);

/// CSV: E, b0, mechanism, a0, a1, welfare, p0w0, p1w1, q1, avg_price_exq, avg_price_incq, peak_reduction_pct
void write_tables_csv_header(std::ostream& os);
void write_tables_csv(std::ostream& os, const TwoStageTables& tables);

}  // namespace dynprice
