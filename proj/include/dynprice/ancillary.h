#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace dynprice {

/// Two-resource dispatch against forecast errors w_t ~ U[-omega, omega].
struct DispatchParams {
    int horizon = 24;  // T
    double r_b = 0.02;
    double r_d = 0.1;
    double omega = 0.04;
    long trials = 100000;
    std::uint64_t seed = 20140601;
};

void check(const DispatchParams& params);

struct Dispatch {
    std::vector<double> primary;  // b_1..b_T
    std::vector<double> peaker;   // d_1..d_T
    double cost = 0.0;            // sum b^2 + 10 d^2
    bool shed = false;            // b_t + d_t < w_t at some stage with w_t > 0
};

/// Ramp-limited dispatch from b_0 = d_0 = 0; w holds w_1..w_T.
Dispatch dispatch(const DispatchParams& params, std::span<const double> w);
double true_cost(const DispatchParams& params, std::span<const double> w);

struct Surrogate {
    double cost = 0.0;           // sum b~^2 + 10 d~^2
    double pairwise_cost = 0.0;  // sum ((w_t)+)^2 + H(w_{t-1}, w_t)
    int mismatched_stages = 0;   // stages where the two forms disagree
};

/// d~_t = min{r_d, (w_t - (w_{t-1})+ - r_b)+}, b~_t = (w_t - d~_t)+, w_0 = 0.
/// H = (b~^2 + 10 d~^2 - ((w_t)+)^2)+ depends on (w_{t-1}, w_t) only.
Surrogate surrogate_cost(const DispatchParams& params, std::span<const double> w);

/// A stage with w_{t-1} <= 0, w_t > r_b and w_{t+1} > 2 r_b.
bool has_triple_surge(const DispatchParams& params, std::span<const double> w);

/// Trajectory `index` of the experiment: T uniforms from its own stream.
std::vector<double> sample_trajectory(const DispatchParams& params, std::uint64_t index);

struct ErrorPoint {
    double omega_over_rb = 0.0;
    double r_b = 0.0;
    double r_d = 0.0;
    long trials = 0;
    long positive = 0;               // trajectories with C > 0
    double mean_rel_error = 0.0;     // mean |C - C~| / C over C > 0
    double mean_rel_error_all = 0.0; // C = 0 counted as zero error
    double shed_rate = 0.0;
    double pairwise_mismatch_rate = 0.0;  // trajectories where the pairwise form differs
};

ErrorPoint error_point(const DispatchParams& params, unsigned threads = 0);

/// One point per ratio omega / r_b; the stream of each trajectory depends on
/// (seed, trajectory index) only, so curves with proportional (r_b, r_d)
/// see proportional noise.
std::vector<ErrorPoint> error_experiment(double r_b, double r_d, std::span<const double> ratios, long trials,
                                         std::uint64_t seed, int horizon = 24, unsigned threads = 0);

/// CSV: omega_over_rb, r_b, r_d, trials, mean_rel_error, shed_rate
/// (plus mean_rel_error_all and pairwise_mismatch_rate).
void write_error_csv_header(std::ostream& os);
void write_error_csv(std::ostream& os, std::span<const ErrorPoint> points);

}  // namespace dynprice
