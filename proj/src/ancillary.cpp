#include "dynprice/ancillary.h"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "dynprice/errors.h"
#include "dynprice/parallel.h"
#include "dynprice/rng.h"

namespace dynprice {

namespace {

constexpr double kPeakerWeight = 10.0;
constexpr long kChunk = 4096;
// b + (w - b) can fall one ulp short of w.
constexpr double kShedTolerance = 1e-12;

double pos(double v) { return std::max(v, 0.0); }

}  // namespace

void check(const DispatchParams& p) {
    if (!(p.r_b > 0.0 && p.r_d > 0.0 && p.omega > 0.0)) throw DomainError("r_b, r_d and omega must be positive");
    if (p.horizon < 1) throw DomainError("horizon must be at least 1");
    if (p.trials < 1) throw DomainError("trials must be at least 1");
}

Dispatch dispatch(const DispatchParams& params, std::span<const double> w) {
    Dispatch out;
    out.primary.resize(w.size());
    out.peaker.resize(w.size());
    double b = 0.0, d = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) {
        if (w[t] > 0.0) {
            b = std::min(w[t], b + params.r_b);
            d = std::min(w[t] - b, d + params.r_d);
            if (b + d < w[t] - kShedTolerance * w[t]) out.shed = true;
        } else {
            b = 0.0;
            d = 0.0;
        }
        out.primary[t] = b;
        out.peaker[t] = d;
        out.cost += b * b + kPeakerWeight * d * d;
    }
    return out;
}

double true_cost(const DispatchParams& params, std::span<const double> w) { return dispatch(params, w).cost; }

Surrogate surrogate_cost(const DispatchParams& params, std::span<const double> w) {
    Surrogate out;
    double prev = 0.0;
    for (double wt : w) {
        const double d = std::min(params.r_d, pos(wt - pos(prev) - params.r_b));
        const double b = pos(wt - d);
        const double direct = b * b + kPeakerWeight * d * d;
        const double base = pos(wt) * pos(wt);
        const double pairwise = base + pos(direct - base);
        out.cost += direct;
        out.pairwise_cost += pairwise;
        if (std::abs(pairwise - direct) > 1e-15 * std::max(1.0, direct)) ++out.mismatched_stages;
        prev = wt;
    }
    return out;
}

bool has_triple_surge(const DispatchParams& params, std::span<const double> w) {
    for (std::size_t t = 0; t + 1 < w.size(); ++t) {
        const double before = t == 0 ? 0.0 : w[t - 1];
        if (before <= 0.0 && w[t] > params.r_b && w[t + 1] > 2.0 * params.r_b) return true;
    }
    return false;
}

std::vector<double> sample_trajectory(const DispatchParams& params, std::uint64_t index) {
    SplitMix64 rng(stream_seed(params.seed, index));
    std::vector<double> w(static_cast<std::size_t>(params.horizon));
    for (double& v : w) v = params.omega * (2.0 * rng.uniform() - 1.0);
    return w;
}

ErrorPoint error_point(const DispatchParams& params, unsigned threads) {
    check(params);
    struct Partial {
        double rel = 0.0;
        long positive = 0;
        long shed = 0;
        long mismatch = 0;
    };
    const std::size_t chunks = static_cast<std::size_t>((params.trials + kChunk - 1) / kChunk);
    std::vector<Partial> parts(chunks);
    parallel_for(chunks, threads, [&](std::size_t c) {
        Partial& p = parts[c];
        const long begin = static_cast<long>(c) * kChunk;
        const long end = std::min(params.trials, begin + kChunk);
        for (long i = begin; i < end; ++i) {
            const auto w = sample_trajectory(params, static_cast<std::uint64_t>(i));
            const auto real = dispatch(params, w);
            const auto sur = surrogate_cost(params, w);
            if (real.cost > 0.0) {
                p.rel += std::abs(real.cost - sur.cost) / real.cost;
                ++p.positive;
            }
            if (real.shed) ++p.shed;
            if (sur.mismatched_stages > 0) ++p.mismatch;
        }
    });
    Partial total;
    for (const auto& p : parts) {
        total.rel += p.rel;
        total.positive += p.positive;
        total.shed += p.shed;
        total.mismatch += p.mismatch;
    }
    ErrorPoint e;
    e.omega_over_rb = params.omega / params.r_b;
    e.r_b = params.r_b;
    e.r_d = params.r_d;
    e.trials = params.trials;
    e.positive = total.positive;
    e.mean_rel_error = total.positive > 0 ? total.rel / static_cast<double>(total.positive) : 0.0;
    e.mean_rel_error_all = total.rel / static_cast<double>(params.trials);
    e.shed_rate = static_cast<double>(total.shed) / static_cast<double>(params.trials);
    e.pairwise_mismatch_rate = static_cast<double>(total.mismatch) / static_cast<double>(params.trials);
    return e;
}

std::vector<ErrorPoint> error_experiment(double r_b, double r_d, std::span<const double> ratios, long trials,
                                         std::uint64_t seed, int horizon, unsigned threads) {
    std::vector<ErrorPoint> out;
    out.reserve(ratios.size());
    for (double ratio : ratios) {
        DispatchParams p;
        p.horizon = horizon;
        p.r_b = r_b;
        p.r_d = r_d;
        p.omega = ratio * r_b;
        p.trials = trials;
        p.seed = seed;
        out.push_back(error_point(p, threads));
    }
    return out;
}

void write_error_csv_header(std::ostream& os) {
    os << "omega_over_rb,r_b,r_d,trials,mean_rel_error,shed_rate,mean_rel_error_all,pairwise_mismatch_rate\n";
}

void write_error_csv(std::ostream& os, std::span<const ErrorPoint> points) {
    for (const auto& e : points) {
        os << fmt::format("{:.10g},{:.10g},{:.10g},{},{:.10g},{:.10g},{:.10g},{:.10g}\n", e.omega_over_rb, e.r_b,
                          e.r_d, e.trials, e.mean_rel_error, e.shed_rate, e.mean_rel_error_all,
                          e.pairwise_mismatch_rate);
    }
}

}  // namespace dynprice
