#include "dynprice/finite_game.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "dynprice/parallel.h"
#include "dynprice/rng.h"

namespace dynprice {

double PopulationSample::distance(std::span<const double> eta) const {
    double d = 0.0;
    for (std::size_t x = 0; x < eta.size(); ++x) d = std::max(d, std::abs(empirical.at(x) - eta[x]));
    return d;
}

PopulationSample sample_population(std::span<const double> eta, int n, std::uint64_t seed, std::uint64_t index) {
    if (n < 1) throw DomainError("population size must be at least 1");
    PopulationSample s;
    s.n = n;
    s.seed = seed;
    s.index = index;
    s.counts.assign(eta.size(), 0);
    SplitMix64 rng(stream_seed(seed, index, static_cast<std::uint64_t>(n)));
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        double acc = 0.0;
        std::size_t x = 0;
        for (; x + 1 < eta.size(); ++x) {
            acc += eta[x];
            if (u < acc) break;
        }
        s.types.push_back(x);
        ++s.counts[x];
    }
    s.empirical.resize(eta.size());
    for (std::size_t x = 0; x < eta.size(); ++x) s.empirical[x] = static_cast<double>(s.counts[x]) / n;
    return s;
}

double finite_welfare(const ContinuumGame& game, const Strategy& nu, std::span<const int> counts) {
    const auto& tree = game.tree();
    const int n = std::max(1, [&] {
        int t = 0;
        for (int c : counts) t += c;
        return t;
    }());
    const CostModel costs = scale_to_n(game.scenario().costs, n);
    const std::size_t S = tree.state_count();
    std::vector<double> A(tree.size(), 0.0);
    double total = 0.0;
    for (std::size_t x = 0; x < game.types(); ++x) {
        if (counts[x] == 0) continue;
        const auto traj = trajectory(game, nu, x);
        for (NodeId id = 0; id < tree.size(); ++id) {
            A[id] += counts[x] * nu.at(x, id);
            total += tree.node(id).probability * counts[x] * traj.utility[id];
        }
    }
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& node = tree.node(id);
        double cost = costs.primary_at(node.state).value(0.0, A[id]);
        cost += id == 0 ? costs.initial_ancillary_at(node.state).value(0.0, A[id])
                        : costs.ancillary_at(tree.node(node.parent).state, node.state, S).value(A[node.parent], A[id]);
        total -= node.probability * cost;
    }
    return total / n;
}

namespace {

void summarize(SampleStats& s) {
    s.draws = static_cast<long>(s.values.size());
    double sum = 0.0;
    for (double v : s.values) sum += v;
    s.mean = s.values.empty() ? 0.0 : sum / static_cast<double>(s.values.size());
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.stderr_ = s.values.size() > 1 ? std::sqrt(ss / static_cast<double>(s.values.size() - 1) /
                                                static_cast<double>(s.values.size()))
                                    : 0.0;
}

std::vector<double> merged_grid(double hi, int points, std::vector<double> extra) {
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = hi * i / (points - 1);
    g.insert(g.end(), extra.begin(), extra.end());
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

/// The tagged consumer's problem when the others' total demand is fixed.
class TaggedConsumer {
  public:
    TaggedConsumer(const ContinuumGame& game, std::size_t type, int n, std::vector<double> others)
        : game_(game),
          tree_(game.tree()),
          spec_(game.scenario().types[type]),
          costs_(scale_to_n(game.scenario().costs, n)),
          others_(std::move(others)) {}

    /// (p + w) a + q a_prev at node h with own actions (a, a_prev).
    double charge(NodeId h, double a, double ap) const {
        const auto& node = tree_.node(h);
        const double A = others_[h] + a;
        double price = costs_.primary_at(node.state).d_cur(0.0, A);
        if (h == 0) return (price + costs_.initial_ancillary_at(node.state).d_cur(0.0, A)) * a;
        const double prev = others_[node.parent] + ap;
        const auto& H = costs_.ancillary_at(tree_.node(node.parent).state, node.state, tree_.state_count());
        price += H.d_cur(prev, A);
        return price * a + H.d_prev(prev, A) * ap;
    }

    double utility(NodeId h, double z, double a) const {
        const auto& node = tree_.node(h);
        return spec_.utility.value(node.stage, node.state, z, a);
    }

    double next_state(NodeId c, double z, double a) const {
        const auto& node = tree_.node(c);
        return spec_.transition.value(node.stage, node.state, z, a, game_.scenario().bounds.state_max);
    }

    double value(std::span<const double> actions) const {
        std::vector<double> z(tree_.size());
        double v = 0.0;
        for (NodeId id = 0; id < tree_.size(); ++id) {
            const auto& node = tree_.node(id);
            z[id] = id == 0 ? spec_.initial_state : next_state(id, z[node.parent], actions[node.parent]);
            const double ap = id == 0 ? 0.0 : actions[node.parent];
            v += node.probability * (utility(id, z[id], actions[id]) - charge(id, actions[id], ap));
        }
        return v;
    }

    const HistoryTree& tree() const { return tree_; }
    double initial_state() const { return spec_.initial_state; }

  private:
    const ContinuumGame& game_;
    const HistoryTree& tree_;
    const ConsumerTypeSpec& spec_;
    CostModel costs_;
    std::vector<double> others_;
};

struct DpOutcome {
    double dp_value = 0.0;
    double best = 0.0;
    double conform = 0.0;
};

DpOutcome solve_tagged(const TaggedConsumer& tc, std::span<const double> conform, const DeviationConfig& cfg,
                       double B, double Z) {
    const auto& tree = tc.tree();
    const std::size_t N = tree.size();

    std::vector<double> zc(N);
    for (NodeId id = 0; id < N; ++id) {
        const auto& node = tree.node(id);
        zc[id] = id == 0 ? tc.initial_state() : tc.next_state(id, zc[node.parent], conform[node.parent]);
    }
    const auto ag = merged_grid(B, cfg.action_grid, std::vector<double>(conform.begin(), conform.end()));
    const auto zg = merged_grid(Z, cfg.state_grid, zc);
    const std::size_t na = ag.size(), nz = zg.size();
    if (static_cast<double>(N) * nz * na * na > cfg.budget) {
        throw CapacityError(fmt::format("deviation DP needs {} x {} x {}^2 cells, budget {:.3g}", N, nz, na, cfg.budget));
    }

    // V[h][iz * na + iap]
    std::vector<std::vector<double>> V(N);
    auto interp = [&](NodeId c, double z, std::size_t ia) {
        const auto& tab = V[c];
        if (z <= zg.front()) return tab[ia];
        if (z >= zg.back()) return tab[(nz - 1) * na + ia];
        const std::size_t hi = static_cast<std::size_t>(std::upper_bound(zg.begin(), zg.end(), z) - zg.begin());
        const std::size_t lo = hi - 1;
        const double f = (z - zg[lo]) / (zg[hi] - zg[lo]);
        return tab[lo * na + ia] + f * (tab[hi * na + ia] - tab[lo * na + ia]);
    };
    auto continuation = [&](NodeId h, double z, std::size_t ia) {
        double v = 0.0;
        for (NodeId c : tree.node(h).children) {
            v += tree.node(c).edge_probability * interp(c, tc.next_state(c, z, ag[ia]), ia);
        }
        return v;
    };

    std::vector<double> base(na), charge(na * na);
    for (NodeId h = N; h-- > 1;) {
        for (std::size_t ia = 0; ia < na; ++ia) {
            for (std::size_t ip = 0; ip < na; ++ip) charge[ia * na + ip] = tc.charge(h, ag[ia], ag[ip]);
        }
        V[h].assign(nz * na, -std::numeric_limits<double>::infinity());
        for (std::size_t iz = 0; iz < nz; ++iz) {
            for (std::size_t ia = 0; ia < na; ++ia) base[ia] = tc.utility(h, zg[iz], ag[ia]) + continuation(h, zg[iz], ia);
            double* row = &V[h][iz * na];
            for (std::size_t ia = 0; ia < na; ++ia) {
                const double b = base[ia];
                const double* ch = &charge[ia * na];
                for (std::size_t ip = 0; ip < na; ++ip) row[ip] = std::max(row[ip], b - ch[ip]);
            }
        }
    }

    // Forward recovery at the realized states.
    std::vector<double> path(N);
    std::vector<double> z(N);
    DpOutcome out;
    for (NodeId h = 0; h < N; ++h) {
        const auto& node = tree.node(h);
        z[h] = h == 0 ? tc.initial_state() : tc.next_state(h, z[node.parent], path[node.parent]);
        const double ap = h == 0 ? 0.0 : path[node.parent];
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t ia = 0; ia < na; ++ia) {
            const double v = tc.utility(h, z[h], ag[ia]) - tc.charge(h, ag[ia], ap) + continuation(h, z[h], ia);
            if (v > best) {
                best = v;
                path[h] = ag[ia];
            }
        }
        if (h == 0) out.dp_value = best;
    }
    out.best = tc.value(path);
    out.conform = tc.value(conform);
    return out;
}

}  // namespace

SampleStats simulate_symmetric(const ContinuumGame& game, const Strategy& nu, int n, long draws,
                               std::uint64_t seed, unsigned threads) {
    if (draws < 1) throw DomainError("draws must be at least 1");
    SampleStats s;
    s.experiment = "realized_welfare";
    s.metric = "W_n_over_n";
    s.n = n;
    s.seed = seed;
    s.values.resize(static_cast<std::size_t>(draws));
    parallel_for(s.values.size(), threads, [&](std::size_t d) {
        const auto pop = sample_population(game.weights(), n, seed, d);
        s.values[d] = finite_welfare(game, nu, pop.counts);
    });
    summarize(s);
    return s;
}

DeviationResult deviation_gain(const ContinuumGame& game, const Strategy& nu, int n, std::uint64_t seed,
                               const DeviationConfig& config, unsigned threads) {
    if (config.draws < 1) throw DomainError("draws must be at least 1");
    const double B = game.scenario().bounds.action_max;
    const double Z = game.scenario().bounds.state_max;
    DeviationResult r;
    r.gain.experiment = "deviation_gain";
    r.gain.metric = "V_best_minus_V_conform";
    r.gain.n = n;
    r.gain.seed = seed;
    r.gain.values.resize(static_cast<std::size_t>(config.draws));
    std::vector<double> errors(r.gain.values.size());
    parallel_for(r.gain.values.size(), threads, [&](std::size_t d) {
        const auto pop = sample_population(game.weights(), n, seed, d);
        const std::size_t tagged = pop.types.front();
        std::vector<double> others(game.nodes(), 0.0);
        for (std::size_t i = 1; i < pop.types.size(); ++i) {
            for (NodeId id = 0; id < game.nodes(); ++id) others[id] += nu.at(pop.types[i], id);
        }
        const TaggedConsumer tc(game, tagged, n, std::move(others));
        const auto out = solve_tagged(tc, nu.of_type(tagged), config, B, Z);
        r.gain.values[d] = out.best - out.conform;
        errors[d] = std::abs(out.dp_value - out.best);
    });
    summarize(r.gain);
    r.grid_error = *std::max_element(errors.begin(), errors.end());
    r.min_gain = *std::min_element(r.gain.values.begin(), r.gain.values.end());
    return r;
}

std::vector<SampleStats> welfare_gap(const ContinuumGame& game, const Strategy& nu, std::span<const int> n_list,
                                     long draws, std::uint64_t seed, unsigned threads) {
    if (draws < 1) throw DomainError("draws must be at least 1");
    std::vector<SampleStats> out;
    for (int n : n_list) {
        std::vector<PopulationSample> pops;
        pops.reserve(static_cast<std::size_t>(draws));
        std::map<std::vector<int>, std::size_t> distinct;
        std::vector<std::vector<int>> keys;
        for (long d = 0; d < draws; ++d) {
            pops.push_back(sample_population(game.weights(), n, seed, static_cast<std::uint64_t>(d)));
            if (distinct.emplace(pops.back().counts, keys.size()).second) keys.push_back(pops.back().counts);
        }
        std::vector<double> gap_of(keys.size());
        parallel_for(keys.size(), threads, [&](std::size_t k) {
            std::vector<double> f(keys[k].size());
            for (std::size_t x = 0; x < f.size(); ++x) f[x] = static_cast<double>(keys[k][x]) / n;
            const auto opt = solve_doe(game.reweighted(f));
            gap_of[k] = finite_welfare(game, opt.strategy, keys[k]) - finite_welfare(game, nu, keys[k]);
        });
        SampleStats s;
        s.experiment = "welfare_gap";
        s.metric = "W_opt_minus_W_nu";
        s.n = n;
        s.seed = seed;
        for (const auto& p : pops) s.values.push_back(gap_of[distinct.at(p.counts)]);
        summarize(s);
        out.push_back(std::move(s));
    }
    return out;
}

void write_stats_csv_header(std::ostream& os) { os << "experiment,n,draws,seed,mean,stderr,metric\n"; }

void write_stats_csv(std::ostream& os, const SampleStats& s) {
    os << fmt::format("{},{},{},{},{:.10g},{:.10g},{}\n", s.experiment, s.n, s.draws, s.seed, s.mean, s.stderr_,
                      s.metric);
}

}  // namespace dynprice
