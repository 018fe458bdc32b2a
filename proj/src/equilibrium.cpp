#include "dynprice/equilibrium.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "ascent.h"

namespace dynprice {

DemandPath aggregate_demand(const ContinuumGame& game, const Strategy& strategy) {
    DemandPath A(game.nodes(), 0.0);
    const auto w = game.weights();
    for (std::size_t x = 0; x < game.types(); ++x) {
        for (NodeId id = 0; id < game.nodes(); ++id) A[id] += w[x] * strategy.at(x, id);
    }
    return A;
}

WelfareReport continuum_welfare(const ContinuumGame& game, const Strategy& strategy) {
    const auto& tree = game.tree();
    const auto& costs = game.scenario().costs;
    const auto w = game.weights();
    const DemandPath A = aggregate_demand(game, strategy);
    WelfareReport r;
    r.stages.resize(static_cast<std::size_t>(tree.horizon()) + 1);
    for (std::size_t x = 0; x < game.types(); ++x) {
        if (w[x] == 0.0) continue;
        const auto traj = trajectory(game, strategy, x);
        for (NodeId id = 0; id < tree.size(); ++id) {
            const auto& node = tree.node(id);
            r.stages[static_cast<std::size_t>(node.stage)].utility += node.probability * w[x] * traj.utility[id];
        }
    }
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& node = tree.node(id);
        auto& st = r.stages[static_cast<std::size_t>(node.stage)];
        st.primary_cost += node.probability * costs.primary_at(node.state).value(0.0, A[id]);
        const double h = id == 0 ? costs.initial_ancillary_at(node.state).value(0.0, A[id])
                                 : costs.ancillary_at(tree.node(node.parent).state, node.state, tree.state_count())
                                       .value(A[node.parent], A[id]);
        st.ancillary_cost += node.probability * h;
    }
    for (auto& st : r.stages) {
        st.welfare = st.utility - st.primary_cost - st.ancillary_cost;
        r.utility += st.utility;
        r.primary_cost += st.primary_cost;
        r.ancillary_cost += st.ancillary_cost;
    }
    r.total = r.utility - r.primary_cost - r.ancillary_cost;
    return r;
}

double consumer_value(const ContinuumGame& game, std::size_t type, std::span<const double> actions,
                      const PricePath& prices, const PaymentMode& mode) {
    const auto& tree = game.tree();
    const auto& spec = game.scenario().types.at(type);
    const double zmax = game.scenario().bounds.state_max;
    double value = 0.0;
    std::vector<double> zs(tree.size());
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& node = tree.node(id);
        const double z = id == 0 ? spec.initial_state
                    : spec.transition.value(node.stage, node.state, zs[node.parent], actions[node.parent], zmax);
        zs[id] = z;
        const double prev = id == 0 ? 0.0 : actions[node.parent];
        value += node.probability * stage_payoff(spec, node.stage, node.state, z, actions[id], prev, prices[id], mode);
    }
    return value;
}

namespace {

/// Per-node unit price a consumer effectively pays for its own action. Under
/// the proposed mechanism the next stage's q is charged on today's action.
std::vector<double> unit_prices(const HistoryTree& tree, const PricePath& prices, const PaymentMode& mode) {
    std::vector<double> pi(tree.size());
    for (NodeId id = 0; id < tree.size(); ++id) {
        const auto& node = tree.node(id);
        switch (mode.mechanism) {
            case Mechanism::FlatRate: pi[id] = mode.rate; break;
            case Mechanism::MarginalCost: pi[id] = prices[id].marginal(); break;
            case Mechanism::Proposed: {
                double p = prices[id].marginal();
                for (NodeId c : node.children) p += tree.node(c).edge_probability * prices[c].q;
                pi[id] = p;
                break;
            }
        }
    }
    return pi;
}

Strategy cap_path(const ContinuumGame& game) {
    Strategy s(game);
    const auto& tree = game.tree();
    const double B = game.scenario().bounds.action_max;
    const double zmax = game.scenario().bounds.state_max;
    for (std::size_t x = 0; x < game.types(); ++x) {
        const auto& spec = game.scenario().types[x];
        std::vector<double> z(tree.size());
        for (NodeId id = 0; id < tree.size(); ++id) {
            const auto& node = tree.node(id);
            z[id] = id == 0 ? spec.initial_state
                            : spec.transition.value(node.stage, node.state, z[node.parent], s.at(x, node.parent), zmax);
            s.at(x, id) = std::clamp(z[id], 0.0, B);
        }
    }
    return s;
}

PricePath charged(PricePath prices, Mechanism m) {
    if (m != Mechanism::Proposed) {
        for (auto& p : prices.nodes) p.q = 0.0;
    }
    return prices;
}

/// Largest payoff improvement any type could get by best-responding.
double best_response_gap(const ContinuumGame& game, const Strategy& strategy, const PricePath& prices,
                         const PaymentMode& mode) {
    double gap = 0.0;
    for (std::size_t x = 0; x < game.types(); ++x) {
        if (game.weights()[x] == 0.0) continue;
        const auto own = strategy.of_type(x);
        const auto br = best_response(game, prices, x, mode, {}, own);
        gap = std::max(gap, br.value - consumer_value(game, x, own, prices, mode));
    }
    return gap;
}

void fill_report(const ContinuumGame& game, SolveReport& rep) {
    rep.demand = aggregate_demand(game, rep.strategy);
    rep.prices = charged(induced_prices(game.scenario().costs, game.tree(), rep.demand), rep.mechanism);
    rep.welfare = continuum_welfare(game, rep.strategy);
}

}  // namespace

SolveReport solve_doe(const ContinuumGame& game, const DoeConfig& config) {
    const double B = game.scenario().bounds.action_max;
    std::vector<Strategy> starts;
    starts.emplace_back(game, 0.0);
    starts.emplace_back(game, B);
    starts.emplace_back(game, 0.5 * B);
    starts.push_back(cap_path(game));
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unif(0.0, B);
    for (int i = 0; i < config.random_starts; ++i) {
        Strategy s(game);
        for (double& v : s.actions()) v = unif(rng);
        starts.push_back(std::move(s));
    }
    for (const auto& s : config.extra_starts) starts.push_back(s);

    detail::AscentOptions opt;
    opt.tol = config.tol;
    opt.max_sweeps = config.max_iters;
    detail::Ascent engine(detail::welfare_program(game), opt);

    detail::AscentResult best;
    bool have = false;
    double lowest = 0.0;
    int sweeps = 0;
    for (const auto& s : starts) {
        auto res = engine.run(std::vector<double>(s.actions().begin(), s.actions().end()));
        sweeps += res.sweeps;
        if (!have || res.objective > best.objective + 1e-12 * (1.0 + std::abs(best.objective)) ||
            (res.objective >= best.objective - 1e-12 * (1.0 + std::abs(best.objective)) && res.converged &&
             !best.converged)) {
            lowest = have ? std::min(lowest, res.objective) : res.objective;
            best = std::move(res);
            have = true;
        } else {
            lowest = std::min(lowest, res.objective);
        }
    }

    SolveReport rep;
    rep.mechanism = Mechanism::Proposed;
    rep.strategy = Strategy(game);
    std::copy(best.x.begin(), best.x.end(), rep.strategy.actions().begin());
    fill_report(game, rep);
    rep.kkt_residual = kkt_residual(game, rep.strategy).max;
    rep.iterations = sweeps;
    rep.non_concave = best.objective - lowest > 1e-7 * (1.0 + std::abs(best.objective));
    rep.converged = best.converged && rep.kkt_residual <= std::max(config.tol, 1e-9);
    if (!rep.converged) {
        throw NonConvergence(fmt::format("DOE solver stopped with KKT residual {:.3g} after {} sweeps",
                                         rep.kkt_residual, sweeps),
                             rep);
    }
    return rep;
}

SolveReport solve_mcp(const ContinuumGame& game, const McpConfig& config) {
    if (!(config.damping > 0.0 && config.damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");
    const auto& tree = game.tree();
    const std::size_t N = game.nodes();
    Strategy nu = cap_path(game);
    double gamma = config.proximal;
    double prev = std::numeric_limits<double>::infinity();

    SolveReport rep;
    rep.mechanism = Mechanism::MarginalCost;
    detail::AscentOptions opt;
    opt.tol = 1e-12;
    int iter = 0;
    bool done = false;
    for (; iter < config.max_iters && !done; ++iter) {
        const DemandPath A = aggregate_demand(game, nu);
        const PricePath P = induced_prices(game.scenario().costs, tree, A);
        const auto pi = unit_prices(tree, P, PaymentMode::marginal_cost());
        Strategy next = nu;
        for (std::size_t x = 0; x < game.types(); ++x) {
            if (game.weights()[x] == 0.0) continue;
            auto prog = detail::consumer_program(game, x, pi);
            prog.prox_center.assign(nu.of_type(x).begin(), nu.of_type(x).end());
            prog.prox_weight = 1.0 / gamma;
            detail::Ascent eng(std::move(prog), opt);
            const auto res = eng.run(std::vector<double>(nu.of_type(x).begin(), nu.of_type(x).end()));
            for (NodeId id = 0; id < N; ++id) {
                next.at(x, id) = (1.0 - config.damping) * nu.at(x, id) + config.damping * res.x[id];
            }
        }
        double res = 0.0;
        for (std::size_t i = 0; i < next.actions().size(); ++i) {
            res = std::max(res, std::abs(next.actions()[i] - nu.actions()[i]));
        }
        rep.residual_history.push_back(res);
        if (res > prev) gamma *= 0.5;
        prev = res;
        nu = std::move(next);
        done = res <= config.tol;
    }
    rep.strategy = nu;
    rep.iterations = iter;
    fill_report(game, rep);
    rep.kkt_residual = best_response_gap(game, nu, induced_prices(game.scenario().costs, tree, rep.demand),
                                         PaymentMode::marginal_cost());
    rep.converged = done;
    if (!done) {
        throw NonConvergence(fmt::format("MCP iteration did not reach {:.3g} in {} steps (last residual {:.3g})",
                                         config.tol, iter, prev),
                             rep);
    }
    return rep;
}

SolveReport solve_flat(const ContinuumGame& game, double rate) {
    const auto mode = PaymentMode::flat(rate);
    SolveReport rep;
    rep.mechanism = Mechanism::FlatRate;
    rep.strategy = Strategy(game);
    PricePath none;
    none.nodes.resize(game.nodes());
    for (std::size_t x = 0; x < game.types(); ++x) {
        const auto br = best_response(game, none, x, mode);
        std::copy(br.actions.begin(), br.actions.end(), rep.strategy.actions().begin() + x * game.nodes());
    }
    fill_report(game, rep);
    rep.kkt_residual = best_response_gap(game, rep.strategy, none, mode);
    rep.iterations = 1;
    rep.converged = true;
    return rep;
}

namespace {

double interpolate(const std::vector<double>& table, double z, double zmax) {
    const std::size_t G = table.size();
    if (G == 1 || zmax <= 0.0) return table.front();
    const double pos = std::clamp(z / zmax, 0.0, 1.0) * static_cast<double>(G - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(pos), G - 2);
    const double f = pos - static_cast<double>(i);
    return table[i] + f * (table[i + 1] - table[i]);
}

}  // namespace

BestResponse best_response(const ContinuumGame& game, const PricePath& prices, std::size_t type,
                           const PaymentMode& mode, const BestResponseConfig& config,
                           std::optional<std::span<const double>> incumbent) {
    const auto& tree = game.tree();
    const auto& spec = game.scenario().types.at(type);
    const double B = game.scenario().bounds.action_max;
    const double zmax = game.scenario().bounds.state_max;
    const std::size_t N = tree.size();
    const auto pi = unit_prices(tree, prices, mode);
    const int M = std::max(config.action_grid, 2);
    const int G = std::max(config.state_grid, 2);

    std::vector<std::vector<double>> V(N, std::vector<double>(static_cast<std::size_t>(G)));

    auto q_value = [&](NodeId id, double z, double a) {
        const auto& node = tree.node(id);
        double v = spec.utility.value(node.stage, node.state, z, a) - pi[id] * a;
        for (NodeId c : node.children) {
            const auto& child = tree.node(c);
            const double zc = spec.transition.value(child.stage, child.state, z, a, zmax);
            v += child.edge_probability * interpolate(V[c], zc, zmax);
        }
        return v;
    };

    // Smallest grid maximizer, then golden-section refinement of its cell pair.
    auto maximize = [&](NodeId id, double z) {
        double best_a = 0.0;
        double best_v = q_value(id, z, 0.0);
        int best_i = 0;
        for (int i = 1; i < M; ++i) {
            const double a = B * i / (M - 1);
            const double v = q_value(id, z, a);
            if (v > best_v + 1e-12 * (1.0 + std::abs(best_v))) {
                best_v = v;
                best_a = a;
                best_i = i;
            }
        }
        double lo = B * std::max(best_i - 1, 0) / (M - 1);
        double hi = B * std::min(best_i + 1, M - 1) / (M - 1);
        const double r = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
        double fc = q_value(id, z, c), fd = q_value(id, z, d);
        for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
            if (fc >= fd) {
                hi = d;
                d = c;
                fd = fc;
                c = hi - r * (hi - lo);
                fc = q_value(id, z, c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + r * (hi - lo);
                fd = q_value(id, z, d);
            }
        }
        const double a = 0.5 * (lo + hi);
        const double v = q_value(id, z, a);
        if (v > best_v + 1e-10 * (1.0 + std::abs(best_v))) return std::pair{a, v};
        return std::pair{best_a, best_v};
    };

    for (NodeId id = N; id-- > 0;) {
        for (int g = 0; g < G; ++g) {
            V[id][static_cast<std::size_t>(g)] = maximize(id, zmax * g / (G - 1)).second;
        }
    }

    std::vector<double> actions(N);
    std::vector<double> z(N);
    for (NodeId id = 0; id < N; ++id) {
        const auto& node = tree.node(id);
        z[id] = id == 0 ? spec.initial_state
                        : spec.transition.value(node.stage, node.state, z[node.parent], actions[node.parent], zmax);
        actions[id] = maximize(id, z[id]).first;
    }

    detail::AscentOptions opt;
    opt.scan_points = 0;
    opt.tol = 1e-12;
    detail::Ascent polish(detail::consumer_program(game, type, pi), opt);
    BestResponse out;
    out.actions = polish.run(actions).x;
    out.value = consumer_value(game, type, out.actions, prices, mode);
    if (incumbent) {
        auto inc = polish.run(std::vector<double>(incumbent->begin(), incumbent->end())).x;
        const double v = consumer_value(game, type, inc, prices, mode);
        if (v >= out.value - 1e-9 * (1.0 + std::abs(out.value))) {
            out.actions = std::move(inc);
            out.value = v;
        }
    }
    return out;
}

KKTResidual kkt_residual(const ContinuumGame& game, const Strategy& strategy) {
    const auto& tree = game.tree();
    const auto& sc = game.scenario();
    const double B = sc.bounds.action_max;
    const double zmax = sc.bounds.state_max;
    const auto w = game.weights();
    const DemandPath A = aggregate_demand(game, strategy);
    const PricePath P = induced_prices(sc.costs, tree, A);
    const std::size_t N = tree.size();

    KKTResidual out;
    out.entries.resize(game.types() * N);
    std::vector<Directional> zs(N);
    std::vector<NodeId> queue;
    for (std::size_t x = 0; x < game.types(); ++x) {
        if (w[x] == 0.0) continue;
        const auto& spec = sc.types[x];
        const auto traj = trajectory(game, strategy, x);
        for (NodeId h = 0; h < N; ++h) {
            const auto& node = tree.node(h);
            const double a = strategy.at(x, h);
            KKTEntry& e = out.entries[x * N + h];
            e.du_plus = spec.utility.evaluate(node.stage, node.state, Directional{traj.state[h]}, Directional{a, 1.0}).d;
            e.du_minus =
                -spec.utility.evaluate(node.stage, node.state, Directional{traj.state[h]}, Directional{a, -1.0}).d;
            e.price = P[h].marginal();
            double eq = 0.0;
            for (NodeId c : node.children) eq += tree.node(c).edge_probability * P[c].q;

            // Future utility change along +/- e_(x,h), all other actions fixed.
            auto future = [&](double dir) {
                double total = 0.0;
                queue.assign(node.children.begin(), node.children.end());
                for (std::size_t i = 0; i < queue.size(); ++i) {
                    const NodeId n = queue[i];
                    const auto& nd = tree.node(n);
                    const Directional zp = nd.parent == h ? Directional{traj.state[h]} : zs[nd.parent];
                    const Directional ap = nd.parent == h ? Directional{a, dir} : Directional{strategy.at(x, nd.parent)};
                    zs[n] = spec.transition.evaluate(nd.stage, nd.state, zp, ap, zmax);
                    total += nd.probability *
                             spec.utility.evaluate(nd.stage, nd.state, zs[n], Directional{strategy.at(x, n)}).d;
                    for (NodeId c : nd.children) queue.push_back(c);
                }
                return total / node.probability;
            };
            e.g_plus = eq - future(1.0);
            e.g_minus = eq + future(-1.0);
            e.bound = a <= 0.0 ? BoundState::Lower : (a >= B ? BoundState::Upper : BoundState::Interior);
            e.r_plus = a < B ? std::max(0.0, e.du_plus - e.price - e.g_plus) : 0.0;
            e.r_minus = a > 0.0 ? std::max(0.0, e.price + e.g_minus - e.du_minus) : 0.0;
            out.max = std::max(out.max, e.residual());
        }
    }
    return out;
}

void write_solve_csv_header(std::ostream& os) {
    os << "mechanism,E,b0,stage,history_id,type,action,A,p,w,q,welfare,kkt_residual\n";
}

void write_solve_csv(std::ostream& os, const ContinuumGame& game, const SolveReport& report,
                     std::optional<double> E, std::optional<double> b0) {
    const auto& tree = game.tree();
    const auto opt = [](std::optional<double> v) { return v ? fmt::format("{:.10g}", *v) : std::string(); };
    for (std::size_t x = 0; x < game.types(); ++x) {
        for (NodeId id = 0; id < tree.size(); ++id) {
            const auto& p = report.prices[id];
            os << fmt::format("{},{},{},{},{},{},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.10g},{:.3g}\n",
                              to_string(report.mechanism), opt(E), opt(b0), tree.node(id).stage, tree.label(id),
                              game.scenario().types[x].id, report.strategy.at(x, id), report.demand[id], p.p, p.w,
                              p.q, report.welfare.total, report.kkt_residual);
        }
    }
}

}  // namespace dynprice
