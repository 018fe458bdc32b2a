#include "dynprice/scenario.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dynprice/errors.h"

namespace dynprice {

HistoryTree::HistoryTree(std::vector<HistoryNode> nodes, std::vector<std::vector<NodeId>> layers,
                         std::size_t state_count)
    : nodes_(std::move(nodes)), layers_(std::move(layers)), state_count_(state_count) {}

std::vector<StateIndex> HistoryTree::history(NodeId id) const {
    std::vector<StateIndex> path;
    for (;;) {
        path.push_back(nodes_[id].state);
        if (id == 0) break;
        id = nodes_[id].parent;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::string HistoryTree::label(NodeId id) const {
    std::string out;
    for (StateIndex s : history(id)) {
        if (!out.empty()) out += '-';
        out += std::to_string(s);
    }
    return out;
}

HistoryTree enumerate_histories(const ExogenousChain& chain, StateIndex s0, std::size_t node_budget) {
    const std::size_t n_states = chain.size();
    if (s0 >= n_states) throw DomainError(fmt::format("initial state {} not in chain of {} states", s0, n_states));
    if (chain.horizon < 0) throw DomainError("negative horizon");

    // Worst-case size check before allocating anything.
    double worst = 0.0;
    double layer = 1.0;
    for (int t = 0; t <= chain.horizon; ++t) {
        worst += layer;
        layer *= static_cast<double>(n_states);
    }
    if (worst > static_cast<double>(node_budget)) {
        throw CapacityError(fmt::format("history tree needs up to {:.0f} nodes, budget is {}", worst, node_budget));
    }

    std::vector<HistoryNode> nodes;
    std::vector<std::vector<NodeId>> layers(static_cast<std::size_t>(chain.horizon) + 1);
    nodes.push_back(HistoryNode{0, s0, 0, 1.0, 1.0, {}});
    layers[0].push_back(0);
    for (int t = 1; t <= chain.horizon; ++t) {
        for (NodeId parent : layers[static_cast<std::size_t>(t - 1)]) {
            const StateIndex s = nodes[parent].state;
            for (StateIndex next = 0; next < n_states; ++next) {
                const double p = chain.transition[s][next];
                if (!(p > 0.0)) continue;
                const NodeId id = nodes.size();
                nodes.push_back(HistoryNode{t, next, parent, nodes[parent].probability * p, p, {}});
                nodes[parent].children.push_back(id);
                layers[static_cast<std::size_t>(t)].push_back(id);
            }
        }
    }
    return HistoryTree(std::move(nodes), std::move(layers), n_states);
}

double StageStateTable::at(int stage, StateIndex state) const {
    if (rows_.empty()) return 0.0;
    const auto& row = rows_.size() == 1 ? rows_.front() : rows_.at(static_cast<std::size_t>(stage));
    if (row.empty()) return 0.0;
    return row.size() == 1 ? row.front() : row.at(state);
}

Directional UtilitySpec::evaluate(int stage, StateIndex s, Directional z, Directional a) const {
    const double k = slope.at(stage, s);
    const double c = curvature.at(stage, s);
    const double g = state_gain.at(stage, s);
    Directional used = capped ? min(a, z) : a;
    return k * used - (0.5 * c) * (a * a) + g * z;
}

double UtilitySpec::value(int stage, StateIndex s, double z, double a) const {
    return evaluate(stage, s, Directional{z}, Directional{a}).v;
}

Directional TransitionSpec::evaluate(int next_stage, StateIndex next_state, Directional z, Directional a,
                                     double z_max) const {
    Directional raw = Directional{base.at(next_stage, next_state)} + state_coef * z + action_coef * a;
    if (carry != 0.0) raw += carry * positive_part(z - max(a, Directional{floor}));
    return clamp(raw, 0.0, z_max);
}

double TransitionSpec::value(int next_stage, StateIndex next_state, double z, double a, double z_max) const {
    return evaluate(next_stage, next_state, Directional{z}, Directional{a}, z_max).v;
}

namespace {

double hinge_arg(const HingeTerm& h, double prev, double cur) { return h.lead * cur - h.lag * prev - h.offset; }

}  // namespace

double CostFunction::value(double prev, double cur) const {
    double out = 0.0;
    for (std::size_t k = poly.size(); k-- > 0;) out = out * cur + poly[k];
    for (const auto& h : hinges) {
        const double u = std::max(hinge_arg(h, prev, cur), 0.0);
        out += h.weight * u * u;
    }
    return out;
}

double CostFunction::d_cur(double prev, double cur) const {
    double out = 0.0;
    for (std::size_t k = poly.size(); k-- > 1;) out = out * cur + static_cast<double>(k) * poly[k];
    for (const auto& h : hinges) out += 2.0 * h.weight * h.lead * std::max(hinge_arg(h, prev, cur), 0.0);
    return out;
}

double CostFunction::d_prev(double prev, double cur) const {
    double out = 0.0;
    for (const auto& h : hinges) out -= 2.0 * h.weight * h.lag * std::max(hinge_arg(h, prev, cur), 0.0);
    return out;
}

double CostFunction::d2_cur(double prev, double cur) const {
    double out = 0.0;
    for (std::size_t k = poly.size(); k-- > 2;) out = out * cur + static_cast<double>(k * (k - 1)) * poly[k];
    for (const auto& h : hinges) {
        if (hinge_arg(h, prev, cur) > 0.0) out += 2.0 * h.weight * h.lead * h.lead;
    }
    return out;
}

Directional CostFunction::evaluate(Directional prev, Directional cur) const {
    Directional out{0.0};
    for (std::size_t k = poly.size(); k-- > 0;) out = out * cur + Directional{poly[k]};
    for (const auto& h : hinges) {
        Directional u = positive_part(h.lead * cur - h.lag * prev - Directional{h.offset});
        out += h.weight * (u * u);
    }
    return out;
}

namespace {

const CostFunction& pick(const std::vector<CostFunction>& fs, std::size_t index, const char* what) {
    if (fs.empty()) {
        static const CostFunction zero{};
        return zero;
    }
    if (fs.size() == 1) return fs.front();
    if (index >= fs.size()) throw DomainError(fmt::format("{} cost has no entry for index {}", what, index));
    return fs[index];
}

}  // namespace

const CostFunction& CostModel::primary_at(StateIndex s) const { return pick(primary, s, "primary"); }

const CostFunction& CostModel::initial_ancillary_at(StateIndex s) const { return pick(ancillary0, s, "ancillary0"); }

const CostFunction& CostModel::ancillary_at(StateIndex s_prev, StateIndex s, std::size_t n_states) const {
    return pick(ancillary, s_prev * n_states + s, "ancillary");
}

std::vector<double> Scenario::type_weights(StateIndex s0) const {
    std::vector<double> w;
    w.reserve(types.size());
    for (const auto& t : types) w.push_back(t.eta.size() == 1 ? t.eta.front() : t.eta.at(s0));
    return w;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    for (const auto& v : violations) os << v.invariant << ": " << v.detail << '\n';
    return os.str();
}

namespace {

std::vector<double> grid(double lo, double hi, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return g;
}

bool table_shape_ok(const StageStateTable& t, std::size_t stages, std::size_t states) {
    const auto& rows = t.rows();
    if (rows.empty()) return true;
    if (rows.size() != 1 && rows.size() != stages) return false;
    return std::all_of(rows.begin(), rows.end(),
                       [&](const auto& r) { return r.size() == 1 || r.size() == states; });
}

class Checker {
  public:
    explicit Checker(ValidationReport& r) : report_(r) {}
    void fail(std::string invariant, std::string detail) {
        report_.violations.push_back({std::move(invariant), std::move(detail)});
    }

  private:
    ValidationReport& report_;
};

void check_chain(const ExogenousChain& chain, Checker& c) {
    const std::size_t n = chain.size();
    if (n == 0) c.fail("state space empty", "S must be at least 1");
    if (chain.horizon < 0) c.fail("negative horizon", fmt::format("T = {}", chain.horizon));
    if (chain.initial_state >= std::max<std::size_t>(n, 1)) {
        c.fail("initial state out of range", fmt::format("s0 = {}", chain.initial_state));
    }
    if (chain.transition.size() != n) {
        c.fail("transition shape", fmt::format("{} rows for {} states", chain.transition.size(), n));
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = chain.transition[i];
        if (row.size() != n) {
            c.fail("transition shape", fmt::format("row {} has {} entries", i, row.size()));
            continue;
        }
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (row[j] < 0.0) c.fail("negative transition probability", fmt::format("P[{}][{}] = {}", i, j, row[j]));
            sum += row[j];
        }
        if (std::abs(sum - 1.0) > 1e-12) c.fail("row not stochastic", fmt::format("row {} sums to {:.15g}", i, sum));
    }
}

/// States reachable from z_0 under sampled action paths, one set per stage.
std::vector<std::vector<double>> reachable_states(const Scenario& sc, const ConsumerTypeSpec& type,
                                                  std::vector<double>& raw_out_of_range) {
    const int T = sc.chain.horizon;
    const auto actions = grid(0.0, sc.bounds.action_max, 11);
    std::vector<std::vector<double>> layers(static_cast<std::size_t>(T) + 1);
    layers[0] = {type.initial_state};
    const double big = 1e300;
    for (int t = 0; t < T; ++t) {
        std::set<double> next;
        for (double z : layers[static_cast<std::size_t>(t)]) {
            for (StateIndex s = 0; s < sc.chain.size(); ++s) {
                for (double a : actions) {
                    const double raw = type.transition.value(t + 1, s, z, a, big);
                    if (raw < -1e-12 || raw > sc.bounds.state_max + 1e-12) raw_out_of_range.push_back(raw);
                    next.insert(std::clamp(raw, 0.0, sc.bounds.state_max));
                }
            }
        }
        // Thin the set so long horizons stay cheap.
        std::vector<double> v(next.begin(), next.end());
        if (v.size() > 64) {
            std::vector<double> thin;
            for (std::size_t i = 0; i < 64; ++i) thin.push_back(v[i * (v.size() - 1) / 63]);
            v = std::move(thin);
        }
        layers[static_cast<std::size_t>(t) + 1] = std::move(v);
    }
    return layers;
}

void check_types(const Scenario& sc, Checker& c) {
    const std::size_t n_states = sc.chain.size();
    const std::size_t n_stages = static_cast<std::size_t>(std::max(sc.chain.horizon, 0)) + 1;
    if (sc.types.empty()) {
        c.fail("no consumer types", "at least one type required");
        return;
    }
    for (StateIndex s0 = 0; s0 < n_states; ++s0) {
        double sum = 0.0;
        for (const auto& t : sc.types) {
            if (t.eta.size() != 1 && t.eta.size() != n_states) continue;
            const double w = t.eta.size() == 1 ? t.eta.front() : t.eta[s0];
            if (w < 0.0) c.fail("negative type weight", fmt::format("type {} s0 {}: {}", t.id, s0, w));
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) c.fail("type weights not normalised", fmt::format("s0 {}: sum {:.12g}", s0, sum));
    }
    const auto as = grid(0.0, sc.bounds.action_max, kValidationGrid);
    for (const auto& t : sc.types) {
        if (t.eta.size() != 1 && t.eta.size() != n_states) {
            c.fail("type weight shape", fmt::format("type {} has {} weights for {} states", t.id, t.eta.size(), n_states));
        }
        if (t.initial_state < 0.0 || t.initial_state > sc.bounds.state_max) {
            c.fail("initial consumer state out of range", fmt::format("type {}: z0 = {}", t.id, t.initial_state));
        }
        for (const auto* table : {&t.utility.slope, &t.utility.curvature, &t.utility.state_gain, &t.transition.base}) {
            if (!table_shape_ok(*table, n_stages, n_states)) {
                c.fail("coefficient table shape", fmt::format("type {}", t.id));
            }
        }
        std::vector<double> raw_bad;
        const auto reach = reachable_states(sc, t, raw_bad);
        if (!raw_bad.empty()) {
            c.fail("transition leaves [0,Z]", fmt::format("type {}: reached {:.6g}", t.id, raw_bad.front()));
        }
        bool reported = false;
        for (int stage = 0; stage < static_cast<int>(n_stages) && !reported; ++stage) {
            for (StateIndex s = 0; s < n_states && !reported; ++s) {
                for (double z : reach[static_cast<std::size_t>(stage)]) {
                    for (double a : as) {
                        const double u = t.utility.value(stage, s, z, a);
                        if (u < -1e-12 || u > sc.bounds.utility_max + 1e-12) {
                            c.fail("utility out of [0,Q]",
                                   fmt::format("type {} stage {} z {:.6g} a {:.6g}: U = {:.6g}", t.id, stage, z, a, u));
                            reported = true;
                            break;
                        }
                    }
                    if (reported) break;
                }
            }
        }
    }
}

void check_function(const CostFunction& f, bool two_args, bool monotone, const std::string& name, const Bounds& b,
                    Checker& c) {
    const auto as = grid(0.0, b.action_max, kValidationGrid);
    const std::vector<double> prevs = two_args ? as : std::vector<double>{0.0};
    for (const auto& h : f.hinges) {
        if (h.weight < 0.0) c.fail("cost not convex", fmt::format("{}: negative hinge weight {}", name, h.weight));
    }
    bool neg = false, dec = false, conv = false, bound = false;
    for (double prev : prevs) {
        for (std::size_t i = 0; i < as.size(); ++i) {
            const double a = as[i];
            const double v = f.value(prev, a);
            if (!neg && v < -1e-12) {
                c.fail("cost negative", fmt::format("{}({:.6g}, {:.6g}) = {:.6g}", name, prev, a, v));
                neg = true;
            }
            const double dc = f.d_cur(prev, a);
            if (monotone && !dec && dc < -1e-12) {
                c.fail("primary cost decreasing", fmt::format("{}'({:.6g}) = {:.6g}", name, a, dc));
                dec = true;
            }
            if (!conv && f.d2_cur(prev, a) < -1e-9) {
                c.fail("cost not convex", fmt::format("{}''({:.6g}) = {:.6g}", name, a, f.d2_cur(prev, a)));
                conv = true;
            }
            const double dp = f.d_prev(prev, a);
            if (!bound && (std::abs(dc) > b.marginal_cost || std::abs(dp) > b.marginal_cost)) {
                c.fail("marginal cost exceeds P",
                       fmt::format("{} at ({:.6g}, {:.6g}): {:.6g}, {:.6g} > {}", name, prev, a, dc, dp, b.marginal_cost));
                bound = true;
            }
        }
    }
}

void check_costs(const Scenario& sc, Checker& c) {
    const std::size_t n = sc.chain.size();
    const auto& costs = sc.costs;
    auto count_ok = [&](std::size_t have, std::size_t want) { return have <= 1 || have == want; };
    if (!count_ok(costs.primary.size(), n)) c.fail("cost table shape", "primary");
    if (!count_ok(costs.ancillary0.size(), n)) c.fail("cost table shape", "ancillary0");
    if (!count_ok(costs.ancillary.size(), n * n)) c.fail("cost table shape", "ancillary");
    for (std::size_t i = 0; i < costs.primary.size(); ++i) {
        check_function(costs.primary[i], false, true, fmt::format("C[{}]", i), sc.bounds, c);
    }
    for (std::size_t i = 0; i < costs.ancillary0.size(); ++i) {
        check_function(costs.ancillary0[i], false, false, fmt::format("H0[{}]", i), sc.bounds, c);
    }
    for (std::size_t i = 0; i < costs.ancillary.size(); ++i) {
        check_function(costs.ancillary[i], true, false, fmt::format("H[{}]", i), sc.bounds, c);
    }
}

}  // namespace

ValidationReport validate(const Scenario& scenario) {
    ValidationReport report;
    Checker c(report);
    const auto& b = scenario.bounds;
    if (!(b.action_max > 0.0)) c.fail("bound not positive", "B");
    if (!(b.state_max > 0.0)) c.fail("bound not positive", "Z");
    if (!(b.marginal_cost > 0.0)) c.fail("bound not positive", "P");
    if (!(b.utility_max > 0.0)) c.fail("bound not positive", "Q");
    check_chain(scenario.chain, c);
    if (!report.ok()) return report;  // later checks index the chain
    check_types(scenario, c);
    check_costs(scenario, c);
    return report;
}

CostModel scale_to_n(const CostModel& costs, int n) {
    if (n < 1) throw DomainError("population size must be positive");
    const double nn = static_cast<double>(n);
    auto scale = [nn](const CostFunction& f) {
        CostFunction g = f;
        for (std::size_t k = 0; k < g.poly.size(); ++k) g.poly[k] *= std::pow(nn, 1.0 - static_cast<double>(k));
        for (auto& h : g.hinges) {
            h.weight /= nn;
            h.offset *= nn;
        }
        return g;
    };
    CostModel out = costs;
    for (auto& f : out.primary) f = scale(f);
    for (auto& f : out.ancillary0) f = scale(f);
    for (auto& f : out.ancillary) f = scale(f);
    return out;
}

}  // namespace dynprice
