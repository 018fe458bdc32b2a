#include "ascent.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dynprice::detail {

Program welfare_program(const ContinuumGame& game) {
    Program p;
    p.game = &game;
    p.welfare = true;
    return p;
}

Program consumer_program(const ContinuumGame& game, std::size_t type, std::vector<double> unit_price) {
    Program p;
    p.game = &game;
    p.welfare = false;
    p.consumer_type = type;
    p.unit_price = std::move(unit_price);
    return p;
}

Ascent::Ascent(Program program, AscentOptions options)
    : prog_(std::move(program)),
      opt_(options),
      tree_(&prog_.game->tree()),
      sc_(&prog_.game->scenario()),
      n_(tree_->size()),
      blocks_(prog_.blocks()),
      bound_(sc_->bounds.action_max) {
    subtree_.resize(n_);
    for (NodeId h = n_; h-- > 0;) {
        auto& s = subtree_[h];
        s.push_back(h);
        // BFS order inside the subtree: children first, then grandchildren...
        std::size_t head = 0;
        while (head < s.size()) {
            for (NodeId c : tree_->node(s[head]).children) s.push_back(c);
            ++head;
        }
    }
    zs_.resize(n_);
    as_.resize(n_);
    ds_.resize(n_);
}

double Ascent::weight(std::size_t k) const { return prog_.welfare ? prog_.game->weights()[k] : 1.0; }

void Ascent::recompute() {
    const double zmax = sc_->bounds.state_max;
    z_.assign(blocks_ * n_, 0.0);
    for (std::size_t k = 0; k < blocks_; ++k) {
        const auto& spec = sc_->types[prog_.type_of(k)];
        double* x = &x_[k * n_];
        double* z = &z_[k * n_];
        for (NodeId id = 0; id < n_; ++id) {
            const auto& node = tree_->node(id);
            z[id] = id == 0 ? spec.initial_state
                            : spec.transition.value(node.stage, node.state, z[node.parent], x[node.parent], zmax);
            if (tied_[k * n_ + id]) x[id] = std::clamp(z[id], 0.0, bound_);
        }
    }
    if (prog_.welfare) {
        demand_.assign(n_, 0.0);
        for (std::size_t k = 0; k < blocks_; ++k) {
            const double w = weight(k);
            for (NodeId id = 0; id < n_; ++id) demand_[id] += w * x_[k * n_ + id];
        }
    }
}

Directional Ascent::local(std::size_t k, NodeId h, Directional a_h, bool follow) {
    const auto& spec = sc_->types[prog_.type_of(k)];
    const double zmax = sc_->bounds.state_max;
    const std::size_t S = tree_->state_count();
    const double w = weight(k);
    const double* x = &x_[k * n_];
    const double* z = &z_[k * n_];
    const std::uint8_t* tied = &tied_[k * n_];
    Directional total{0.0};
    for (NodeId id : subtree_[h]) {
        const auto& node = tree_->node(id);
        Directional zd, ad;
        if (id == h) {
            zd = Directional{z[id]};
            ad = a_h;
        } else {
            zd = spec.transition.evaluate(node.stage, node.state, zs_[node.parent], as_[node.parent], zmax);
            ad = follow && tied[id] ? clamp(zd, 0.0, bound_) : Directional{x[id]};
        }
        zs_[id] = zd;
        as_[id] = ad;
        const Directional u = spec.utility.evaluate(node.stage, node.state, zd, ad);
        Directional term;
        if (prog_.welfare) {
            const Directional A{demand_[id] + w * (ad.v - x[id]), w * ad.d};
            ds_[id] = A;
            Directional cost = sc_->costs.primary_at(node.state).evaluate(Directional{0.0}, A);
            if (id == 0) {
                cost += sc_->costs.initial_ancillary_at(node.state).evaluate(Directional{0.0}, A);
            } else {
                const Directional prev = id == h ? Directional{demand_[node.parent]} : ds_[node.parent];
                cost += sc_->costs.ancillary_at(tree_->node(node.parent).state, node.state, S).evaluate(prev, A);
            }
            term = w * u - cost;
        } else {
            term = u - prog_.unit_price[id] * ad;
            if (prog_.prox_weight > 0.0) {
                const Directional dev = ad - Directional{prog_.prox_center[id]};
                term -= (0.5 * prog_.prox_weight) * (dev * dev);
            }
        }
        total += node.probability * term;
    }
    return total;
}

double Ascent::bracket_root(std::size_t k, NodeId h, bool follow, double v0, int dir, double span) {
    // g(u): one-sided derivative along `dir` at v0 + dir*u; g(0) > 0.
    auto g = [&](double u) { return local(k, h, Directional{v0 + dir * u, double(dir)}, follow).d; };
    if (g(span) > 0.0) return span;
    double lo = 0.0, hi = std::min(span, std::max(1e-3 * bound_, 1e-9));
    double glo = g(0.0), ghi = g(hi);
    while (ghi > 0.0) {
        lo = hi;
        glo = ghi;
        hi = std::min(span, 2.0 * hi);
        ghi = g(hi);
    }
    int side = 0;
    for (int it = 0; it < 200; ++it) {
        if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(v0) + hi)) break;
        double m = (it % 4 == 3) ? 0.5 * (lo + hi) : (lo * ghi - hi * glo) / (ghi - glo);
        if (!(m > lo && m < hi)) m = 0.5 * (lo + hi);
        const double gm = g(m);
        if (gm == 0.0) return m;
        if (gm > 0.0) {
            lo = m;
            glo = gm;
            if (side == 1) ghi *= 0.5;
            side = 1;
        } else {
            hi = m;
            ghi = gm;
            if (side == -1) glo *= 0.5;
            side = -1;
        }
    }
    return hi;
}

double Ascent::line_search(std::size_t k, NodeId h, bool follow, bool scan, double& gain) {
    const double v0 = x_[k * n_ + h];
    const double f0 = local(k, h, Directional{v0}, follow).v;
    double best_v = v0, best_f = f0;

    auto climb = [&](double from) {
        const double up = from < bound_ ? local(k, h, Directional{from, 1.0}, follow).d : -1.0;
        const double down = from > 0.0 ? local(k, h, Directional{from, -1.0}, follow).d : -1.0;
        if (up > opt_.derivative_floor) return from + bracket_root(k, h, follow, from, 1, bound_ - from);
        if (down > opt_.derivative_floor) return from - bracket_root(k, h, follow, from, -1, from);
        return from;
    };

    auto consider = [&](double v) {
        v = std::clamp(v, 0.0, bound_);
        const double f = local(k, h, Directional{v}, follow).v;
        if (f > best_f) {
            best_f = f;
            best_v = v;
        }
    };

    const double vc = std::clamp(climb(v0), 0.0, bound_);
    if (vc != v0) {
        // Near the optimum the gain drops below rounding; trust the derivative root.
        const double fc = local(k, h, Directional{vc}, follow).v;
        if (fc >= f0 - 1e-14 * (1.0 + std::abs(f0))) {
            best_v = vc;
            best_f = std::max(fc, f0);
        }
    }
    if (scan && opt_.scan_points > 0) {
        double scan_v = v0, scan_f = f0;
        for (int i = 0; i <= opt_.scan_points; ++i) {
            const double v = bound_ * i / opt_.scan_points;
            const double f = local(k, h, Directional{v}, follow).v;
            if (f > scan_f + 1e-12 * (1.0 + std::abs(scan_f))) {
                scan_f = f;
                scan_v = v;
            }
        }
        if (scan_v != v0) consider(climb(scan_v));
    }
    gain = best_f - f0;
    return best_v;
}

std::pair<double, double> Ascent::violations(const std::vector<double>& x, std::size_t block, NodeId node) {
    x_ = x;
    tied_.assign(blocks_ * n_, 0);
    recompute();
    const double v = x_[block * n_ + node];
    const double scale = tree_->node(node).probability * weight(block);
    if (scale <= 0.0) return {0.0, 0.0};
    const double up = v < bound_ ? std::max(0.0, local(block, node, Directional{v, 1.0}, false).d) : 0.0;
    const double down = v > 0.0 ? std::max(0.0, local(block, node, Directional{v, -1.0}, false).d) : 0.0;
    return {up / scale, down / scale};
}

void Ascent::tie_on_cap(std::size_t k, NodeId h) {
    bool changed = false;
    for (NodeId d : subtree_[h]) {
        const std::size_t i = k * n_ + d;
        const double zd = z_[i];
        if (!tied_[i] && zd >= 0.0 && zd <= bound_ && std::abs(x_[i] - zd) <= 1e-10 * (1.0 + std::abs(zd))) {
            tied_[i] = 1;
            changed = true;
        }
    }
    if (changed) recompute();
}

double Ascent::max_residual() {
    double r = 0.0;
    for (std::size_t k = 0; k < blocks_; ++k) {
        if (weight(k) <= 0.0) continue;
        for (NodeId h = 0; h < n_; ++h) {
            const double v = x_[k * n_ + h];
            const double scale = tree_->node(h).probability * weight(k);
            if (v < bound_) r = std::max(r, local(k, h, Directional{v, 1.0}, false).d / scale);
            if (v > 0.0) r = std::max(r, local(k, h, Directional{v, -1.0}, false).d / scale);
        }
    }
    return r;
}

double Ascent::objective(const std::vector<double>& x) {
    x_ = x;
    tied_.assign(blocks_ * n_, 0);
    recompute();
    // The root's subtree is the whole tree, so this sums every term once per block.
    double total = 0.0;
    if (prog_.welfare) {
        // Utilities per block, costs once.
        for (std::size_t k = 0; k < blocks_; ++k) {
            const auto& spec = sc_->types[prog_.type_of(k)];
            for (NodeId id = 0; id < n_; ++id) {
                const auto& node = tree_->node(id);
                total += node.probability * weight(k) *
                         spec.utility.value(node.stage, node.state, z_[k * n_ + id], x_[k * n_ + id]);
            }
        }
        const std::size_t S = tree_->state_count();
        for (NodeId id = 0; id < n_; ++id) {
            const auto& node = tree_->node(id);
            double cost = sc_->costs.primary_at(node.state).value(0.0, demand_[id]);
            if (id == 0) {
                cost += sc_->costs.initial_ancillary_at(node.state).value(0.0, demand_[id]);
            } else {
                cost += sc_->costs.ancillary_at(tree_->node(node.parent).state, node.state, S)
                            .value(demand_[node.parent], demand_[id]);
            }
            total -= node.probability * cost;
        }
        return total;
    }
    return local(0, 0, Directional{x_[0]}, false).v;
}

AscentResult Ascent::run(std::vector<double> start) {
    x_ = std::move(start);
    for (double& v : x_) v = std::clamp(v, 0.0, bound_);
    tied_.assign(blocks_ * n_, 0);
    recompute();
    for (std::size_t k = 0; k < blocks_; ++k) tie_on_cap(k, 0);

    AscentResult out;
    int sweep = 0;
    for (; sweep < opt_.max_sweeps; ++sweep) {
        bool moved = false;
        double sweep_gain = 0.0;
        const bool scan = sweep == 0;
        for (NodeId h = 0; h < n_; ++h) {
            for (std::size_t k = 0; k < blocks_; ++k) {
                if (weight(k) <= 0.0) continue;
                const std::size_t j = k * n_ + h;
                if (tied_[j]) {
                    const double v = x_[j];
                    const double up = v < bound_ ? local(k, h, Directional{v, 1.0}, true).d : -1.0;
                    const double down = v > 0.0 ? local(k, h, Directional{v, -1.0}, true).d : -1.0;
                    if (up <= opt_.derivative_floor && down <= opt_.derivative_floor) continue;
                    tied_[j] = 0;
                }
                double gain_follow = 0.0, gain_fixed = 0.0;
                const double v_follow = line_search(k, h, true, scan, gain_follow);
                const double v_fixed = line_search(k, h, false, scan, gain_fixed);
                const double v = x_[j];
                if (v_follow == v && v_fixed == v) continue;
                moved = true;
                sweep_gain += std::max(gain_follow, gain_fixed);
                if (gain_fixed > gain_follow || (gain_fixed == gain_follow && v_follow == v)) {
                    for (NodeId d : subtree_[h]) {
                        if (d != h) tied_[k * n_ + d] = 0;
                    }
                    x_[j] = v_fixed;
                } else {
                    x_[j] = v_follow;
                }
                recompute();
                tie_on_cap(k, h);
            }
        }
        if (!moved) {
            ++sweep;
            break;
        }
        const double scale = 1.0 + std::abs(local(0, 0, Directional{x_[0]}, true).v);
        if (sweep > 0 && sweep_gain <= 1e-13 * scale && max_residual() <= (sweep < 50 ? 0.01 : 1.0) * opt_.tol) {
            ++sweep;
            break;
        }
    }
    out.sweeps = sweep;
    out.residual = max_residual();
    out.converged = out.residual <= opt_.tol;
    out.x = x_;
    out.objective = objective(out.x);
    return out;
}

}  // namespace dynprice::detail
