#include "dynprice/scenario_io.h"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dynprice/errors.h"

namespace dynprice {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key, const char* section) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(std::string("missing key '") + key + "' in " + section);
    return *it;
}

StageStateTable table_from(const json& j) {
    if (j.is_number()) return StageStateTable(j.get<double>());
    if (!j.is_array()) throw ConfigError("coefficient table must be a number or an array");
    std::vector<std::vector<double>> rows;
    for (const auto& row : j) {
        if (row.is_number()) {
            rows.push_back({row.get<double>()});
        } else {
            rows.push_back(row.get<std::vector<double>>());
        }
    }
    return StageStateTable(std::move(rows));
}

json table_to(const StageStateTable& t) {
    const auto& rows = t.rows();
    if (rows.size() == 1 && rows.front().size() == 1) return rows.front().front();
    return rows;
}

CostFunction cost_from(const json& j) {
    CostFunction f;
    if (auto it = j.find("poly"); it != j.end()) f.poly = it->get<std::vector<double>>();
    if (auto it = j.find("hinges"); it != j.end()) {
        for (const auto& h : *it) {
            f.hinges.push_back(HingeTerm{h.value("weight", 0.0), h.value("lead", 0.0), h.value("lag", 0.0),
                                         h.value("offset", 0.0)});
        }
    }
    return f;
}

json cost_to(const CostFunction& f) {
    json j = json::object();
    if (!f.poly.empty()) j["poly"] = f.poly;
    if (!f.hinges.empty()) {
        json hs = json::array();
        for (const auto& h : f.hinges) {
            hs.push_back({{"weight", h.weight}, {"lead", h.lead}, {"lag", h.lag}, {"offset", h.offset}});
        }
        j["hinges"] = hs;
    }
    return j;
}

std::vector<CostFunction> costs_from(const json& costs, const char* key) {
    std::vector<CostFunction> out;
    auto it = costs.find(key);
    if (it == costs.end()) return out;
    if (it->is_object()) {
        out.push_back(cost_from(*it));
    } else {
        for (const auto& f : *it) out.push_back(cost_from(f));
    }
    return out;
}

Scenario from_json(const json& root) {
    Scenario sc;
    const auto& chain = require(root, "chain", "scenario");
    sc.chain.states = require(chain, "states", "chain").get<std::vector<std::string>>();
    sc.chain.transition = require(chain, "transition", "chain").get<std::vector<std::vector<double>>>();
    sc.chain.horizon = require(chain, "horizon", "chain").get<int>();
    sc.chain.initial_state = chain.value("initial_state", std::size_t{0});

    for (const auto& jt : require(root, "types", "scenario")) {
        ConsumerTypeSpec t;
        t.id = jt.value("id", std::string("type") + std::to_string(sc.types.size()));
        t.initial_state = jt.value("initial_state", 0.0);
        const auto& eta = require(jt, "eta", "type");
        t.eta = eta.is_number() ? std::vector<double>{eta.get<double>()} : eta.get<std::vector<double>>();
        if (auto u = jt.find("utility"); u != jt.end()) {
            t.utility.capped = u->value("capped", true);
            if (u->contains("slope")) t.utility.slope = table_from((*u)["slope"]);
            if (u->contains("curvature")) t.utility.curvature = table_from((*u)["curvature"]);
            if (u->contains("state_gain")) t.utility.state_gain = table_from((*u)["state_gain"]);
        }
        if (auto r = jt.find("transition"); r != jt.end()) {
            if (r->contains("base")) t.transition.base = table_from((*r)["base"]);
            t.transition.state_coef = r->value("state_coef", 0.0);
            t.transition.action_coef = r->value("action_coef", 0.0);
            t.transition.carry = r->value("carry", 0.0);
            t.transition.floor = r->value("floor", 0.0);
        }
        sc.types.push_back(std::move(t));
    }

    const auto& costs = require(root, "costs", "scenario");
    sc.costs.primary = costs_from(costs, "primary");
    sc.costs.ancillary0 = costs_from(costs, "ancillary0");
    sc.costs.ancillary = costs_from(costs, "ancillary");
    sc.costs.reserve_policy = costs.value("reserve_policy", std::string{});

    const auto& b = require(root, "bounds", "scenario");
    sc.bounds.action_max = require(b, "B", "bounds").get<double>();
    sc.bounds.state_max = require(b, "Z", "bounds").get<double>();
    sc.bounds.marginal_cost = require(b, "P", "bounds").get<double>();
    sc.bounds.utility_max = require(b, "Q", "bounds").get<double>();
    return sc;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    try {
        return from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scenario parse error: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("file not found: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string dump_scenario(const Scenario& sc) {
    json root;
    root["chain"] = {{"states", sc.chain.states},
                     {"transition", sc.chain.transition},
                     {"horizon", sc.chain.horizon},
                     {"initial_state", sc.chain.initial_state}};
    json types = json::array();
    for (const auto& t : sc.types) {
        types.push_back({{"id", t.id},
                         {"initial_state", t.initial_state},
                         {"eta", t.eta},
                         {"utility",
                          {{"capped", t.utility.capped},
                           {"slope", table_to(t.utility.slope)},
                           {"curvature", table_to(t.utility.curvature)},
                           {"state_gain", table_to(t.utility.state_gain)}}},
                         {"transition",
                          {{"base", table_to(t.transition.base)},
                           {"state_coef", t.transition.state_coef},
                           {"action_coef", t.transition.action_coef},
                           {"carry", t.transition.carry},
                           {"floor", t.transition.floor}}}});
    }
    root["types"] = types;
    auto list = [](const std::vector<CostFunction>& fs) {
        json a = json::array();
        for (const auto& f : fs) a.push_back(cost_to(f));
        return a;
    };
    root["costs"] = {{"primary", list(sc.costs.primary)},
                     {"ancillary0", list(sc.costs.ancillary0)},
                     {"ancillary", list(sc.costs.ancillary)},
                     {"reserve_policy", sc.costs.reserve_policy}};
    root["bounds"] = {{"B", sc.bounds.action_max},
                      {"Z", sc.bounds.state_max},
                      {"P", sc.bounds.marginal_cost},
                      {"Q", sc.bounds.utility_max}};
    return root.dump(2) + "\n";
}

}  // namespace dynprice
