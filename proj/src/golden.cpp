#include "dynprice/golden.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include <fmt/format.h>

#include "dynprice/parallel.h"
#include "golden_data.h"

namespace dynprice {

std::vector<GoldenEntry> parse_golden(const std::string& text) {
    std::vector<GoldenEntry> out;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        GoldenEntry e;
        std::string mech;
        if (!(row >> e.E)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw ConfigError(fmt::format("golden line {}: expected a number", number));
        }
        if (!(row >> e.b0 >> mech >> e.field >> e.expected >> e.tolerance))
            throw ConfigError(fmt::format("golden line {}: expected 6 columns", number));
        std::string extra;
        if (row >> extra) throw ConfigError(fmt::format("golden line {}: trailing '{}'", number, extra));
        e.mechanism = parse_mechanism(mech);
        TableRow probe;
        field_value(probe, e.field);
        e.line = number;
        out.push_back(std::move(e));
    }
    return out;
}

const std::string& embedded_golden() {
    static const std::string text(kGoldenTables);
    return text;
}

Mechanism parse_mechanism(std::string_view name) {
    if (name == "proposed") return Mechanism::Proposed;
    if (name == "mcp") return Mechanism::MarginalCost;
    if (name == "flat") return Mechanism::FlatRate;
    throw ConfigError(fmt::format("unknown mechanism '{}'", name));
}

double field_value(const TableRow& row, std::string_view field) {
    if (field == "a0") return row.a0;
    if (field == "a1") return row.a1;
    if (field == "welfare") return row.welfare;
    if (field == "p0w0") return row.p0w0;
    if (field == "p1w1") return row.p1w1;
    if (field == "q1") return row.q1;
    if (field == "avg_price_exq") return row.avg_price_exq;
    if (field == "avg_price_incq") return row.avg_price_incq;
    if (field == "peak_reduction_pct") return row.peak_reduction_pct;
    throw ConfigError(fmt::format("unknown table field '{}'", field));
}

const TableRow& row_of(const TwoStageTables& tables, Mechanism mechanism) {
    switch (mechanism) {
        case Mechanism::Proposed: return tables.proposed;
        case Mechanism::MarginalCost: return tables.mcp;
        case Mechanism::FlatRate: return tables.flat;
    }
    return tables.proposed;
}

std::vector<GoldenCheck> check_golden(std::span<const GoldenEntry> entries, std::vector<TwoStageTables>* solved,
                                      unsigned threads) {
    std::vector<std::pair<double, double>> instances;
    for (const auto& e : entries) {
        std::pair key{e.E, e.b0};
        if (std::find(instances.begin(), instances.end(), key) == instances.end()) instances.push_back(key);
    }
    std::vector<TwoStageTables> tables(instances.size());
    parallel_for(instances.size(), threads, [&](std::size_t i) {
        tables[i] = run_tables({instances[i].first, instances[i].second});
    });

    std::vector<GoldenCheck> out;
    for (const auto& e : entries) {
        const auto at = std::find(instances.begin(), instances.end(), std::pair{e.E, e.b0}) - instances.begin();
        GoldenCheck c{e, field_value(row_of(tables[at], e.mechanism), e.field), false};
        c.pass = std::abs(c.actual - e.expected) <= e.tolerance;
        out.push_back(std::move(c));
    }
    if (solved) *solved = std::move(tables);
    return out;
}

}  // namespace dynprice
