#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynprice/twostage.h"

namespace dynprice {

struct GoldenEntry {
    double E = 0.0;
    double b0 = 0.0;
    Mechanism mechanism = Mechanism::Proposed;
    std::string field;
    double expected = 0.0;
    double tolerance = 0.0;
    int line = 0;
};

struct GoldenCheck {
    GoldenEntry entry;
    double actual = 0.0;
    bool pass = false;
};

/// Whitespace-separated rows "E b0 mechanism field expected tolerance";
/// '#' starts a comment. Throws ConfigError on malformed rows.
std::vector<GoldenEntry> parse_golden(const std::string& text);

/// The fixture compiled into the library.
const std::string& embedded_golden();

Mechanism parse_mechanism(std::string_view name);
double field_value(const TableRow& row, std::string_view field);
const TableRow& row_of(const TwoStageTables& tables, Mechanism mechanism);

/// Solves every distinct (E, b0) instance once and compares each entry.
std::vector<GoldenCheck> check_golden(std::span<const GoldenEntry> entries, std::vector<TwoStageTables>* solved = nullptr,
                                      unsigned threads = 0);

}  // namespace dynprice
