#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Minimal comma-separated codec: no quoting, first row is the header.
namespace knobtune::csv {

/// Split one line on commas. A trailing '\r' is stripped; fields are not trimmed.
std::vector<std::string_view> split_line(std::string_view line);

/// Parse a finite double occupying the whole field. Leading '+' is accepted.
std::optional<double> parse_double(std::string_view field);

/// 17 significant digits, so parse_double(format_double(x)) == x bitwise.
std::string format_double(double value);

/// Join fields with commas.
std::string join(const std::vector<std::string>& fields);

}  // namespace knobtune::csv
