#pragma once

#include <string>

namespace nsrlab {

// Locale-independent number formatting for CSV and reports.

/// Shortest representation that parses back to the same double; "nan",
/// "inf" and "-inf" for non-finite values.
std::string format_double(double value);

/// Scientific notation with `digits` digits after the decimal point.
std::string format_scientific(double value, int digits = 3);

/// Fixed notation with `digits` digits after the decimal point.
std::string format_fixed(double value, int digits = 4);

std::string pad_right(std::string s, std::size_t width);
std::string pad_left(std::string s, std::size_t width);

}  // namespace nsrlab
