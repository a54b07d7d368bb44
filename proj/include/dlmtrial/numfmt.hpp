#pragma once

#include <string>
#include <string_view>

namespace dlmtrial {

/// 17 significant digits, enough for any double to round-trip exactly.
std::string format_double(double x);

/// Strict parse of a complete field; accepts "nan", "inf", "-inf".
double parse_double(std::string_view text);

}  // namespace dlmtrial
