#pragma once

#include <string>

namespace wncs {

/// Shortest round-trip decimal form, '.' separator, no grouping; "inf",
/// "-inf" and "nan" for non-finite values.
std::string format_double(double v);

/// Inverse of format_double; throws ConfigError on malformed input.
double parse_double(const std::string& text);

}  // namespace wncs
