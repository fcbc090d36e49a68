#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rbgrad {

/// Shortest round-trip decimal form, independent of the C locale.
std::string format_double(double x);

/// Parses the whole of `text` as a double; throws std::invalid_argument.
double parse_double(std::string_view text);
std::uint64_t parse_uint(std::string_view text);

/// Reads "# seed=<n>" from a dataset header line; throws on mismatch.
std::uint64_t parse_seed_header(std::string_view line);

}  // namespace rbgrad
