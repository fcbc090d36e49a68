#include "rbgrad/io.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>
#include <system_error>

namespace rbgrad {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return x;
}

std::uint64_t parse_uint(std::string_view text) {
  std::uint64_t x = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not an unsigned integer: '" + std::string(text) + "'");
  }
  return x;
}

std::uint64_t parse_seed_header(std::string_view line) {
  constexpr std::string_view prefix = "# seed=";
  if (!line.starts_with(prefix)) {
    throw std::invalid_argument("dataset is missing its '# seed=' header line");
  }
  return parse_uint(line.substr(prefix.size()));
}

}  // namespace rbgrad
