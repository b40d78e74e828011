#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace rskpca::detail {

// Shortest representation that round-trips; "nan" for NaN.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace rskpca::detail
