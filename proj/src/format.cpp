#include "bootband/format.hpp"

#include <charconv>
#include <system_error>

namespace bootband {

std::string format_number(double value, int digits) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, digits);
  if (res.ec != std::errc()) return "nan";
  return std::string(buf, res.ptr);
}

}  // namespace bootband
