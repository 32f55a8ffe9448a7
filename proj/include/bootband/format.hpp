#pragma once

#include <string>

namespace bootband {

// Shortest-form rendering with `digits` significant digits, independent of
// the global locale.
std::string format_number(double value, int digits = 10);

}  // namespace bootband
