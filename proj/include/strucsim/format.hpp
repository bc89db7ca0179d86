#pragma once

#include <cstdio>
#include <string>

namespace strucsim {

/// Real number with 9 significant digits, the precision used by every text
/// report the toolkit writes.
inline std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

}  // namespace strucsim
