#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace radstab {

/// 17 significant digits; the fixed format keeps artifacts byte-reproducible.
inline std::string fmt17(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace radstab
