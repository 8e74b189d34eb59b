#include "turnover/csv.hpp"

#include <cstdio>

namespace turnover::csv {

std::string real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

}  // namespace turnover::csv
