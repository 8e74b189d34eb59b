#pragma once

#include <string>

namespace turnover::csv {

/// %.17g: enough digits to round-trip any double.
std::string real(double value);

}  // namespace turnover::csv
