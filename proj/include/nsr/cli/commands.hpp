#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nsr/expr/expression.hpp"

namespace nsr::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point behind the `nsr` executable; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Point table with a header naming x1..x3 and y in any order; '#' lines are
/// skipped. Throws ParseError with the offending line number.
struct PointTable {
  std::vector<std::vector<double>> x;  // one column per variable named in the header, x1 first
  std::vector<double> y;
};
PointTable read_points_csv(std::istream& in, const std::string& source);

}  // namespace nsr::cli
