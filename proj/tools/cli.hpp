#pragma once

// Command-line front end. Every command prints a JSON summary (parameters, results,
// checks) and optionally writes its data as CSV.

#include <iosfwd>
#include <string>
#include <vector>

namespace hopfscope::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitCheckFailed = 2;

/// "lo:hi:step", inclusive of lo and of the last grid point not beyond hi.
std::vector<double> parse_range(const std::string& text);
/// Comma-separated numbers.
std::vector<double> parse_list(const std::string& text);

/// HOPFSCOPE_JOBS when set to a positive integer, else 1.
int default_jobs();

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hopfscope::cli
