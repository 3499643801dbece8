#ifndef USTAT_SELFTEST_HPP_
#define USTAT_SELFTEST_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace ustat {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::size_t checks = 0;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;  // first failing instance, if any
};

/// Randomized equivalence suites pitting the fast routines against the
/// reference implementations in oracles.hpp.
std::vector<SuiteResult> run_selftest(std::uint64_t seed);

std::string format_report(const std::vector<SuiteResult>& results);

}  // namespace ustat

#endif  // USTAT_SELFTEST_HPP_
