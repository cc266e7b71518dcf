#ifndef RENEWCAP_VERIFY_HPP
#define RENEWCAP_VERIFY_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace renewcap::verify {

enum class Level { fast, full };

struct Options {
  Level level = Level::fast;
  std::uint64_t seed = 12345;
  // Test hook: a nonzero bias is injected into the analytic reference
  // values so the failure path of the report can be exercised.
  double tamper = 0.0;
};

struct CheckResult {
  std::string name;
  double measured;
  double tolerance;
  bool pass;
};

// Cross-module consistency suite: normalization, the Poisson failure
// marginal, expectation consistency, fixed-age degeneracy, closed forms vs
// quadrature, the rate asymptote, and (at full level) million-replication
// Monte Carlo agreement.
std::vector<CheckResult> run_checks(const Options& options);

int exit_status(const std::vector<CheckResult>& results);

}  // namespace renewcap::verify

#endif  // RENEWCAP_VERIFY_HPP
