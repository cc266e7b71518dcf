#ifndef RENEWCAP_SERIES_HPP
#define RENEWCAP_SERIES_HPP

#include <cstdint>
#include <span>

#include <boost/multiprecision/cpp_int.hpp>

namespace renewcap {

using Bigint = boost::multiprecision::cpp_int;

// A Poisson right tail P(Poisson(x) >= n) together with its arguments.
// value is in [0,1], nonincreasing in n, and equals 1 at n = 0.
struct TailSum {
  double x;
  unsigned n;
  double value;
};

// P(Poisson(x) >= n) = e^{-x} sum_{k>=n} x^k / k!, absolute error <= 1e-14.
// Evaluated via the complementary partial sum when n <= x and by direct
// term summation with ratio recursion when n > x; both branches add only
// same-sign terms.  Throws std::domain_error for negative or non-finite x.
double poisson_tail(double x, unsigned n);

TailSum make_tail_sum(double x, unsigned n);

// C(n, k) in exact integer arithmetic; 0 when k < 0 or k > n.  Values with
// n <= 64 come from a 64-bit Pascal table, larger ones from big integers.
Bigint binomial(unsigned n, long long k);

// log C(n, k) for 0 <= k <= n, suitable for assembling log-space products.
// Exact-integer based while C(n, k) stays within double range, lgamma-based
// beyond that.
double log_binomial(unsigned n, unsigned k);

struct CompensatedSum {
  double value;
  // log10(max |term| / |value|); 0 for an empty or all-zero input and +inf
  // when the terms cancel to exactly zero.  Large values mean the result
  // has few correct digits left if the inputs themselves were rounded.
  double cancellation_digits;
};

// Sums an ordered sequence of signed terms with error-free transformations
// (a running nonoverlapping expansion), so the returned value is within one
// ulp of the exact sum of the given doubles.
CompensatedSum compensated_alternating_sum(std::span<const double> terms);

// sum_{k=0}^{m} (-1)^k C(m, k) k^d in exact integers; equals 0 for d < m and
// (-1)^m m! at d = m.  Throws std::domain_error when d > m or m < 1.
Bigint alternating_binomial_power_sum(unsigned m, unsigned d);

}  // namespace renewcap

#endif  // RENEWCAP_SERIES_HPP
