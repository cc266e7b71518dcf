#include "renewcap/series.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace renewcap {

namespace {

// Pascal's triangle up to n = 64; C(64, 32) is the largest binomial that
// fits in 64 bits.
constexpr unsigned kPascalMax = 64;

const std::array<std::array<std::uint64_t, kPascalMax + 1>, kPascalMax + 1>&
pascal_table() {
  static const auto table = [] {
    std::array<std::array<std::uint64_t, kPascalMax + 1>, kPascalMax + 1> c{};
    for (unsigned n = 0; n <= kPascalMax; ++n) {
      c[n][0] = 1;
      for (unsigned k = 1; k <= n; ++k) {
        c[n][k] = c[n - 1][k - 1] + (k <= n - 1 ? c[n - 1][k] : 0);
      }
    }
    return c;
  }();
  return table;
}

// TwoSum error-free transformation: s + e == a + b exactly.
inline void two_sum(double a, double b, double& s, double& e) {
  s = a + b;
  const double bv = s - a;
  e = (a - (s - bv)) + (b - bv);
}

}  // namespace

double poisson_tail(double x, unsigned n) {
  if (!(x >= 0.0)) {
    throw std::domain_error("poisson_tail: x must be a nonnegative real");
  }
  if (n == 0) return 1.0;
  if (x == 0.0) return 0.0;

  const long double lx = static_cast<long double>(x);
  if (static_cast<long double>(n) > lx) {
    // Tail summed directly from index n; the term ratio x/(k+1) < 1 keeps
    // every step a shrinking positive increment.
    long double term = expl(n * logl(lx) - lx - lgammal(n + 1.0L));
    long double sum = term;
    for (unsigned k = n; term > 0.0L; ++k) {
      term *= lx / (k + 1);
      sum += term;
      if (term < sum * 1e-22L) break;
    }
    double out = static_cast<double>(sum);
    return out > 1.0 ? 1.0 : out;
  }

  // n <= x: complement of the lower partial sum, built downward from its
  // largest term x^{n-1} e^{-x} / (n-1)!.
  long double term = expl((n - 1.0L) * logl(lx) - lx - lgammal(n + 0.0L));
  long double sum = term;
  for (unsigned k = n - 1; k > 0; --k) {
    term *= k / lx;
    sum += term;
  }
  double out = static_cast<double>(1.0L - sum);
  if (out < 0.0) out = 0.0;
  if (out > 1.0) out = 1.0;
  return out;
}

TailSum make_tail_sum(double x, unsigned n) {
  return TailSum{x, n, poisson_tail(x, n)};
}

Bigint binomial(unsigned n, long long k) {
  if (k < 0 || static_cast<unsigned long long>(k) > n) return 0;
  const auto uk = static_cast<unsigned>(k);
  if (n <= kPascalMax) return Bigint(pascal_table()[n][uk]);
  const unsigned m = std::min(uk, n - uk);
  Bigint result = 1;
  for (unsigned i = 1; i <= m; ++i) {
    result *= n - m + i;
    result /= i;
  }
  return result;
}

double log_binomial(unsigned n, unsigned k) {
  if (k > n) throw std::domain_error("log_binomial: k must be within 0..n");
  if (k == 0 || k == n) return 0.0;
  if (n <= kPascalMax) {
    return std::log(static_cast<double>(pascal_table()[n][k]));
  }
  // Exact value while it fits a double, otherwise Stirling via lgamma.
  const Bigint exact = binomial(n, static_cast<long long>(k));
  const double as_double = exact.convert_to<double>();
  if (std::isfinite(as_double)) return std::log(as_double);
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
         std::lgamma(n - k + 1.0);
}

CompensatedSum compensated_alternating_sum(std::span<const double> terms) {
  // Maintain the running sum as a nonoverlapping expansion (Shewchuk); the
  // partials sum to the input exactly, so the final collapse is within one
  // ulp of the true result.
  std::vector<double> partials;
  double max_abs = 0.0;
  for (double x : terms) {
    if (std::fabs(x) > max_abs) max_abs = std::fabs(x);
    std::size_t used = 0;
    for (double p : partials) {
      double s, e;
      two_sum(p, x, s, e);
      if (e != 0.0) partials[used++] = e;
      x = s;
    }
    partials.resize(used);
    if (x != 0.0) partials.push_back(x);
  }
  double value = 0.0;
  for (double p : partials) value += p;

  double digits;
  if (max_abs == 0.0) {
    digits = 0.0;
  } else if (value == 0.0) {
    digits = std::numeric_limits<double>::infinity();
  } else {
    digits = std::log10(max_abs / std::fabs(value));
    if (digits < 0.0) digits = 0.0;
  }
  return CompensatedSum{value, digits};
}

Bigint alternating_binomial_power_sum(unsigned m, unsigned d) {
  if (m < 1) {
    throw std::domain_error(
        "alternating_binomial_power_sum: m must be positive");
  }
  if (d > m) {
    throw std::domain_error(
        "alternating_binomial_power_sum: requires d <= m");
  }
  Bigint sum = 0;
  for (unsigned k = 0; k <= m; ++k) {
    Bigint term = binomial(m, k);
    if (d > 0) {
      Bigint power = 1;
      for (unsigned i = 0; i < d; ++i) power *= k;
      term *= power;
    }
    if (k % 2 == 0) {
      sum += term;
    } else {
      sum -= term;
    }
  }
  return sum;
}

}  // namespace renewcap
