#ifndef RENEWCAP_QUADRATURE_HPP
#define RENEWCAP_QUADRATURE_HPP

#include <cmath>
#include <concepts>
#include <span>

namespace renewcap {

namespace detail {

template <typename F>
double simpson_step(const F& f, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = (left + right - whole) / 15.0;
  if (depth <= 0 || std::fabs(err) <= tol) {
    return left + right + err;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature of f over [a, b] with absolute error target
// tol.  The integrand must be finite on the closed interval; callers split
// at known kinks themselves.
template <typename F>
  requires std::invocable<F&, double>
double adaptive_simpson(const F& f, double a, double b, double tol,
                        int max_depth = 52) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a);
  const double fm = f(m);
  const double fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Integrates over [a, b] split at the interior breakpoints (sorted, may lie
// outside the interval; out-of-range entries are ignored).  The error budget
// is spread over the pieces by length.
template <typename F>
  requires std::invocable<F&, double>
double adaptive_simpson_split(const F& f, double a, double b,
                              std::span<const double> breakpoints,
                              double tol) {
  if (!(b > a)) return 0.0;
  double total = 0.0;
  double left = a;
  const double length = b - a;
  auto piece = [&](double lo, double hi) {
    if (hi <= lo) return;
    const double share = tol * ((hi - lo) / length);
    total += adaptive_simpson(f, lo, hi, share > 0.0 ? share : tol);
  };
  for (double br : breakpoints) {
    if (br <= left) continue;
    if (br >= b) break;
    piece(left, br);
    left = br;
  }
  piece(left, b);
  return total;
}

}  // namespace renewcap

#endif  // RENEWCAP_QUADRATURE_HPP
