#ifndef RENEWCAP_RART_HPP
#define RENEWCAP_RART_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace renewcap::rart {

// Replacement-age distributions for the doubly-stochastic process: one R is
// drawn per realization and caps every interarrival of that realization.

struct Fixed {
  double r;
};

struct ShiftedExponential {
  double nu;   // hazard of the exponential part
  double eta;  // location shift; support is (eta, inf)
};

struct Uniform {
  double a;
  double b;
};

struct DensityKnot {
  double r;
  double density;
};

// Piecewise-linear density through the knots.  The density is declared only
// on [first knot, last knot]; integrals and the finiteness test refuse to
// guess outside that range, so tables must spell out their zero regions
// (including a zero prefix starting at r = 0) explicitly.
struct Tabulated {
  std::vector<DensityKnot> knots;
};

using ReplacementDistribution =
    std::variant<Fixed, ShiftedExponential, Uniform, Tabulated>;

// Validates invariants (positivity, ordering) and throws std::domain_error
// on violation.
Fixed make_fixed(double r);
ShiftedExponential make_shifted_exponential(double nu, double eta);
Uniform make_uniform(double a, double b);

// Validates knots (>= 2, strictly increasing r >= 0, densities >= 0) and
// requires the trapezoid integral to be within 1e-8 of 1; renormalize
// rescales instead of rejecting.
Tabulated make_tabulated(std::vector<DensityKnot> knots, bool renormalize);

// Two-column CSV (r, density) with an optional header line.
Tabulated load_density_csv(std::istream& in, bool renormalize);
Tabulated load_density_csv_file(const std::string& path, bool renormalize);

// Colon/comma mini-grammar carrying the whole tagged union in one token:
// fixed:r | sexp:nu,eta | unif:a,b | table:path.  Throws std::domain_error
// with the offending spec on malformed input.
ReplacementDistribution parse_replacement_spec(const std::string& spec,
                                               bool renormalize_table);

// Interpolated density; 0 outside the declared knot range.
double density_at(const Tabulated& dist, double r);

// Infimum of the support of the replacement age: r for Fixed, a for
// Uniform, eta for ShiftedExponential, the end of the leading zero-density
// prefix for Tabulated.
double support_infimum(const ReplacementDistribution& dist);

enum class Finiteness { finite, infinite, unknown };

// Whether E[N(t)] is finite for this replacement distribution.  Infinite
// exactly when the density is bounded away from 0 near the origin
// (Uniform with a = 0, ShiftedExponential with eta = 0, a table whose
// density at r = 0 is positive); finite when the density vanishes on a
// neighborhood of 0; unknown when the table gives no information there.
Finiteness divergence_check(const ReplacementDistribution& dist);

// Series term m for Uniform(a, b): the exact antiderivative of
// e^{-lambda m r} (1 + lambda (t - m r)) / (b - a) over (a, min(b, t/m)),
// 0 when t/m <= a.
double uniform_replacement_term(unsigned m, double lambda, double a, double b,
                                double t);

// Series term m for ShiftedExponential(nu, eta), eta > 0, over (eta, t/m).
// Endpoints are evaluated in log-magnitude/sign form.  Throws
// divergent_model_error for eta = 0.
double shifted_exponential_term(unsigned m, double lambda, double nu,
                                double eta, double t);

// Series term m for a tabulated density: adaptive quadrature of the
// integrand over (0, t/m], split exactly at knot boundaries.  Throws
// std::invalid_argument when the knots do not cover (0, t/m].
double tabulated_term(unsigned m, double lambda, const Tabulated& dist,
                      double t, double tol);

struct RartExpectation {
  double value;         // +inf when diverged
  unsigned terms_used;  // series terms actually summed
  double tail_bound;    // upper bound on the omitted series tail
  bool diverged;
};

// E[N(t)] = lambda t + sum_{m>=1} term_m, summed until the geometric tail
// bound (1 + lambda t) sum_{m>M} e^{-lambda m a0} falls below tol (the sum
// is exactly finite whenever t/m drops to the support infimum).  Returns
// the +inf marker without summing when divergence_check says infinite;
// throws divergent_model_error when finiteness cannot be certified.
RartExpectation expected_n(const ReplacementDistribution& dist, double lambda,
                           double t, double tol);

enum class MarkerKind { none, open, solid };

struct RartCurvePoint {
  double t;
  double value;  // E[N(t)] / t
  MarkerKind marker;
};

struct RartCurve {
  std::vector<RartCurvePoint> points;
  std::vector<double> open_markers;   // multiples of the lower support edge
  std::vector<double> solid_markers;  // multiples of the upper edge (Uniform)
};

// E[N(t)]/t over a strictly increasing positive grid; refuses divergent or
// uncertifiable distributions before computing anything.
RartCurve rate_curve(const ReplacementDistribution& dist, double lambda,
                     std::span<const double> t_grid, double tol);

}  // namespace renewcap::rart

#endif  // RENEWCAP_RART_HPP
