#include "renewcap/raft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "renewcap/errors.hpp"
#include "renewcap/series.hpp"

namespace renewcap::raft {

namespace {

using Float50 = boost::multiprecision::cpp_bin_float_50;
using Float100 = boost::multiprecision::cpp_bin_float_100;

// Block indices above this lose too many digits even in extended precision.
constexpr unsigned kMaxBlockIndex = 200;

// Cancellation-digit thresholds at which each precision tier gives up and
// hands the cell to the next one.
constexpr double kDoubleDigits = 12.0;
constexpr double kFloat50Digits = 35.0;
constexpr double kFloat100Digits = 85.0;

constexpr double kNegativeClamp = 1e-14;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::domain_error(std::string(name) + " must be a positive real");
  }
}

// e^{log_coeff - mu} base^l / l! in one exponentiation.  death_pmf and the
// i = 0 term of a j = 0 cell must go through the same expression so they
// agree bit for bit.
double poisson_weight(double log_coeff, double mu, double base, unsigned l) {
  if (l == 0) return std::exp(log_coeff - mu);
  return std::exp(log_coeff - mu + l * std::log(base) -
                  std::lgamma(l + 1.0));
}

double binomial_as_double(unsigned n, unsigned k) {
  if (k > n) return 0.0;
  const double exact = binomial(n, static_cast<long long>(k)).convert_to<double>();
  if (std::isfinite(exact)) return exact;
  return std::exp(log_binomial(n, k));
}

struct CellEval {
  double value;
  double digits;    // log10(max |term| / |sum|)
  double max_term;  // largest term magnitude, prefactor included
};

// Alternating sum of the joint-cell terms in double precision.  Every term
// carries the full prefactor, so the compensated result is the probability
// itself and the cancellation diagnostic reflects the finished cell.
CellEval cell_double(const RaftParams& p, double t, unsigned k, unsigned l,
                     unsigned i_max) {
  const double mu = p.lambda * t;
  const double log_coeff_base = log_binomial(k + l, k);
  std::vector<double> terms;
  terms.reserve(i_max + 1);
  double max_term = 0.0;
  for (unsigned i = 0; i <= i_max; ++i) {
    const double arg = p.lambda * (t - (static_cast<double>(i) + k) * p.r);
    double mag;
    if (arg <= 0.0) {
      mag = l == 0 ? std::exp(log_coeff_base + log_binomial(l + 1, i) - mu)
                   : 0.0;
    } else {
      mag = poisson_weight(log_coeff_base + log_binomial(l + 1, i), mu, arg, l);
    }
    max_term = std::max(max_term, mag);
    terms.push_back(i % 2 == 0 ? mag : -mag);
  }
  const CompensatedSum sum = compensated_alternating_sum(terms);
  return CellEval{sum.value, sum.cancellation_digits, max_term};
}

// Same cell in extended precision with exact integer binomials.  The
// diagnostic is the cancellation of the alternating core; the positive
// prefactor cannot change the ratio.
template <typename Real>
CellEval cell_extended(const RaftParams& p, double t, unsigned k, unsigned l,
                       unsigned i_max) {
  using boost::multiprecision::abs;
  using boost::multiprecision::exp;
  using boost::multiprecision::log10;
  using boost::multiprecision::pow;

  const Real lambda(p.lambda);
  const Real r(p.r);
  const Real tt(t);
  Real sum = 0;
  Real max_abs = 0;
  for (unsigned i = 0; i <= i_max; ++i) {
    const Real arg = lambda * (tt - (Real(i) + Real(k)) * r);
    Real mag;
    if (arg <= 0) {
      mag = l == 0 ? Real(1) : Real(0);
    } else {
      mag = pow(arg, static_cast<int>(l));
    }
    Real term = Real(binomial(l + 1, i)) * mag;
    if (abs(term) > max_abs) max_abs = abs(term);
    if (i % 2 == 0) {
      sum += term;
    } else {
      sum -= term;
    }
  }
  double digits;
  if (max_abs == 0) {
    digits = 0.0;
  } else if (sum == 0) {
    digits = std::numeric_limits<double>::infinity();
  } else {
    digits = std::max(0.0, static_cast<double>(log10(max_abs / abs(sum))));
  }
  Real factorial = 1;
  for (unsigned i = 2; i <= l; ++i) factorial *= i;
  const Real prefactor = exp(-lambda * tt) * Real(binomial(k + l, k));
  const double value = (prefactor * sum / factorial).template convert_to<double>();
  const double max_term =
      (prefactor * max_abs / factorial).template convert_to<double>();
  return CellEval{value, digits, max_term};
}

// Accepts a tier's result when enough relative digits survived, or when the
// tier's absolute error bound is already far below every tolerance in use
// (cells with k + l + 1 <= j are exact zeros through an (l+1)-th finite
// difference, and far-tail cells carry masses no precision can resolve
// relatively).
bool tier_acceptable(const CellEval& eval, double digit_limit,
                     double per_term_error, double abs_floor) {
  if (eval.digits <= digit_limit) return true;
  return eval.max_term * per_term_error < abs_floor;
}

double finish_cell(const CellEval& eval) {
  if (eval.value >= 0.0) return eval.value;
  if (eval.value >= -kNegativeClamp) return 0.0;
  throw numerical_instability_error(
      "joint cell evaluated to a significantly negative probability");
}

double cell_value(const RaftParams& p, double t, unsigned k, unsigned l) {
  const unsigned j = block_index(t, p.r);
  if (k > j) return 0.0;
  if (j > kMaxBlockIndex) {
    throw numerical_instability_error(
        "joint pmf supports block index t/r up to 200");
  }
  const unsigned i_max = std::min(j - k, l + 1);

  const CellEval plain = cell_double(p, t, k, l, i_max);
  if (tier_acceptable(plain, kDoubleDigits, 1e-12, 1e-22) &&
      plain.value >= -kNegativeClamp) {
    return plain.value < 0.0 ? 0.0 : plain.value;
  }

  const CellEval mid = cell_extended<Float50>(p, t, k, l, i_max);
  if (mid.value == 0.0) return 0.0;
  if (tier_acceptable(mid, kFloat50Digits, 1e-45, 1e-25)) {
    return finish_cell(mid);
  }

  const CellEval wide = cell_extended<Float100>(p, t, k, l, i_max);
  if (wide.value == 0.0) return 0.0;
  if (tier_acceptable(wide, kFloat100Digits, 1e-95, 1e-30)) {
    return finish_cell(wide);
  }
  throw numerical_instability_error(
      "joint cell lost all significant digits to cancellation");
}

}  // namespace

RaftParams make_params(double lambda, double r) {
  require_positive(lambda, "lambda");
  require_positive(r, "r");
  return RaftParams{lambda, r};
}

unsigned block_index(double t, double r) {
  require_positive(t, "t");
  require_positive(r, "r");
  const double q = t / r;
  if (q > 4e9) return std::numeric_limits<unsigned>::max();
  const double nearest = std::nearbyint(q);
  const double tol =
      4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, q);
  if (std::fabs(q - nearest) <= tol) {
    return static_cast<unsigned>(nearest);
  }
  return static_cast<unsigned>(std::floor(q));
}

bool on_multiple(double value, double step) {
  const double q = value / step;
  const double nearest = std::nearbyint(q);
  if (nearest < 1.0) return false;
  const double tol =
      4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, q);
  return std::fabs(q - nearest) <= tol;
}

double capped_arrival_prob(const RaftParams& params, unsigned n, double t) {
  if (n < 1) throw std::domain_error("n must be a positive integer");
  require_positive(t, "t");
  const unsigned j = block_index(t, params.r);
  const unsigned i_max = std::min(j, n);
  std::vector<double> terms;
  terms.reserve(i_max + 1);
  for (unsigned i = 0; i <= i_max; ++i) {
    const double arg = std::max(0.0, params.lambda * (t - i * params.r));
    const double mag = binomial_as_double(n, i) *
                       std::exp(-params.lambda * i * params.r) *
                       poisson_tail(arg, n);
    terms.push_back(i % 2 == 0 ? mag : -mag);
  }
  const double value = compensated_alternating_sum(terms).value;
  return std::clamp(value, 0.0, 1.0);
}

double joint_pmf_cell(const RaftParams& params, double t, unsigned k,
                      unsigned l) {
  require_positive(t, "t");
  return cell_value(params, t, k, l);
}

double death_pmf(double lambda, double t, unsigned l) {
  require_positive(lambda, "lambda");
  require_positive(t, "t");
  const double mu = lambda * t;
  return poisson_weight(0.0, mu, mu, l);
}

double alive_expectation(const RaftParams& params, double t) {
  require_positive(t, "t");
  const unsigned j = block_index(t, params.r);
  long double sum = 0.0L;
  for (unsigned m = 1; m <= j; ++m) {
    const long double decay = expl(-static_cast<long double>(params.lambda) *
                                   m * params.r);
    if (decay == 0.0L) break;
    sum += decay * (1.0L + params.lambda * (t - static_cast<double>(m) * params.r));
  }
  return static_cast<double>(sum);
}

double n_pmf(const RaftParams& params, double t, unsigned n) {
  require_positive(t, "t");
  const unsigned j = block_index(t, params.r);
  const unsigned k_max = std::min(j, n);
  long double sum = 0.0L;
  for (unsigned k = 0; k <= k_max; ++k) {
    sum += cell_value(params, t, k, n - k);
  }
  return static_cast<double>(std::min<long double>(sum, 1.0L));
}

double expected_n(const RaftParams& params, double t) {
  require_positive(t, "t");
  return params.lambda * t + alive_expectation(params, t);
}

double rate_asymptote(const RaftParams& params) {
  return params.lambda / -std::expm1(-params.lambda * params.r);
}

JointPmf::JointPmf(RaftParams params, double t, unsigned j, unsigned l_max,
                   double truncated_mass, std::vector<double> probs)
    : params_(params),
      t_(t),
      j_(j),
      l_max_(l_max),
      truncated_mass_(truncated_mass),
      probs_(std::move(probs)) {}

double JointPmf::prob(unsigned k, unsigned l) const {
  if (k > j_ || l > l_max_) return 0.0;
  return probs_[static_cast<std::size_t>(k) * (l_max_ + 1) + l];
}

double JointPmf::total_mass() const {
  long double sum = 0.0L;
  for (double p : probs_) sum += p;
  return static_cast<double>(sum);
}

double JointPmf::alive_marginal_mean() const {
  long double sum = 0.0L;
  for (unsigned k = 1; k <= j_; ++k) {
    long double row = 0.0L;
    for (unsigned l = 0; l <= l_max_; ++l) row += prob(k, l);
    sum += static_cast<long double>(k) * row;
  }
  return static_cast<double>(sum);
}

JointPmf joint_pmf_table(const RaftParams& params, double t, double mass_tol) {
  require_positive(t, "t");
  if (!(mass_tol > 0.0) || !(mass_tol < 1.0)) {
    throw std::domain_error("mass_tol must lie strictly between 0 and 1");
  }
  const unsigned j = block_index(t, params.r);
  if (j > kMaxBlockIndex) {
    throw numerical_instability_error(
        "joint pmf supports block index t/r up to 200");
  }
  const double mu = params.lambda * t;

  // The failure marginal is exactly Poisson(mu), so the truncation index
  // can be read off the exact tail rather than guessed.
  unsigned l_max = 0;
  while (poisson_tail(mu, l_max + 1) >= mass_tol) ++l_max;
  const double truncated = poisson_tail(mu, l_max + 1);

  std::vector<double> probs(static_cast<std::size_t>(j + 1) * (l_max + 1));
  for (unsigned k = 0; k <= j; ++k) {
    for (unsigned l = 0; l <= l_max; ++l) {
      probs[static_cast<std::size_t>(k) * (l_max + 1) + l] =
          cell_value(params, t, k, l);
    }
  }
  return JointPmf(params, t, j, l_max, truncated, std::move(probs));
}

CurveSeries rate_curve(const RaftParams& params,
                       std::span<const double> t_grid) {
  if (t_grid.empty()) throw std::domain_error("t grid must be nonempty");
  double prev = 0.0;
  for (double t : t_grid) {
    if (!(t > prev)) {
      throw std::domain_error("t grid must be strictly increasing and positive");
    }
    prev = t;
  }
  CurveSeries series;
  series.params = params;
  series.points.reserve(t_grid.size());
  for (double t : t_grid) {
    series.points.push_back(CurvePoint{t, expected_n(params, t) / t});
  }
  const double front = t_grid.front();
  const double back = t_grid.back();
  unsigned first = block_index(front, params.r);
  if (first == 0) {
    first = 1;
  } else if (!on_multiple(front, params.r)) {
    first += 1;
  }
  const unsigned last = block_index(back, params.r);
  for (unsigned m = first; m <= last; ++m) {
    series.jump_markers.push_back(m * params.r);
  }
  series.asymptote = rate_asymptote(params);
  return series;
}

RateDiagnostics rate_diagnostics(const RaftParams& params, unsigned n) {
  if (n < 1) throw std::domain_error("n must be a positive integer");
  const double x = params.lambda * params.r;
  const double q = std::exp(-x);
  double u, v;
  if (n == 1) {
    u = q;
    v = q;
  } else {
    const double em = -std::expm1(-x);
    const double qn = std::exp(-x * n);
    u = q * -std::expm1(-x * n) / em;
    v = q * (1.0 - (n + 1.0) * qn + n * std::exp(-x * (n + 1.0))) / (em * em);
  }
  return RateDiagnostics{n, u, v, u < params.lambda * params.r * v};
}

}  // namespace renewcap::raft
