#include "renewcap/rart.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "renewcap/errors.hpp"
#include "renewcap/quadrature.hpp"
#include "renewcap/raft.hpp"

namespace renewcap::rart {

namespace {

constexpr double kDensityIntegralTol = 1e-8;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::domain_error(std::string(name) + " must be a positive real");
  }
}

// Antiderivative of e^{-m lambda r} (1 + lambda (t - m r)) / (b - a).
double uniform_antiderivative(unsigned m, double lambda, double width,
                              double t, double r) {
  return std::exp(-static_cast<double>(m) * lambda * r) * (m * r - t) /
         (width * m);
}

// Antiderivative of e^{-m lambda r} (1 + lambda (t - m r)) nu e^{-nu (r-eta)}
// evaluated as sign * exp(log magnitude); keeping (r - eta) grouped in the
// exponent avoids manufacturing e^{+nu eta}.
double sexp_antiderivative(unsigned m, double lambda, double nu, double eta,
                           double t, double r) {
  const double c = nu + m * lambda;
  const double poly = nu * (lambda * c * (m * r - t) - nu) / (c * c);
  if (poly == 0.0) return 0.0;
  const double exponent = -static_cast<double>(m) * lambda * r -
                          nu * (r - eta) + std::log(std::fabs(poly));
  return std::copysign(std::exp(exponent), poly);
}

const Tabulated& as_tabulated(const ReplacementDistribution& dist) {
  return std::get<Tabulated>(dist);
}

// Index of the first knot with positive density.
std::size_t first_positive_knot(const Tabulated& dist) {
  for (std::size_t i = 0; i < dist.knots.size(); ++i) {
    if (dist.knots[i].density > 0.0) return i;
  }
  throw std::domain_error("tabulated density has no positive mass");
}

std::vector<double> multiples_in_range(double step, double lo, double hi) {
  std::vector<double> out;
  if (!(step > 0.0)) return out;
  unsigned first = raft::block_index(lo, step);
  if (first == 0) {
    first = 1;
  } else if (!raft::on_multiple(lo, step)) {
    first += 1;
  }
  const unsigned last = raft::block_index(hi, step);
  if (last > first && last - first > 100000) return out;  // denser than any plot
  for (unsigned m = first; m <= last; ++m) out.push_back(m * step);
  return out;
}

// The series over m has ~t/a0 nonzero terms; a microscopic support infimum
// would make it astronomically long even though each term is trivial.
constexpr unsigned kMaxSeriesTerms = 50'000'000;

void require_tractable_series(double t, double a0) {
  if (t / a0 > static_cast<double>(kMaxSeriesTerms)) {
    throw numerical_instability_error(
        "the expectation series needs more than 5e7 terms (support infimum "
        "too close to 0 relative to t)");
  }
}

}  // namespace

Fixed make_fixed(double r) {
  require_positive(r, "replacement age r");
  return Fixed{r};
}

ShiftedExponential make_shifted_exponential(double nu, double eta) {
  require_positive(nu, "nu");
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw std::domain_error("eta must be a nonnegative real");
  }
  return ShiftedExponential{nu, eta};
}

Uniform make_uniform(double a, double b) {
  if (!(a >= 0.0) || !std::isfinite(a) || !std::isfinite(b) || !(b > a)) {
    throw std::domain_error("uniform support requires 0 <= a < b");
  }
  return Uniform{a, b};
}

Tabulated make_tabulated(std::vector<DensityKnot> knots, bool renormalize) {
  if (knots.size() < 2) {
    throw std::domain_error("tabulated density needs at least two knots");
  }
  double prev_r = -std::numeric_limits<double>::infinity();
  for (const auto& knot : knots) {
    if (!std::isfinite(knot.r) || knot.r < 0.0 || knot.r <= prev_r) {
      throw std::domain_error(
          "tabulated density knots must have strictly increasing r >= 0");
    }
    if (!std::isfinite(knot.density) || knot.density < 0.0) {
      throw std::domain_error("tabulated density values must be >= 0");
    }
    prev_r = knot.r;
  }
  long double integral = 0.0L;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    integral += 0.5L * (knots[i + 1].r - knots[i].r) *
                (knots[i].density + knots[i + 1].density);
  }
  if (integral <= 0.0L) {
    throw std::domain_error("tabulated density has no positive mass");
  }
  const double total = static_cast<double>(integral);
  if (std::fabs(total - 1.0) > kDensityIntegralTol) {
    if (!renormalize) {
      std::ostringstream msg;
      msg << "tabulated density integrates to " << total
          << "; pass renormalize to rescale";
      throw std::domain_error(msg.str());
    }
    for (auto& knot : knots) knot.density /= total;
  }
  return Tabulated{std::move(knots)};
}

Tabulated load_density_csv(std::istream& in, bool renormalize) {
  std::vector<DensityKnot> knots;
  std::string line;
  bool first_line = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string r_text, d_text;
    if (!std::getline(fields, r_text, ',') || !std::getline(fields, d_text)) {
      throw std::domain_error("density CSV rows must be 'r,density'");
    }
    const auto parse_cell = [](const std::string& text) {
      std::size_t consumed = 0;
      const double value = std::stod(text, &consumed);
      while (consumed < text.size() &&
             std::isspace(static_cast<unsigned char>(text[consumed]))) {
        ++consumed;
      }
      if (consumed != text.size()) {
        throw std::invalid_argument(text);
      }
      return value;
    };
    try {
      const double r = parse_cell(r_text);
      const double d = parse_cell(d_text);
      knots.push_back(DensityKnot{r, d});
    } catch (const std::exception&) {
      if (first_line) {
        first_line = false;
        continue;  // header
      }
      throw std::domain_error("density CSV row is not numeric: " + line);
    }
    first_line = false;
  }
  return make_tabulated(std::move(knots), renormalize);
}

Tabulated load_density_csv_file(const std::string& path, bool renormalize) {
  std::ifstream in(path);
  if (!in) {
    throw std::domain_error("cannot open density CSV: " + path);
  }
  return load_density_csv(in, renormalize);
}

ReplacementDistribution parse_replacement_spec(const std::string& spec,
                                               bool renormalize_table) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw std::domain_error("replacement spec needs the form kind:args, got '" +
                            spec + "'");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string args = spec.substr(colon + 1);

  const auto parse_number = [&](const std::string& text) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != text.size() || text.empty()) {
      throw std::domain_error("replacement spec '" + spec +
                              "' has a non-numeric argument '" + text + "'");
    }
    return value;
  };
  const auto split_two = [&]() -> std::pair<double, double> {
    const auto comma = args.find(',');
    if (comma == std::string::npos) {
      throw std::domain_error("replacement spec '" + spec +
                              "' needs two comma-separated arguments");
    }
    return {parse_number(args.substr(0, comma)),
            parse_number(args.substr(comma + 1))};
  };

  if (kind == "fixed") return make_fixed(parse_number(args));
  if (kind == "sexp") {
    const auto [nu, eta] = split_two();
    return make_shifted_exponential(nu, eta);
  }
  if (kind == "unif") {
    const auto [a, b] = split_two();
    return make_uniform(a, b);
  }
  if (kind == "table") return load_density_csv_file(args, renormalize_table);
  throw std::domain_error("unknown replacement kind '" + kind +
                          "' (expected fixed, sexp, unif, or table)");
}

double density_at(const Tabulated& dist, double r) {
  const auto& knots = dist.knots;
  if (r < knots.front().r || r > knots.back().r) return 0.0;
  auto hi = std::lower_bound(
      knots.begin(), knots.end(), r,
      [](const DensityKnot& knot, double value) { return knot.r < value; });
  if (hi == knots.begin()) return hi->density;
  if (hi == knots.end()) return knots.back().density;
  const auto lo = hi - 1;
  const double w = (r - lo->r) / (hi->r - lo->r);
  return lo->density + w * (hi->density - lo->density);
}

double support_infimum(const ReplacementDistribution& dist) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Fixed>) {
          return d.r;
        } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
          return d.eta;
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return d.a;
        } else {
          const std::size_t p = first_positive_knot(d);
          return p == 0 ? d.knots.front().r : d.knots[p - 1].r;
        }
      },
      dist);
}

Finiteness divergence_check(const ReplacementDistribution& dist) {
  return std::visit(
      [](const auto& d) -> Finiteness {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Fixed>) {
          return Finiteness::finite;
        } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
          return d.eta == 0.0 ? Finiteness::infinite : Finiteness::finite;
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return d.a == 0.0 ? Finiteness::infinite : Finiteness::finite;
        } else {
          if (d.knots.front().r > 0.0) return Finiteness::unknown;
          // Table starts at r = 0.
          if (d.knots.front().density > 0.0) return Finiteness::infinite;
          const std::size_t p = first_positive_knot(d);
          // Zero on [0, knot_{p-1}] certifies finiteness; a density rising
          // straight out of r = 0 is left to the caller.
          return p >= 2 ? Finiteness::finite : Finiteness::unknown;
        }
      },
      dist);
}

double uniform_replacement_term(unsigned m, double lambda, double a, double b,
                                double t) {
  if (m < 1) throw std::domain_error("m must be a positive integer");
  require_positive(lambda, "lambda");
  require_positive(t, "t");
  if (!(a >= 0.0) || !(b > a)) {
    throw std::domain_error("uniform support requires 0 <= a < b");
  }
  const double upper = std::min(b, t / m);
  if (upper <= a) return 0.0;
  const double width = b - a;
  const double value = uniform_antiderivative(m, lambda, width, t, upper) -
                       uniform_antiderivative(m, lambda, width, t, a);
  return value < 0.0 ? 0.0 : value;
}

double shifted_exponential_term(unsigned m, double lambda, double nu,
                                double eta, double t) {
  if (m < 1) throw std::domain_error("m must be a positive integer");
  require_positive(lambda, "lambda");
  require_positive(nu, "nu");
  require_positive(t, "t");
  if (eta == 0.0) {
    throw divergent_model_error(
        "shifted-exponential replacement with eta = 0 has infinite E[N(t)]; "
        "run the divergence check");
  }
  require_positive(eta, "eta");
  const double upper = t / m;
  if (upper <= eta) return 0.0;
  const double value = sexp_antiderivative(m, lambda, nu, eta, t, upper) -
                       sexp_antiderivative(m, lambda, nu, eta, t, eta);
  return value < 0.0 ? 0.0 : value;
}

double tabulated_term(unsigned m, double lambda, const Tabulated& dist,
                      double t, double tol) {
  if (m < 1) throw std::domain_error("m must be a positive integer");
  require_positive(lambda, "lambda");
  require_positive(t, "t");
  require_positive(tol, "tol");
  const double upper = t / m;
  if (dist.knots.front().r > 0.0 || dist.knots.back().r < upper) {
    throw std::invalid_argument(
        "tabulated density knots do not cover (0, t/m]");
  }
  const std::size_t p = first_positive_knot(dist);
  const double zero_prefix_end = p == 0 ? 0.0 : dist.knots[p - 1].r;
  if (upper <= zero_prefix_end) return 0.0;

  const auto integrand = [&](double r) {
    return std::exp(-static_cast<double>(m) * lambda * r) *
           (1.0 + lambda * (t - m * r)) * density_at(dist, r);
  };
  std::vector<double> breakpoints;
  breakpoints.reserve(dist.knots.size());
  for (const auto& knot : dist.knots) breakpoints.push_back(knot.r);
  const double value = adaptive_simpson_split(
      integrand, zero_prefix_end, upper, breakpoints, tol);
  return value < 0.0 ? 0.0 : value;
}

RartExpectation expected_n(const ReplacementDistribution& dist, double lambda,
                           double t, double tol) {
  require_positive(lambda, "lambda");
  require_positive(t, "t");
  require_positive(tol, "tol");

  switch (divergence_check(dist)) {
    case Finiteness::infinite:
      return RartExpectation{std::numeric_limits<double>::infinity(), 0, 0.0,
                             true};
    case Finiteness::unknown:
      throw divergent_model_error(
          "cannot certify finiteness of E[N(t)]: the tabulated density does "
          "not pin down the behavior near r = 0");
    case Finiteness::finite:
      break;
  }

  if (const auto* fixed = std::get_if<Fixed>(&dist)) {
    const auto params = raft::make_params(lambda, fixed->r);
    return RartExpectation{raft::expected_n(params, t),
                           raft::block_index(t, fixed->r), 0.0, false};
  }

  const double a0 = support_infimum(dist);  // > 0 for every finite case
  long double sum = 0.0L;
  unsigned terms = 0;
  double tail = 0.0;

  if (const auto* uniform = std::get_if<Uniform>(&dist)) {
    require_tractable_series(t, a0);
    for (unsigned m = 1; t / m > uniform->a; ++m) {
      sum += uniform_replacement_term(m, lambda, uniform->a, uniform->b, t);
      terms = m;
    }
  } else if (const auto* sexp = std::get_if<ShiftedExponential>(&dist)) {
    require_tractable_series(t, a0);
    const double decay = std::exp(-lambda * a0);
    for (unsigned m = 1; t / m > sexp->eta; ++m) {
      sum += shifted_exponential_term(m, lambda, sexp->nu, sexp->eta, t);
      terms = m;
      const double bound = (1.0 + lambda * t) *
                           std::pow(decay, m + 1.0) / (1.0 - decay);
      if (bound < tol) {
        tail = bound;
        break;
      }
    }
  } else {
    const auto& table = as_tabulated(dist);
    require_tractable_series(t, a0);
    const auto total_terms = static_cast<unsigned>(std::ceil(t / a0));
    const double term_tol = tol / (total_terms + 1);
    for (unsigned m = 1; t / m > a0; ++m) {
      sum += tabulated_term(m, lambda, table, t, term_tol);
      terms = m;
    }
  }
  return RartExpectation{lambda * t + static_cast<double>(sum), terms, tail,
                         false};
}

RartCurve rate_curve(const ReplacementDistribution& dist, double lambda,
                     std::span<const double> t_grid, double tol) {
  switch (divergence_check(dist)) {
    case Finiteness::infinite:
      throw divergent_model_error(
          "E[N(t)] is infinite for this replacement distribution (density "
          "bounded away from 0 near the origin)");
    case Finiteness::unknown:
      throw divergent_model_error(
          "cannot certify finiteness of E[N(t)] for this tabulated density");
    case Finiteness::finite:
      break;
  }
  if (t_grid.empty()) throw std::domain_error("t grid must be nonempty");
  double prev = 0.0;
  for (double t : t_grid) {
    if (!(t > prev)) {
      throw std::domain_error("t grid must be strictly increasing and positive");
    }
    prev = t;
  }

  double open_step = 0.0;
  double solid_step = 0.0;
  if (const auto* fixed = std::get_if<Fixed>(&dist)) {
    solid_step = fixed->r;
  } else if (const auto* uniform = std::get_if<Uniform>(&dist)) {
    open_step = uniform->a;
    solid_step = uniform->b;
  } else if (const auto* sexp = std::get_if<ShiftedExponential>(&dist)) {
    open_step = sexp->eta;
  } else {
    open_step = support_infimum(dist);
  }

  RartCurve curve;
  curve.points.reserve(t_grid.size());
  for (double t : t_grid) {
    MarkerKind marker = MarkerKind::none;
    if (solid_step > 0.0 && raft::on_multiple(t, solid_step)) {
      marker = MarkerKind::solid;
    } else if (open_step > 0.0 && raft::on_multiple(t, open_step)) {
      marker = MarkerKind::open;
    }
    const double value = expected_n(dist, lambda, t, tol).value / t;
    curve.points.push_back(RartCurvePoint{t, value, marker});
  }
  const double lo = t_grid.front();
  const double hi = t_grid.back();
  if (open_step > 0.0) curve.open_markers = multiples_in_range(open_step, lo, hi);
  if (solid_step > 0.0) {
    curve.solid_markers = multiples_in_range(solid_step, lo, hi);
  }
  return curve;
}

}  // namespace renewcap::rart
