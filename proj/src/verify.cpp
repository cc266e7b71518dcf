#include "renewcap/verify.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "renewcap/quadrature.hpp"
#include "renewcap/raft.hpp"
#include "renewcap/rart.hpp"
#include "renewcap/simulate.hpp"

namespace renewcap::verify {

namespace {

struct Recorder {
  std::vector<CheckResult> results;
  double tamper;

  void record(std::string name, double measured, double tolerance) {
    results.push_back(CheckResult{std::move(name), measured, tolerance,
                                  measured <= tolerance});
  }
};

void check_table_identities(Recorder& rec) {
  const struct {
    double lambda, r, t;
  } grid[] = {{0.1, 6.0, 10.0}, {0.5, 12.0, 45.6}, {0.05, 2.0, 7.4}};

  double worst_mass = 0.0;
  double worst_marginal = 0.0;
  double worst_mean = 0.0;
  for (const auto& g : grid) {
    const auto params = raft::make_params(g.lambda, g.r);
    const auto table = raft::joint_pmf_table(params, g.t, 1e-12);
    const double mass = table.total_mass() + table.truncated_mass();
    worst_mass = std::max(worst_mass, std::fabs(mass - 1.0 + rec.tamper));

    const unsigned l_top = std::min(40u, table.l_max());
    for (unsigned l = 0; l <= l_top; ++l) {
      double column = 0.0;
      for (unsigned k = 0; k <= table.j(); ++k) column += table.prob(k, l);
      worst_marginal = std::max(
          worst_marginal,
          std::fabs(column - raft::death_pmf(g.lambda, g.t, l)));
    }

    worst_mean = std::max(
        worst_mean, std::fabs(table.alive_marginal_mean() -
                              raft::alive_expectation(params, g.t)));
  }
  rec.record("joint-table-normalization", worst_mass, 1e-10);
  rec.record("poisson-failure-marginal", worst_marginal, 1e-10);
  rec.record("alive-expectation-consistency", worst_mean, 1e-8);
}

void check_degenerate_fixed(Recorder& rec) {
  double worst = 0.0;
  for (double lambda : {0.05, 0.1, 0.5}) {
    for (double r : {2.0, 6.0, 12.0}) {
      for (double t : {5.0, 10.0, 31.0}) {
        const auto params = raft::make_params(lambda, r);
        const auto expectation =
            rart::expected_n(rart::Fixed{r}, lambda, t, 1e-12);
        worst = std::max(worst, std::fabs(expectation.value -
                                          raft::expected_n(params, t)));
      }
    }
  }
  rec.record("fixed-age-degeneracy", worst + rec.tamper, 1e-12);
}

void check_closed_forms(Recorder& rec) {
  double worst = 0.0;
  for (unsigned m : {1u, 2u, 3u}) {
    for (double t : {6.5, 10.0, 21.0}) {
      const double closed = rart::uniform_replacement_term(m, 0.1, 6.0, 7.0, t);
      const double upper = std::min(7.0, t / m);
      double quad = 0.0;
      if (upper > 6.0) {
        quad = adaptive_simpson(
            [&](double r) {
              return std::exp(-0.1 * m * r) * (1.0 + 0.1 * (t - m * r));
            },
            6.0, upper, 1e-13);
      }
      worst = std::max(worst, std::fabs(closed - quad));

      const double closed_sexp =
          rart::shifted_exponential_term(m, 0.1, 1.0, 5.0, t);
      const double upper_sexp = t / static_cast<double>(m);
      double quad_sexp = 0.0;
      if (upper_sexp > 5.0) {
        quad_sexp = adaptive_simpson(
            [&](double r) {
              return std::exp(-0.1 * m * r) * (1.0 + 0.1 * (t - m * r)) *
                     std::exp(-(r - 5.0));
            },
            5.0, upper_sexp, 1e-13);
      }
      worst = std::max(worst, std::fabs(closed_sexp - quad_sexp));
    }
  }
  rec.record("closed-form-vs-quadrature", worst, 1e-10);
}

void check_asymptote(Recorder& rec) {
  double worst = 0.0;
  for (double lambda : {0.1, 0.5}) {
    for (double r : {6.0, 12.0}) {
      const auto params = raft::make_params(lambda, r);
      const double t = 100.0 * std::max(r, 1.0 / lambda);
      const double rate = raft::expected_n(params, t) / t;
      const double limit = raft::rate_asymptote(params) + rec.tamper;
      worst = std::max(worst, std::fabs(rate - limit) / limit);
    }
  }
  rec.record("rate-asymptote-approach", worst, 5e-3);
}

void check_monte_carlo(Recorder& rec, Level level, std::uint64_t seed) {
  const auto params = raft::make_params(0.1, 6.0);
  const double t = 10.0;
  const std::uint64_t reps = level == Level::full ? 1'000'000 : 100'000;
  sim::SimConfig config{
      sim::SimModel{rart::Fixed{params.r}, params.lambda}, t, reps, seed};
  const auto estimate = sim::simulate(config, 2);

  const double z_d =
      std::fabs(estimate.mean_d - params.lambda * t) / estimate.se_d;
  rec.record("mc-failure-mean", z_d, 4.0);
  const double z_a =
      std::fabs(estimate.mean_a - raft::alive_expectation(params, t)) /
      estimate.se_a;
  rec.record("mc-alive-mean", z_a, 4.0);

  const auto table = raft::joint_pmf_table(params, t, 1e-12);
  double worst_z = 0.0;
  for (unsigned k = 0; k <= table.j(); ++k) {
    for (unsigned l = 0; l <= table.l_max(); ++l) {
      const double p = table.prob(k, l);
      if (p < 1e-3) continue;
      const double se =
          std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
      worst_z = std::max(worst_z,
                         std::fabs(estimate.frequency(k, l) - p) / se);
    }
  }
  rec.record("mc-joint-cells", worst_z, 4.0);

  if (level == Level::full) {
    const rart::Uniform uniform{6.0, 7.0};
    const auto expectation = rart::expected_n(uniform, 0.1, 10.0, 1e-10);
    sim::SimConfig rart_config{sim::SimModel{uniform, 0.1}, 10.0, reps,
                               seed + 1};
    const auto rart_estimate = sim::simulate(rart_config, 2);
    const double z_n = std::fabs(rart_estimate.mean_n - expectation.value) /
                       rart_estimate.se_n;
    rec.record("mc-random-age-mean", z_n, 4.0);
  }
}

void check_determinism(Recorder& rec, std::uint64_t seed) {
  sim::SimConfig config{sim::SimModel{rart::Fixed{6.0}, 0.1}, 10.0, 20'000,
                        seed};
  const auto one = sim::simulate(config, 1);
  const auto four = sim::simulate(config, 4);
  rec.record("simulation-thread-determinism", one == four ? 0.0 : 1.0, 0.0);
}

}  // namespace

std::vector<CheckResult> run_checks(const Options& options) {
  Recorder rec;
  rec.tamper = options.tamper;
  check_table_identities(rec);
  check_degenerate_fixed(rec);
  check_closed_forms(rec);
  check_asymptote(rec);
  check_monte_carlo(rec, options.level, options.seed);
  check_determinism(rec, options.seed);
  return rec.results;
}

int exit_status(const std::vector<CheckResult>& results) {
  for (const auto& result : results) {
    if (!result.pass) return 1;
  }
  return 0;
}

}  // namespace renewcap::verify
