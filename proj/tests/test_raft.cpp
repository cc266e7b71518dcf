#include <cmath>
#include <limits>
#include <vector>

#include <doctest.h>

#include "renewcap/errors.hpp"
#include "renewcap/raft.hpp"
#include "renewcap/series.hpp"
#include "renewcap/simulate.hpp"
#include "oracles.hpp"

using namespace renewcap::raft;

namespace {

const RaftParams kBase = make_params(0.1, 6.0);

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[i] = lo + (hi - lo) * i / (n - 1.0);
  return grid;
}

}  // namespace

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(make_params(0.0, 6.0), std::domain_error);
  CHECK_THROWS_AS(make_params(0.1, -1.0), std::domain_error);
  CHECK_THROWS_AS(make_params(std::nan(""), 1.0), std::domain_error);
}

TEST_CASE("block index with boundary snapping") {
  CHECK(block_index(5.0, 6.0) == 0);
  CHECK(block_index(6.0, 6.0) == 1);
  CHECK(block_index(17.9, 6.0) == 2);
  // Within 4 ulps of the boundary counts as the boundary.
  CHECK(block_index(std::nextafter(12.0, 0.0), 12.0) == 1);
  CHECK(block_index(std::nextafter(12.0, 24.0), 12.0) == 1);
  // A full 1e-12 relative gap stays in the lower block.
  CHECK(block_index(12.0 * (1.0 - 1e-12), 12.0) == 0);
}

TEST_CASE("capped arrival probability: degenerate blocks") {
  // t < r removes the cap entirely.
  CHECK(capped_arrival_prob(kBase, 1, 5.0) ==
        doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-15));
  CHECK(capped_arrival_prob(kBase, 3, 2.0) ==
        renewcap::poisson_tail(0.2, 3));
}

TEST_CASE("capped arrival probability matches the defining integral") {
  for (int n : {2, 3}) {
    for (double t : {5.0, 10.0, 14.0}) {
      const double via_series = capped_arrival_prob(kBase, n, t);
      const double via_quadrature =
          oracles::capped_sum_prob_quadrature(0.1, 6.0, t, n, 1e-11);
      CHECK(std::fabs(via_series - via_quadrature) < 1e-8);
    }
  }
  // Frozen from the quadrature oracle.
  CHECK(capped_arrival_prob(kBase, 2, 10.0) ==
        doctest::Approx(0.19668028074910099).epsilon(1e-8));
  // t = 14 leaves the box [0,6]^2 unconstrained: independent product.
  const double box = (1.0 - std::exp(-0.6)) * (1.0 - std::exp(-0.6));
  CHECK(capped_arrival_prob(kBase, 2, 14.0) ==
        doctest::Approx(box).epsilon(1e-12));
}

TEST_CASE("joint cell closed-path values") {
  // j = 0: plain Poisson term.
  CHECK(joint_pmf_cell(kBase, 5.0, 0, 2) ==
        doctest::Approx(std::exp(-0.5) * 0.125).epsilon(1e-14));
  // One age replacement, no failures: first part outlives 6, successor
  // outlives the remaining 4.
  CHECK(joint_pmf_cell(kBase, 10.0, 1, 0) ==
        doctest::Approx(std::exp(-0.6) * std::exp(-0.4)).epsilon(1e-14));
  // One failure and one age replacement, both orders folded in.
  CHECK(joint_pmf_cell(kBase, 10.0, 1, 1) ==
        doctest::Approx(0.8 * std::exp(-1.0)).epsilon(1e-14));
  // Impossible cells are exactly zero.
  CHECK(joint_pmf_cell(kBase, 10.0, 2, 0) == 0.0);
  CHECK(joint_pmf_cell(kBase, 5.0, 1, 3) == 0.0);
}

TEST_CASE("failure-count pmf is Poisson") {
  CHECK(death_pmf(0.1, 10.0, 0) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(death_pmf(0.1, 10.0, 1) == death_pmf(0.1, 10.0, 0));

  // Marginalizing the joint table over k reproduces it.
  const auto params = make_params(0.2, 7.0);
  const auto table = joint_pmf_table(params, 30.0, 1e-12);
  for (unsigned l : {0u, 1u, 4u, 9u}) {
    double column = 0.0;
    for (unsigned k = 0; k <= table.j(); ++k) column += table.prob(k, l);
    CHECK(std::fabs(column - death_pmf(0.2, 30.0, l)) < 1e-10);
  }
}

TEST_CASE("j = 0 cells reuse the Poisson expression bit for bit") {
  for (unsigned l = 0; l <= 40; ++l) {
    CHECK(oracles::ulp_distance(joint_pmf_cell(kBase, 5.0, 0, l),
                                death_pmf(0.1, 5.0, l)) <= 1.0);
  }
  const auto params = make_params(0.7, 3.0);
  for (unsigned l = 0; l <= 25; ++l) {
    CHECK(oracles::ulp_distance(joint_pmf_cell(params, 2.9, 0, l),
                                death_pmf(0.7, 2.9, l)) <= 1.0);
  }
}

TEST_CASE("alive expectation closed form") {
  CHECK(alive_expectation(kBase, 5.0) == 0.0);
  CHECK(alive_expectation(kBase, 10.0) ==
        doctest::Approx(1.4 * std::exp(-0.6)).epsilon(1e-15));
  const double two_terms = std::exp(-0.6) * 1.6 + std::exp(-1.2);
  CHECK(alive_expectation(kBase, 12.0) ==
        doctest::Approx(two_terms).epsilon(1e-15));
}

TEST_CASE("expected total count and its boundary jump") {
  CHECK(expected_n(kBase, 5.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(expected_n(kBase, 10.0) ==
        doctest::Approx(1.0 + 1.4 * std::exp(-0.6)).epsilon(1e-15));

  const auto params = make_params(0.1, 12.0);
  const double left = expected_n(params, 12.0 * (1.0 - 1e-12));
  const double right = expected_n(params, 12.0);
  CHECK(right - left == doctest::Approx(std::exp(-1.2)).epsilon(1e-9));
}

TEST_CASE("total-count pmf folds the joint cells") {
  CHECK(n_pmf(kBase, 5.0, 0) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(n_pmf(kBase, 6.0, 0) == 0.0);
  const double folded =
      joint_pmf_cell(kBase, 10.0, 0, 1) + joint_pmf_cell(kBase, 10.0, 1, 0);
  CHECK(n_pmf(kBase, 10.0, 1) == doctest::Approx(folded).epsilon(1e-14));
}

TEST_CASE("total-count pmf agrees with a 10^7-path simulation") {
  using namespace renewcap;
  sim::SimConfig config{sim::SimModel{rart::Fixed{6.0}, 0.1}, 10.0,
                        10'000'000, 987654321};
  const auto estimate = sim::simulate(config, 2);
  std::uint64_t hits = 0;
  for (const auto& [cell, count] : estimate.joint_counts) {
    if (cell.first + cell.second == 1) hits += count;
  }
  const double freq =
      static_cast<double>(hits) /
      static_cast<double>(estimate.replications_completed);
  const double p = n_pmf(kBase, 10.0, 1);
  const double se = std::sqrt(p * (1.0 - p) / 1e7);
  CHECK(std::fabs(freq - p) < 4.0 * se);
}

TEST_CASE("joint table: truncation bookkeeping") {
  CHECK_THROWS_AS(joint_pmf_table(kBase, 10.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(joint_pmf_table(kBase, 10.0, 1.0), std::domain_error);

  const auto single = joint_pmf_table(kBase, 5.0, 1e-12);
  CHECK(single.j() == 0);
  CHECK(single.total_mass() ==
        doctest::Approx(1.0 - single.truncated_mass()).epsilon(1e-13));

  const auto table = joint_pmf_table(kBase, 10.0, 1e-10);
  CHECK(table.truncated_mass() < 1e-10);
  const double mass = table.total_mass() + table.truncated_mass();
  CHECK(mass > 1.0 - 1e-10);
  CHECK(table.total_mass() < 1.0 + 1e-12);

  const auto wide = joint_pmf_table(make_params(0.1, 12.0), 100.0, 1e-10);
  CHECK(std::fabs(wide.alive_marginal_mean() -
                  alive_expectation(make_params(0.1, 12.0), 100.0)) < 1e-8);
}

TEST_CASE("joint table identities across a parameter sweep") {
  for (double lambda : {0.1, 0.5}) {
    for (double r : {2.0, 6.0}) {
      for (double t_over_r : {0.5, 3.7, 15.2}) {
        const auto params = make_params(lambda, r);
        const double t = t_over_r * r;
        const auto table = joint_pmf_table(params, t, 1e-12);

        const double mass = table.total_mass() + table.truncated_mass();
        CHECK(std::fabs(mass - 1.0) < 1e-10);

        const unsigned l_top = std::min(40u, table.l_max());
        for (unsigned l = 0; l <= l_top; ++l) {
          double column = 0.0;
          for (unsigned k = 0; k <= table.j(); ++k) column += table.prob(k, l);
          CHECK(std::fabs(column - death_pmf(lambda, t, l)) < 1e-10);
        }

        CHECK(std::fabs(table.alive_marginal_mean() -
                        alive_expectation(params, t)) < 1e-8);
      }
    }
  }
}

TEST_CASE("block index beyond the supported cap fails loudly") {
  const auto params = make_params(0.1, 0.01);
  CHECK_THROWS_AS(joint_pmf_cell(params, 10.0, 0, 0),
                  renewcap::numerical_instability_error);
  CHECK_THROWS_AS(joint_pmf_table(params, 10.0, 1e-10),
                  renewcap::numerical_instability_error);
}

TEST_CASE("rate curve reaches the renewal limit") {
  const auto slow = make_params(0.1, 12.0);
  const auto grid = linspace(12.0, 600.0, 150);
  const auto series = rate_curve(slow, grid);
  CHECK(series.asymptote == doctest::Approx(0.1431013).epsilon(1e-6));
  CHECK(series.points.back().value ==
        doctest::Approx(series.asymptote).epsilon(0.01));

  const auto fast = make_params(0.1, 6.0);
  const auto series6 = rate_curve(fast, linspace(6.0, 600.0, 150));
  CHECK(series6.asymptote == doctest::Approx(0.2216369).epsilon(1e-6));
  CHECK(series6.points.back().value ==
        doctest::Approx(series6.asymptote).epsilon(0.01));
}

TEST_CASE("rate curve monotone when the replacement age dominates 1/lambda") {
  const auto params = make_params(0.1, 12.0);
  const auto series = rate_curve(params, linspace(12.0, 60.0, 400));
  for (std::size_t i = 1; i < series.points.size(); ++i) {
    CHECK(series.points[i].value > series.points[i - 1].value);
  }
}

TEST_CASE("rate curve grid validation and jump markers") {
  const auto params = make_params(0.1, 12.0);
  CHECK_THROWS_AS(rate_curve(params, {}), std::domain_error);
  const double unsorted[] = {12.0, 11.0};
  CHECK_THROWS_AS(rate_curve(params, unsorted), std::domain_error);

  const auto series = rate_curve(params, linspace(12.0, 60.0, 5));
  CHECK(series.jump_markers == std::vector<double>{12, 24, 36, 48, 60});
  const auto inner = rate_curve(params, linspace(13.0, 50.0, 5));
  CHECK(inner.jump_markers == std::vector<double>{24, 36, 48});
}

TEST_CASE("rate diagnostics closed forms") {
  const auto slow = rate_diagnostics(make_params(0.1, 12.0), 1);
  CHECK(slow.u_n == doctest::Approx(std::exp(-1.2)).epsilon(1e-15));
  CHECK(slow.u_n == slow.v_n);
  CHECK(slow.increasing_on_block);

  const auto fast = rate_diagnostics(make_params(0.1, 6.0), 1);
  CHECK(fast.u_n == fast.v_n);
  CHECK_FALSE(fast.increasing_on_block);

  // lambda r v_n / u_n climbs to lambda r / (1 - e^{-lambda r}) > 1.
  const auto limit_block = rate_diagnostics(make_params(0.1, 6.0), 400);
  const double ratio = 0.6 * limit_block.v_n / limit_block.u_n;
  CHECK(ratio == doctest::Approx(0.6 / -std::expm1(-0.6)).epsilon(1e-10));
  CHECK(ratio > 1.0);
  CHECK(limit_block.increasing_on_block);

  // For lambda r = 0.6 the blocks turn monotone at n = 4.
  CHECK_FALSE(rate_diagnostics(make_params(0.1, 6.0), 2).increasing_on_block);
  CHECK_FALSE(rate_diagnostics(make_params(0.1, 6.0), 3).increasing_on_block);
  CHECK(rate_diagnostics(make_params(0.1, 6.0), 4).increasing_on_block);
}

TEST_CASE("rate diagnostics order invariant u_n <= v_n") {
  for (double lambda : {0.05, 0.1, 0.5}) {
    for (double r : {2.0, 6.0, 12.0}) {
      const auto params = make_params(lambda, r);
      for (unsigned n = 1; n <= 50; ++n) {
        const auto diag = rate_diagnostics(params, n);
        CHECK(diag.u_n > 0.0);
        CHECK(diag.v_n > 0.0);
        CHECK(diag.u_n <= diag.v_n * (1.0 + 1e-12));
      }
    }
  }
}

TEST_CASE("per-block monotonicity predicts the sampled curve") {
  const auto params = make_params(0.1, 12.0);
  const unsigned blocks = 5;
  bool all_increasing = true;
  for (unsigned n = 1; n <= blocks; ++n) {
    all_increasing =
        all_increasing && rate_diagnostics(params, n).increasing_on_block;
  }
  REQUIRE(all_increasing);
  const auto series =
      rate_curve(params, linspace(12.0, 12.0 * (blocks + 1) - 0.01, 500));
  for (std::size_t i = 1; i < series.points.size(); ++i) {
    CHECK(series.points[i].value > series.points[i - 1].value);
  }
}
