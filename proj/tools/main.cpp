#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <span>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "renewcap/errors.hpp"
#include "renewcap/io.hpp"
#include "renewcap/raft.hpp"
#include "renewcap/rart.hpp"
#include "renewcap/simulate.hpp"
#include "renewcap/verify.hpp"

namespace {

using renewcap::io::format_double;
using renewcap::io::format_unsigned;
using renewcap::io::OutputRecord;

void emit(const OutputRecord& record, const std::string& format,
          const std::string& out_path) {
  const std::string text = format == "json" ? renewcap::io::to_json(record)
                                            : renewcap::io::to_csv(record);
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) {
    throw std::invalid_argument("cannot open output file: " + out_path);
  }
  out << text;
}

std::vector<double> linspace(double lo, double hi, unsigned points) {
  std::vector<double> grid(points);
  for (unsigned i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  }
  grid.back() = hi;
  return grid;
}

// Grid plus every multiple of the given steps inside the range, so jump
// rows appear in the output even when the uniform spacing misses them.
std::vector<double> grid_with_multiples(double lo, double hi, unsigned points,
                                        std::span<const double> steps) {
  std::vector<double> grid = linspace(lo, hi, points);
  for (double step : steps) {
    if (!(step > 0.0)) continue;
    if ((hi - lo) / step > 100000.0) continue;  // denser than any plot
    for (double m = std::ceil(lo / step); m * step <= hi; m += 1.0) {
      if (m < 1.0) continue;
      if (m * step >= lo) grid.push_back(m * step);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) {
                           return std::fabs(a - b) <=
                                  4.0 * std::numeric_limits<double>::epsilon() *
                                      std::max(std::fabs(a), 1.0);
                         }),
             grid.end());
  return grid;
}

std::string join_doubles(std::span<const double> values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ';';
    out += format_double(values[i]);
  }
  return out;
}

std::string divergence_reason(const renewcap::rart::ReplacementDistribution& dist) {
  using namespace renewcap::rart;
  if (const auto* uniform = std::get_if<Uniform>(&dist)) {
    return "Uniform(0, " + format_double(uniform->b) +
           "): the age density 1/b is bounded below near r = 0, so E[N(t)] "
           "is infinite";
  }
  if (std::holds_alternative<ShiftedExponential>(dist)) {
    return "shifted exponential with eta = 0: the age density nu e^{-nu r} "
           "is bounded below near r = 0, so E[N(t)] is infinite";
  }
  return "the age density is bounded below near r = 0, so E[N(t)] is "
         "infinite";
}

struct CommonFlags {
  std::string format = "csv";
  std::string out_path;
};

void add_output_flags(CLI::App* cmd, CommonFlags& flags,
                      const char* default_format = "csv") {
  flags.format = default_format;
  cmd->add_option("--format", flags.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", flags.out_path, "write to file instead of stdout");
}

int run_pmf(double lambda, double r, double t, double mass_tol,
            const CommonFlags& flags) {
  const auto params = renewcap::raft::make_params(lambda, r);
  const auto table = renewcap::raft::joint_pmf_table(params, t, mass_tol);

  OutputRecord record;
  record.command = "pmf";
  record.parameters = {{"lambda", format_double(lambda)},
                       {"r", format_double(r)},
                       {"t", format_double(t)},
                       {"mass_tol", format_double(mass_tol)}};
  record.columns = {"k", "l", "probability"};
  for (unsigned k = 0; k <= table.j(); ++k) {
    for (unsigned l = 0; l <= table.l_max(); ++l) {
      record.rows.push_back({format_unsigned(k), format_unsigned(l),
                             format_double(table.prob(k, l))});
    }
  }
  record.metadata = {{"j", format_unsigned(table.j())},
                     {"truncated_mass", format_double(table.truncated_mass())}};
  emit(record, flags.format, flags.out_path);
  return 0;
}

int run_curve(double lambda, double r, double t_min, double t_max,
              unsigned points, const CommonFlags& flags) {
  if (!(t_min < t_max)) {
    throw std::domain_error("--t-min must be strictly below --t-max");
  }
  const auto params = renewcap::raft::make_params(lambda, r);
  if (t_min < r) {
    std::cerr << "warning: --t-min is below r; E[N(t)]/t is the plain "
                 "Poisson rate there\n";
  }
  const double steps[] = {r};
  const auto grid = grid_with_multiples(t_min, t_max, points, steps);
  const auto series = renewcap::raft::rate_curve(params, grid);

  OutputRecord record;
  record.command = "curve";
  record.parameters = {{"lambda", format_double(lambda)},
                       {"r", format_double(r)},
                       {"t_min", format_double(t_min)},
                       {"t_max", format_double(t_max)},
                       {"points", format_unsigned(points)}};
  record.columns = {"t", "en_over_t", "is_jump_point"};
  for (const auto& point : series.points) {
    record.rows.push_back(
        {format_double(point.t), format_double(point.value),
         renewcap::raft::on_multiple(point.t, r) ? "1" : "0"});
  }
  record.metadata = {{"asymptote", format_double(series.asymptote)},
                     {"jump_markers", join_doubles(series.jump_markers)}};
  emit(record, flags.format, flags.out_path);
  return 0;
}

int run_expect(double lambda, double r, double t, const CommonFlags& flags) {
  const auto params = renewcap::raft::make_params(lambda, r);
  const double alive = renewcap::raft::alive_expectation(params, t);
  const double total = renewcap::raft::expected_n(params, t);

  OutputRecord record;
  record.command = "expect";
  record.parameters = {{"lambda", format_double(lambda)},
                       {"r", format_double(r)},
                       {"t", format_double(t)}};
  record.columns = {"t", "expected_n", "expected_a", "expected_d"};
  record.rows.push_back({format_double(t), format_double(total),
                         format_double(alive), format_double(lambda * t)});
  emit(record, flags.format, flags.out_path);
  return 0;
}

int run_rart(const std::string& dist_spec, bool renormalize, double lambda,
             double t, double t_min, double t_max, unsigned points,
             double tol, bool curve_mode, const CommonFlags& flags) {
  using namespace renewcap::rart;
  const ReplacementDistribution dist =
      parse_replacement_spec(dist_spec, renormalize);
  if (divergence_check(dist) == Finiteness::infinite) {
    throw renewcap::divergent_model_error(divergence_reason(dist));
  }

  OutputRecord record;
  record.command = "rart";
  record.parameters = {{"dist", dist_spec},
                       {"lambda", format_double(lambda)},
                       {"tol", format_double(tol)}};

  if (!curve_mode) {
    const RartExpectation expectation = expected_n(dist, lambda, t, tol);
    record.parameters.emplace_back("t", format_double(t));
    record.columns = {"t", "expected_n"};
    record.rows.push_back({format_double(t), format_double(expectation.value)});
    record.metadata = {
        {"terms_used", format_unsigned(expectation.terms_used)},
        {"tail_bound", format_double(expectation.tail_bound)}};
    emit(record, flags.format, flags.out_path);
    return 0;
  }

  if (!(t_min < t_max)) {
    throw std::domain_error("--t-min must be strictly below --t-max");
  }
  record.parameters.emplace_back("t_min", format_double(t_min));
  record.parameters.emplace_back("t_max", format_double(t_max));
  record.parameters.emplace_back("points", format_unsigned(points));

  std::vector<double> steps;
  if (const auto* fixed = std::get_if<Fixed>(&dist)) {
    steps = {fixed->r};
  } else if (const auto* uniform = std::get_if<Uniform>(&dist)) {
    steps = {uniform->a, uniform->b};
  } else if (const auto* sexp = std::get_if<ShiftedExponential>(&dist)) {
    steps = {sexp->eta};
  } else {
    steps = {support_infimum(dist)};
  }
  const auto grid = grid_with_multiples(t_min, t_max, points, steps);
  const RartCurve curve = rate_curve(dist, lambda, grid, tol);

  record.columns = {"t", "en_over_t", "marker"};
  for (const auto& point : curve.points) {
    const char* marker = point.marker == MarkerKind::solid  ? "solid"
                         : point.marker == MarkerKind::open ? "open"
                                                            : "none";
    record.rows.push_back(
        {format_double(point.t), format_double(point.value), marker});
  }
  record.metadata = {{"open_markers", join_doubles(curve.open_markers)},
                     {"solid_markers", join_doubles(curve.solid_markers)}};
  emit(record, flags.format, flags.out_path);
  return 0;
}

int run_simulate(const std::string& dist_spec, bool renormalize,
                 double lambda, double t, std::uint64_t reps,
                 std::uint64_t seed, unsigned threads, std::uint64_t cap,
                 bool oracle, const CommonFlags& flags) {
  using namespace renewcap::sim;
  SimConfig config{
      SimModel{renewcap::rart::parse_replacement_spec(dist_spec, renormalize),
               lambda},
      t, reps, seed, cap, oracle};
  const std::uint64_t effective_cap =
      cap > 0 ? cap : default_event_cap(config.model, t);
  const SimEstimate estimate = simulate(config, threads);

  OutputRecord record;
  record.command = "simulate";
  // threads deliberately not echoed: output must be identical across
  // thread counts.
  record.parameters = {{"dist", dist_spec},
                       {"lambda", format_double(lambda)},
                       {"t", format_double(t)},
                       {"replications", format_unsigned(reps)},
                       {"seed", format_unsigned(seed)},
                       {"max_events_per_path", format_unsigned(effective_cap)},
                       {"oracle_grade", oracle ? "true" : "false"}};
  record.columns = {"k", "l", "count", "frequency"};
  for (const auto& [cell, count] : estimate.joint_counts) {
    record.rows.push_back({format_unsigned(cell.first),
                           format_unsigned(cell.second),
                           format_unsigned(count),
                           format_double(estimate.frequency(cell.first,
                                                            cell.second))});
  }
  record.metadata = {
      {"mean_n", format_double(estimate.mean_n)},
      {"se_n", format_double(estimate.se_n)},
      {"mean_a", format_double(estimate.mean_a)},
      {"se_a", format_double(estimate.se_a)},
      {"mean_d", format_double(estimate.mean_d)},
      {"se_d", format_double(estimate.se_d)},
      {"replications_completed",
       format_unsigned(estimate.replications_completed)},
      {"truncated_paths", format_unsigned(estimate.truncated_paths)}};
  emit(record, flags.format, flags.out_path);
  return 0;
}

int run_verify(const std::string& level_name, std::uint64_t seed) {
  renewcap::verify::Options options;
  options.level = level_name == "full" ? renewcap::verify::Level::full
                                       : renewcap::verify::Level::fast;
  options.seed = seed;
  const auto results = renewcap::verify::run_checks(options);
  for (const auto& result : results) {
    std::printf("%s  %-32s measured=%.6g tolerance=%.6g\n",
                result.pass ? "PASS" : "FAIL", result.name.c_str(),
                result.measured, result.tolerance);
  }
  const int status = renewcap::verify::exit_status(results);
  std::printf("%s: %zu checks\n", status == 0 ? "OK" : "FAILED",
              results.size());
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "renewcap: exact analytics and Monte Carlo simulation for Poisson "
      "processes with fixed or random replacement ages"};
  app.require_subcommand(1);

  CommonFlags pmf_flags, curve_flags, expect_flags, rart_flags, sim_flags;

  // pmf
  auto* pmf = app.add_subcommand(
      "pmf", "joint (age replacements, failures) probability table");
  double pmf_lambda = 0, pmf_r = 0, pmf_t = 0, pmf_tol = 1e-10;
  pmf->add_option("--lambda", pmf_lambda, "failure hazard rate")
      ->required()
      ->check(CLI::PositiveNumber);
  pmf->add_option("--r", pmf_r, "fixed replacement age")
      ->required()
      ->check(CLI::PositiveNumber);
  pmf->add_option("--t", pmf_t, "evaluation time")
      ->required()
      ->check(CLI::PositiveNumber);
  pmf->add_option("--mass-tol", pmf_tol, "truncated-mass bound");
  add_output_flags(pmf, pmf_flags);

  // curve
  auto* curve = app.add_subcommand("curve", "E[N(t)]/t over a time grid");
  double curve_lambda = 0, curve_r = 0, curve_tmin = 0, curve_tmax = 0;
  unsigned curve_points = 200;
  curve->add_option("--lambda", curve_lambda, "failure hazard rate")
      ->required()
      ->check(CLI::PositiveNumber);
  curve->add_option("--r", curve_r, "fixed replacement age")
      ->required()
      ->check(CLI::PositiveNumber);
  curve->add_option("--t-min", curve_tmin, "grid start")
      ->required()
      ->check(CLI::PositiveNumber);
  curve->add_option("--t-max", curve_tmax, "grid end")
      ->required()
      ->check(CLI::PositiveNumber);
  curve->add_option("--points", curve_points, "grid size")
      ->check(CLI::Range(2u, 1000000u));
  add_output_flags(curve, curve_flags);

  // expect
  auto* expect = app.add_subcommand("expect", "expected counts at one time");
  double expect_lambda = 0, expect_r = 0, expect_t = 0;
  expect->add_option("--lambda", expect_lambda, "failure hazard rate")
      ->required()
      ->check(CLI::PositiveNumber);
  expect->add_option("--r", expect_r, "fixed replacement age")
      ->required()
      ->check(CLI::PositiveNumber);
  expect->add_option("--t", expect_t, "evaluation time")
      ->required()
      ->check(CLI::PositiveNumber);
  add_output_flags(expect, expect_flags);

  // rart
  auto* rart_cmd = app.add_subcommand(
      "rart", "expected counts under a random replacement age");
  std::string rart_dist;
  bool rart_renormalize = false;
  double rart_lambda = 0, rart_t = 0, rart_tmin = 0, rart_tmax = 0;
  double rart_tol = 1e-10;
  unsigned rart_points = 200;
  rart_cmd
      ->add_option("--dist", rart_dist,
                   "replacement distribution (fixed:r | sexp:nu,eta | "
                   "unif:a,b | table:path)")
      ->required();
  rart_cmd->add_flag("--renormalize", rart_renormalize,
                     "rescale a tabulated density whose integral is off");
  rart_cmd->add_option("--lambda", rart_lambda, "failure hazard rate")
      ->required()
      ->check(CLI::PositiveNumber);
  auto* rart_t_opt = rart_cmd->add_option("--t", rart_t, "evaluation time")
                         ->check(CLI::PositiveNumber);
  auto* rart_tmin_opt = rart_cmd->add_option("--t-min", rart_tmin, "grid start")
                            ->check(CLI::PositiveNumber);
  rart_cmd->add_option("--t-max", rart_tmax, "grid end")
      ->check(CLI::PositiveNumber)
      ->needs(rart_tmin_opt);
  rart_tmin_opt->excludes(rart_t_opt);
  rart_cmd->add_option("--points", rart_points, "grid size")
      ->check(CLI::Range(2u, 1000000u));
  rart_cmd->add_option("--tol", rart_tol, "series / quadrature tolerance")
      ->check(CLI::PositiveNumber);
  add_output_flags(rart_cmd, rart_flags);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "seeded Monte Carlo paths");
  std::string sim_dist;
  bool sim_renormalize = false, sim_no_oracle = false;
  double sim_lambda = 0, sim_t = 0;
  std::uint64_t sim_reps = 0, sim_seed = 12345, sim_cap = 0;
  unsigned sim_threads = 1;
  sim_cmd
      ->add_option("--dist", sim_dist,
                   "replacement distribution (fixed:r | sexp:nu,eta | "
                   "unif:a,b | table:path)")
      ->required();
  sim_cmd->add_flag("--renormalize", sim_renormalize,
                    "rescale a tabulated density whose integral is off");
  sim_cmd->add_option("--lambda", sim_lambda, "failure hazard rate")
      ->required()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--t", sim_t, "horizon")
      ->required()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--reps", sim_reps, "replications")
      ->required()
      ->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim_seed, "stream seed")
      ->envname("RENEWCAP_SEED");
  sim_cmd->add_option("--threads", sim_threads, "worker threads")
      ->check(CLI::Range(1u, 256u));
  sim_cmd->add_option("--cap", sim_cap,
                      "per-path event cap (0 derives it from the model)");
  sim_cmd->add_flag("--no-oracle", sim_no_oracle,
                    "tolerate truncated paths and divergent models");
  add_output_flags(sim_cmd, sim_flags, "json");

  // verify
  auto* verify_cmd =
      app.add_subcommand("verify", "run the cross-module invariant suite");
  std::string verify_level = "fast";
  std::uint64_t verify_seed = 12345;
  verify_cmd->add_option("--level", verify_level, "fast or full")
      ->check(CLI::IsMember({"fast", "full"}));
  verify_cmd->add_option("--seed", verify_seed, "Monte Carlo seed")
      ->envname("RENEWCAP_SEED");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (pmf->parsed()) {
      return run_pmf(pmf_lambda, pmf_r, pmf_t, pmf_tol, pmf_flags);
    }
    if (curve->parsed()) {
      return run_curve(curve_lambda, curve_r, curve_tmin, curve_tmax,
                       curve_points, curve_flags);
    }
    if (expect->parsed()) {
      return run_expect(expect_lambda, expect_r, expect_t, expect_flags);
    }
    if (rart_cmd->parsed()) {
      const bool curve_mode = rart_tmin_opt->count() > 0;
      if (!curve_mode && rart_t_opt->count() == 0) {
        throw std::domain_error("rart needs either --t or --t-min/--t-max");
      }
      return run_rart(rart_dist, rart_renormalize, rart_lambda, rart_t,
                      rart_tmin, rart_tmax, rart_points, rart_tol, curve_mode,
                      rart_flags);
    }
    if (sim_cmd->parsed()) {
      return run_simulate(sim_dist, sim_renormalize, sim_lambda, sim_t,
                          sim_reps, sim_seed, sim_threads, sim_cap,
                          !sim_no_oracle, sim_flags);
    }
    if (verify_cmd->parsed()) {
      return run_verify(verify_level, verify_seed);
    }
  } catch (const renewcap::divergent_model_error& e) {
    std::cerr << "divergent model: " << e.what() << '\n';
    return 4;
  } catch (const renewcap::numerical_instability_error& e) {
    std::cerr << "numerical instability: " << e.what() << '\n';
    return 3;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
