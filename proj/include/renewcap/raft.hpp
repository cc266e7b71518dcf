#ifndef RENEWCAP_RAFT_HPP
#define RENEWCAP_RAFT_HPP

#include <span>
#include <vector>

namespace renewcap::raft {

// Base process parameters: exponential failure hazard lambda and the fixed
// age r at which a still-working component is replaced.
struct RaftParams {
  double lambda;
  double r;
};

// Throws std::domain_error unless lambda > 0 and r > 0.
RaftParams make_params(double lambda, double r);

// floor(t / r) — the maximum number of age-replacements possible by time t.
// A ratio within 4 ulps of an integer is treated as exactly on the block
// boundary (the block is closed at its lower end).
unsigned block_index(double t, double r);

// True when value is within 4 ulps of an integer multiple of step.
bool on_multiple(double value, double step);

// P(first n failure times sum to <= t with every one of them <= r).
double capped_arrival_prob(const RaftParams& params, unsigned n, double t);

// P(A(t) = k, D(t) = l): exactly k age-replacements and l failure
// replacements by time t.  Exactly 0 when k exceeds block_index(t, r).
double joint_pmf_cell(const RaftParams& params, double t, unsigned k,
                      unsigned l);

// P(D(t) = l); the failure-replacement count is Poisson with mean lambda*t
// regardless of r.
double death_pmf(double lambda, double t, unsigned l);

// E[A(t)] = sum_{m=1}^{j} e^{-lambda m r} (1 + lambda (t - m r)); zero
// before the first possible replacement age.
double alive_expectation(const RaftParams& params, double t);

// P(N(t) = n) with N = A + D, folded from the joint cells.
double n_pmf(const RaftParams& params, double t, unsigned n);

// E[N(t)] = lambda t + E[A(t)].
double expected_n(const RaftParams& params, double t);

// lim_{t->inf} E[N(t)]/t = lambda / (1 - e^{-lambda r}).
double rate_asymptote(const RaftParams& params);

// Finite joint table over k = 0..j and l = 0..l_max, with l_max chosen so
// the omitted Poisson mass of the failure marginal stays below mass_tol.
class JointPmf {
 public:
  JointPmf(RaftParams params, double t, unsigned j, unsigned l_max,
           double truncated_mass, std::vector<double> probs);

  const RaftParams& params() const { return params_; }
  double t() const { return t_; }
  unsigned j() const { return j_; }
  unsigned l_max() const { return l_max_; }
  double truncated_mass() const { return truncated_mass_; }

  // 0 for any (k, l) outside the stored ranges; k > j is impossible by
  // construction, l > l_max was truncated.
  double prob(unsigned k, unsigned l) const;
  double total_mass() const;
  double alive_marginal_mean() const;

 private:
  RaftParams params_;
  double t_;
  unsigned j_;
  unsigned l_max_;
  double truncated_mass_;
  std::vector<double> probs_;  // (j+1) x (l_max+1), row-major in k
};

JointPmf joint_pmf_table(const RaftParams& params, double t, double mass_tol);

struct CurvePoint {
  double t;
  double value;  // E[N(t)] / t
};

struct CurveSeries {
  RaftParams params;
  std::vector<CurvePoint> points;
  std::vector<double> jump_markers;  // multiples of r inside the grid range
  double asymptote;
};

// E[N(t)]/t sampled over a strictly increasing positive grid.  Throws
// std::domain_error on an empty or unsorted grid.
CurveSeries rate_curve(const RaftParams& params, std::span<const double> t_grid);

// Partial-sum quantities behind the rate-curve monotonicity analysis:
// u_n = sum_{k=1}^n e^{-lambda k r}, v_n = sum_{k=1}^n k e^{-lambda k r},
// both in closed form.  The curve is strictly increasing across block n
// exactly when u_n < lambda r v_n.
struct RateDiagnostics {
  unsigned n;
  double u_n;
  double v_n;
  bool increasing_on_block;
};

RateDiagnostics rate_diagnostics(const RaftParams& params, unsigned n);

}  // namespace renewcap::raft

#endif  // RENEWCAP_RAFT_HPP
