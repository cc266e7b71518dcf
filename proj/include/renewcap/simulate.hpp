#ifndef RENEWCAP_SIMULATE_HPP
#define RENEWCAP_SIMULATE_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "renewcap/rart.hpp"

namespace renewcap::sim {

// Counter-based uniform stream: output k of the stream for replication i is
// a pure function of (seed, i, k).  Replications can therefore be run in
// any order, on any number of threads, with identical draws.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t replication);

  // Uniform in [0, 1), 53-bit resolution.
  double operator()();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct SimModel {
  rart::ReplacementDistribution dist;
  double lambda;
};

struct SimConfig {
  SimModel model;
  double t;
  std::uint64_t replications;
  std::uint64_t seed;
  // 0 derives ceil(10 (lambda + 1/a0) t) from the support infimum a0.
  std::uint64_t max_events_per_path = 0;
  // Oracle-grade runs refuse divergent models and turn any truncated path
  // into a hard error instead of a biased estimate.
  bool oracle_grade = true;
};

// Replacement-age sampler with the tabulated inverse CDF precomputed.
class ReplacementSampler {
 public:
  explicit ReplacementSampler(const rart::ReplacementDistribution& dist);

  double support_infimum() const { return a0_; }
  bool consumes_draw() const { return kind_ != Kind::fixed; }

  template <typename U01>
  double draw(U01& u01) const {
    switch (kind_) {
      case Kind::fixed:
        return p0_;
      case Kind::shifted_exponential:
        return p1_ - std::log1p(-u01()) / p0_;
      case Kind::uniform:
        return p0_ + (p1_ - p0_) * u01();
      case Kind::tabulated:
        return invert_cdf(u01());
    }
    return p0_;
  }

 private:
  enum class Kind { fixed, shifted_exponential, uniform, tabulated };

  double invert_cdf(double u) const;

  Kind kind_;
  double p0_ = 0.0;  // r | nu | a
  double p1_ = 0.0;  // - | eta | b
  struct Segment {
    double r0, r1, d0, d1, cum0, cum1;
  };
  std::vector<Segment> segments_;
  double a0_ = 0.0;
};

struct PathOutcome {
  unsigned alive = 0;
  unsigned dead = 0;
  bool truncated = false;
};

// One realization: draws the replacement age once, then walks capped
// exponential interarrivals while their cumulative time stays <= t.  An
// interarrival counts as an age replacement exactly when the sampled
// failure time is >= the age.
template <typename U01>
PathOutcome simulate_path(double lambda, const ReplacementSampler& sampler,
                          double t, U01&& u01, std::uint64_t event_cap) {
  PathOutcome outcome;
  const double age = sampler.draw(u01);
  double clock = 0.0;
  for (std::uint64_t events = 0;; ++events) {
    if (events >= event_cap) {
      outcome.truncated = true;
      return outcome;
    }
    const double x = -std::log1p(-u01()) / lambda;
    const bool alive = x >= age;
    const double y = alive ? age : x;
    if (clock + y > t) break;
    clock += y;
    if (alive) {
      ++outcome.alive;
    } else {
      ++outcome.dead;
    }
  }
  return outcome;
}

std::uint64_t default_event_cap(const SimModel& model, double t);

struct SimEstimate {
  double mean_n = 0.0, se_n = 0.0;
  double mean_a = 0.0, se_a = 0.0;
  double mean_d = 0.0, se_d = 0.0;
  // (alive, dead) -> path count over the completed replications.
  std::map<std::pair<unsigned, unsigned>, std::uint64_t> joint_counts;
  std::uint64_t replications_completed = 0;
  std::uint64_t truncated_paths = 0;

  double frequency(unsigned k, unsigned l) const;
  bool operator==(const SimEstimate&) const = default;
};

// Runs the replications on the requested number of threads.  All tallies
// are integers, so the estimate is bit-identical for any thread count.
SimEstimate simulate(const SimConfig& config, unsigned threads = 1);

}  // namespace renewcap::sim

#endif  // RENEWCAP_SIMULATE_HPP
