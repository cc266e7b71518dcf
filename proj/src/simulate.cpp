#include "renewcap/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "renewcap/errors.hpp"

namespace renewcap::sim {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct Tally {
  std::uint64_t count = 0;
  std::uint64_t sum_a = 0;
  std::uint64_t sum_d = 0;
  unsigned __int128 sum_aa = 0;
  unsigned __int128 sum_dd = 0;
  unsigned __int128 sum_nn = 0;
  std::uint64_t truncated = 0;
  std::map<std::pair<unsigned, unsigned>, std::uint64_t> joint;

  void add(const PathOutcome& path) {
    if (path.truncated) {
      ++truncated;
      return;
    }
    ++count;
    const std::uint64_t a = path.alive;
    const std::uint64_t d = path.dead;
    sum_a += a;
    sum_d += d;
    sum_aa += static_cast<unsigned __int128>(a) * a;
    sum_dd += static_cast<unsigned __int128>(d) * d;
    sum_nn += static_cast<unsigned __int128>(a + d) * (a + d);
    ++joint[{path.alive, path.dead}];
  }

  void merge(const Tally& other) {
    count += other.count;
    sum_a += other.sum_a;
    sum_d += other.sum_d;
    sum_aa += other.sum_aa;
    sum_dd += other.sum_dd;
    sum_nn += other.sum_nn;
    truncated += other.truncated;
    for (const auto& [cell, n] : other.joint) joint[cell] += n;
  }
};

void mean_and_se(unsigned __int128 sum_sq, std::uint64_t sum,
                 std::uint64_t count, double& mean, double& se) {
  if (count == 0) {
    mean = 0.0;
    se = 0.0;
    return;
  }
  mean = static_cast<double>(sum) / static_cast<double>(count);
  if (count < 2) {
    se = 0.0;
    return;
  }
  const double sq = static_cast<double>(sum_sq);
  const double variance =
      (sq - mean * static_cast<double>(sum)) / (static_cast<double>(count) - 1.0);
  se = std::sqrt(std::max(0.0, variance) / static_cast<double>(count));
}

}  // namespace

CounterStream::CounterStream(std::uint64_t seed, std::uint64_t replication)
    : key_(mix(seed + kGolden) ^ mix(replication * kGolden + 1)) {}

double CounterStream::operator()() {
  ++counter_;
  const std::uint64_t bits = mix(key_ + counter_ * kGolden);
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

ReplacementSampler::ReplacementSampler(
    const rart::ReplacementDistribution& dist) {
  a0_ = rart::support_infimum(dist);
  if (const auto* fixed = std::get_if<rart::Fixed>(&dist)) {
    kind_ = Kind::fixed;
    p0_ = fixed->r;
  } else if (const auto* sexp = std::get_if<rart::ShiftedExponential>(&dist)) {
    kind_ = Kind::shifted_exponential;
    p0_ = sexp->nu;
    p1_ = sexp->eta;
  } else if (const auto* uniform = std::get_if<rart::Uniform>(&dist)) {
    kind_ = Kind::uniform;
    p0_ = uniform->a;
    p1_ = uniform->b;
  } else {
    kind_ = Kind::tabulated;
    const auto& knots = std::get<rart::Tabulated>(dist).knots;
    double cum = 0.0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      Segment seg;
      seg.r0 = knots[i].r;
      seg.r1 = knots[i + 1].r;
      seg.d0 = knots[i].density;
      seg.d1 = knots[i + 1].density;
      seg.cum0 = cum;
      cum += 0.5 * (seg.r1 - seg.r0) * (seg.d0 + seg.d1);
      seg.cum1 = cum;
      segments_.push_back(seg);
    }
    // Guard against trapezoid rounding: the last segment owns the rest.
    segments_.back().cum1 = 1.0;
  }
}

double ReplacementSampler::invert_cdf(double u) const {
  const Segment* seg = &segments_.back();
  for (const auto& candidate : segments_) {
    if (u < candidate.cum1) {
      seg = &candidate;
      break;
    }
  }
  const double len = seg->r1 - seg->r0;
  const double local = u - seg->cum0;
  const double slope = (seg->d1 - seg->d0) / len;
  double x;
  if (std::fabs(slope) * len < 1e-12 * std::max(seg->d0, seg->d1)) {
    x = seg->d0 > 0.0 ? local / seg->d0 : 0.0;
  } else {
    // Solve d0 x + slope x^2 / 2 = local for x in [0, len].
    const double disc = seg->d0 * seg->d0 + 2.0 * slope * local;
    x = (std::sqrt(std::max(0.0, disc)) - seg->d0) / slope;
  }
  return seg->r0 + std::clamp(x, 0.0, len);
}

std::uint64_t default_event_cap(const SimModel& model, double t) {
  const double a0 = rart::support_infimum(model.dist);
  if (a0 > 0.0) {
    return static_cast<std::uint64_t>(
        std::ceil(10.0 * (model.lambda + 1.0 / a0) * t));
  }
  return 1'000'000;  // divergent support: cap must exist, paths get flagged
}

double SimEstimate::frequency(unsigned k, unsigned l) const {
  if (replications_completed == 0) return 0.0;
  const auto it = joint_counts.find({k, l});
  if (it == joint_counts.end()) return 0.0;
  return static_cast<double>(it->second) /
         static_cast<double>(replications_completed);
}

SimEstimate simulate(const SimConfig& config, unsigned threads) {
  if (config.replications < 1) {
    throw std::domain_error("replications must be >= 1");
  }
  if (!(config.t > 0.0)) throw std::domain_error("t must be positive");
  if (!(config.model.lambda > 0.0)) {
    throw std::domain_error("lambda must be positive");
  }
  if (config.oracle_grade &&
      rart::divergence_check(config.model.dist) != rart::Finiteness::finite) {
    throw divergent_model_error(
        "oracle-grade simulation refuses a model whose E[N(t)] is not "
        "certified finite");
  }

  const ReplacementSampler sampler(config.model.dist);
  const std::uint64_t cap = config.max_events_per_path > 0
                                ? config.max_events_per_path
                                : default_event_cap(config.model, config.t);
  if (threads == 0) threads = 1;

  // All tallies are integers, so merge order cannot change the result.
  constexpr std::uint64_t kBlock = 8192;
  const std::uint64_t blocks = (config.replications + kBlock - 1) / kBlock;
  std::atomic<std::uint64_t> next_block{0};
  std::mutex merge_mutex;
  Tally total;

  auto worker = [&] {
    Tally local;
    for (;;) {
      const std::uint64_t block = next_block.fetch_add(1);
      if (block >= blocks) break;
      const std::uint64_t lo = block * kBlock;
      const std::uint64_t hi = std::min(lo + kBlock, config.replications);
      for (std::uint64_t rep = lo; rep < hi; ++rep) {
        CounterStream stream(config.seed, rep);
        local.add(simulate_path(config.model.lambda, sampler, config.t,
                                stream, cap));
      }
    }
    const std::lock_guard<std::mutex> lock(merge_mutex);
    total.merge(local);
  };

  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (config.oracle_grade && total.truncated > 0) {
    throw numerical_instability_error(
        "oracle-grade simulation hit the per-path event cap; estimates "
        "would be biased");
  }

  SimEstimate estimate;
  estimate.joint_counts = std::move(total.joint);
  estimate.replications_completed = total.count;
  estimate.truncated_paths = total.truncated;
  mean_and_se(total.sum_aa, total.sum_a, total.count, estimate.mean_a,
              estimate.se_a);
  mean_and_se(total.sum_dd, total.sum_d, total.count, estimate.mean_d,
              estimate.se_d);
  mean_and_se(total.sum_nn, total.sum_a + total.sum_d, total.count,
              estimate.mean_n, estimate.se_n);
  return estimate;
}

}  // namespace renewcap::sim
