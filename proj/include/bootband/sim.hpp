#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bootband/ctx.hpp"
#include "bootband/env.hpp"
#include "bootband/policy.hpp"

namespace bootband {

enum class RegretKind { pseudo, realized };

// Cumulative regret after rounds 1..T for one replication; entry t-1 is R(t).
using RegretTrace = std::vector<double>;

// Forced pulls come from `policy.spec().forced_per_arm`; arms flagged as
// known in the instance have their true mean handed to the policy first.
RegretTrace run_mab(long horizon, const BanditInstance& instance, PolicyState& policy, RngStream& rng,
                    RegretKind regret = RegretKind::pseudo);

// Same accounting with an arbitrary chooser; `round` is 0-based.
RegretTrace run_mab_with(long horizon, const BanditInstance& instance,
                         const std::function<int(long round)>& choose, RngStream& rng,
                         RegretKind regret = RegretKind::pseudo);

// Rewards of rounds 1..T. Rows are visited in `order` (or 0, 1, ... when
// empty), wrapping around when T exceeds the dataset.
std::vector<double> run_contextual(long horizon, const ContextualDataset& data, ContextualAgent& agent,
                                   RngStream& rng, std::span<const std::size_t> order = {});

// Running per-step reward: entry t-1 is the mean of rewards 1..t.
std::vector<double> running_average(std::span<const double> rewards);

struct AggregateTrace {
  std::vector<double> mean;
  std::vector<double> se;  // standard error
  long runs = 0;
};

// Pointwise mean and stddev / sqrt(runs) with the n-1 stddev (0 for one run).
AggregateTrace aggregate(std::span<const std::vector<double>> traces);

// Order-dependent running version of `aggregate`; folding the same traces in
// the same order gives bit-identical results.
class TraceAccumulator {
 public:
  explicit TraceAccumulator(std::size_t length);
  void add(std::span<const double> trace);
  AggregateTrace result() const;
  long runs() const { return runs_; }

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  long runs_ = 0;
};

// Least-squares slope of log R(t) against log t over integer t in [t_lo, t_hi].
double loglog_slope(std::span<const double> trace, long t_lo, long t_hi);

struct MabExperiment {
  int arms = 10;
  Family family = Family::bernoulli;
  bool theorem1 = false;
  // Explicit instance used in place of the random one (means fixed across runs).
  std::vector<RewardModel> fixed_arms;
  long horizon = 10000;
  int runs = 100;
  std::uint64_t seed = 1;
  ForcedExploration forced;
  RegretKind regret = RegretKind::pseudo;
  double truncated_normal_stddev = 1e-4;
  std::vector<PolicySpec> policies;
  int threads = 1;
};

struct MabSeries {
  std::string label;
  AggregateTrace trace;
  std::vector<double> final_regret;  // R(T) per replication
};

// Replication r draws its instance from stream (seed, 2r) and runs policy p
// on stream derive(seed, 2r + 1) mixed with p, so every policy faces the
// same instances and results do not depend on the thread count.
std::vector<MabSeries> run_mab_experiment(const MabExperiment& experiment);

struct ContextualExperiment {
  const ContextualDataset* data = nullptr;
  long horizon = 5000;
  int runs = 5;
  std::uint64_t seed = 1;
  bool pseudo_examples = true;
  std::vector<ContextualSpec> policies;
  int threads = 1;
};

struct ContextualSeries {
  std::string label;
  AggregateTrace reward;   // instantaneous reward per round
  AggregateTrace average;  // running per-step reward
};

std::vector<ContextualSeries> run_contextual_experiment(const ContextualExperiment& experiment);

// Runs `job(i)` for i in [0, count) on up to `threads` workers. The first
// exception thrown by any job is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& job);

// BOOTBAND_THREADS if set and positive, else the hardware concurrency.
int default_thread_count();

}  // namespace bootband
