#include "bootband/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "bootband/errors.hpp"

namespace bootband {

RegretTrace run_mab_with(long horizon, const BanditInstance& instance, const std::function<int(long)>& choose,
                         RngStream& rng, RegretKind regret) {
  if (horizon < 1) throw ConfigError("horizon", "must be at least 1");
  RegretTrace trace(static_cast<std::size_t>(horizon));
  double total = 0.0;
  for (long t = 0; t < horizon; ++t) {
    const int arm = choose(t);
    if (arm < 0 || arm >= instance.size()) throw InvalidArgument("chooser returned an invalid arm");
    const RewardModel& model = instance.arms[static_cast<std::size_t>(arm)];
    if (regret == RegretKind::pseudo)
      total += instance.optimal_mean - model.expected_value();
    else
      total += instance.optimal_mean - model.sample(rng);
    trace[static_cast<std::size_t>(t)] = total;
  }
  return trace;
}

RegretTrace run_mab(long horizon, const BanditInstance& instance, PolicyState& policy, RngStream& rng,
                    RegretKind regret) {
  if (horizon < 1) throw ConfigError("horizon", "must be at least 1");
  if (policy.arms() != instance.size()) throw InvalidArgument("policy and instance disagree on the arm count");
  const long forced = policy.spec().forced_per_arm * instance.size();
  if (forced > horizon)
    throw ConfigError("forced_exploration", "K*m = " + std::to_string(forced) + " exceeds the horizon " +
                                                std::to_string(horizon));
  for (int j = 0; j < instance.size(); ++j)
    if (instance.known[static_cast<std::size_t>(j)])
      policy.set_known_value(j, instance.arms[static_cast<std::size_t>(j)].expected_value());

  RegretTrace trace(static_cast<std::size_t>(horizon));
  double total = 0.0;
  for (long t = 0; t < horizon; ++t) {
    const int arm = policy.select_arm(rng);
    const RewardModel& model = instance.arms[static_cast<std::size_t>(arm)];
    const double reward = model.sample(rng);
    policy.update(arm, reward, rng);
    total += instance.optimal_mean - (regret == RegretKind::pseudo ? model.expected_value() : reward);
    trace[static_cast<std::size_t>(t)] = total;
  }
  return trace;
}

std::vector<double> run_contextual(long horizon, const ContextualDataset& data, ContextualAgent& agent,
                                   RngStream& rng, std::span<const std::size_t> order) {
  if (horizon < 1) throw ConfigError("horizon", "must be at least 1");
  if (data.size() == 0) throw InvalidArgument("contextual run needs a non-empty dataset");
  if (!order.empty() && order.size() != data.size()) throw InvalidArgument("row order must cover the dataset");
  std::vector<double> rewards(static_cast<std::size_t>(horizon));
  for (long t = 0; t < horizon; ++t) {
    const std::size_t slot = static_cast<std::size_t>(t) % data.size();
    const std::size_t row = order.empty() ? slot : order[slot];
    const Eigen::VectorXd x = data.context(row);
    try {
      const int arm = agent.select(x, t, rng);
      const double reward = contextual_step(data, row, arm);
      agent.update(arm, x, reward, rng);
      rewards[static_cast<std::size_t>(t)] = reward;
    } catch (const OptimizationFailure& e) {
      throw OptimizationFailure("round " + std::to_string(t + 1) + ": model fit diverged", e.steps());
    } catch (const NumericalError& e) {
      throw NumericalError("round " + std::to_string(t + 1) + ": " + e.what());
    }
  }
  return rewards;
}

std::vector<double> running_average(std::span<const double> rewards) {
  std::vector<double> out(rewards.size());
  double sum = 0.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    sum += rewards[t];
    out[t] = sum / static_cast<double>(t + 1);
  }
  return out;
}

TraceAccumulator::TraceAccumulator(std::size_t length) : mean_(length, 0.0), m2_(length, 0.0) {}

void TraceAccumulator::add(std::span<const double> trace) {
  if (trace.size() != mean_.size()) throw InvalidArgument("trace lengths differ");
  ++runs_;
  const double n = static_cast<double>(runs_);
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const double delta = trace[t] - mean_[t];
    mean_[t] += delta / n;
    m2_[t] += delta * (trace[t] - mean_[t]);
  }
}

AggregateTrace TraceAccumulator::result() const {
  if (runs_ == 0) throw InvalidArgument("aggregate needs at least one trace");
  AggregateTrace out;
  out.mean = mean_;
  out.se.assign(mean_.size(), 0.0);
  out.runs = runs_;
  if (runs_ > 1) {
    const double n = static_cast<double>(runs_);
    for (std::size_t t = 0; t < m2_.size(); ++t) out.se[t] = std::sqrt(std::max(m2_[t], 0.0) / (n - 1.0) / n);
  }
  return out;
}

AggregateTrace aggregate(std::span<const std::vector<double>> traces) {
  if (traces.empty()) throw InvalidArgument("aggregate needs at least one trace");
  TraceAccumulator acc(traces.front().size());
  for (const auto& trace : traces) acc.add(trace);
  return acc.result();
}

double loglog_slope(std::span<const double> trace, long t_lo, long t_hi) {
  if (t_lo < 1 || t_hi > static_cast<long>(trace.size()) || t_lo >= t_hi)
    throw InvalidArgument("slope window must satisfy 1 <= t_lo < t_hi <= T");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(t_hi - t_lo + 1);
  for (long t = t_lo; t <= t_hi; ++t) {
    const double r = trace[static_cast<std::size_t>(t - 1)];
    if (!(r > 0.0)) throw InvalidArgument("regret must be positive on the slope window (t = " + std::to_string(t) + ")");
    const double x = std::log(static_cast<double>(t));
    const double y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

int default_thread_count() {
  if (const char* env = std::getenv("BOOTBAND_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

BanditInstance make_instance(const MabExperiment& e, RngStream& rng) {
  if (e.theorem1) return theorem1_instance();
  if (!e.fixed_arms.empty()) return BanditInstance(e.fixed_arms);
  return random_instance(e.arms, e.family, rng, e.truncated_normal_stddev);
}

// Replications are processed in blocks; within a block all (policy, run)
// pairs run in parallel, then traces are folded in replication order.
constexpr int kBlockPerThread = 4;

}  // namespace

std::vector<MabSeries> run_mab_experiment(const MabExperiment& e) {
  if (e.horizon < 1) throw ConfigError("horizon", "must be at least 1");
  if (e.runs < 1) throw ConfigError("runs", "must be at least 1");
  if (e.policies.empty()) throw ConfigError("policies", "at least one policy is required");
  if (!e.theorem1 && e.fixed_arms.empty() && e.arms < 2) throw ConfigError("arms", "must be at least 2");

  const long m = forced_exploration_schedule(e.horizon, e.forced);
  const std::size_t np = e.policies.size();
  std::vector<TraceAccumulator> acc(np, TraceAccumulator(static_cast<std::size_t>(e.horizon)));
  std::vector<MabSeries> out(np);
  for (std::size_t p = 0; p < np; ++p) out[p].label = e.policies[p].label;

  const int block = std::max(1, e.threads) * kBlockPerThread;
  for (int r0 = 0; r0 < e.runs; r0 += block) {
    const int count = std::min(block, e.runs - r0);
    std::vector<RegretTrace> traces(static_cast<std::size_t>(count) * np);
    parallel_for(traces.size(), e.threads, [&](std::size_t job) {
      const int r = r0 + static_cast<int>(job / np);
      const std::size_t p = job % np;
      RngStream instance_rng = RngStream::derive(e.seed, 2 * static_cast<std::uint64_t>(r));
      const BanditInstance instance = make_instance(e, instance_rng);
      RngStream rng = RngStream::derive(RngStream::derive(e.seed, 2 * static_cast<std::uint64_t>(r) + 1).seed(), p);
      PolicySpec spec = e.policies[p];
      if (e.forced.mode != ForcedMode::none) spec.forced_per_arm = m;
      PolicyState policy(spec, instance.size());
      traces[job] = run_mab(e.horizon, instance, policy, rng, e.regret);
    });
    for (std::size_t job = 0; job < traces.size(); ++job) {
      const std::size_t p = job % np;
      acc[p].add(traces[job]);
      out[p].final_regret.push_back(traces[job].back());
    }
  }
  for (std::size_t p = 0; p < np; ++p) out[p].trace = acc[p].result();
  return out;
}

std::vector<ContextualSeries> run_contextual_experiment(const ContextualExperiment& e) {
  if (!e.data) throw ConfigError("dataset", "no dataset loaded");
  if (e.horizon < 1) throw ConfigError("horizon", "must be at least 1");
  if (e.runs < 1) throw ConfigError("runs", "must be at least 1");
  if (e.policies.empty()) throw ConfigError("policies", "at least one policy is required");
  const ContextualDataset& data = *e.data;
  data.validate();

  const std::size_t np = e.policies.size();
  const auto length = static_cast<std::size_t>(e.horizon);
  std::vector<TraceAccumulator> reward_acc(np, TraceAccumulator(length));
  std::vector<TraceAccumulator> average_acc(np, TraceAccumulator(length));

  const int block = std::max(1, e.threads) * kBlockPerThread;
  for (int r0 = 0; r0 < e.runs; r0 += block) {
    const int count = std::min(block, e.runs - r0);
    std::vector<std::vector<double>> rewards(static_cast<std::size_t>(count) * np);
    parallel_for(rewards.size(), e.threads, [&](std::size_t job) {
      const int r = r0 + static_cast<int>(job / np);
      const std::size_t p = job % np;
      // Shared per replication: row order and pseudo-examples.
      RngStream setup = RngStream::derive(e.seed, 2 * static_cast<std::uint64_t>(r));
      std::vector<std::size_t> order(data.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[setup.below(i)]);
      std::optional<PseudoExamples> pseudo;
      if (e.pseudo_examples) pseudo = make_pseudo_examples(data.contexts, data.dim, setup);

      RngStream rng = RngStream::derive(RngStream::derive(e.seed, 2 * static_cast<std::uint64_t>(r) + 1).seed(), p);
      auto agent = make_contextual_agent(e.policies[p], data.classes, data.dim, pseudo ? &*pseudo : nullptr);
      rewards[job] = run_contextual(e.horizon, data, *agent, rng, order);
    });
    for (std::size_t job = 0; job < rewards.size(); ++job) {
      const std::size_t p = job % np;
      reward_acc[p].add(rewards[job]);
      average_acc[p].add(running_average(rewards[job]));
    }
  }
  std::vector<ContextualSeries> out(np);
  for (std::size_t p = 0; p < np; ++p) {
    out[p].label = e.policies[p].label;
    out[p].reward = reward_acc[p].result();
    out[p].average = average_acc[p].result();
  }
  return out;
}

}  // namespace bootband
