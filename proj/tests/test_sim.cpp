#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "bootband/errors.hpp"
#include "bootband/sim.hpp"

using namespace bootband;

namespace {

BanditInstance two_arms(double a, double b) {
  return BanditInstance({RewardModel::bernoulli(a), RewardModel::bernoulli(b)});
}

// Reads the label of the row visited at `round` under the identity order.
class LabelOracle : public ContextualAgent {
 public:
  explicit LabelOracle(const ContextualDataset& d) : data_(d) {}
  int select(const Eigen::VectorXd&, long round, RngStream&) override {
    return data_.labels[static_cast<std::size_t>(round) % data_.size()];
  }
  void update(int, const Eigen::VectorXd&, double, RngStream&) override {}

 private:
  const ContextualDataset& data_;
};

}  // namespace

TEST_CASE("fixed choosers accumulate gaps") {
  RngStream rng(1);
  const BanditInstance inst = two_arms(0.7, 0.4);
  const RegretTrace best = run_mab_with(100, inst, [](long) { return 0; }, rng);
  for (double r : best) CHECK(r == 0.0);
  const RegretTrace worst = run_mab_with(100, inst, [](long) { return 1; }, rng);
  REQUIRE(worst.size() == 100);
  for (std::size_t t = 0; t < worst.size(); ++t) CHECK(worst[t] == doctest::Approx(0.3 * (t + 1)));
  CHECK_THROWS_AS(run_mab_with(10, inst, [](long) { return 2; }, rng), InvalidArgument);
  CHECK_THROWS_AS(run_mab_with(0, inst, [](long) { return 0; }, rng), ConfigError);
}

TEST_CASE("policy runs: monotone traces and accounting identity") {
  const BanditInstance inst({RewardModel::bernoulli(0.2), RewardModel::bernoulli(0.5), RewardModel::bernoulli(0.45)});
  for (PolicyKind kind : {PolicyKind::ts, PolicyKind::npb, PolicyKind::wb, PolicyKind::eg}) {
    PolicySpec spec;
    spec.kind = kind;
    PolicyState state(spec, 3);
    RngStream rng(2);
    std::vector<int> chosen;
    const RegretTrace trace = run_mab_with(
        2000, inst,
        [&](long) {
          const int arm = state.select_arm(rng);
          chosen.push_back(arm);
          state.update(arm, inst.arms[static_cast<std::size_t>(arm)].sample(rng), rng);
          return arm;
        },
        rng);
    double mean_sum = 0.0;
    for (std::size_t t = 0; t < trace.size(); ++t) {
      if (t > 0) REQUIRE(trace[t] >= trace[t - 1]);
      mean_sum += inst.arms[static_cast<std::size_t>(chosen[t])].expected_value();
      REQUIRE(trace[t] + mean_sum == doctest::Approx((t + 1) * inst.optimal_mean));
    }
  }
}

TEST_CASE("run_mab forced exploration") {
  const BanditInstance inst = two_arms(0.6, 0.3);
  PolicySpec spec;
  spec.kind = PolicyKind::npb;
  spec.forced_per_arm = 5;
  PolicyState state(spec, 2);
  RngStream rng(3);
  const RegretTrace trace = run_mab(100, inst, state, rng);
  CHECK(state.forced_pulls() == 10);
  CHECK(state.adaptive_pulls() == 90);
  // Round-robin forced phase: arm 2 is pulled on every even round.
  CHECK(trace[9] == doctest::Approx(5 * 0.3));

  PolicySpec greedy = spec;
  greedy.forced_per_arm = 60;
  PolicyState big(greedy, 2);
  CHECK_THROWS_AS(run_mab(100, inst, big, rng), ConfigError);
}

TEST_CASE("run_mab replays and known arms") {
  const BanditInstance inst = theorem1_instance();
  PolicySpec spec;
  spec.kind = PolicyKind::npb;
  PolicyState a(spec, 2), b(spec, 2);
  RngStream ra(4), rb(4);
  const RegretTrace ta = run_mab(500, inst, a, ra);
  const RegretTrace tb = run_mab(500, inst, b, rb);
  CHECK(ta == tb);
  // Every round costs 0 or 1/4.
  for (std::size_t t = 0; t < ta.size(); ++t) {
    const double step = ta[t] - (t ? ta[t - 1] : 0.0);
    CHECK((step == 0.0 || step == doctest::Approx(0.25)));
  }

  PolicyState c(spec, 2);
  RngStream rc(5);
  CHECK_FALSE(run_mab(500, inst, c, rc) == ta);
}

TEST_CASE("realized regret") {
  const BanditInstance inst = two_arms(0.5, 0.5);
  RngStream rng(6);
  const RegretTrace pseudo = run_mab_with(200, inst, [](long) { return 1; }, rng, RegretKind::pseudo);
  for (double r : pseudo) CHECK(r == 0.0);
  const RegretTrace realized = run_mab_with(200, inst, [](long) { return 1; }, rng, RegretKind::realized);
  // Optimal mean minus a {0, 1} reward: each step is +-1/2.
  for (std::size_t t = 0; t < realized.size(); ++t) {
    const double step = realized[t] - (t ? realized[t - 1] : 0.0);
    CHECK(std::abs(std::abs(step) - 0.5) < 1e-12);
  }
}

TEST_CASE("contextual runs") {
  RngStream data_rng(7);
  const ContextualDataset d = make_synthetic_dataset(300, 4, 4, data_rng);
  LabelOracle oracle(d);
  RngStream rng(8);
  const auto rewards = run_contextual(1000, d, oracle, rng);
  CHECK(per_step_reward(rewards) == 1.0);

  ContextualSpec uniform;
  uniform.kind = ContextualKind::uniform;
  auto agent = make_contextual_agent(uniform, 4, 4, nullptr);
  const auto random_rewards = run_contextual(20000, d, *agent, rng);
  CHECK(std::abs(per_step_reward(random_rewards) - 0.25) < 0.015);

  ContextualSpec wb;
  wb.kind = ContextualKind::wb_logistic;
  RngStream p1(9), p2(9);
  const PseudoExamples pseudo = make_pseudo_examples(d.contexts, 4, p1);
  auto a1 = make_contextual_agent(wb, 4, 4, &pseudo);
  auto a2 = make_contextual_agent(wb, 4, 4, &pseudo);
  RngStream r1(10), r2(10);
  CHECK(run_contextual(200, d, *a1, r1) == run_contextual(200, d, *a2, r2));

  std::vector<std::size_t> bad_order(5, 0);
  CHECK_THROWS_AS(run_contextual(10, d, *agent, rng, bad_order), InvalidArgument);

  const std::vector<double> avg = running_average(std::vector<double>{1, 0, 1, 1});
  CHECK(avg == std::vector<double>{1.0, 0.5, 2.0 / 3.0, 0.75});
}

TEST_CASE("contextual errors carry the round") {
  ContextualDataset d;
  d.dim = 1;
  d.classes = 2;
  d.contexts = Eigen::MatrixXd::Constant(3, 1, 1e200);
  d.labels = {1, 1, 1};
  ContextualSpec spec;
  spec.kind = ContextualKind::wb_linear;
  spec.fit.step = 1.0;
  auto agent = make_contextual_agent(spec, 2, 1, nullptr);
  RngStream rng(11);
  try {
    run_contextual(10, d, *agent, rng);
    FAIL("expected a fitting failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("round ") != std::string::npos);
  }
}

TEST_CASE("aggregation") {
  const std::vector<std::vector<double>> single = {{1, 2, 3}};
  const AggregateTrace a = aggregate(single);
  CHECK(a.mean == single[0]);
  CHECK(a.se == std::vector<double>{0, 0, 0});
  CHECK(a.runs == 1);

  const std::vector<std::vector<double>> pair = {{1, 2, 3}, {3, 6, 9}};
  const AggregateTrace b = aggregate(pair);
  CHECK(b.mean == std::vector<double>{2, 4, 6});
  // stddev of {t, 3t} with n-1 is sqrt(2) t, over sqrt(2) runs.
  for (std::size_t i = 0; i < 3; ++i) CHECK(b.se[i] == doctest::Approx(static_cast<double>(i + 1)));

  const std::vector<std::vector<double>> ragged = {{1, 2}, {1}};
  CHECK_THROWS_AS(aggregate(ragged), InvalidArgument);
  CHECK_THROWS_AS(aggregate(std::span<const std::vector<double>>{}), InvalidArgument);

  TraceAccumulator acc(3);
  for (const auto& t : pair) acc.add(t);
  CHECK(acc.result().mean == b.mean);

  // Quadrupling the runs halves the standard error.
  RngStream rng(12);
  auto draws = [&](int n) {
    std::vector<std::vector<double>> traces(static_cast<std::size_t>(n));
    for (auto& t : traces) t = {sample_gaussian(0.0, 1.0, rng)};
    return aggregate(traces).se[0];
  };
  double ratio = 0.0;
  for (int i = 0; i < 20; ++i) ratio += draws(4000) / draws(16000) / 20;
  CHECK(std::abs(ratio - 2.0) < 0.1);
}

TEST_CASE("log-log slope") {
  std::vector<double> linear(10000), root(10000), logarithmic(10000);
  for (std::size_t i = 0; i < linear.size(); ++i) {
    const double t = static_cast<double>(i + 1);
    linear[i] = 3.0 * t;
    root[i] = 2.0 * std::sqrt(t);
    logarithmic[i] = 5.0 * std::log(t);
  }
  CHECK(loglog_slope(linear, 10, 10000) == doctest::Approx(1.0).epsilon(0.01));
  CHECK(loglog_slope(root, 10, 10000) == doctest::Approx(0.5).epsilon(0.01));

  // Direct fit oracle for c log t on [1e3, 1e4].
  double sx = 0, sy = 0, sxx = 0, sxy = 0, n = 0;
  for (long t = 1000; t <= 10000; ++t) {
    const double x = std::log(static_cast<double>(t)), y = std::log(5.0 * x);
    sx += x, sy += y, sxx += x * x, sxy += x * y, n += 1;
  }
  const double oracle = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double slope = loglog_slope(logarithmic, 1000, 10000);
  CHECK(slope == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(slope < 0.2);

  std::vector<double> zeros(100, 0.0);
  CHECK_THROWS_AS(loglog_slope(zeros, 1, 100), InvalidArgument);
  CHECK_THROWS_AS(loglog_slope(linear, 0, 100), InvalidArgument);
  CHECK_THROWS_AS(loglog_slope(linear, 10, 20000), InvalidArgument);
}

TEST_CASE("MAB experiments are deterministic across thread counts") {
  MabExperiment e;
  e.arms = 5;
  e.horizon = 500;
  e.runs = 12;
  e.seed = 99;
  PolicySpec ts, npb;
  ts.kind = PolicyKind::ts;
  ts.label = "ts";
  npb.kind = PolicyKind::npb;
  npb.label = "npb";
  e.policies = {ts, npb};
  e.threads = 1;
  const auto one = run_mab_experiment(e);
  e.threads = 3;
  const auto three = run_mab_experiment(e);
  REQUIRE(one.size() == 2);
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(one[p].label == three[p].label);
    CHECK(one[p].trace.mean == three[p].trace.mean);
    CHECK(one[p].trace.se == three[p].trace.se);
    CHECK(one[p].final_regret == three[p].final_regret);
    CHECK(one[p].final_regret.size() == 12);
  }
  // Replications differ from each other.
  CHECK(one[0].final_regret[0] != one[0].final_regret[1]);

  e.runs = 0;
  CHECK_THROWS_AS(run_mab_experiment(e), ConfigError);
  e.runs = 2;
  e.policies.clear();
  CHECK_THROWS_AS(run_mab_experiment(e), ConfigError);
}

TEST_CASE("contextual experiments are deterministic across thread counts") {
  RngStream data_rng(13);
  const ContextualDataset d = make_synthetic_dataset(200, 3, 3, data_rng);
  ContextualExperiment e;
  e.data = &d;
  e.horizon = 150;
  e.runs = 4;
  ContextualSpec wb, ucb;
  wb.kind = ContextualKind::wb_logistic;
  wb.label = "wb";
  ucb.kind = ContextualKind::linucb;
  ucb.label = "ucb";
  e.policies = {wb, ucb};
  e.threads = 1;
  const auto one = run_contextual_experiment(e);
  e.threads = 2;
  const auto two = run_contextual_experiment(e);
  for (std::size_t p = 0; p < 2; ++p) {
    CHECK(one[p].reward.mean == two[p].reward.mean);
    CHECK(one[p].average.mean == two[p].average.mean);
    CHECK(one[p].average.mean.size() == 150);
  }
  e.data = nullptr;
  CHECK_THROWS_AS(run_contextual_experiment(e), ConfigError);
}

TEST_CASE("parallel_for and thread defaults") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw InvalidState("boom");
                               }),
                  InvalidState);
  setenv("BOOTBAND_THREADS", "3", 1);
  CHECK(default_thread_count() == 3);
  setenv("BOOTBAND_THREADS", "0", 1);
  CHECK(default_thread_count() >= 1);
  unsetenv("BOOTBAND_THREADS");
}
