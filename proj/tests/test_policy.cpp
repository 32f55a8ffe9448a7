#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <cmath>
#include <map>

#include "bootband/errors.hpp"
#include "bootband/policy.hpp"
#include "bootband/theory.hpp"

using namespace bootband;

namespace {

ArmHistory bernoulli_history(long positives, long negatives, int a0 = 1, int b0 = 1) {
  ArmHistory h;
  h.positives = positives;
  h.negatives = negatives;
  h.n = positives + negatives;
  h.sum = static_cast<double>(positives);
  h.pseudo_pos = a0;
  h.pseudo_neg = b0;
  return h;
}

ArmHistory general_history(std::vector<double> samples, int a0 = 1, int b0 = 1) {
  ArmHistory h;
  h.retain_samples = true;
  h.pseudo_pos = a0;
  h.pseudo_neg = b0;
  for (double r : samples) h.record(r);
  return h;
}

double beta_cdf(double a, double b, double x) { return boost::math::ibeta(a, b, std::clamp(x, 0.0, 1.0)); }

std::vector<double> sorted_draws(int n, const std::function<double()>& draw) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (double& x : xs) x = draw();
  std::sort(xs.begin(), xs.end());
  return xs;
}

// Empirical PMF keyed by value rounded to 1e-9.
std::map<long, double> pmf(int n, const std::function<double()>& draw) {
  std::map<long, double> out;
  for (int i = 0; i < n; ++i) out[std::lround(draw() * 1e9)] += 1.0 / n;
  return out;
}

double total_variation(const std::map<long, double>& a, const std::map<long, double>& b) {
  std::map<long, double> diff = a;
  for (auto [k, v] : b) diff[k] -= v;
  double tv = 0.0;
  for (auto [k, v] : diff) tv += std::abs(v);
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("history bookkeeping") {
  ArmHistory h;
  h.record(1.0);
  h.record(0.0);
  h.record(1.0);
  CHECK(h.n == 3);
  CHECK(h.positives == 2);
  CHECK(h.negatives == 1);
  CHECK(h.positives + h.negatives == h.n);
  CHECK(h.smoothed_mean() == doctest::Approx(3.0 / 5.0));
  CHECK_THROWS_AS(h.record(0.3), InvalidArgument);

  ArmHistory g = general_history({0.3});
  CHECK(g.samples.size() == 1);
  CHECK(g.sum == doctest::Approx(0.3));

  ArmHistory empty;
  empty.pseudo_pos = 0;
  empty.pseudo_neg = 0;
  CHECK(empty.smoothed_mean() == 0.5);
}

TEST_CASE("NPB Bernoulli sample") {
  RngStream rng(1);
  const auto empty = pmf(100000, [&, h = bernoulli_history(0, 0)] { return npb_bernoulli_sample(h, rng); });
  const std::map<long, double> oracle = {{0, 0.25}, {500000000, 0.5}, {1000000000, 0.25}};
  CHECK(total_variation(empty, oracle) < 0.01);

  // n=4, alpha=2: Z ~ Bino(6, 1/2) and the value is Z/6.
  const ArmHistory h = bernoulli_history(2, 2);
  std::map<long, double> bino;
  for (int z = 0; z <= 6; ++z) {
    const double c = std::tgamma(7.0) / (std::tgamma(z + 1.0) * std::tgamma(7.0 - z));
    bino[std::lround(z / 6.0 * 1e9)] = c / 64.0;
  }
  CHECK(total_variation(pmf(100000, [&] { return npb_bernoulli_sample(h, rng); }), bino) < 0.01);

  const ArmHistory skew = bernoulli_history(7, 1);
  const double mean = 8.0 / 10.0;
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += npb_bernoulli_sample(skew, rng);
  const double se = std::sqrt(mean * (1 - mean) / 10.0 / n);
  CHECK(std::abs(sum / n - mean) < 3 * se);

  CHECK(npb_bernoulli_sample(bernoulli_history(0, 0, 0, 0), rng) == 0.5);
}

TEST_CASE("NPB general sample") {
  RngStream rng(2);
  const ArmHistory single = general_history({0.5}, 0, 0);
  for (int i = 0; i < 100; ++i) CHECK(npb_general_sample(single, rng) == 0.5);

  const ArmHistory pair = general_history({0.2, 0.8}, 0, 0);
  const std::map<long, double> oracle = {{200000000, 0.25}, {500000000, 0.5}, {800000000, 0.25}};
  CHECK(total_variation(pmf(100000, [&] { return npb_general_sample(pair, rng); }), oracle) < 0.01);

  const ArmHistory binary_general = general_history({1, 0, 0, 1, 1});
  const ArmHistory binary = bernoulli_history(3, 2);
  CHECK(total_variation(pmf(100000, [&] { return npb_general_sample(binary_general, rng); }),
                        pmf(100000, [&] { return npb_bernoulli_sample(binary, rng); })) < 0.01);

  CHECK_THROWS_AS(npb_general_sample(general_history({}, 0, 0), rng), InvalidState);
  CHECK_THROWS_AS(npb_general_sample(binary, rng), InvalidState);
}

TEST_CASE("WB Bernoulli sample") {
  RngStream rng(3);
  for (WeightForm form : {WeightForm::gamma_ratio, WeightForm::explicit_weights}) {
    const auto uniform = sorted_draws(100000, [&, h = bernoulli_history(0, 0)] { return wb_bernoulli_sample(h, rng, form); });
    CHECK(ks_statistic(uniform, [](double x) { return std::clamp(x, 0.0, 1.0); }) < 0.01);

    const ArmHistory h = bernoulli_history(2, 1);
    const auto xs = sorted_draws(100000, [&] { return wb_bernoulli_sample(h, rng, form); });
    double mean = 0.0;
    for (double x : xs) mean += x / xs.size();
    CHECK(std::abs(mean - 0.6) < 0.005);
    CHECK(ks_statistic(xs, [](double x) { return beta_cdf(3, 2, x); }) < 0.01);
  }
  CHECK(wb_bernoulli_sample(bernoulli_history(0, 3, 0, 1), rng) == 0.0);
  CHECK(wb_bernoulli_sample(bernoulli_history(3, 0, 1, 0), rng) == 1.0);
}

TEST_CASE("WB general sample") {
  RngStream rng(4);
  const ArmHistory constant = general_history({0.4, 0.4, 0.4}, 0, 0);
  for (int i = 0; i < 100; ++i) CHECK(wb_general_sample(constant, rng) == doctest::Approx(0.4).epsilon(1e-12));

  const ArmHistory spread = general_history({0.2, 0.7, 0.5});
  for (int i = 0; i < 1000; ++i) {
    const double v = wb_general_sample(spread, rng);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  const ArmHistory tight = general_history({0.2, 0.7, 0.5}, 0, 0);
  for (int i = 0; i < 1000; ++i) {
    const double v = wb_general_sample(tight, rng);
    CHECK(v >= 0.2 - 1e-12);
    CHECK(v <= 0.7 + 1e-12);
  }

  const ArmHistory binary_general = general_history({1, 0, 0, 1, 1, 0, 1});
  const ArmHistory binary = bernoulli_history(4, 3);
  const auto a = sorted_draws(100000, [&] { return wb_general_sample(binary_general, rng); });
  const auto b = sorted_draws(100000, [&] { return wb_bernoulli_sample(binary, rng); });
  // Two-sample KS at level 0.001: 1.949 * sqrt(2 / n).
  CHECK(ks_two_sample(a, b) < 1.949 * std::sqrt(2.0 / 100000));
  CHECK_THROWS_AS(wb_general_sample(general_history({}, 0, 0), rng), InvalidState);
}

TEST_CASE("TS sample") {
  RngStream rng(5);
  const auto uniform = sorted_draws(100000, [&, h = bernoulli_history(0, 0)] { return ts_bernoulli_sample(h, rng); });
  CHECK(ks_statistic(uniform, [](double x) { return std::clamp(x, 0.0, 1.0); }) < 0.01);

  const ArmHistory h = bernoulli_history(5, 0);
  const auto xs = sorted_draws(100000, [&] { return ts_bernoulli_sample(h, rng); });
  double mean = 0.0;
  for (double x : xs) mean += x / xs.size();
  CHECK(std::abs(mean - 6.0 / 7.0) < 0.005);
  CHECK(ks_statistic(xs, [](double x) { return beta_cdf(6, 1, x); }) < 0.01);

  const auto wb = sorted_draws(100000, [&] { return wb_bernoulli_sample(h, rng, WeightForm::explicit_weights); });
  CHECK(ks_two_sample(xs, wb) < 1.949 * std::sqrt(2.0 / 100000));

  CHECK_THROWS_AS(ts_bernoulli_sample(bernoulli_history(1, 1, 0, 1), rng), InvalidParameter);
}

TEST_CASE("binarized rewards") {
  RngStream rng(6);
  for (int i = 0; i < 100; ++i) {
    CHECK(binarize_reward(0.0, rng) == 0);
    CHECK(binarize_reward(1.0, rng) == 1);
  }
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += binarize_reward(0.3, rng);
  CHECK(std::abs(sum / 100000 - 0.3) < 0.005);
  CHECK_THROWS_AS(binarize_reward(1.5, rng), InvalidArgument);
  CHECK_THROWS_AS(binarize_reward(-0.1, rng), InvalidArgument);
}

TEST_CASE("categorical WB sample") {
  RngStream rng(7);
  const std::vector<long> counts = {2, 1, 1};
  const std::vector<double> pseudo = {1, 1, 1};
  std::vector<double> mean(3, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto p = wb_categorical_sample(counts, pseudo, rng);
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
      CHECK(p[static_cast<std::size_t>(c)] > 0.0);
      total += p[static_cast<std::size_t>(c)];
      mean[static_cast<std::size_t>(c)] += p[static_cast<std::size_t>(c)] / n;
    }
    REQUIRE(std::abs(total - 1.0) < 1e-12);
  }
  // Dirichlet(3, 2, 2) means; s.e. from the Dirichlet variance a_c (A - a_c) / (A^2 (A + 1)).
  const double alpha[3] = {3, 2, 2};
  for (int c = 0; c < 3; ++c) {
    const double m = alpha[c] / 7.0;
    const double se = std::sqrt(alpha[c] * (7.0 - alpha[c]) / (49.0 * 8.0) / n);
    CHECK(std::abs(mean[static_cast<std::size_t>(c)] - m) < 0.005);
    CHECK(std::abs(mean[static_cast<std::size_t>(c)] - m) < 3 * se);
  }

  const std::vector<long> two = {4, 1};
  const std::vector<double> two_pseudo = {1, 2};
  const auto first = sorted_draws(100000, [&] { return wb_categorical_sample(two, two_pseudo, rng)[0]; });
  CHECK(ks_statistic(first, [](double x) { return beta_cdf(5, 3, x); }) < ks_critical_value(first.size(), 0.001));

  const std::vector<long> zeros = {0, 0};
  const std::vector<double> no_pseudo = {0, 0};
  CHECK_THROWS_AS(wb_categorical_sample(zeros, no_pseudo, rng), InvalidState);
}

TEST_CASE("Gaussian WB sample") {
  RngStream rng(8);
  Eigen::MatrixXd X(1, 1);
  X << 1.0;
  Eigen::VectorXd y(1);
  y << 0.7;
  double sum = 0.0, sum_sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = wb_gaussian_sample(X, y, rng)(0);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  CHECK(std::abs(mean - 0.7) < 3.0 / std::sqrt(n));
  CHECK(std::abs((sum_sq / n - mean * mean) - 1.0) < 0.02);

  Eigen::MatrixXd singular(3, 2);
  singular << 1, 2, 2, 4, 3, 6;
  Eigen::VectorXd ys(3);
  ys << 1, 2, 3;
  CHECK_THROWS_AS(wb_gaussian_sample(singular, ys, rng), RankDeficiency);
}

TEST_CASE("forced exploration and epsilon schedules") {
  CHECK(forced_exploration_schedule(10000, {ForcedMode::theorem_text, 0}) == 1);
  const double delta = std::cbrt(16.0 * std::log(1e4) / 1e4);
  const long expected = static_cast<long>(std::ceil(16.0 * std::log(1e4) / (delta * delta)));
  CHECK(forced_exploration_schedule(10000, {ForcedMode::proof_derived, 0}) == expected);
  CHECK(expected > 2300);
  CHECK(expected < 2500);
  CHECK(forced_exploration_schedule(10000, {ForcedMode::explicit_count, 30}) == 30);
  CHECK(forced_exploration_schedule(10000, {ForcedMode::none, 0}) == 0);

  CHECK(epsilon_schedule(0) == 1.0);
  CHECK(epsilon_schedule(50) == 0.5);
  double prev = 2.0;
  for (long t = 0; t < 100000; t += 997) {
    CHECK(epsilon_schedule(t) < prev);
    prev = epsilon_schedule(t);
  }
  CHECK(epsilon_schedule(100000000) < 1e-6);
}

TEST_CASE("arm selection") {
  RngStream rng(9);
  PolicySpec spec;
  spec.kind = PolicyKind::wb;
  PolicyState state(spec, 2);
  const std::vector<double> samples = {0.9, 0.1};
  CHECK(state.select_from_samples(samples, rng) == 0);

  SUBCASE("argmax is shift invariant") {
    const std::vector<double> base = {0.3, 0.8, 0.5, 0.8};
    PolicyState four(spec, 4);
    RngStream r1(10), r2(10);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> shifted = base;
      for (double& v : shifted) v += 5.0;
      CHECK(four.select_from_samples(base, r1) == four.select_from_samples(shifted, r2));
    }
  }
  SUBCASE("ties are broken uniformly") {
    PolicyState three(spec, 3);
    const std::vector<double> tied = {0.5, 0.5, 0.5};
    std::vector<int> counts(3, 0);
    for (int i = 0; i < 30000; ++i) ++counts[static_cast<std::size_t>(three.select_from_samples(tied, rng))];
    for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  }
  SUBCASE("known arm loses ties") {
    PolicyState known(spec, 2);
    known.set_known_value(1, 0.25);
    const std::vector<double> tie = {0.25, 0.25};
    for (int i = 0; i < 100; ++i) CHECK(known.select_from_samples(tie, rng) == 0);
  }
}

TEST_CASE("epsilon greedy explores uniformly at epsilon one") {
  RngStream rng(11);
  PolicySpec spec;
  spec.kind = PolicyKind::eg;
  PolicyState state(spec, 4);
  // Round 0 has epsilon 50/51; the choice is uniform up to that exploit share.
  std::vector<int> counts(4, 0);
  for (int i = 0; i < 40000; ++i) ++counts[static_cast<std::size_t>(state.select_arm(rng))];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("known-arm rule pulls arm 1 iff the sample reaches 1/4") {
  PolicySpec spec;
  spec.kind = PolicyKind::npb;
  PolicyState state(spec, 2);
  state.set_known_value(1, 0.25);
  RngStream rng(12);
  // Three failures on arm 1: pull probability is P(Bino(5, 1/5) >= 5/4).
  for (int i = 0; i < 3; ++i) state.update(0, 0.0, rng);
  int pulls = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) pulls += state.select_arm(rng) == 0 ? 1 : 0;
  const double p = npb_pull_probability(3).value;
  CHECK(p == doctest::Approx(1.0 - std::pow(0.8, 5) - 5 * 0.2 * std::pow(0.8, 4)));
  CHECK(std::abs(static_cast<double>(pulls) / n - p) < 3 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("updates and forced phase") {
  RngStream rng(13);
  PolicySpec spec;
  spec.kind = PolicyKind::npb;
  spec.forced_per_arm = 2;
  PolicyState state(spec, 3);
  std::vector<int> order;
  for (int i = 0; i < 6; ++i) {
    CHECK(state.in_forced_phase());
    const int arm = state.select_arm(rng);
    order.push_back(arm);
    state.update(arm, 1.0, rng);
  }
  CHECK(order == std::vector<int>{0, 1, 2, 0, 1, 2});
  CHECK_FALSE(state.in_forced_phase());
  CHECK(state.forced_pulls() == 6);
  const ArmHistory before = state.history(2);
  state.update(0, 0.0, rng);
  CHECK(state.adaptive_pulls() == 1);
  CHECK(state.round() == 7);
  CHECK(state.history(0).negatives == 1);
  CHECK(state.history(2).n == before.n);
  CHECK(state.history(2).positives == before.positives);

  PolicySpec general = spec;
  general.general_rewards = true;
  general.forced_per_arm = 0;
  PolicyState g(general, 2);
  g.update(1, 0.3, rng);
  CHECK(g.history(1).samples == std::vector<double>{0.3});
  CHECK(g.history(1).sum == doctest::Approx(0.3));

  PolicySpec ts = general;
  ts.kind = PolicyKind::ts;
  PolicyState t(ts, 2);
  t.update(0, 0.3, rng);
  CHECK(t.history(0).positives + t.history(0).negatives == 1);

  CHECK_THROWS_AS(state.update(5, 1.0, rng), InvalidArgument);
  PolicySpec bad;
  bad.kind = PolicyKind::ts;
  bad.alpha0 = 0;
  CHECK_THROWS_AS(PolicyState(bad, 2), InvalidParameter);
}
