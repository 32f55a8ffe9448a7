#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bootband/errors.hpp"
#include "bootband/theory.hpp"

using namespace bootband;

namespace {

// P(Bino(n, p) >= k) by summing the PMF term by term in long double.
long double tail_sum(long n, long double p, double k) {
  long double total = 0.0L;
  for (long i = 0; i <= n; ++i) {
    if (static_cast<double>(i) < k) continue;
    const long double log_c = std::lgamma(n + 1.0L) - std::lgamma(i + 1.0L) - std::lgamma(n - i + 1.0L);
    total += std::exp(log_c + i * std::log(p) + (n - i) * std::log1p(-p));
  }
  return total;
}

}  // namespace

TEST_CASE("tail bound on hand-picked points") {
  const std::vector<TailPoint> grid = {{2, 0.5, 1}, {17, 1.0 / 17.0, 4.25}};
  const LemmaReport r = check_tail_bound(grid);
  REQUIRE(r.points.size() == 2);
  // n=2, p=1/2, k=1 sits on np = k: the strict precondition skips it.
  CHECK(r.points[0].skipped);
  CHECK(r.points[1].satisfied);
  CHECK(r.points[1].computed == doctest::Approx(static_cast<double>(tail_sum(17, 1.0L / 17, 4.25))).epsilon(1e-12));
  CHECK(r.passed());

  // The (2, 0.5, 1) comparison itself: 0.75 against a bound of 1.
  CHECK(binomial_tail_exact(2, 0.5, 1).value == doctest::Approx(0.75));
  CHECK(std::exp(-2.0 * kl_bernoulli(0.5, 0.5)) == 1.0);

  const LemmaReport inverted = check_tail_bound(grid, {true});
  CHECK_FALSE(inverted.passed());
}

TEST_CASE("tail bound on the default grid") {
  const auto grid = default_tail_grid();
  CHECK(grid.size() == 196 * 10);
  const LemmaReport r = check_tail_bound(grid);
  CHECK(r.passed());
  CHECK(r.skipped() == 0);
  for (std::size_t i = 0; i < grid.size(); i += 97) {
    const TailPoint& g = grid[i];
    CHECK(r.points[i].computed ==
          doctest::Approx(static_cast<double>(tail_sum(g.n, static_cast<long double>(g.p), g.k))).epsilon(1e-10));
  }
  const std::vector<TailPoint> outside = {{10, 0.5, 3}, {10, 0.5, 10}};
  const LemmaReport skipped = check_tail_bound(outside);
  CHECK(skipped.skipped() == 2);
  CHECK(skipped.passed());
}

TEST_CASE("pull probability lemma") {
  const LemmaReport r = check_pull_probability(14, 100);
  REQUIRE(r.points.size() == 87);
  CHECK(r.points[0].skipped);
  CHECK(r.points[0].params == "m=14");
  CHECK(r.passed());
  CHECK(r.checked() == 86);

  const LemmaPoint& m15 = r.points[1];
  CHECK(m15.computed == doctest::Approx(static_cast<double>(tail_sum(17, 1.0L / 17, 17.0 / 4))).epsilon(1e-12));
  CHECK(m15.bound == doctest::Approx(std::exp(-15 * std::log(15.0) / 20)));
  CHECK(m15.computed < m15.bound);

  const LemmaPoint& m100 = r.points.back();
  CHECK(m100.params == "m=100");
  CHECK(m100.bound / m100.computed > 10.0);

  CHECK_FALSE(check_pull_probability(15, 20, {true}).passed());
  CHECK(npb_pull_probability(3).value == doctest::Approx(static_cast<double>(tail_sum(5, 0.2L, 1.25))));
}

TEST_CASE("truncated geometric expectation") {
  CHECK(truncated_geometric_expectation(0.5, 2) == doctest::Approx(0.75));
  // Support {0, 1, 2}: P = 1/2, 1/4, 1/4.
  CHECK(0 * 0.5 + 1 * 0.25 + 2 * 0.25 == 0.75);
  for (double p : {0.01, 0.3, 0.77}) CHECK(truncated_geometric_expectation(p, 1) == doctest::Approx(1 - p).epsilon(1e-15));
  CHECK_THROWS_AS(truncated_geometric_expectation(0.0, 3), InvalidParameter);
  CHECK_THROWS_AS(truncated_geometric_expectation(1.0, 3), InvalidParameter);
  CHECK_THROWS_AS(truncated_geometric_expectation(0.5, 0), InvalidParameter);

  const GeometricGrid grid = default_geometric_grid();
  CHECK(grid.p.size() == 99);
  const LemmaReport closed = check_truncated_geometric(grid);
  CHECK(closed.passed());
  CHECK(closed.checked() == 9900);
  const LemmaReport lower = check_truncated_geometric_lower_bound(grid);
  CHECK(lower.passed());
  CHECK_FALSE(check_truncated_geometric_lower_bound(grid, {true}).passed());
}

TEST_CASE("report text") {
  LemmaReport r{"demo", {}};
  LemmaPoint ok;
  ok.params = "x=1";
  ok.computed = 0.5;
  ok.bound = 1.0;
  ok.satisfied = true;
  LemmaPoint skip;
  skip.params = "x=0";
  skip.skipped = true;
  skip.note = "precondition";
  r.points = {ok, skip};
  std::ostringstream out;
  r.write(out);
  CHECK(out.str() == "demo x=1 computed=0.5 bound=1 PASS\ndemo x=0 SKIP (precondition)\n"
                     "demo summary checked=1 skipped=1 failed=0 PASS\n");
}

TEST_CASE("bad-history probe") {
  SUBCASE("event frequency matches 2^-m") {
    RngStream rng(1);
    const BadHistoryStats s = bad_history_probe(3, 100, 100000, rng);
    CHECK(s.expected_frequency == 0.125);
    CHECK(std::abs(s.event_frequency - 0.125) < 3 * s.event_stderr);
  }
  SUBCASE("degenerate m") {
    RngStream rng(2);
    const BadHistoryStats s = bad_history_probe(0, 10, 100, rng);
    CHECK(s.event_frequency == 1.0);
  }
  SUBCASE("run length follows the truncated geometric") {
    RngStream rng(3);
    const BadHistoryStats s = bad_history_probe(15, 3000, 400, rng);
    CHECK(s.pull_probability == doctest::Approx(static_cast<double>(tail_sum(17, 1.0L / 17, 17.0 / 4))).epsilon(1e-12));
    REQUIRE(s.conditional_runs > 50);
    CHECK(std::abs(s.run_length_mean - s.predicted_run_length) < 3 * s.run_length_stderr);
  }
  RngStream rng(4);
  CHECK_THROWS_AS(bad_history_probe(5, 10, 10, rng), InvalidArgument);
  CHECK_THROWS_AS(bad_history_probe(-1, 10, 10, rng), InvalidArgument);
}
