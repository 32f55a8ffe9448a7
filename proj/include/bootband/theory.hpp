#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bootband/dist.hpp"

namespace bootband {

struct LemmaPoint {
  std::string params;  // "n=17 p=0.0588 k=4.25"
  double computed = 0.0;
  double bound = 0.0;
  bool satisfied = false;
  bool skipped = false;
  std::string note;
};

struct LemmaReport {
  std::string lemma;
  std::vector<LemmaPoint> points;

  // Every checked point satisfied; skipped points neither pass nor fail.
  bool passed() const;
  std::size_t checked() const;
  std::size_t skipped() const;
  // One line per point, then a summary line.
  void write(std::ostream& out) const;
};

// Test hook: flips every comparison so a correct bound reports failure.
struct CheckOptions {
  bool invert = false;
};

struct TailPoint {
  long n = 0;
  double p = 0.0;
  double k = 0.0;
};

// n in 5..200, p in {0.05, 0.10, ..., 0.50}, k = ceil(0.7 n).
std::vector<TailPoint> default_tail_grid();

// Exact P(Bino(n,p) >= k) <= exp(-n D(k/n || p)) at each point with np < k < n.
// Points outside that range are reported as skipped.
LemmaReport check_tail_bound(std::span<const TailPoint> grid, CheckOptions options = {});

// P(Bino(m+2, 1/(m+2)) >= (m+2)/4) < exp(-m log(m) / 20) for m in [m_lo, m_hi].
// m < 15 is skipped.
LemmaReport check_pull_probability(long m_lo, long m_hi, CheckOptions options = {});

// Exact probability that NPB(1,1) with one arm at 0 successes and `failures`
// failures draws a sample >= 1/4.
ExactProb npb_pull_probability(long failures);

// E[min(Z, l)] for Z geometric on {0, 1, ...} with success probability p,
// closed form (1/p - 1)(1 - (1-p)^l).
double truncated_geometric_expectation(double p, long l);
// Same expectation by direct summation over the support {0, ..., l}.
double truncated_geometric_bruteforce(double p, long l);

struct GeometricGrid {
  std::vector<double> p;  // default 0.01..0.99
  long l_lo = 1;
  long l_hi = 100;
};

GeometricGrid default_geometric_grid();

// Closed form against brute force (relative 1e-12).
LemmaReport check_truncated_geometric(const GeometricGrid& grid, CheckOptions options = {});
// Closed form >= min(1/p - 1, l (1 - p)) / 2.
LemmaReport check_truncated_geometric_lower_bound(const GeometricGrid& grid, CheckOptions options = {});

struct BadHistoryStats {
  long m = 0;
  long horizon = 0;
  long runs = 0;
  // (a) the first m rewards of arm 1 are all 0
  long events = 0;
  double event_frequency = 0.0;
  double event_stderr = 0.0;
  double expected_frequency = 0.0;  // 2^-m
  // (b) with the first m arm-1 rewards forced to 0: consecutive arm-2 pulls
  // that follow, capped by the rounds left
  long conditional_runs = 0;  // runs that reached m arm-1 pulls before T
  double run_length_mean = 0.0;
  double run_length_stderr = 0.0;
  double predicted_run_length = 0.0;
  double pull_probability = 0.0;
};

// Simulates the two-arm instance (arm 1 Bernoulli(1/2), arm 2 known at 1/4)
// under NPB with pseudo-counts (1, 1).
BadHistoryStats bad_history_probe(long m, long horizon, long runs, RngStream& rng);

}  // namespace bootband
