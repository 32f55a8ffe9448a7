#include "bootband/theory.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "bootband/errors.hpp"
#include "bootband/format.hpp"
#include "bootband/policy.hpp"

namespace bootband {

bool LemmaReport::passed() const {
  return std::all_of(points.begin(), points.end(), [](const LemmaPoint& p) { return p.skipped || p.satisfied; });
}

std::size_t LemmaReport::checked() const {
  return static_cast<std::size_t>(std::count_if(points.begin(), points.end(), [](const LemmaPoint& p) { return !p.skipped; }));
}

std::size_t LemmaReport::skipped() const { return points.size() - checked(); }

void LemmaReport::write(std::ostream& out) const {
  for (const LemmaPoint& p : points) {
    out << lemma << ' ' << p.params;
    if (p.skipped) {
      out << " SKIP";
    } else {
      out << " computed=" << format_number(p.computed) << " bound=" << format_number(p.bound)
          << (p.satisfied ? " PASS" : " FAIL");
    }
    if (!p.note.empty()) out << " (" << p.note << ')';
    out << '\n';
  }
  std::size_t failed = 0;
  for (const LemmaPoint& p : points) failed += (!p.skipped && !p.satisfied) ? 1 : 0;
  out << lemma << " summary checked=" << checked() << " skipped=" << skipped() << " failed=" << failed
      << (passed() ? " PASS" : " FAIL") << '\n';
}

std::vector<TailPoint> default_tail_grid() {
  std::vector<TailPoint> grid;
  for (long n = 5; n <= 200; ++n)
    for (int i = 1; i <= 10; ++i)
      grid.push_back({n, 0.05 * i, std::ceil(0.7 * static_cast<double>(n))});
  return grid;
}

LemmaReport check_tail_bound(std::span<const TailPoint> grid, CheckOptions options) {
  LemmaReport report{"tail-bound", {}};
  for (const TailPoint& g : grid) {
    LemmaPoint point;
    point.params = "n=" + std::to_string(g.n) + " p=" + format_number(g.p) + " k=" + format_number(g.k);
    const double n = static_cast<double>(g.n);
    if (!(n * g.p < g.k && g.k < n) || !(g.p > 0.0 && g.p < 1.0)) {
      point.skipped = true;
      point.note = "outside np < k < n";
      report.points.push_back(point);
      continue;
    }
    const ExactProb tail = binomial_tail_exact(g.n, g.p, g.k);
    const double log_bound = -n * kl_bernoulli(g.k / n, g.p);
    point.computed = tail.value;
    point.bound = std::exp(log_bound);
    // Compare in log space so tails below the double range still count.
    point.satisfied = options.invert ? log_bound <= tail.log_value : tail.log_value <= log_bound;
    report.points.push_back(point);
  }
  return report;
}

ExactProb npb_pull_probability(long failures) {
  if (failures < 0) throw InvalidArgument("failure count must be non-negative");
  const long total = failures + 2;
  return binomial_tail_exact(total, 1.0 / static_cast<double>(total), static_cast<double>(total) / 4.0);
}

LemmaReport check_pull_probability(long m_lo, long m_hi, CheckOptions options) {
  LemmaReport report{"pull-probability", {}};
  for (long m = m_lo; m <= m_hi; ++m) {
    LemmaPoint point;
    point.params = "m=" + std::to_string(m);
    if (m < 15) {
      point.skipped = true;
      point.note = "lemma needs m >= 15";
      report.points.push_back(point);
      continue;
    }
    const ExactProb p = npb_pull_probability(m);
    const double md = static_cast<double>(m);
    const double log_bound = -md * std::log(md) / 20.0;
    point.computed = p.value;
    point.bound = std::exp(log_bound);
    point.satisfied = options.invert ? log_bound < p.log_value : p.log_value < log_bound;
    point.note = "margin=" + format_number(std::exp(log_bound - p.log_value), 4);
    report.points.push_back(point);
  }
  return report;
}

double truncated_geometric_expectation(double p, long l) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("truncated geometric needs 0 < p < 1");
  if (l < 1) throw InvalidParameter("truncation level must be at least 1");
  return (1.0 / p - 1.0) * -std::expm1(static_cast<double>(l) * std::log1p(-p));
}

double truncated_geometric_bruteforce(double p, long l) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("truncated geometric needs 0 < p < 1");
  if (l < 1) throw InvalidParameter("truncation level must be at least 1");
  const double q = 1.0 - p;
  double sum = 0.0;
  double q_i = 1.0;  // (1-p)^i
  for (long i = 0; i < l; ++i) {
    sum += static_cast<double>(i) * p * q_i;
    q_i *= q;
  }
  return sum + static_cast<double>(l) * q_i;
}

GeometricGrid default_geometric_grid() {
  GeometricGrid grid;
  for (int i = 1; i <= 99; ++i) grid.p.push_back(i / 100.0);
  return grid;
}

LemmaReport check_truncated_geometric(const GeometricGrid& grid, CheckOptions options) {
  LemmaReport report{"truncated-geometric", {}};
  for (double p : grid.p) {
    for (long l = grid.l_lo; l <= grid.l_hi; ++l) {
      LemmaPoint point;
      point.params = "p=" + format_number(p) + " l=" + std::to_string(l);
      point.computed = truncated_geometric_expectation(p, l);
      point.bound = truncated_geometric_bruteforce(p, l);
      const double error = std::abs(point.computed - point.bound);
      const bool close = error <= 1e-12 * std::max(1.0, std::abs(point.bound));
      point.satisfied = options.invert ? !close : close;
      report.points.push_back(point);
    }
  }
  return report;
}

LemmaReport check_truncated_geometric_lower_bound(const GeometricGrid& grid, CheckOptions options) {
  LemmaReport report{"truncated-geometric-lower-bound", {}};
  for (double p : grid.p) {
    for (long l = grid.l_lo; l <= grid.l_hi; ++l) {
      LemmaPoint point;
      point.params = "p=" + format_number(p) + " l=" + std::to_string(l);
      point.computed = truncated_geometric_expectation(p, l);
      point.bound = 0.5 * std::min(1.0 / p - 1.0, static_cast<double>(l) * (1.0 - p));
      point.satisfied = options.invert ? point.computed < point.bound : point.computed >= point.bound;
      report.points.push_back(point);
    }
  }
  return report;
}

namespace {

PolicyState probe_policy() {
  PolicySpec spec;
  spec.kind = PolicyKind::npb;
  spec.label = "npb";
  PolicyState policy(spec, 2);
  policy.set_known_value(1, 0.25);
  return policy;
}

double mean_stderr(double sum, double sum_sq, long n, double& mean) {
  mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
  if (n < 2) return 0.0;
  const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1));
  return std::sqrt(var / static_cast<double>(n));
}

}  // namespace

BadHistoryStats bad_history_probe(long m, long horizon, long runs, RngStream& rng) {
  if (m < 0) throw InvalidArgument("m must be non-negative");
  if (runs < 1) throw InvalidArgument("runs must be at least 1");
  if (m >= 1 && horizon <= 2 * m) throw InvalidArgument("horizon must exceed 2m");

  BadHistoryStats stats;
  stats.m = m;
  stats.horizon = horizon;
  stats.runs = runs;
  stats.expected_frequency = std::ldexp(1.0, static_cast<int>(-m));
  stats.pull_probability = npb_pull_probability(m).value;

  // (a) Run until arm 1 has been pulled m times or returns a 1.
  for (long r = 0; r < runs; ++r) {
    PolicyState policy = probe_policy();
    long pulls = 0;
    bool event = true;
    while (pulls < m) {
      const int arm = policy.select_arm(rng);
      const double reward = arm == 0 ? (rng.uniform() < 0.5 ? 1.0 : 0.0) : 0.25;
      policy.update(arm, reward, rng);
      if (arm == 0) {
        ++pulls;
        if (reward == 1.0) {
          event = false;
          break;
        }
      }
    }
    stats.events += event ? 1 : 0;
  }
  const double n = static_cast<double>(runs);
  stats.event_frequency = static_cast<double>(stats.events) / n;
  stats.event_stderr = std::sqrt(stats.event_frequency * (1.0 - stats.event_frequency) / n);

  // (b) Condition on the event by forcing the first m arm-1 rewards to 0.
  if (m >= 1 && stats.pull_probability > 0.0 && stats.pull_probability < 1.0) {
    double sum = 0.0, sum_sq = 0.0, predicted = 0.0;
    for (long r = 0; r < runs; ++r) {
      PolicyState policy = probe_policy();
      long pulls = 0;
      long t = 0;
      while (pulls < m && t < horizon) {
        const int arm = policy.select_arm(rng);
        policy.update(arm, arm == 0 ? 0.0 : 0.25, rng);
        pulls += arm == 0 ? 1 : 0;
        ++t;
      }
      const long left = horizon - t;
      if (pulls < m || left < 1) continue;
      long length = 0;
      while (length < left) {
        const int arm = policy.select_arm(rng);
        if (arm == 0) break;
        policy.update(arm, 0.25, rng);
        ++length;
      }
      const double z = static_cast<double>(length);
      sum += z;
      sum_sq += z * z;
      predicted += truncated_geometric_expectation(stats.pull_probability, left);
      ++stats.conditional_runs;
    }
    stats.run_length_stderr = mean_stderr(sum, sum_sq, stats.conditional_runs, stats.run_length_mean);
    if (stats.conditional_runs > 0) predicted /= static_cast<double>(stats.conditional_runs);
    stats.predicted_run_length = predicted;
  }
  return stats;
}

}  // namespace bootband
