#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>

namespace bootband {

// Single-owner random stream. Two streams built from the same seed produce
// the same sequence on every call site that consumes them in the same order.
// The state is filled from the seed by SplitMix64.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed);

  // Stream for replication `index` under `master`. Distinct indices map to
  // distinct, well-mixed seeds.
  static RngStream derive(std::uint64_t master, std::uint64_t index);
  static std::uint64_t mix(std::uint64_t x);

  std::uint64_t seed() const { return seed_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  // xoshiro256++
  result_type operator()() {
    const std::uint64_t out = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return out;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on (0, 1).
  double uniform_open();
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t seed_;
  std::uint64_t s_[4];
};

// Probability carried alongside its natural log so tails far below the
// double range of `value` stay usable through `log_value`.
struct ExactProb {
  double value = 0.0;
  double log_value = -std::numeric_limits<double>::infinity();

  static ExactProb from_log(double log_value);
};

double sample_exponential(RngStream& rng);
double sample_gamma(double shape, RngStream& rng);
// log of a Gamma(shape, 1) draw; finite even when the draw underflows.
double sample_log_gamma(double shape, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
long sample_binomial(long n, double p, RngStream& rng);
double sample_gaussian(double mean, double stddev, RngStream& rng);

// P(X >= k) for X ~ Bino(n, p), summed exactly in log space over ceil(k)..n.
ExactProb binomial_tail_exact(long n, double p, double k);

// KL divergence between Bernoulli(q) and Bernoulli(p); both strictly in (0,1).
double kl_bernoulli(double q, double p);

// Kolmogorov-Smirnov distance between the empirical CDF of `sorted_samples`
// and `cdf`. Samples must be sorted ascending.
double ks_statistic(std::span<const double> sorted_samples,
                    const std::function<double(double)>& cdf);

// Two-sample KS distance; both inputs sorted ascending.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// Asymptotic one-sample Kolmogorov critical value c(alpha)/sqrt(n).
double ks_critical_value(std::size_t n, double alpha);

}  // namespace bootband
