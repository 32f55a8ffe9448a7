#include "bootband/dist.hpp"

#include <algorithm>
#include <cmath>

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "bootband/errors.hpp"

namespace bootband {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double log_choose(long n, long k) {
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Marsaglia-Tsang squeeze/rejection for shape >= 1.
double gamma_marsaglia_tsang(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  boost::random::normal_distribution<double> normal;
  for (;;) {
    double x;
    double v;
    do {
      x = normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

// Sequential-search inversion; used while n * p is small.
long binomial_inversion(long n, double p, RngStream& rng) {
  const double q = 1.0 - p;
  const double ratio = p / q;
  double pmf = std::exp(static_cast<double>(n) * std::log1p(-p));
  double u = rng.uniform();
  long x = 0;
  while (u > pmf && x < n) {
    u -= pmf;
    pmf *= ratio * static_cast<double>(n - x) / static_cast<double>(x + 1);
    ++x;
  }
  return x;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
  std::uint64_t x = seed;
  for (auto& word : s_) {
    word = mix(x);
    x += 0x9E3779B97F4A7C15ULL;
  }
}

std::uint64_t RngStream::mix(std::uint64_t x) {
  // SplitMix64 finalizer.
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream RngStream::derive(std::uint64_t master, std::uint64_t index) {
  return RngStream(mix(mix(master) ^ mix(index + 0x632BE59BD9B4E019ULL)));
}

double RngStream::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return (static_cast<double>((*this)() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t RngStream::below(std::uint64_t n) {
  // Lemire's nearly-divisionless bounded integer.
  __uint128_t m = static_cast<__uint128_t>((*this)()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      m = static_cast<__uint128_t>((*this)()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

ExactProb ExactProb::from_log(double log_value) {
  ExactProb p;
  p.log_value = std::min(log_value, 0.0);
  p.value = std::exp(p.log_value);
  return p;
}

double sample_exponential(RngStream& rng) {
  boost::random::exponential_distribution<double> exp1(1.0);
  double w;
  do {
    w = exp1(rng);
  } while (w <= 0.0);
  return w;
}

double sample_gamma(double shape, RngStream& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    throw InvalidParameter("gamma shape must be positive, got " + std::to_string(shape));
  if (shape >= 1.0) return gamma_marsaglia_tsang(shape, rng);
  return std::exp(sample_log_gamma(shape, rng));
}

double sample_log_gamma(double shape, RngStream& rng) {
  if (!(shape > 0.0) || !std::isfinite(shape))
    throw InvalidParameter("gamma shape must be positive, got " + std::to_string(shape));
  if (shape >= 1.0) return std::log(gamma_marsaglia_tsang(shape, rng));
  // Gamma(a) = Gamma(a + 1) * U^(1/a), kept in log space.
  const double boosted = gamma_marsaglia_tsang(shape + 1.0, rng);
  return std::log(boosted) + std::log(rng.uniform_open()) / shape;
}

double sample_beta(double a, double b, RngStream& rng) {
  if (!(a > 0.0) || !(b > 0.0))
    throw InvalidParameter("beta shapes must be positive");
  if (a >= 1.0 && b >= 1.0) {
    const double x = gamma_marsaglia_tsang(a, rng);
    const double y = gamma_marsaglia_tsang(b, rng);
    return x / (x + y);
  }
  const double lx = sample_log_gamma(a, rng);
  const double ly = sample_log_gamma(b, rng);
  // x / (x + y) = 1 / (1 + exp(ly - lx))
  return 1.0 / (1.0 + std::exp(ly - lx));
}

long sample_binomial(long n, double p, RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("binomial p must lie in [0,1]");
  if (n < 0) throw InvalidParameter("binomial n must be non-negative");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;

  // Knuth's order-statistic splitting: the a-th smallest of n uniforms is
  // Beta(a, n + 1 - a); recurse into the side that still straddles p.
  long base = 0;
  while (static_cast<double>(n) * std::min(p, 1.0 - p) >= 16.0) {
    const long a = 1 + n / 2;
    const long b = n + 1 - a;
    const double x = sample_beta(static_cast<double>(a), static_cast<double>(b), rng);
    if (x >= p) {
      n = a - 1;
      p = p / x;
    } else {
      base += a;
      n = b - 1;
      p = (p - x) / (1.0 - x);
    }
    if (n == 0) return base;
    p = std::clamp(p, 0.0, 1.0);
  }
  if (p > 0.5) return base + n - binomial_inversion(n, 1.0 - p, rng);
  return base + binomial_inversion(n, p, rng);
}

double sample_gaussian(double mean, double stddev, RngStream& rng) {
  if (!(stddev >= 0.0)) throw InvalidParameter("gaussian stddev must be non-negative");
  if (stddev == 0.0) return mean;
  boost::random::normal_distribution<double> normal;
  return mean + stddev * normal(rng);
}

ExactProb binomial_tail_exact(long n, double p, double k) {
  if (n < 0) throw InvalidParameter("binomial n must be non-negative");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("binomial p must lie in [0,1]");
  if (k <= 0.0) return ExactProb::from_log(0.0);
  if (k > static_cast<double>(n)) return ExactProb{};
  const long first = static_cast<long>(std::ceil(k));
  if (p == 0.0) return ExactProb{};
  if (p == 1.0) return ExactProb::from_log(0.0);

  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  auto log_term = [&](long i) {
    return log_choose(n, i) + static_cast<double>(i) * log_p + static_cast<double>(n - i) * log_q;
  };
  if (static_cast<double>(first) <= static_cast<double>(n) * p) {
    // Tail near one: take the complement of the lower tail, summed from 0
    // so a larger k only extends it.
    double lower = kNegInf;
    for (long i = 0; i < first; ++i) lower = log_add(lower, log_term(i));
    ExactProb out;
    out.value = -std::expm1(lower);
    out.log_value = std::log1p(-std::exp(lower));
    return out;
  }
  // Accumulate from the top so a larger k is always a prefix of the sum.
  double acc = kNegInf;
  for (long i = n; i >= first; --i) acc = log_add(acc, log_term(i));
  return ExactProb::from_log(acc);
}

double kl_bernoulli(double q, double p) {
  if (!(q > 0.0 && q < 1.0 && p > 0.0 && p < 1.0))
    throw InvalidParameter("kl_bernoulli requires q, p strictly inside (0,1)");
  return q * std::log(q / p) + (1.0 - q) * std::log((1.0 - q) / (1.0 - p));
}

double ks_statistic(std::span<const double> sorted_samples,
                    const std::function<double(double)>& cdf) {
  if (sorted_samples.empty()) throw InvalidArgument("ks_statistic needs at least one sample");
  if (!std::is_sorted(sorted_samples.begin(), sorted_samples.end()))
    throw InvalidArgument("ks_statistic samples must be sorted");
  const double n = static_cast<double>(sorted_samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted_samples.size(); ++i) {
    const double f = cdf(sorted_samples[i]);
    const double above = static_cast<double>(i + 1) / n - f;
    const double below = f - static_cast<double>(i) / n;
    d = std::max({d, above, below});
  }
  return d;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("ks_two_sample needs non-empty samples");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_value(std::size_t n, double alpha) {
  if (n == 0 || !(alpha > 0.0 && alpha < 1.0))
    throw InvalidArgument("ks_critical_value needs n > 0 and alpha in (0,1)");
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

}  // namespace bootband
