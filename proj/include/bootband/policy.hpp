#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bootband/dist.hpp"

namespace bootband {

// Observations of one arm plus its Laplace pseudo-counts.
//
// In Bernoulli mode only the counters are kept and rewards must be 0 or 1.
// With `retain_samples` every reward is stored so resampling and reweighting
// can work on arbitrary rewards in [0, 1].
struct ArmHistory {
  long n = 0;
  double sum = 0.0;
  long positives = 0;
  long negatives = 0;
  std::vector<double> samples;
  bool retain_samples = false;
  int pseudo_pos = 1;
  int pseudo_neg = 1;

  void record(double reward);
  // (alpha0 + alpha) / (n + alpha0 + beta0), 0.5 on an empty multiset.
  double smoothed_mean() const;
  long total() const { return n + pseudo_pos + pseudo_neg; }
};

enum class WeightForm {
  gamma_ratio,       // Gamma(a) / (Gamma(a) + Gamma(b)); O(1)
  explicit_weights,  // one Exp(1) weight per observation and pseudo-example
};

double npb_bernoulli_sample(const ArmHistory& h, RngStream& rng);
double npb_general_sample(const ArmHistory& h, RngStream& rng);
double wb_bernoulli_sample(const ArmHistory& h, RngStream& rng,
                           WeightForm form = WeightForm::gamma_ratio);
double wb_general_sample(const ArmHistory& h, RngStream& rng);
double ts_bernoulli_sample(const ArmHistory& h, RngStream& rng);

// Coin flip with success probability r.
int binarize_reward(double r, RngStream& rng);

// Dirichlet(counts + pseudo) draw through normalized Gamma variates.
std::vector<double> wb_categorical_sample(std::span<const long> counts,
                                          std::span<const double> pseudo, RngStream& rng);

// (X'X)^-1 X'(y + w) with w ~ N(0, I_n).
Eigen::VectorXd wb_gaussian_sample(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RngStream& rng);

enum class ForcedMode { none, theorem_text, proof_derived, explicit_count };

struct ForcedExploration {
  ForcedMode mode = ForcedMode::none;
  long m = 0;  // used by explicit_count
};

// Number of initial pulls per arm.
//   theorem_text:  ceil((16 log T / T)^(1/3))
//   proof_derived: ceil(16 log T / d^2) with d = (16 log T / T)^(1/3)
long forced_exploration_schedule(long horizon, ForcedExploration forced);

// 50 / (50 + t)
double epsilon_schedule(long t);

enum class PolicyKind { ts, npb, wb, eg };

std::optional<PolicyKind> parse_policy_kind(std::string_view name);
std::string_view policy_kind_name(PolicyKind kind);

struct PolicySpec {
  PolicyKind kind = PolicyKind::ts;
  std::string label;
  int alpha0 = 1;
  int beta0 = 1;
  // NPB and WB keep full sample lists and use the general samplers.
  bool general_rewards = false;
  WeightForm weight_form = WeightForm::gamma_ratio;
  long forced_per_arm = 0;
};

// Decision state of one MAB strategy over K arms.
class PolicyState {
 public:
  PolicyState(PolicySpec spec, int arms);

  // Fixes an arm's value: it is never sampled, and a sampled arm that ties
  // with it wins (the "pull arm 1 iff sample >= 1/4" rule).
  void set_known_value(int arm, double value);

  int select_arm(RngStream& rng);
  // Argmax over `samples` with the tie rules above; exposed for testing.
  int select_from_samples(std::span<const double> samples, RngStream& rng) const;
  // Bootstrap / posterior draw for one arm.
  double sample_arm(int arm, RngStream& rng) const;

  void update(int arm, double reward, RngStream& rng);

  const PolicySpec& spec() const { return spec_; }
  int arms() const { return static_cast<int>(histories_.size()); }
  const ArmHistory& history(int arm) const { return histories_.at(static_cast<std::size_t>(arm)); }
  long round() const { return adaptive_pulls_ + forced_pulls_; }
  long forced_pulls() const { return forced_pulls_; }
  long adaptive_pulls() const { return adaptive_pulls_; }
  bool in_forced_phase() const;

 private:
  PolicySpec spec_;
  std::vector<ArmHistory> histories_;
  std::vector<std::optional<double>> known_;
  long adaptive_pulls_ = 0;
  long forced_pulls_ = 0;
  mutable std::vector<double> scratch_;
};

}  // namespace bootband
