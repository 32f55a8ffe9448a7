#include "bootband/policy.hpp"

#include <algorithm>
#include <cmath>

#include "bootband/errors.hpp"

namespace bootband {

void ArmHistory::record(double reward) {
  const bool binary = reward == 0.0 || reward == 1.0;
  if (!retain_samples && !binary)
    throw InvalidArgument("Bernoulli-mode history only accepts rewards 0 or 1, got " + std::to_string(reward));
  ++n;
  sum += reward;
  if (reward == 1.0) ++positives;
  if (reward == 0.0) ++negatives;
  if (retain_samples) samples.push_back(reward);
}

double ArmHistory::smoothed_mean() const {
  const long t = total();
  if (t == 0) return 0.5;
  return (static_cast<double>(pseudo_pos) + sum) / static_cast<double>(t);
}

double npb_bernoulli_sample(const ArmHistory& h, RngStream& rng) {
  const long total = h.total();
  if (total == 0) return 0.5;
  const double p = static_cast<double>(h.pseudo_pos + h.positives) / static_cast<double>(total);
  const long z = sample_binomial(total, std::clamp(p, 0.0, 1.0), rng);
  return static_cast<double>(z) / static_cast<double>(total);
}

double npb_general_sample(const ArmHistory& h, RngStream& rng) {
  if (static_cast<long>(h.samples.size()) != h.n)
    throw InvalidState("npb_general_sample needs a history that retains its samples");
  const long total = h.total();
  if (total == 0) throw InvalidState("cannot resample an empty multiset");
  const auto size = static_cast<std::uint64_t>(total);
  const auto observed = static_cast<std::uint64_t>(h.n);
  const auto positive_end = observed + static_cast<std::uint64_t>(h.pseudo_pos);
  double acc = 0.0;
  for (long i = 0; i < total; ++i) {
    const std::uint64_t idx = rng.below(size);
    if (idx < observed)
      acc += h.samples[idx];
    else if (idx < positive_end)
      acc += 1.0;
  }
  return acc / static_cast<double>(total);
}

double wb_bernoulli_sample(const ArmHistory& h, RngStream& rng, WeightForm form) {
  const long a = h.positives + h.pseudo_pos;
  const long b = h.negatives + h.pseudo_neg;
  if (a == 0) return 0.0;
  if (b == 0) return 1.0;
  if (form == WeightForm::gamma_ratio) {
    const double pa = sample_gamma(static_cast<double>(a), rng);
    const double pb = sample_gamma(static_cast<double>(b), rng);
    return pa / (pa + pb);
  }
  // Weighted mean of the labels: positives and positive pseudo-examples
  // contribute their weight to the numerator.
  double num = 0.0;
  double den = 0.0;
  for (long i = 0; i < a; ++i) {
    const double w = sample_exponential(rng);
    num += w;
    den += w;
  }
  for (long i = 0; i < b; ++i) den += sample_exponential(rng);
  return num / den;
}

double wb_general_sample(const ArmHistory& h, RngStream& rng) {
  if (static_cast<long>(h.samples.size()) != h.n)
    throw InvalidState("wb_general_sample needs a history that retains its samples");
  if (h.total() == 0) throw InvalidState("cannot reweight an empty multiset");
  double num = 0.0;
  double den = 0.0;
  for (double y : h.samples) {
    const double w = sample_exponential(rng);
    num += w * y;
    den += w;
  }
  for (int i = 0; i < h.pseudo_pos; ++i) {
    const double w = sample_exponential(rng);
    num += w;
    den += w;
  }
  for (int i = 0; i < h.pseudo_neg; ++i) den += sample_exponential(rng);
  return num / den;
}

double ts_bernoulli_sample(const ArmHistory& h, RngStream& rng) {
  if (h.pseudo_pos < 1 || h.pseudo_neg < 1)
    throw InvalidParameter("Thompson sampling needs a proper Beta prior (pseudo-counts >= 1)");
  return sample_beta(static_cast<double>(h.positives + h.pseudo_pos),
                     static_cast<double>(h.negatives + h.pseudo_neg), rng);
}

int binarize_reward(double r, RngStream& rng) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("binarize_reward needs r in [0,1]");
  if (r == 0.0) return 0;
  if (r == 1.0) return 1;
  return rng.uniform() < r ? 1 : 0;
}

std::vector<double> wb_categorical_sample(std::span<const long> counts, std::span<const double> pseudo,
                                          RngStream& rng) {
  if (counts.size() != pseudo.size()) throw InvalidArgument("counts and pseudo-counts differ in length");
  if (counts.size() < 2) throw InvalidArgument("categorical sampling needs at least two categories");
  std::vector<double> log_mass(counts.size(), -std::numeric_limits<double>::infinity());
  bool any = false;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 0 || pseudo[c] < 0.0) throw InvalidParameter("counts must be non-negative");
    const double shape = static_cast<double>(counts[c]) + pseudo[c];
    if (shape > 0.0) {
      log_mass[c] = sample_log_gamma(shape, rng);
      any = true;
    }
  }
  if (!any) throw InvalidState("all categories have zero total count");
  const double top = *std::max_element(log_mass.begin(), log_mass.end());
  double norm = 0.0;
  for (double& v : log_mass) {
    v = std::exp(v - top);
    norm += v;
  }
  for (double& v : log_mass) v /= norm;
  return log_mass;
}

Eigen::VectorXd wb_gaussian_sample(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, RngStream& rng) {
  if (X.rows() != y.size()) throw InvalidArgument("design and response lengths differ");
  const Eigen::MatrixXd gram = X.transpose() * X;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12))
    throw RankDeficiency("X'X is singular; the design needs rank d");
  Eigen::VectorXd perturbed = y;
  for (Eigen::Index i = 0; i < perturbed.size(); ++i) perturbed(i) += sample_gaussian(0.0, 1.0, rng);
  return llt.solve(X.transpose() * perturbed);
}

long forced_exploration_schedule(long horizon, ForcedExploration forced) {
  if (horizon < 2 && forced.mode != ForcedMode::none && forced.mode != ForcedMode::explicit_count)
    throw InvalidArgument("forced exploration schedule needs T >= 2");
  const double log_t = std::log(static_cast<double>(horizon));
  switch (forced.mode) {
    case ForcedMode::none:
      return 0;
    case ForcedMode::explicit_count:
      if (forced.m < 0) throw InvalidArgument("forced pull count must be non-negative");
      return forced.m;
    case ForcedMode::theorem_text:
      return static_cast<long>(std::ceil(std::cbrt(16.0 * log_t / static_cast<double>(horizon))));
    case ForcedMode::proof_derived: {
      const double delta = std::cbrt(16.0 * log_t / static_cast<double>(horizon));
      return static_cast<long>(std::ceil(16.0 * log_t / (delta * delta)));
    }
  }
  return 0;
}

double epsilon_schedule(long t) {
  if (t < 0) throw InvalidArgument("round index must be non-negative");
  return 50.0 / (50.0 + static_cast<double>(t));
}

std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  if (name == "ts") return PolicyKind::ts;
  if (name == "npb") return PolicyKind::npb;
  if (name == "wb") return PolicyKind::wb;
  if (name == "eg") return PolicyKind::eg;
  return std::nullopt;
}

std::string_view policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::ts: return "ts";
    case PolicyKind::npb: return "npb";
    case PolicyKind::wb: return "wb";
    case PolicyKind::eg: return "eg";
  }
  return "unknown";
}

PolicyState::PolicyState(PolicySpec spec, int arms)
    : spec_(std::move(spec)), histories_(static_cast<std::size_t>(arms)),
      known_(static_cast<std::size_t>(arms)), scratch_(static_cast<std::size_t>(arms)) {
  if (arms < 1) throw InvalidArgument("policy needs at least one arm");
  if (spec_.alpha0 < 0 || spec_.beta0 < 0) throw InvalidParameter("pseudo-counts must be non-negative");
  if (spec_.forced_per_arm < 0) throw InvalidArgument("forced pulls must be non-negative");
  if (spec_.kind == PolicyKind::ts && (spec_.alpha0 < 1 || spec_.beta0 < 1))
    throw InvalidParameter("Thompson sampling needs pseudo-counts >= 1");
  // TS always sees binarized rewards, so it never needs the sample list.
  const bool retain = spec_.general_rewards && spec_.kind != PolicyKind::ts;
  for (ArmHistory& h : histories_) {
    h.pseudo_pos = spec_.alpha0;
    h.pseudo_neg = spec_.beta0;
    h.retain_samples = retain;
  }
}

void PolicyState::set_known_value(int arm, double value) {
  known_.at(static_cast<std::size_t>(arm)) = value;
}

bool PolicyState::in_forced_phase() const {
  return forced_pulls_ < spec_.forced_per_arm * arms();
}

double PolicyState::sample_arm(int arm, RngStream& rng) const {
  const ArmHistory& h = history(arm);
  switch (spec_.kind) {
    case PolicyKind::ts:
      return ts_bernoulli_sample(h, rng);
    case PolicyKind::npb:
      return h.retain_samples ? npb_general_sample(h, rng) : npb_bernoulli_sample(h, rng);
    case PolicyKind::wb:
      return h.retain_samples ? wb_general_sample(h, rng) : wb_bernoulli_sample(h, rng, spec_.weight_form);
    case PolicyKind::eg:
      return h.smoothed_mean();
  }
  return 0.0;
}

int PolicyState::select_from_samples(std::span<const double> samples, RngStream& rng) const {
  const double best = *std::max_element(samples.begin(), samples.end());
  int tied = 0;
  int tied_unknown = 0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (samples[j] == best) {
      ++tied;
      if (!(j < known_.size() && known_[j])) ++tied_unknown;
    }
  }
  const bool restrict_unknown = tied_unknown > 0;
  const int pool = restrict_unknown ? tied_unknown : tied;
  int pick = pool > 1 ? static_cast<int>(rng.below(static_cast<std::uint64_t>(pool))) : 0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    if (samples[j] != best) continue;
    if (restrict_unknown && j < known_.size() && known_[j]) continue;
    if (pick-- == 0) return static_cast<int>(j);
  }
  return 0;
}

int PolicyState::select_arm(RngStream& rng) {
  const int k = arms();
  if (in_forced_phase()) return static_cast<int>(forced_pulls_ % k);

  if (spec_.kind == PolicyKind::eg) {
    const double eps = epsilon_schedule(round() + 1);
    if (rng.uniform() < eps) return static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  }
  for (int j = 0; j < k; ++j) {
    const auto& known = known_[static_cast<std::size_t>(j)];
    scratch_[static_cast<std::size_t>(j)] = known ? *known : sample_arm(j, rng);
  }
  return select_from_samples(scratch_, rng);
}

void PolicyState::update(int arm, double reward, RngStream& rng) {
  if (arm < 0 || arm >= arms()) throw InvalidArgument("arm index out of range");
  ArmHistory& h = histories_[static_cast<std::size_t>(arm)];
  // A known arm's value is never estimated, so its rewards are not recorded.
  if (!known_[static_cast<std::size_t>(arm)]) {
    if (spec_.kind == PolicyKind::ts)
      h.record(static_cast<double>(binarize_reward(reward, rng)));
    else
      h.record(reward);
  }
  if (in_forced_phase())
    ++forced_pulls_;
  else
    ++adaptive_pulls_;
}

}  // namespace bootband
