#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bootband/dist.hpp"

namespace bootband {

enum class RewardKind { bernoulli, truncated_normal, beta, triangular, deterministic, gaussian_linear };

// Reward distribution of a single arm.
class RewardModel {
 public:
  static RewardModel bernoulli(double mean);
  // N(mean, stddev) conditioned on [0, 1].
  static RewardModel truncated_normal(double mean, double stddev);
  // Beta(mean, 1 - mean).
  static RewardModel beta(double mean);
  // Triangular on [0, 1]; the mode is clamp(3 * mean - 1, 0, 1), so the
  // achieved mean (1 + mode) / 3 differs from `mean` outside [1/3, 2/3].
  static RewardModel triangular(double mean);
  static RewardModel deterministic(double value);
  // <x, theta> + N(0, noise^2).
  static RewardModel gaussian_linear(Eigen::VectorXd theta, double noise);

  RewardKind kind() const { return kind_; }
  bool bounded() const { return kind_ != RewardKind::gaussian_linear; }
  // True mean; for gaussian_linear this is the mean at x = (1, ..., 1) when d = 1.
  double expected_value() const;
  double expected_value(const Eigen::VectorXd& x) const;
  // Parameter the arm was built from (mu, c, ...).
  double nominal_mean() const { return a_; }
  double mode() const;

  double sample(RngStream& rng) const;
  double sample(const Eigen::VectorXd& x, RngStream& rng) const;

  std::string describe() const;

 private:
  RewardModel(RewardKind kind, double a, double b);

  RewardKind kind_;
  double a_ = 0.0;
  double b_ = 0.0;
  double mean_ = 0.0;
  Eigen::VectorXd theta_;
};

double truncated_normal_mean(double mean, double stddev, double lo, double hi);

enum class Family { bernoulli, truncated_normal, beta, triangular };

std::optional<Family> parse_family(std::string_view name);
std::string_view family_name(Family f);

struct BanditInstance {
  std::vector<RewardModel> arms;
  // Arms whose value the agent is told up front.
  std::vector<bool> known;
  double optimal_mean = 0.0;
  int optimal_arm = 0;

  explicit BanditInstance(std::vector<RewardModel> arms);
  int size() const { return static_cast<int>(arms.size()); }
  double gap(int arm) const { return optimal_mean - arms[static_cast<std::size_t>(arm)].expected_value(); }
};

double sample_reward(const RewardModel& model, RngStream& rng);

// K arms with means drawn i.i.d. Uniform(0, 1).
BanditInstance random_instance(int arms, Family family, RngStream& rng,
                               double truncated_normal_stddev = 1e-4);

// Arm 1 ~ Bernoulli(1/2), arm 2 deterministic 1/4 and known to the agent.
BanditInstance theorem1_instance();

struct ContextualDataset {
  Eigen::MatrixXd contexts;  // one row per round
  std::vector<int> labels;
  int dim = 0;
  int classes = 0;

  std::size_t size() const { return labels.size(); }
  Eigen::VectorXd context(std::size_t t) const { return contexts.row(static_cast<Eigen::Index>(t)).transpose(); }
  void validate() const;
};

// 1 iff the round's label equals the chosen arm.
double contextual_step(const ContextualDataset& data, std::size_t t, int chosen_arm);

enum class DatasetFormat { dense_csv, sparse };
std::optional<DatasetFormat> parse_format(std::string_view name);

// Reads a dataset and shuffles its rows with a permutation drawn from
// `shuffle_seed`. For the sparse format `dim` may fix the dimension; by
// default it is one past the largest index seen.
ContextualDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                               std::uint64_t shuffle_seed, std::optional<int> dim = std::nullopt);
ContextualDataset parse_dataset(std::string_view text, DatasetFormat format,
                                std::uint64_t shuffle_seed, std::optional<int> dim = std::nullopt);

void write_dense_csv(const ContextualDataset& data, std::ostream& out);

// Gaussian contexts labelled by the argmax of a random linear score per
// class, so the classes are linearly separable.
ContextualDataset make_synthetic_dataset(std::size_t rows, int dim, int classes, RngStream& rng);

}  // namespace bootband
