#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bootband/dist.hpp"

namespace bootband {

enum class ModelKind { linear, logistic };

// m(x, theta) = g(<x, theta>) with g the identity or the sigmoid.
struct ContextModel {
  ModelKind kind = ModelKind::logistic;
  Eigen::VectorXd theta;

  double predict(const Eigen::VectorXd& x) const;
};

double sigmoid(double z);

// Rows observed for one arm. Pseudo-examples occupy the first
// `pseudo_count()` rows and take part in every fit.
class ArmDataset {
 public:
  explicit ArmDataset(int dim);

  void add_pseudo(std::span<const double> x, double y);
  void add_row(std::span<const double> x, double y);

  int dim() const { return dim_; }
  std::size_t size() const { return y_.size(); }
  std::size_t pseudo_count() const { return pseudo_; }
  std::size_t data_count() const { return y_.size() - pseudo_; }
  std::span<const double> x(std::size_t i) const {
    return {x_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }
  double y(std::size_t i) const { return y_[i]; }

 private:
  int dim_;
  std::size_t pseudo_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
};

struct FitOptions {
  double tolerance = 1e-3;
  int max_passes = 50;
  // Defaults to 0.1 (logistic, decayed by 1/sqrt(pass)) or 0.01 (linear, constant).
  std::optional<double> step;
};

struct FitResult {
  Eigen::VectorXd theta;
  int passes = 0;
  double loss = 0.0;
  double gradient_norm = 0.0;
};

// Weighted maximum likelihood by randomized-order SGD from `warm_start`.
// Weights are normalized to mean one, so scaling them all leaves the
// optimization path unchanged. Stops once a full pass improves the mean
// weighted loss by less than the tolerance or the mean gradient norm drops
// below it. Rows with zero weight are skipped.
FitResult fit_weighted_mle(ModelKind kind, const ArmDataset& data, std::span<const double> weights,
                           const Eigen::VectorXd& warm_start, const FitOptions& options, RngStream& rng);

// Exp(1) weight per row (pseudo-rows included), then a weighted fit.
FitResult wb_contextual_sample(ModelKind kind, const ArmDataset& data, const Eigen::VectorXd& warm,
                               const FitOptions& options, RngStream& rng);

// Multinomial resample of all rows (pseudo-rows included); the fit uses the
// multiplicities as weights.
FitResult npb_contextual_sample(ModelKind kind, const ArmDataset& data, const Eigen::VectorXd& warm,
                                const FitOptions& options, RngStream& rng);

// Resample multiplicities used by npb_contextual_sample.
std::vector<double> resample_multiplicities(std::size_t rows, RngStream& rng);

struct PseudoExamples {
  Eigen::MatrixXd contexts;  // 4d rows
  std::vector<double> labels;
  bool isotropic_fallback = false;
};

// For each eigenpair (lambda_i^2, v_i) of the context covariance, the rows
// +lambda_i v_i and -lambda_i v_i, each with labels 0 and 1. Falls back to
// 2d isotropic Gaussian contexts (again with both labels) when fewer than d
// contexts are given or the covariance is singular.
PseudoExamples make_pseudo_examples(const Eigen::MatrixXd& contexts, int dim, RngStream& rng);
PseudoExamples isotropic_pseudo_examples(int dim, RngStream& rng);

// Ridge-regularized Gaussian posterior: A = ridge I + sum x x', b = sum r x.
class LinearBayesState {
 public:
  LinearBayesState(int dim, double ridge = 1.0);

  void update(const Eigen::VectorXd& x, double reward);
  const Eigen::MatrixXd& precision() const { return precision_; }
  const Eigen::VectorXd& response() const { return response_; }
  double ridge() const { return ridge_; }
  int dim() const { return static_cast<int>(response_.size()); }

  const Eigen::VectorXd& mean() const;
  // x' A^-1 x
  double variance(const Eigen::VectorXd& x) const;
  // mean + scale * L^-T z with A = L L', z ~ N(0, I)
  Eigen::VectorXd sample(double scale, RngStream& rng) const;

 private:
  void refresh() const;

  double ridge_;
  Eigen::MatrixXd precision_;
  Eigen::VectorXd response_;
  mutable bool dirty_ = true;
  mutable Eigen::LLT<Eigen::MatrixXd> llt_;
  mutable Eigen::VectorXd mean_;
};

int linucb_select(std::span<const LinearBayesState> states, const Eigen::VectorXd& x, double width,
                  RngStream& rng);
int lints_select(std::span<const LinearBayesState> states, const Eigen::VectorXd& x, double scale,
                 RngStream& rng);

double per_step_reward(std::span<const double> rewards);

// Index of the largest score, ties broken uniformly at random.
int argmax_random_ties(std::span<const double> scores, RngStream& rng);

// One contextual strategy: sees a context, picks an arm, learns from the reward.
class ContextualAgent {
 public:
  virtual ~ContextualAgent() = default;
  virtual int select(const Eigen::VectorXd& x, long round, RngStream& rng) = 0;
  virtual void update(int arm, const Eigen::VectorXd& x, double reward, RngStream& rng) = 0;
};

enum class ContextualKind { eg_linear, eg_logistic, npb_linear, npb_logistic, wb_linear, wb_logistic,
                            linucb, lints, uniform };

std::optional<ContextualKind> parse_contextual_kind(std::string_view name);
std::string_view contextual_kind_name(ContextualKind kind);
std::vector<std::string> contextual_kind_names();

struct ContextualSpec {
  ContextualKind kind = ContextualKind::wb_logistic;
  std::string label;
  FitOptions fit;
  double ridge = 1.0;
  double ucb_width = 1.0;
  double ts_scale = 1.0;
};

// `pseudo` is copied into every arm's dataset of model-based agents.
std::unique_ptr<ContextualAgent> make_contextual_agent(const ContextualSpec& spec, int arms, int dim,
                                                       const PseudoExamples* pseudo);

}  // namespace bootband
