#include "bootband/ctx.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bootband/errors.hpp"
#include "bootband/policy.hpp"

namespace bootband {

namespace {

using ConstMap = Eigen::Map<const Eigen::VectorXd>;

ConstMap as_vector(std::span<const double> s) {
  return ConstMap(s.data(), static_cast<Eigen::Index>(s.size()));
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Evaluation {
  double loss = 0.0;
  double gradient_norm = 0.0;
};

// Mean weighted loss and mean weighted gradient norm.
Evaluation evaluate(ModelKind kind, const ArmDataset& data, std::span<const double> weights,
                    const Eigen::VectorXd& theta) {
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta.size());
  double loss = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const auto x = as_vector(data.x(i));
    const double z = x.dot(theta);
    const double y = data.y(i);
    double residual;
    if (kind == ModelKind::linear) {
      residual = z - y;
      loss += w * 0.5 * residual * residual;
    } else {
      residual = sigmoid(z) - y;
      loss += w * (softplus(z) - y * z);
    }
    grad += (w * residual) * x;
    total += w;
  }
  return {loss / total, grad.norm() / total};
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double ContextModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != theta.size()) throw InvalidArgument("context dimension mismatch");
  const double z = x.dot(theta);
  return kind == ModelKind::linear ? z : sigmoid(z);
}

ArmDataset::ArmDataset(int dim) : dim_(dim) {
  if (dim <= 0) throw InvalidArgument("dataset dimension must be positive");
}

void ArmDataset::add_pseudo(std::span<const double> x, double y) {
  if (static_cast<int>(x.size()) != dim_) throw InvalidArgument("pseudo-example dimension mismatch");
  if (data_count() != 0) throw InvalidState("pseudo-examples must be added before observed rows");
  x_.insert(x_.end(), x.begin(), x.end());
  y_.push_back(y);
  ++pseudo_;
}

void ArmDataset::add_row(std::span<const double> x, double y) {
  if (static_cast<int>(x.size()) != dim_) throw InvalidArgument("row dimension mismatch");
  x_.insert(x_.end(), x.begin(), x.end());
  y_.push_back(y);
}

FitResult fit_weighted_mle(ModelKind kind, const ArmDataset& data, std::span<const double> weights,
                           const Eigen::VectorXd& warm_start, const FitOptions& options, RngStream& rng) {
  if (data.size() == 0) throw InvalidArgument("cannot fit an empty dataset");
  if (weights.size() != data.size()) throw InvalidArgument("one weight per row is required");
  if (!(options.tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");

  std::vector<double> w(weights.begin(), weights.end());
  std::vector<std::size_t> active;
  active.reserve(w.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw InvalidArgument("weights must be finite and non-negative");
    if (w[i] > 0.0) active.push_back(i);
    sum += w[i];
  }
  if (active.empty()) throw InvalidArgument("all weights are zero");
  const double scale = static_cast<double>(w.size()) / sum;
  for (double& v : w) v *= scale;

  const double base_step = options.step.value_or(kind == ModelKind::logistic ? 0.1 : 0.01);
  FitResult result;
  result.theta = warm_start.size() == data.dim() ? warm_start : Eigen::VectorXd::Zero(data.dim());
  Evaluation eval = evaluate(kind, data, w, result.theta);
  result.loss = eval.loss;
  result.gradient_norm = eval.gradient_norm;
  if (eval.gradient_norm < options.tolerance) return result;

  long steps = 0;
  for (int pass = 1; pass <= options.max_passes; ++pass) {
    const double step = kind == ModelKind::logistic ? base_step / std::sqrt(static_cast<double>(pass)) : base_step;
    for (std::size_t i = active.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.below(i));
      std::swap(active[i - 1], active[j]);
    }
    for (std::size_t idx : active) {
      const auto x = as_vector(data.x(idx));
      const double z = x.dot(result.theta);
      const double residual = kind == ModelKind::linear ? z - data.y(idx) : sigmoid(z) - data.y(idx);
      result.theta -= (step * w[idx] * residual) * x;
      ++steps;
    }
    const double previous = eval.loss;
    eval = evaluate(kind, data, w, result.theta);
    result.passes = pass;
    result.loss = eval.loss;
    result.gradient_norm = eval.gradient_norm;
    if (!std::isfinite(eval.loss) || !result.theta.allFinite())
      throw OptimizationFailure("weighted MLE diverged", steps);
    if (eval.gradient_norm < options.tolerance || previous - eval.loss < options.tolerance) break;
  }
  return result;
}

FitResult wb_contextual_sample(ModelKind kind, const ArmDataset& data, const Eigen::VectorXd& warm,
                               const FitOptions& options, RngStream& rng) {
  if (data.size() == 0) throw InvalidArgument("cannot bootstrap an empty dataset");
  std::vector<double> weights(data.size());
  for (double& w : weights) w = sample_exponential(rng);
  return fit_weighted_mle(kind, data, weights, warm, options, rng);
}

std::vector<double> resample_multiplicities(std::size_t rows, RngStream& rng) {
  std::vector<double> counts(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) counts[rng.below(rows)] += 1.0;
  return counts;
}

FitResult npb_contextual_sample(ModelKind kind, const ArmDataset& data, const Eigen::VectorXd& warm,
                                const FitOptions& options, RngStream& rng) {
  if (data.size() == 0) throw InvalidArgument("cannot bootstrap an empty dataset");
  const std::vector<double> counts = resample_multiplicities(data.size(), rng);
  return fit_weighted_mle(kind, data, counts, warm, options, rng);
}

PseudoExamples isotropic_pseudo_examples(int dim, RngStream& rng) {
  PseudoExamples out;
  out.isotropic_fallback = true;
  out.contexts.resize(4 * dim, dim);
  out.labels.resize(static_cast<std::size_t>(4 * dim));
  for (int i = 0; i < 2 * dim; ++i) {
    Eigen::VectorXd z(dim);
    for (int c = 0; c < dim; ++c) z(c) = sample_gaussian(0.0, 1.0, rng);
    out.contexts.row(2 * i) = z.transpose();
    out.contexts.row(2 * i + 1) = z.transpose();
    out.labels[static_cast<std::size_t>(2 * i)] = 0.0;
    out.labels[static_cast<std::size_t>(2 * i + 1)] = 1.0;
  }
  return out;
}

PseudoExamples make_pseudo_examples(const Eigen::MatrixXd& contexts, int dim, RngStream& rng) {
  if (dim <= 0) throw InvalidArgument("dimension must be positive");
  if (contexts.rows() < dim || contexts.rows() < 2 || contexts.cols() != dim)
    return isotropic_pseudo_examples(dim, rng);

  const Eigen::RowVectorXd mean = contexts.colwise().mean();
  const Eigen::MatrixXd centered = contexts.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(contexts.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) return isotropic_pseudo_examples(dim, rng);
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double top = values.maxCoeff();
  if (!(top > 0.0) || values.minCoeff() <= 1e-10 * top) return isotropic_pseudo_examples(dim, rng);

  PseudoExamples out;
  out.contexts.resize(4 * dim, dim);
  out.labels.resize(static_cast<std::size_t>(4 * dim));
  for (int i = 0; i < dim; ++i) {
    const Eigen::VectorXd v = std::sqrt(values(i)) * eig.eigenvectors().col(i);
    const Eigen::VectorXd rows[4] = {v, v, -v, -v};
    for (int r = 0; r < 4; ++r) {
      out.contexts.row(4 * i + r) = rows[r].transpose();
      out.labels[static_cast<std::size_t>(4 * i + r)] = (r % 2 == 0) ? 0.0 : 1.0;
    }
  }
  return out;
}

LinearBayesState::LinearBayesState(int dim, double ridge)
    : ridge_(ridge), precision_(ridge * Eigen::MatrixXd::Identity(dim, dim)), response_(Eigen::VectorXd::Zero(dim)) {
  if (dim <= 0) throw InvalidArgument("dimension must be positive");
  if (!(ridge > 0.0)) throw InvalidParameter("ridge must be positive");
}

void LinearBayesState::update(const Eigen::VectorXd& x, double reward) {
  if (x.size() != response_.size()) throw InvalidArgument("context dimension mismatch");
  precision_.noalias() += x * x.transpose();
  response_ += reward * x;
  dirty_ = true;
}

void LinearBayesState::refresh() const {
  if (!dirty_) return;
  llt_.compute(precision_);
  if (llt_.info() != Eigen::Success) throw NumericalError("Cholesky factorization of the precision matrix failed");
  mean_ = llt_.solve(response_);
  dirty_ = false;
}

const Eigen::VectorXd& LinearBayesState::mean() const {
  refresh();
  return mean_;
}

double LinearBayesState::variance(const Eigen::VectorXd& x) const {
  refresh();
  return llt_.matrixL().solve(x).squaredNorm();
}

Eigen::VectorXd LinearBayesState::sample(double scale, RngStream& rng) const {
  refresh();
  if (scale == 0.0) return mean_;
  Eigen::VectorXd z(response_.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sample_gaussian(0.0, 1.0, rng);
  return mean_ + scale * llt_.matrixU().solve(z);
}

int argmax_random_ties(std::span<const double> scores, RngStream& rng) {
  if (scores.empty()) throw InvalidArgument("argmax of an empty score list");
  const double best = *std::max_element(scores.begin(), scores.end());
  int tied = 0;
  for (double s : scores) tied += s == best ? 1 : 0;
  int pick = tied > 1 ? static_cast<int>(rng.below(static_cast<std::uint64_t>(tied))) : 0;
  for (std::size_t j = 0; j < scores.size(); ++j)
    if (scores[j] == best && pick-- == 0) return static_cast<int>(j);
  return 0;
}

int linucb_select(std::span<const LinearBayesState> states, const Eigen::VectorXd& x, double width,
                  RngStream& rng) {
  std::vector<double> scores(states.size());
  for (std::size_t j = 0; j < states.size(); ++j)
    scores[j] = x.dot(states[j].mean()) + width * std::sqrt(states[j].variance(x));
  return argmax_random_ties(scores, rng);
}

int lints_select(std::span<const LinearBayesState> states, const Eigen::VectorXd& x, double scale,
                 RngStream& rng) {
  std::vector<double> scores(states.size());
  for (std::size_t j = 0; j < states.size(); ++j) scores[j] = x.dot(states[j].sample(scale, rng));
  return argmax_random_ties(scores, rng);
}

double per_step_reward(std::span<const double> rewards) {
  if (rewards.empty()) throw InvalidArgument("per-step reward needs at least one round");
  return std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
}

namespace {

ModelKind model_of(ContextualKind kind) {
  switch (kind) {
    case ContextualKind::eg_linear:
    case ContextualKind::npb_linear:
    case ContextualKind::wb_linear:
      return ModelKind::linear;
    default:
      return ModelKind::logistic;
  }
}

// Per-arm datasets seeded with the pseudo-examples.
class ModelAgent : public ContextualAgent {
 protected:
  ModelAgent(const ContextualSpec& spec, int arms, int dim, const PseudoExamples* pseudo)
      : spec_(spec), model_(model_of(spec.kind)), scores_(static_cast<std::size_t>(arms)) {
    for (int j = 0; j < arms; ++j) {
      ArmDataset data(dim);
      if (pseudo) {
        for (Eigen::Index r = 0; r < pseudo->contexts.rows(); ++r) {
          const Eigen::VectorXd row = pseudo->contexts.row(r).transpose();
          data.add_pseudo(std::span<const double>(row.data(), static_cast<std::size_t>(dim)),
                          pseudo->labels[static_cast<std::size_t>(r)]);
        }
      }
      data_.push_back(std::move(data));
      theta_.push_back(Eigen::VectorXd::Zero(dim));
    }
  }

 public:
  void update(int arm, const Eigen::VectorXd& x, double reward, RngStream&) override {
    data_.at(static_cast<std::size_t>(arm)).add_row(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), reward);
  }

 protected:
  double score(std::size_t arm, const Eigen::VectorXd& x) const {
    return ContextModel{model_, theta_[arm]}.predict(x);
  }

  ContextualSpec spec_;
  ModelKind model_;
  std::vector<ArmDataset> data_;
  std::vector<Eigen::VectorXd> theta_;
  std::vector<double> scores_;
};

class BootstrapAgent final : public ModelAgent {
 public:
  BootstrapAgent(const ContextualSpec& spec, int arms, int dim, const PseudoExamples* pseudo, bool weighted)
      : ModelAgent(spec, arms, dim, pseudo), weighted_(weighted) {}

  int select(const Eigen::VectorXd& x, long, RngStream& rng) override {
    for (std::size_t j = 0; j < data_.size(); ++j) {
      if (data_[j].size() == 0) {
        // No rows at all: fall back to the prior guess.
        scores_[j] = score(j, x);
        continue;
      }
      FitResult fit = weighted_ ? wb_contextual_sample(model_, data_[j], theta_[j], spec_.fit, rng)
                                : npb_contextual_sample(model_, data_[j], theta_[j], spec_.fit, rng);
      theta_[j] = std::move(fit.theta);
      scores_[j] = score(j, x);
    }
    return argmax_random_ties(scores_, rng);
  }

 private:
  bool weighted_;
};

class GreedyAgent final : public ModelAgent {
 public:
  GreedyAgent(const ContextualSpec& spec, int arms, int dim, const PseudoExamples* pseudo)
      : ModelAgent(spec, arms, dim, pseudo), stale_(static_cast<std::size_t>(arms), true) {}

  int select(const Eigen::VectorXd& x, long round, RngStream& rng) override {
    const auto arms = static_cast<std::uint64_t>(data_.size());
    if (rng.uniform() < epsilon_schedule(round)) return static_cast<int>(rng.below(arms));
    for (std::size_t j = 0; j < data_.size(); ++j) {
      if (stale_[j] && data_[j].size() > 0) {
        const std::vector<double> ones(data_[j].size(), 1.0);
        theta_[j] = fit_weighted_mle(model_, data_[j], ones, theta_[j], spec_.fit, rng).theta;
        stale_[j] = false;
      }
      scores_[j] = score(j, x);
    }
    return argmax_random_ties(scores_, rng);
  }

  void update(int arm, const Eigen::VectorXd& x, double reward, RngStream& rng) override {
    ModelAgent::update(arm, x, reward, rng);
    stale_[static_cast<std::size_t>(arm)] = true;
  }

 private:
  std::vector<bool> stale_;
};

class LinearBayesAgent final : public ContextualAgent {
 public:
  LinearBayesAgent(const ContextualSpec& spec, int arms, int dim, bool optimistic)
      : spec_(spec), optimistic_(optimistic) {
    for (int j = 0; j < arms; ++j) states_.emplace_back(dim, spec.ridge);
  }

  int select(const Eigen::VectorXd& x, long, RngStream& rng) override {
    return optimistic_ ? linucb_select(states_, x, spec_.ucb_width, rng)
                       : lints_select(states_, x, spec_.ts_scale, rng);
  }

  void update(int arm, const Eigen::VectorXd& x, double reward, RngStream&) override {
    states_.at(static_cast<std::size_t>(arm)).update(x, reward);
  }

 private:
  ContextualSpec spec_;
  bool optimistic_;
  std::vector<LinearBayesState> states_;
};

class UniformAgent final : public ContextualAgent {
 public:
  explicit UniformAgent(int arms) : arms_(arms) {}
  int select(const Eigen::VectorXd&, long, RngStream& rng) override {
    return static_cast<int>(rng.below(static_cast<std::uint64_t>(arms_)));
  }
  void update(int, const Eigen::VectorXd&, double, RngStream&) override {}

 private:
  int arms_;
};

struct KindName {
  ContextualKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {ContextualKind::eg_linear, "eg-lin"},   {ContextualKind::eg_logistic, "eg-log"},
    {ContextualKind::npb_linear, "npb-lin"}, {ContextualKind::npb_logistic, "npb-log"},
    {ContextualKind::wb_linear, "wb-lin"},   {ContextualKind::wb_logistic, "wb-log"},
    {ContextualKind::linucb, "ucb-lin"},     {ContextualKind::lints, "ts-lin"},
    {ContextualKind::uniform, "random"},
};

}  // namespace

std::optional<ContextualKind> parse_contextual_kind(std::string_view name) {
  for (const auto& kn : kKindNames)
    if (kn.name == name) return kn.kind;
  if (name == "linucb") return ContextualKind::linucb;
  if (name == "lints") return ContextualKind::lints;
  return std::nullopt;
}

std::string_view contextual_kind_name(ContextualKind kind) {
  for (const auto& kn : kKindNames)
    if (kn.kind == kind) return kn.name;
  return "unknown";
}

std::vector<std::string> contextual_kind_names() {
  std::vector<std::string> out;
  for (const auto& kn : kKindNames) out.emplace_back(kn.name);
  return out;
}

std::unique_ptr<ContextualAgent> make_contextual_agent(const ContextualSpec& spec, int arms, int dim,
                                                       const PseudoExamples* pseudo) {
  if (arms < 2) throw InvalidArgument("contextual agents need at least two arms");
  switch (spec.kind) {
    case ContextualKind::eg_linear:
    case ContextualKind::eg_logistic:
      return std::make_unique<GreedyAgent>(spec, arms, dim, pseudo);
    case ContextualKind::npb_linear:
    case ContextualKind::npb_logistic:
      return std::make_unique<BootstrapAgent>(spec, arms, dim, pseudo, false);
    case ContextualKind::wb_linear:
    case ContextualKind::wb_logistic:
      return std::make_unique<BootstrapAgent>(spec, arms, dim, pseudo, true);
    case ContextualKind::linucb:
      return std::make_unique<LinearBayesAgent>(spec, arms, dim, true);
    case ContextualKind::lints:
      return std::make_unique<LinearBayesAgent>(spec, arms, dim, false);
    case ContextualKind::uniform:
      return std::make_unique<UniformAgent>(arms);
  }
  throw InvalidArgument("unknown contextual policy");
}

}  // namespace bootband
