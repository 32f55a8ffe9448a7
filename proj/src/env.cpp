#include "bootband/env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bootband/errors.hpp"

namespace bootband {

namespace {

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void check_unit_mean(double mean, const char* what) {
  if (!(mean >= 0.0 && mean <= 1.0))
    throw InvalidParameter(std::string(what) + " mean must lie in [0,1], got " + std::to_string(mean));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_int(std::string_view s, long& out) {
  s = trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc() && ptr == s.data() + s.size()) return true;
  // Accept integral values written as reals, e.g. "2.0".
  double d = 0.0;
  if (parse_double(s, d) && d == std::floor(d) && std::abs(d) < 1e15) {
    out = static_cast<long>(d);
    return true;
  }
  return false;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

struct RawRow {
  std::vector<std::pair<int, double>> features;
  long label = 0;
};

ContextualDataset assemble(std::vector<RawRow> rows, int dim, std::uint64_t shuffle_seed) {
  if (rows.empty()) throw SchemaError("dataset contains no rows");
  ContextualDataset data;
  data.dim = dim;
  data.contexts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), dim);
  data.labels.resize(rows.size());

  // Seeded Fisher-Yates over row positions.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(shuffle_seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }

  long max_label = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const RawRow& row = rows[order[r]];
    for (auto [idx, val] : row.features) data.contexts(static_cast<Eigen::Index>(r), idx) = val;
    data.labels[r] = static_cast<int>(row.label);
    max_label = std::max(max_label, row.label);
  }
  data.classes = static_cast<int>(max_label) + 1;
  return data;
}

}  // namespace

double truncated_normal_mean(double mean, double stddev, double lo, double hi) {
  if (stddev == 0.0) return std::clamp(mean, lo, hi);
  const double alpha = (lo - mean) / stddev;
  const double beta = (hi - mean) / stddev;
  const double z = normal_cdf(beta) - normal_cdf(alpha);
  if (!(z > 0.0)) return std::clamp(mean, lo, hi);
  return mean + stddev * (normal_pdf(alpha) - normal_pdf(beta)) / z;
}

RewardModel::RewardModel(RewardKind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}

RewardModel RewardModel::bernoulli(double mean) {
  check_unit_mean(mean, "bernoulli");
  RewardModel m(RewardKind::bernoulli, mean, 0.0);
  m.mean_ = mean;
  return m;
}

RewardModel RewardModel::truncated_normal(double mean, double stddev) {
  check_unit_mean(mean, "truncated-normal");
  if (!(stddev > 0.0)) throw InvalidParameter("truncated-normal stddev must be positive");
  RewardModel m(RewardKind::truncated_normal, mean, stddev);
  m.mean_ = truncated_normal_mean(mean, stddev, 0.0, 1.0);
  return m;
}

RewardModel RewardModel::beta(double mean) {
  if (!(mean > 0.0 && mean < 1.0))
    throw InvalidParameter("beta arm mean must lie strictly inside (0,1)");
  RewardModel m(RewardKind::beta, mean, 1.0 - mean);
  m.mean_ = mean;
  return m;
}

RewardModel RewardModel::triangular(double mean) {
  check_unit_mean(mean, "triangular");
  const double mode = std::clamp(3.0 * mean - 1.0, 0.0, 1.0);
  RewardModel m(RewardKind::triangular, mean, mode);
  m.mean_ = (1.0 + mode) / 3.0;
  return m;
}

RewardModel RewardModel::deterministic(double value) {
  if (!std::isfinite(value)) throw InvalidParameter("deterministic reward must be finite");
  RewardModel m(RewardKind::deterministic, value, 0.0);
  m.mean_ = value;
  return m;
}

RewardModel RewardModel::gaussian_linear(Eigen::VectorXd theta, double noise) {
  if (theta.size() == 0) throw InvalidParameter("gaussian-linear theta must be non-empty");
  if (!(noise >= 0.0)) throw InvalidParameter("gaussian-linear noise must be non-negative");
  RewardModel m(RewardKind::gaussian_linear, 0.0, noise);
  m.theta_ = std::move(theta);
  m.mean_ = m.theta_.size() == 1 ? m.theta_(0) : 0.0;
  m.a_ = m.mean_;
  return m;
}

double RewardModel::expected_value() const {
  if (kind_ == RewardKind::gaussian_linear && theta_.size() != 1)
    throw InvalidArgument("gaussian-linear arm with d > 1 needs a context for its mean");
  return mean_;
}

double RewardModel::expected_value(const Eigen::VectorXd& x) const {
  if (kind_ != RewardKind::gaussian_linear) return mean_;
  if (x.size() != theta_.size()) throw InvalidArgument("context dimension mismatch");
  return x.dot(theta_);
}

double RewardModel::mode() const { return kind_ == RewardKind::triangular ? b_ : mean_; }

double RewardModel::sample(RngStream& rng) const {
  switch (kind_) {
    case RewardKind::bernoulli:
      return rng.uniform() < a_ ? 1.0 : 0.0;
    case RewardKind::truncated_normal:
      for (int attempt = 0; attempt < 1000000; ++attempt) {
        const double x = sample_gaussian(a_, b_, rng);
        if (x >= 0.0 && x <= 1.0) return x;
      }
      throw InvalidParameter("truncated-normal rejection sampler did not accept");
    case RewardKind::beta:
      return sample_beta(a_, b_, rng);
    case RewardKind::triangular: {
      const double u = rng.uniform();
      const double c = b_;
      if (u < c) return std::sqrt(u * c);
      return 1.0 - std::sqrt((1.0 - u) * (1.0 - c));
    }
    case RewardKind::deterministic:
      return a_;
    case RewardKind::gaussian_linear:
      if (theta_.size() != 1)
        throw InvalidArgument("gaussian-linear arm with d > 1 needs a context to sample");
      return sample_gaussian(theta_(0), b_, rng);
  }
  return 0.0;
}

double RewardModel::sample(const Eigen::VectorXd& x, RngStream& rng) const {
  if (kind_ != RewardKind::gaussian_linear) return sample(rng);
  if (x.size() != theta_.size()) throw InvalidArgument("context dimension mismatch");
  return sample_gaussian(x.dot(theta_), b_, rng);
}

std::string RewardModel::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case RewardKind::bernoulli: os << "bernoulli(" << a_ << ")"; break;
    case RewardKind::truncated_normal: os << "truncated-normal(" << a_ << "," << b_ << ")"; break;
    case RewardKind::beta: os << "beta(" << a_ << "," << b_ << ")"; break;
    case RewardKind::triangular: os << "triangular(mode=" << b_ << ")"; break;
    case RewardKind::deterministic: os << "deterministic(" << a_ << ")"; break;
    case RewardKind::gaussian_linear: os << "gaussian-linear(d=" << theta_.size() << "," << b_ << ")"; break;
  }
  return os.str();
}

std::optional<Family> parse_family(std::string_view name) {
  if (name == "bernoulli") return Family::bernoulli;
  if (name == "truncated-normal" || name == "truncated_normal") return Family::truncated_normal;
  if (name == "beta") return Family::beta;
  if (name == "triangular") return Family::triangular;
  return std::nullopt;
}

std::string_view family_name(Family f) {
  switch (f) {
    case Family::bernoulli: return "bernoulli";
    case Family::truncated_normal: return "truncated-normal";
    case Family::beta: return "beta";
    case Family::triangular: return "triangular";
  }
  return "unknown";
}

BanditInstance::BanditInstance(std::vector<RewardModel> arm_models)
    : arms(std::move(arm_models)), known(arms.size(), false) {
  if (arms.size() < 2) throw InvalidArgument("a bandit instance needs at least two arms");
  optimal_mean = arms[0].expected_value();
  for (std::size_t j = 1; j < arms.size(); ++j) {
    const double m = arms[j].expected_value();
    if (m > optimal_mean) {
      optimal_mean = m;
      optimal_arm = static_cast<int>(j);
    }
  }
}

double sample_reward(const RewardModel& model, RngStream& rng) { return model.sample(rng); }

BanditInstance random_instance(int arms, Family family, RngStream& rng, double truncated_normal_stddev) {
  if (arms < 2) throw InvalidArgument("random_instance needs K >= 2");
  std::vector<RewardModel> models;
  models.reserve(static_cast<std::size_t>(arms));
  for (int j = 0; j < arms; ++j) {
    switch (family) {
      case Family::bernoulli:
        models.push_back(RewardModel::bernoulli(rng.uniform()));
        break;
      case Family::truncated_normal:
        models.push_back(RewardModel::truncated_normal(rng.uniform(), truncated_normal_stddev));
        break;
      case Family::beta:
        // Beta shapes must be positive; uniform_open never returns 0.
        models.push_back(RewardModel::beta(rng.uniform_open()));
        break;
      case Family::triangular:
        models.push_back(RewardModel::triangular(rng.uniform()));
        break;
    }
  }
  return BanditInstance(std::move(models));
}

BanditInstance theorem1_instance() {
  BanditInstance inst({RewardModel::bernoulli(0.5), RewardModel::deterministic(0.25)});
  inst.known[1] = true;
  return inst;
}

void ContextualDataset::validate() const {
  if (contexts.rows() != static_cast<Eigen::Index>(labels.size()))
    throw SchemaError("context and label counts differ");
  if (contexts.cols() != dim) throw SchemaError("context dimension mismatch");
  for (int label : labels)
    if (label < 0 || label >= classes) throw SchemaError("label out of range");
}

double contextual_step(const ContextualDataset& data, std::size_t t, int chosen_arm) {
  if (t >= data.size()) throw InvalidArgument("round index beyond dataset length");
  if (chosen_arm < 0 || chosen_arm >= data.classes) throw InvalidArgument("arm index out of range");
  return data.labels[t] == chosen_arm ? 1.0 : 0.0;
}

std::optional<DatasetFormat> parse_format(std::string_view name) {
  if (name == "dense-csv" || name == "csv") return DatasetFormat::dense_csv;
  if (name == "sparse" || name == "sparse-index-value") return DatasetFormat::sparse;
  return std::nullopt;
}

ContextualDataset parse_dataset(std::string_view text, DatasetFormat format,
                                std::uint64_t shuffle_seed, std::optional<int> dim) {
  std::vector<RawRow> rows;
  int width = -1;
  int max_index = -1;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }

    RawRow row;
    if (format == DatasetFormat::dense_csv) {
      const auto fields = split(line, ',');
      if (fields.size() < 2) throw FormatError("expected at least one feature and a label", line_no);
      std::vector<double> values(fields.size());
      bool numeric = true;
      for (std::size_t i = 0; i < fields.size(); ++i) numeric = numeric && parse_double(fields[i], values[i]);
      if (!numeric) {
        if (rows.empty() && width < 0) {
          // Header line.
          width = static_cast<int>(fields.size());
          continue;
        }
        throw FormatError("non-numeric field", line_no);
      }
      if (width < 0) width = static_cast<int>(fields.size());
      if (static_cast<int>(fields.size()) != width)
        throw SchemaError("row " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                          " fields, expected " + std::to_string(width));
      if (!parse_int(fields.back(), row.label) || row.label < 0)
        throw FormatError("label must be a non-negative integer", line_no);
      for (int i = 0; i + 1 < width; ++i) row.features.emplace_back(i, values[static_cast<std::size_t>(i)]);
    } else {
      const auto tokens = split_ws(line);
      if (!parse_int(tokens.front(), row.label) || row.label < 0)
        throw FormatError("label must be a non-negative integer", line_no);
      for (std::size_t i = 1; i < tokens.size(); ++i) {
        const std::size_t colon = tokens[i].find(':');
        long idx = 0;
        double val = 0.0;
        if (colon == std::string_view::npos || !parse_int(tokens[i].substr(0, colon), idx) ||
            !parse_double(tokens[i].substr(colon + 1), val) || idx < 0)
          throw FormatError("expected index:value, got '" + std::string(tokens[i]) + "'", line_no);
        if (dim && idx >= *dim)
          throw SchemaError("row " + std::to_string(line_no) + " index " + std::to_string(idx) +
                            " exceeds dimension " + std::to_string(*dim));
        max_index = std::max(max_index, static_cast<int>(idx));
        row.features.emplace_back(static_cast<int>(idx), val);
      }
    }
    rows.push_back(std::move(row));
    if (end == text.size()) break;
  }

  int d = 0;
  if (format == DatasetFormat::dense_csv) {
    d = width - 1;
    if (dim && *dim != d)
      throw SchemaError("dataset has " + std::to_string(d) + " features, expected " + std::to_string(*dim));
  } else {
    d = dim ? *dim : max_index + 1;
  }
  if (d <= 0) throw SchemaError("dataset has no features");
  ContextualDataset data = assemble(std::move(rows), d, shuffle_seed);
  data.validate();
  return data;
}

ContextualDataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                               std::uint64_t shuffle_seed, std::optional<int> dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open dataset " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), format, shuffle_seed, dim);
}

void write_dense_csv(const ContextualDataset& data, std::ostream& out) {
  char buf[64];
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (int c = 0; c < data.dim; ++c) {
      auto res = std::to_chars(buf, buf + sizeof buf, data.contexts(static_cast<Eigen::Index>(r), c),
                               std::chars_format::general, 10);
      out.write(buf, res.ptr - buf);
      out.put(',');
    }
    out << data.labels[r] << '\n';
  }
}

ContextualDataset make_synthetic_dataset(std::size_t rows, int dim, int classes, RngStream& rng) {
  if (rows == 0 || dim <= 0 || classes < 2) throw InvalidArgument("synthetic dataset needs rows, dim > 0 and >= 2 classes");
  Eigen::MatrixXd weights(classes, dim);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = sample_gaussian(0.0, 1.0, rng);

  ContextualDataset data;
  data.dim = dim;
  data.classes = classes;
  data.contexts.resize(static_cast<Eigen::Index>(rows), dim);
  data.labels.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    Eigen::VectorXd x(dim);
    for (int c = 0; c < dim; ++c) x(c) = sample_gaussian(0.0, 1.0, rng);
    Eigen::Index best = 0;
    (weights * x).maxCoeff(&best);
    data.contexts.row(static_cast<Eigen::Index>(r)) = x.transpose();
    data.labels[r] = static_cast<int>(best);
  }
  return data;
}

}  // namespace bootband
