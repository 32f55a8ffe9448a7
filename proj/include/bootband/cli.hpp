#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bootband/ctx.hpp"
#include "bootband/env.hpp"
#include "bootband/policy.hpp"
#include "bootband/sim.hpp"

namespace bootband {

enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_config = 2, exit_theory = 3 };

struct IniEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct IniSection {
  std::string name;  // "" for entries before the first header
  std::vector<IniEntry> entries;
  std::size_t line = 0;
};

// `[section]` headers, `key = value` pairs, `#` or `;` comments.
// Malformed lines raise ConfigError naming the line.
std::vector<IniSection> parse_ini(std::string_view text);

enum class ExperimentMode { mab, contextual };

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::mab;
  Family family = Family::bernoulli;
  bool theorem1 = false;
  int arms = 10;
  long horizon = 10000;
  int runs = 100;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: BOOTBAND_THREADS or hardware
  ForcedExploration forced;
  RegretKind regret = RegretKind::pseudo;
  double truncated_normal_stddev = 1e-4;
  std::vector<PolicySpec> mab_policies;

  std::filesystem::path dataset;
  DatasetFormat format = DatasetFormat::dense_csv;
  std::optional<int> dim;
  bool pseudo_examples = true;
  std::vector<ContextualSpec> contextual_policies;

  std::filesystem::path out = "results";
  long record_every = 1;
};

// Builds and validates a config; unknown keys, bad values and missing
// fields raise ConfigError naming the field. Relative dataset and output
// paths are resolved against `base_dir`.
ExperimentConfig build_config(const std::vector<IniSection>& ini, ExperimentMode mode,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentMode mode);

// Long-format CSV: round,policy,mean,stderr at every `record_every`-th round
// and at the final round.
void write_series_csv(std::ostream& out, const std::vector<std::pair<std::string, const AggregateTrace*>>& series,
                      long record_every);

// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct RunManifest {
  std::string command;
  std::string config_text;
  std::uint64_t seed = 0;
  double seconds = 0.0;
  std::vector<std::filesystem::path> outputs;
};

std::string render_manifest(const RunManifest& manifest);
std::string_view artifact_version();

struct CommandStreams {
  std::ostream& out;
  std::ostream& err;
};

struct RunOverrides {
  std::optional<std::filesystem::path> out;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
};

int cmd_mab(const std::filesystem::path& config, const RunOverrides& overrides, CommandStreams io);
int cmd_contextual(const std::filesystem::path& config, const RunOverrides& overrides, CommandStreams io);

struct TheoryOptions {
  long n_min = 5;
  long n_max = 200;
  std::optional<std::vector<double>> p_values;  // default 0.05..0.50
  double k_fraction = 0.7;
  long m_min = 15;
  long m_max = 200;
  long l_max = 100;
  bool invert_bound = false;
  bool probe = false;
  long probe_m = 3;
  long probe_horizon = 1000;
  long probe_runs = 10000;
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> out;
};

int cmd_theory(const TheoryOptions& options, CommandStreams io);

struct GenDataOptions {
  std::size_t rows = 6000;
  int dim = 10;
  int classes = 3;
  std::uint64_t seed = 1;
  std::filesystem::path out;
};

int cmd_gen_data(const GenDataOptions& options, CommandStreams io);

}  // namespace bootband
