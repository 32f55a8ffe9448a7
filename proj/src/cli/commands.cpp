#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bootband/cli.hpp"
#include "bootband/errors.hpp"
#include "bootband/format.hpp"
#include "bootband/theory.hpp"

#ifndef BOOTBAND_VERSION
#define BOOTBAND_VERSION "unknown"
#endif

namespace bootband {

std::string_view artifact_version() { return BOOTBAND_VERSION; }

void write_series_csv(std::ostream& out, const std::vector<std::pair<std::string, const AggregateTrace*>>& series,
                      long record_every) {
  if (record_every < 1) throw InvalidArgument("record_every must be at least 1");
  out << "round,policy,mean,stderr\n";
  for (const auto& [label, trace] : series) {
    const auto length = static_cast<long>(trace->mean.size());
    for (long t = 1; t <= length; ++t) {
      if (t % record_every != 0 && t != length) continue;
      const auto i = static_cast<std::size_t>(t - 1);
      out << t << ',' << label << ',' << format_number(trace->mean[i]) << ',' << format_number(trace->se[i]) << '\n';
    }
  }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string render_manifest(const RunManifest& m) {
  std::ostringstream out;
  out << "version = " << artifact_version() << '\n';
  out << "command = " << m.command << '\n';
  out << "seed = " << m.seed << '\n';
  out << "duration_seconds = " << format_number(m.seconds, 6) << '\n';
  for (const auto& p : m.outputs) out << "output = " << p.filename().string() << '\n';
  out << "\n# config\n" << m.config_text;
  if (!m.config_text.empty() && m.config_text.back() != '\n') out << '\n';
  return out.str();
}

namespace {

using Clock = std::chrono::steady_clock;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void apply(ExperimentConfig& cfg, const RunOverrides& o) {
  if (o.out) cfg.out = *o.out;
  if (o.threads) {
    if (*o.threads < 1) throw ConfigError("threads", "must be at least 1");
    cfg.threads = *o.threads;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (cfg.threads == 0) cfg.threads = default_thread_count();
}

std::string effective_config(const std::string& text, const ExperimentConfig& cfg) {
  return text + "\n# effective seed = " + std::to_string(cfg.seed) + "\n# threads = " + std::to_string(cfg.threads) +
         "\n";
}

template <class Body>
int guarded(CommandStreams io, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    io.err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
}

}  // namespace

int cmd_mab(const std::filesystem::path& config, const RunOverrides& overrides, CommandStreams io) {
  return guarded(io, [&] {
    const auto start = Clock::now();
    const std::string text = read_text(config);
    ExperimentConfig cfg = build_config(parse_ini(text), ExperimentMode::mab, config.parent_path());
    apply(cfg, overrides);

    MabExperiment e;
    e.arms = cfg.arms;
    e.family = cfg.family;
    e.theorem1 = cfg.theorem1;
    e.horizon = cfg.horizon;
    e.runs = cfg.runs;
    e.seed = cfg.seed;
    e.forced = cfg.forced;
    e.regret = cfg.regret;
    e.truncated_normal_stddev = cfg.truncated_normal_stddev;
    e.policies = cfg.mab_policies;
    e.threads = cfg.threads;
    const std::vector<MabSeries> series = run_mab_experiment(e);

    std::vector<std::pair<std::string, const AggregateTrace*>> rows;
    for (const auto& s : series) rows.emplace_back(s.label, &s.trace);
    std::ostringstream csv;
    write_series_csv(csv, rows, cfg.record_every);
    const auto csv_path = cfg.out / "regret.csv";
    write_file_atomic(csv_path, csv.str());

    for (const auto& s : series)
      io.out << s.label << ": R(T) = " << format_number(s.trace.mean.back(), 6) << " +- "
             << format_number(s.trace.se.back(), 3) << '\n';

    RunManifest manifest{"mab", effective_config(text, cfg), cfg.seed,
                         std::chrono::duration<double>(Clock::now() - start).count(), {csv_path}};
    write_file_atomic(cfg.out / "manifest.txt", render_manifest(manifest));
    return static_cast<int>(exit_ok);
  });
}

int cmd_contextual(const std::filesystem::path& config, const RunOverrides& overrides, CommandStreams io) {
  return guarded(io, [&] {
    const auto start = Clock::now();
    const std::string text = read_text(config);
    ExperimentConfig cfg = build_config(parse_ini(text), ExperimentMode::contextual, config.parent_path());
    apply(cfg, overrides);
    if (!std::filesystem::exists(cfg.dataset)) throw ConfigError("dataset", "no such file: " + cfg.dataset.string());
    const ContextualDataset data = load_dataset(cfg.dataset, cfg.format, cfg.seed, cfg.dim);
    if (data.classes < 2) throw ConfigError("dataset", "needs at least two classes");

    ContextualExperiment e;
    e.data = &data;
    e.horizon = cfg.horizon;
    e.runs = cfg.runs;
    e.seed = cfg.seed;
    e.pseudo_examples = cfg.pseudo_examples;
    e.policies = cfg.contextual_policies;
    e.threads = cfg.threads;
    const std::vector<ContextualSeries> series = run_contextual_experiment(e);

    std::vector<std::pair<std::string, const AggregateTrace*>> rows;
    for (const auto& s : series) rows.emplace_back(s.label, &s.average);
    std::ostringstream csv;
    write_series_csv(csv, rows, cfg.record_every);
    const auto csv_path = cfg.out / "reward.csv";
    write_file_atomic(csv_path, csv.str());

    for (const auto& s : series)
      io.out << s.label << ": per-step reward = " << format_number(s.average.mean.back(), 6) << " +- "
             << format_number(s.average.se.back(), 3) << '\n';

    RunManifest manifest{"contextual", effective_config(text, cfg), cfg.seed,
                         std::chrono::duration<double>(Clock::now() - start).count(), {csv_path}};
    write_file_atomic(cfg.out / "manifest.txt", render_manifest(manifest));
    return static_cast<int>(exit_ok);
  });
}

namespace {

LemmaReport probe_report(const TheoryOptions& o) {
  RngStream rng(o.seed);
  const BadHistoryStats s = bad_history_probe(o.probe_m, o.probe_horizon, o.probe_runs, rng);
  LemmaReport report{"bad-history", {}};
  const double q = s.expected_frequency;
  const double se = std::sqrt(q * (1.0 - q) / static_cast<double>(s.runs));
  LemmaPoint freq;
  freq.params = "m=" + std::to_string(s.m) + " runs=" + std::to_string(s.runs) + " stat=event-frequency";
  freq.computed = s.event_frequency;
  freq.bound = q;
  bool ok = std::abs(s.event_frequency - q) <= 3.0 * se;
  freq.satisfied = o.invert_bound ? !ok : ok;
  freq.note = "3 s.e. = " + format_number(3.0 * se, 4);
  report.points.push_back(freq);

  LemmaPoint run;
  run.params = "m=" + std::to_string(s.m) + " T=" + std::to_string(s.horizon) + " stat=arm2-run-length";
  if (s.conditional_runs < 2) {
    run.skipped = true;
    run.note = "too few conditional runs";
  } else {
    run.computed = s.run_length_mean;
    run.bound = s.predicted_run_length;
    ok = std::abs(s.run_length_mean - s.predicted_run_length) <= 3.0 * s.run_length_stderr;
    run.satisfied = o.invert_bound ? !ok : ok;
    run.note = "3 s.e. = " + format_number(3.0 * s.run_length_stderr, 4) + ", p = " + format_number(s.pull_probability, 6);
  }
  report.points.push_back(run);
  return report;
}

}  // namespace

int cmd_theory(const TheoryOptions& o, CommandStreams io) {
  return guarded(io, [&] {
    if (o.n_min < 1 || o.n_min > o.n_max) throw ConfigError("n-range", "empty tail-bound grid");
    if (o.m_min < 1 || o.m_min > o.m_max) throw ConfigError("m-range", "empty pull-probability grid");
    if (o.l_max < 1) throw ConfigError("l-max", "empty truncated-geometric grid");
    if (o.p_values && o.p_values->empty()) throw ConfigError("p-values", "empty tail-bound grid");
    if (!(o.k_fraction > 0.0 && o.k_fraction < 1.0)) throw ConfigError("k-fraction", "must lie in (0, 1)");
    std::vector<double> ps;
    if (o.p_values)
      ps = *o.p_values;
    else
      for (int i = 1; i <= 10; ++i) ps.push_back(0.05 * i);
    for (double p : ps)
      if (!(p > 0.0 && p < 1.0)) throw ConfigError("p-values", "each p must lie in (0, 1)");

    std::vector<TailPoint> tail_grid;
    for (long n = o.n_min; n <= o.n_max; ++n)
      for (double p : ps) tail_grid.push_back({n, p, std::ceil(o.k_fraction * static_cast<double>(n))});
    GeometricGrid geo = default_geometric_grid();
    geo.l_hi = o.l_max;
    const CheckOptions check{o.invert_bound};

    std::vector<LemmaReport> reports;
    reports.push_back(check_tail_bound(tail_grid, check));
    reports.push_back(check_pull_probability(o.m_min, o.m_max, check));
    reports.push_back(check_truncated_geometric(geo, check));
    reports.push_back(check_truncated_geometric_lower_bound(geo, check));
    if (o.probe) reports.push_back(probe_report(o));

    std::ostringstream text;
    for (const auto& r : reports) r.write(text);
    if (o.out)
      write_file_atomic(*o.out, text.str());
    else
      io.out << text.str();

    bool all = true;
    for (const auto& r : reports) {
      all = all && r.passed();
      if (o.out) io.out << r.lemma << ": " << (r.passed() ? "PASS" : "FAIL") << " (" << r.checked() << " checked, "
                        << r.skipped() << " skipped)\n";
    }
    return static_cast<int>(all ? exit_ok : exit_theory);
  });
}

int cmd_gen_data(const GenDataOptions& o, CommandStreams io) {
  return guarded(io, [&] {
    if (o.out.empty()) throw ConfigError("out", "an output path is required");
    if (o.rows < 1) throw ConfigError("rows", "must be at least 1");
    if (o.dim < 1) throw ConfigError("dim", "must be at least 1");
    if (o.classes < 2) throw ConfigError("classes", "must be at least 2");
    RngStream rng(o.seed);
    const ContextualDataset data = make_synthetic_dataset(o.rows, o.dim, o.classes, rng);
    std::ostringstream csv;
    write_dense_csv(data, csv);
    write_file_atomic(o.out, csv.str());
    io.out << "wrote " << data.size() << " rows to " << o.out.string() << '\n';
    return static_cast<int>(exit_ok);
  });
}

}  // namespace bootband
