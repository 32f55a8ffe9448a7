#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bootband/cli.hpp"
#include "bootband/errors.hpp"

namespace bootband {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item = trim(s.substr(start, comma == std::string_view::npos ? s.npos : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& field, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, value);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError(field, "cannot parse '" + text + "' as a number");
  return value;
}

bool parse_bool(const std::string& field, const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "true" || t == "yes" || t == "on" || t == "1") return true;
  if (t == "false" || t == "no" || t == "off" || t == "0") return false;
  throw ConfigError(field, "expected true or false, got '" + text + "'");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

// Key lookup that remembers which keys were consumed so leftovers can be
// reported as unknown.
class SectionView {
 public:
  SectionView(const IniSection* section, std::string prefix) : section_(section), prefix_(std::move(prefix)) {
    if (!section_) return;
    for (const IniEntry& e : section_->entries) {
      if (!values_.emplace(e.key, e.value).second)
        throw ConfigError(field(e.key), "duplicate key (line " + std::to_string(e.line) + ")");
    }
  }

  std::optional<std::string> get(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    used_.insert(key);
    return it->second;
  }

  std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  template <class T>
  std::optional<T> number(const std::string& key) {
    const auto v = get(key);
    if (!v) return std::nullopt;
    return parse_number<T>(field(key), *v);
  }

  std::optional<bool> boolean(const std::string& key) {
    const auto v = get(key);
    if (!v) return std::nullopt;
    return parse_bool(field(key), *v);
  }

  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (!used_.count(key)) throw ConfigError(field(key), "unknown key");
  }

 private:
  const IniSection* section_;
  std::string prefix_;
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

ForcedExploration parse_forced(const std::string& text) {
  if (text == "none") return {ForcedMode::none, 0};
  if (text == "theorem-text") return {ForcedMode::theorem_text, 0};
  if (text == "proof-derived") return {ForcedMode::proof_derived, 0};
  const long m = parse_number<long>("forced_exploration", text);
  if (m < 0) throw ConfigError("forced_exploration", "must be none, theorem-text, proof-derived or a count >= 0");
  return {ForcedMode::explicit_count, m};
}

std::vector<std::string> mab_kind_names() { return {"ts", "npb", "wb", "eg"}; }

PolicySpec build_mab_policy(const std::string& label, const IniSection* section, bool general) {
  SectionView view(section, "policy." + label);
  const std::string kind_text = view.get("kind").value_or(label);
  const auto kind = parse_policy_kind(kind_text);
  if (!kind)
    throw ConfigError(view.field("kind"),
                      "unknown policy '" + kind_text + "'; valid names: " + join(mab_kind_names()));
  PolicySpec spec;
  spec.kind = *kind;
  spec.label = label;
  spec.alpha0 = view.number<int>("alpha0").value_or(1);
  spec.beta0 = view.number<int>("beta0").value_or(1);
  if (spec.alpha0 < 0 || spec.beta0 < 0) throw ConfigError(view.field("alpha0"), "pseudo-counts must be >= 0");
  if (spec.kind == PolicyKind::ts && (spec.alpha0 < 1 || spec.beta0 < 1))
    throw ConfigError(view.field("alpha0"), "Thompson sampling needs pseudo-counts >= 1");
  if (const auto form = view.get("weight_form")) {
    if (*form == "gamma-ratio")
      spec.weight_form = WeightForm::gamma_ratio;
    else if (*form == "explicit")
      spec.weight_form = WeightForm::explicit_weights;
    else
      throw ConfigError(view.field("weight_form"), "expected gamma-ratio or explicit");
  }
  spec.general_rewards = general;
  if (const auto rewards = view.get("rewards")) {
    if (*rewards == "general")
      spec.general_rewards = true;
    else if (*rewards == "bernoulli")
      spec.general_rewards = false;
    else
      throw ConfigError(view.field("rewards"), "expected bernoulli or general");
  }
  view.reject_unknown();
  return spec;
}

ContextualSpec build_contextual_policy(const std::string& label, const IniSection* section) {
  SectionView view(section, "policy." + label);
  const std::string kind_text = view.get("kind").value_or(label);
  const auto kind = parse_contextual_kind(kind_text);
  if (!kind)
    throw ConfigError(view.field("kind"),
                      "unknown policy '" + kind_text + "'; valid names: " + join(contextual_kind_names()));
  ContextualSpec spec;
  spec.kind = *kind;
  spec.label = label;
  spec.fit.tolerance = view.number<double>("tolerance").value_or(spec.fit.tolerance);
  spec.fit.max_passes = view.number<int>("max_passes").value_or(spec.fit.max_passes);
  if (const auto step = view.number<double>("step")) spec.fit.step = *step;
  spec.ridge = view.number<double>("ridge").value_or(spec.ridge);
  spec.ucb_width = view.number<double>("ucb_width").value_or(spec.ucb_width);
  spec.ts_scale = view.number<double>("ts_scale").value_or(spec.ts_scale);
  if (!(spec.fit.tolerance > 0.0)) throw ConfigError(view.field("tolerance"), "must be positive");
  if (spec.fit.max_passes < 1) throw ConfigError(view.field("max_passes"), "must be at least 1");
  if (spec.fit.step && !(*spec.fit.step > 0.0)) throw ConfigError(view.field("step"), "must be positive");
  if (!(spec.ridge > 0.0)) throw ConfigError(view.field("ridge"), "must be positive");
  if (!(spec.ucb_width >= 0.0)) throw ConfigError(view.field("ucb_width"), "must be non-negative");
  if (!(spec.ts_scale >= 0.0)) throw ConfigError(view.field("ts_scale"), "must be non-negative");
  view.reject_unknown();
  return spec;
}

}  // namespace

std::vector<IniSection> parse_ini(std::string_view text) {
  std::vector<IniSection> sections(1);
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    ++line_no;
    std::string line = trim(raw);
    if (!line.empty() && line[0] != '#' && line[0] != ';') {
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no), "unterminated section header");
        const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
        if (name.empty()) throw ConfigError("line " + std::to_string(line_no), "empty section name");
        for (const auto& s : sections)
          if (s.name == name) throw ConfigError("line " + std::to_string(line_no), "duplicate section [" + name + "]");
        sections.push_back({name, {}, line_no});
      } else {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no), "expected key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "missing key");
        sections.back().entries.push_back({std::move(key), std::move(value), line_no});
      }
    }
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  if (sections.front().entries.empty()) sections.erase(sections.begin());
  return sections;
}

ExperimentConfig build_config(const std::vector<IniSection>& ini, ExperimentMode mode,
                              const std::filesystem::path& base_dir) {
  const IniSection* experiment = nullptr;
  std::vector<const IniSection*> policy_sections;
  for (const IniSection& s : ini) {
    if (s.name.empty() || s.name == "experiment") {
      if (experiment) throw ConfigError("experiment", "settings given both before and inside [experiment]");
      experiment = &s;
    } else if (s.name.rfind("policy.", 0) == 0 && s.name.size() > 7) {
      policy_sections.push_back(&s);
    } else {
      throw ConfigError(s.name, "unknown section");
    }
  }

  ExperimentConfig cfg;
  cfg.mode = mode;
  SectionView view(experiment, "");

  if (const auto m = view.get("mode")) {
    const bool ok = (*m == "mab" && mode == ExperimentMode::mab) ||
                    (*m == "contextual" && mode == ExperimentMode::contextual);
    if (!ok) throw ConfigError("mode", "'" + *m + "' does not match the command");
  }
  cfg.horizon = view.number<long>("horizon").value_or(cfg.horizon);
  cfg.runs = view.number<int>("runs").value_or(cfg.runs);
  cfg.seed = view.number<std::uint64_t>("seed").value_or(cfg.seed);
  cfg.threads = view.number<int>("threads").value_or(0);
  cfg.record_every = view.number<long>("record_every").value_or(1);
  if (const auto out = view.get("out")) cfg.out = *out;
  if (cfg.horizon < 1) throw ConfigError("horizon", "must be at least 1");
  if (cfg.runs < 1) throw ConfigError("runs", "must be at least 1");
  if (cfg.threads < 0) throw ConfigError("threads", "must be non-negative");
  if (cfg.record_every < 1) throw ConfigError("record_every", "must be at least 1");

  std::vector<std::string> labels;
  if (const auto list = view.get("policies")) labels = split_list(*list);
  for (const IniSection* s : policy_sections) {
    const std::string label = s->name.substr(7);
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
  }
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j)
      if (labels[i] == labels[j]) throw ConfigError("policies", "duplicate label '" + labels[i] + "'");
  if (labels.empty()) throw ConfigError("policies", "at least one policy is required");
  auto section_for = [&](const std::string& label) -> const IniSection* {
    for (const IniSection* s : policy_sections)
      if (s->name.substr(7) == label) return s;
    return nullptr;
  };

  if (mode == ExperimentMode::mab) {
    const std::string family = view.get("family").value_or("bernoulli");
    if (family == "theorem1") {
      cfg.theorem1 = true;
      cfg.arms = 2;
    } else {
      const auto f = parse_family(family);
      if (!f) throw ConfigError("family", "unknown family '" + family +
                                              "'; valid: bernoulli, truncated-normal, beta, triangular, theorem1");
      cfg.family = *f;
    }
    if (const auto arms = view.number<int>("arms")) {
      if (cfg.theorem1 && *arms != 2) throw ConfigError("arms", "the theorem1 instance has exactly 2 arms");
      cfg.arms = *arms;
    }
    if (cfg.arms < 2) throw ConfigError("arms", "must be at least 2");
    if (const auto forced = view.get("forced_exploration")) cfg.forced = parse_forced(*forced);
    if (const auto regret = view.get("regret")) {
      if (*regret == "pseudo")
        cfg.regret = RegretKind::pseudo;
      else if (*regret == "realized")
        cfg.regret = RegretKind::realized;
      else
        throw ConfigError("regret", "expected pseudo or realized");
    }
    cfg.truncated_normal_stddev = view.number<double>("truncated_normal_stddev").value_or(cfg.truncated_normal_stddev);
    if (!(cfg.truncated_normal_stddev > 0.0)) throw ConfigError("truncated_normal_stddev", "must be positive");
    try {
      const long m = forced_exploration_schedule(cfg.horizon, cfg.forced);
      if (m * cfg.arms > cfg.horizon)
        throw ConfigError("forced_exploration", "K*m = " + std::to_string(m * cfg.arms) + " exceeds the horizon");
    } catch (const InvalidArgument& e) {
      throw ConfigError("forced_exploration", e.what());
    }
    const bool general = !cfg.theorem1 && cfg.family != Family::bernoulli;
    for (const auto& label : labels) cfg.mab_policies.push_back(build_mab_policy(label, section_for(label), general));
    for (const char* key : {"dataset", "format", "dim", "pseudo_examples"})
      if (view.get(key)) throw ConfigError(key, "only valid for contextual experiments");
  } else {
    const auto dataset = view.get("dataset");
    if (!dataset || dataset->empty()) throw ConfigError("dataset", "a dataset path is required");
    cfg.dataset = *dataset;
    if (cfg.dataset.is_relative() && !base_dir.empty()) cfg.dataset = base_dir / cfg.dataset;
    if (const auto format = view.get("format")) {
      const auto f = parse_format(*format);
      if (!f) throw ConfigError("format", "expected csv or sparse");
      cfg.format = *f;
    }
    cfg.dim = view.number<int>("dim");
    if (cfg.dim && *cfg.dim < 1) throw ConfigError("dim", "must be positive");
    cfg.pseudo_examples = view.boolean("pseudo_examples").value_or(true);
    for (const auto& label : labels) cfg.contextual_policies.push_back(build_contextual_policy(label, section_for(label)));
    for (const char* key : {"family", "arms", "forced_exploration", "regret", "truncated_normal_stddev"})
      if (view.get(key)) throw ConfigError(key, "only valid for MAB experiments");
  }
  if (cfg.out.is_relative() && !base_dir.empty()) cfg.out = base_dir / cfg.out;
  view.reject_unknown();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return build_config(parse_ini(buf.str()), mode, path.parent_path());
}

}  // namespace bootband
