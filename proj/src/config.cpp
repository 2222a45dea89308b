#include "wtpfl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "wtpfl/rng.hpp"

namespace wtpfl {

using nlohmann::json;

int FleetConfig::adversarial_count() const {
  return static_cast<int>(std::lround(adversarial_pct * size / 100.0));
}

ParamVector BaseModelSpec::materialize(Eigen::Index dim) const {
  switch (kind) {
    case Kind::Zeros:
      return ParamVector::Zero(dim);
    case Kind::Constant:
      return ParamVector::Constant(dim, constant);
    case Kind::Explicit:
      if (static_cast<Eigen::Index>(values.size()) != dim)
        throw ConfigError("attack.base_model: expected " + std::to_string(dim) + " values, got " +
                          std::to_string(values.size()));
      return Eigen::Map<const ParamVector>(values.data(), dim);
  }
  return ParamVector::Zero(dim);
}

void SeedConfig::override_all(std::uint64_t seed) {
  data = derive_seed(seed, {1});
  init = derive_seed(seed, {2});
  round = derive_seed(seed, {3});
  shuffle = derive_seed(seed, {4});
}

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::ostringstream os;
  os << "invalid configuration (" << issues.size() << " issue" << (issues.size() == 1 ? "" : "s")
     << ")";
  for (const auto& s : issues) os << "\n  " << s;
  return os.str();
}

}  // namespace

ConfigValidationError::ConfigValidationError(std::vector<std::string> issues)
    : ConfigError(join_issues(issues)), issues_(std::move(issues)) {}

std::vector<std::string> ExperimentConfig::validation_errors() const {
  std::vector<std::string> out;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) out.push_back(msg);
  };

  need(data.kind == "synthetic" || data.kind == "csv", "data.kind: must be synthetic or csv");
  need(data.interval_minutes >= 1, "data.interval_minutes: must be >= 1");
  if (data.kind == "csv") {
    std::error_code ec;
    need(!data.csv_path.empty(), "data.csv_path: required when data.kind is csv");
    if (!data.csv_path.empty())
      need(std::filesystem::is_regular_file(data.csv_path, ec),
           "data.csv_path: file not found: " + data.csv_path);
    need(data.cells.empty() || static_cast<int>(data.cells.size()) == fleet.size,
         "data.cells: must list exactly fleet.size cells or be empty");
    for (int c : data.value_columns) need(c >= 0, "data.value_columns: indices must be >= 0");
  } else {
    need(data.period >= 1, "data.period: must be >= 1");
    need(data.noise_std >= 0.0 && std::isfinite(data.noise_std), "data.noise_std: must be >= 0");
    need(data.length >= 2, "data.length: must be >= 2");
  }

  need(window.recent >= 1, "window.recent: must be >= 1");
  need(window.seasonal >= 0, "window.seasonal: must be >= 0");
  need(window.seasonal == 0 || window.period > window.recent,
       "window.period: must exceed window.recent when seasonal lags are used");
  if (data.kind == "synthetic" && window.recent >= 1 && window.seasonal >= 0) {
    const long long deepest =
        window.seasonal > 0 ? static_cast<long long>(window.seasonal) * window.period : window.recent;
    need(data.length >= deepest + 2,
         "data.length: too short for the window (needs at least " + std::to_string(deepest + 2) + ")");
  }
  need(train_split > 0.0 && train_split < 1.0, "train_split: must lie in (0, 1)");

  for (int h : model.hidden) need(h >= 1, "model.hidden: widths must be >= 1");
  need(std::isfinite(train.learning_rate) && train.learning_rate >= 0.0,
       "train.learning_rate: must be finite and >= 0");
  need(train.batch_size >= 1, "train.batch_size: must be >= 1");
  need(train.local_epochs >= 1, "train.local_epochs: must be >= 1");

  need(fleet.size >= 1, "fleet.size: must be >= 1");
  need(fleet.adversarial_pct >= 0.0 && fleet.adversarial_pct <= 50.0,
       "fleet.adversarial_pct: must lie in [0, 50]");
  if (fleet.size >= 1 && fleet.adversarial_pct >= 0.0 && fleet.adversarial_pct <= 50.0)
    need(fleet.size - fleet.adversarial_count() >= 1, "fleet.size: leaves no benign BS");
  need(rounds >= 0, "rounds: must be >= 0");

  need(std::isfinite(attack.eta0) && attack.eta0 >= 0.0, "attack.eta0: must be finite and >= 0");
  need(attack.refinements >= 0, "attack.refinements: must be >= 0");
  if (attack.base_model.kind == BaseModelSpec::Kind::Explicit) {
    ModelArch arch = model;
    arch.input_dim = window.input_dim();
    bool arch_ok = arch.input_dim >= 1;
    for (int h : arch.hidden) arch_ok = arch_ok && h >= 1;
    if (arch_ok)
      need(static_cast<Eigen::Index>(attack.base_model.values.size()) == arch.parameter_count(),
           "attack.base_model: expected " + std::to_string(arch.parameter_count()) + " values");
  }
  const auto& b = attack.baseline;
  need(std::isfinite(b.scaling_factor) && b.scaling_factor != 0.0,
       "attack.scaling_factor: must be finite and non-zero");
  need(b.gaussian_std >= 0.0, "attack.gaussian_std: must be >= 0");
  need(b.history_lag >= 1, "attack.history_lag: must be >= 1");
  need(b.trim_spread >= 0.0, "attack.trim_spread: must be >= 0");
  need(b.trim_jitter >= 0.0, "attack.trim_jitter: must be >= 0");
  need(std::isfinite(b.zheng_scale), "attack.zheng_scale: must be finite");

  const auto& a = aggregator;
  need(a.trim_fraction >= 0.0 && a.trim_fraction < 0.5, "aggregator.trim_fraction: must lie in [0, 0.5)");
  need(a.faba_fraction >= 0.0 && a.faba_fraction < 1.0, "aggregator.faba_fraction: must lie in [0, 1)");
  need(a.flair_decay >= 0.0 && a.flair_decay < 1.0, "aggregator.flair_decay: must lie in [0, 1)");
  need(a.flair_c >= 0.0, "aggregator.flair_c: must be >= 0");
  const auto& g = a.glid;
  need(g.k > 0.0, "aggregator.glid.k: must be > 0");
  need(g.k_iqr >= 0.0, "aggregator.glid.k_iqr: must be >= 0");
  need(g.k_z > 0.0, "aggregator.glid.k_z: must be > 0");
  need(g.nu > 0.0 && g.nu < 1.0, "aggregator.glid.nu: must lie in (0, 1)");
  need(std::isfinite(g.bandwidth), "aggregator.glid.bandwidth: must be finite");
  if (g.fixed_pair)
    need(g.fixed_pair->lo >= 0.0 && g.fixed_pair->lo < g.fixed_pair->hi && g.fixed_pair->hi <= 100.0,
         "aggregator.glid.fixed_pair: must satisfy 0 <= lo < hi <= 100");

  need(output.dir.size() > 0, "output.dir: must not be empty");
  need(cap > 0.0, "cap: must be > 0");
  need(broken_rounds >= 1, "broken_rounds: must be >= 1");
  need(workers >= 1, "workers: must be >= 1");
  return out;
}

void ExperimentConfig::validate() const {
  auto issues = validation_errors();
  if (!issues.empty()) throw ConfigValidationError(std::move(issues));
}

namespace {

// Reads keys of one JSON object into typed fields, collecting every problem.
class Reader {
 public:
  Reader(const json* obj, std::string path, std::vector<std::string>& issues)
      : obj_(obj), path_(std::move(path)), issues_(issues) {
    if (obj_ && !obj_->is_object()) {
      issues_.push_back(name("") + ": expected an object");
      obj_ = nullptr;
    }
  }

  ~Reader() {
    if (!obj_) return;
    for (const auto& [k, v] : obj_->items())
      if (!used_.count(k)) issues_.push_back(name(k) + ": unknown key");
  }

  Reader child(const std::string& key) { return Reader(find(key), name(key), issues_); }

  const json* find(const std::string& key) {
    used_.insert(key);
    if (!obj_) return nullptr;
    auto it = obj_->find(key);
    return it == obj_->end() ? nullptr : &*it;
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const json* v = find(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!v->is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v->is_number_integer()) throw std::invalid_argument("expected an integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw std::invalid_argument("expected a number");
      }
      out = v->get<T>();
    } catch (const std::exception& e) {
      issues_.push_back(name(key) + ": " + short_reason(e));
    }
  }

  template <class E, class Parse>
  void get_enum(const std::string& key, E& out, Parse parse) {
    const json* v = find(key);
    if (!v) return;
    if (!v->is_string()) {
      issues_.push_back(name(key) + ": expected a string");
      return;
    }
    try {
      out = parse(v->get<std::string>());
    } catch (const std::exception& e) {
      issues_.push_back(name(key) + ": " + e.what());
    }
  }

  void issue(const std::string& key, const std::string& msg) { issues_.push_back(name(key) + ": " + msg); }

 private:
  std::string name(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  static std::string short_reason(const std::exception& e) {
    if (dynamic_cast<const json::exception*>(&e)) return "wrong type";
    return e.what();
  }

  const json* obj_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> used_;
};

void read_base_model(Reader& r, BaseModelSpec& spec) {
  const json* v = r.find("base_model");
  if (!v) return;
  if (v->is_string() && v->get<std::string>() == "zeros") {
    spec = BaseModelSpec{};
  } else if (v->is_object() && v->size() == 1 && v->contains("constant") &&
             (*v)["constant"].is_number()) {
    spec.kind = BaseModelSpec::Kind::Constant;
    spec.constant = (*v)["constant"].get<double>();
  } else if (v->is_array() && std::all_of(v->begin(), v->end(), [](const json& x) { return x.is_number(); })) {
    spec.kind = BaseModelSpec::Kind::Explicit;
    spec.values = v->get<std::vector<double>>();
  } else {
    r.issue("base_model", "expected \"zeros\", {\"constant\": x} or an array of numbers");
  }
}

void read_fixed_pair(Reader& r, std::optional<PercentilePair>& pair) {
  const json* v = r.find("fixed_pair");
  if (!v) return;
  if (v->is_null()) {
    pair.reset();
  } else if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
    pair = PercentilePair{(*v)[0].get<double>(), (*v)[1].get<double>()};
  } else {
    r.issue("fixed_pair", "expected null or [lo, hi]");
  }
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  std::vector<std::string> issues;
  {
    Reader root(&j, "", issues);
    {
      Reader d = root.child("data");
      d.get("kind", cfg.data.kind);
      d.get("csv_path", cfg.data.csv_path);
      d.get("cells", cfg.data.cells);
      d.get("value_columns", cfg.data.value_columns);
      d.get("interval_minutes", cfg.data.interval_minutes);
      d.get("length", cfg.data.length);
      d.get("period", cfg.data.period);
      d.get("noise_std", cfg.data.noise_std);
    }
    {
      Reader w = root.child("window");
      w.get("recent", cfg.window.recent);
      w.get("seasonal", cfg.window.seasonal);
      w.get("period", cfg.window.period);
    }
    root.get("train_split", cfg.train_split);
    {
      Reader m = root.child("model");
      m.get("hidden", cfg.model.hidden);
      m.get_enum("activation", cfg.model.activation, activation_from_string);
    }
    {
      Reader t = root.child("train");
      t.get("learning_rate", cfg.train.learning_rate);
      t.get("batch_size", cfg.train.batch_size);
      t.get("local_epochs", cfg.train.local_epochs);
    }
    {
      Reader f = root.child("fleet");
      f.get("size", cfg.fleet.size);
      f.get("adversarial_pct", cfg.fleet.adversarial_pct);
    }
    root.get("rounds", cfg.rounds);
    {
      Reader a = root.child("attack");
      a.get_enum("kind", cfg.attack.kind, attack_from_string);
      a.get("eta0", cfg.attack.eta0);
      a.get("refinements", cfg.attack.refinements);
      read_base_model(a, cfg.attack.base_model);
      auto& b = cfg.attack.baseline;
      a.get("scaling_factor", b.scaling_factor);
      a.get("gaussian_std", b.gaussian_std);
      a.get("history_lag", b.history_lag);
      a.get("trim_spread", b.trim_spread);
      a.get("trim_jitter", b.trim_jitter);
      a.get("zheng_scale", b.zheng_scale);
    }
    {
      Reader a = root.child("aggregator");
      auto& c = cfg.aggregator;
      a.get_enum("kind", c.kind, aggregator_from_string);
      a.get("trim_fraction", c.trim_fraction);
      a.get("krum_f", c.krum_f);
      a.get("faba_fraction", c.faba_fraction);
      a.get("flair_decay", c.flair_decay);
      a.get("flair_c", c.flair_c);
      Reader g = a.child("glid");
      g.get_enum("estimator", c.glid.estimator, estimator_from_string);
      g.get("k", c.glid.k);
      g.get("k_iqr", c.glid.k_iqr);
      g.get("k_z", c.glid.k_z);
      g.get("nu", c.glid.nu);
      g.get("bandwidth", c.glid.bandwidth);
      read_fixed_pair(g, c.glid.fixed_pair);
    }
    {
      Reader s = root.child("seeds");
      s.get("data", cfg.seeds.data);
      s.get("init", cfg.seeds.init);
      s.get("round", cfg.seeds.round);
      s.get("shuffle", cfg.seeds.shuffle);
    }
    {
      Reader o = root.child("output");
      o.get("dir", cfg.output.dir);
      o.get("export_flags", cfg.output.export_flags);
    }
    root.get("cap", cfg.cap);
    root.get("broken_rounds", cfg.broken_rounds);
    root.get("workers", cfg.workers);
  }
  if (!issues.empty()) throw ConfigValidationError(std::move(issues));
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json base;
  switch (cfg.attack.base_model.kind) {
    case BaseModelSpec::Kind::Zeros:
      base = "zeros";
      break;
    case BaseModelSpec::Kind::Constant:
      base = json{{"constant", cfg.attack.base_model.constant}};
      break;
    case BaseModelSpec::Kind::Explicit:
      base = cfg.attack.base_model.values;
      break;
  }
  const auto& g = cfg.aggregator.glid;
  json pair = g.fixed_pair ? json::array({g.fixed_pair->lo, g.fixed_pair->hi}) : json(nullptr);
  const auto& b = cfg.attack.baseline;
  return json{
      {"data",
       {{"kind", cfg.data.kind},
        {"csv_path", cfg.data.csv_path},
        {"cells", cfg.data.cells},
        {"value_columns", cfg.data.value_columns},
        {"interval_minutes", cfg.data.interval_minutes},
        {"length", cfg.data.length},
        {"period", cfg.data.period},
        {"noise_std", cfg.data.noise_std}}},
      {"window",
       {{"recent", cfg.window.recent}, {"seasonal", cfg.window.seasonal}, {"period", cfg.window.period}}},
      {"train_split", cfg.train_split},
      {"model", {{"hidden", cfg.model.hidden}, {"activation", to_string(cfg.model.activation)}}},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"batch_size", cfg.train.batch_size},
        {"local_epochs", cfg.train.local_epochs}}},
      {"fleet", {{"size", cfg.fleet.size}, {"adversarial_pct", cfg.fleet.adversarial_pct}}},
      {"rounds", cfg.rounds},
      {"attack",
       {{"kind", to_string(cfg.attack.kind)},
        {"eta0", cfg.attack.eta0},
        {"refinements", cfg.attack.refinements},
        {"base_model", base},
        {"scaling_factor", b.scaling_factor},
        {"gaussian_std", b.gaussian_std},
        {"history_lag", b.history_lag},
        {"trim_spread", b.trim_spread},
        {"trim_jitter", b.trim_jitter},
        {"zheng_scale", b.zheng_scale}}},
      {"aggregator",
       {{"kind", to_string(cfg.aggregator.kind)},
        {"trim_fraction", cfg.aggregator.trim_fraction},
        {"krum_f", cfg.aggregator.krum_f},
        {"faba_fraction", cfg.aggregator.faba_fraction},
        {"flair_decay", cfg.aggregator.flair_decay},
        {"flair_c", cfg.aggregator.flair_c},
        {"glid",
         {{"estimator", to_string(g.estimator)},
          {"k", g.k},
          {"k_iqr", g.k_iqr},
          {"k_z", g.k_z},
          {"nu", g.nu},
          {"bandwidth", g.bandwidth},
          {"fixed_pair", pair}}}}},
      {"seeds",
       {{"data", cfg.seeds.data},
        {"init", cfg.seeds.init},
        {"round", cfg.seeds.round},
        {"shuffle", cfg.seeds.shuffle}}},
      {"output", {{"dir", cfg.output.dir}, {"export_flags", cfg.output.export_flags}}},
      {"cap", cfg.cap},
      {"broken_rounds", cfg.broken_rounds},
      {"workers", cfg.workers},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigValidationError({"config: cannot open " + path.string()});
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigValidationError({"config: " + path.string() + ": " + e.what()});
  }
  return config_from_json(j);
}

}  // namespace wtpfl
