#include "wtpfl/experiment.hpp"

#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace wtpfl {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

CellRun execute(ExperimentConfig cfg, const FederatedData& data) {
  CellRun run{std::move(cfg), std::nullopt, {}};
  try {
    run.result = run_experiment(run.config, data);
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(what + ": not a number: '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ConfigError(what + ": not an integer: '" + s + "'");
  return v;
}

std::string cell_dir_name(const ExperimentConfig& cfg) {
  return to_string(cfg.aggregator.kind) + "_" + to_string(cfg.attack.kind);
}

ExperimentConfig load_with_options(const std::filesystem::path& path, const CommandOptions& opts) {
  ExperimentConfig cfg = load_config(path);
  if (opts.seed) cfg.seeds.override_all(*opts.seed);
  if (opts.out_dir) cfg.output.dir = *opts.out_dir;
  return cfg;
}

// Maps exceptions onto exit codes and prints them.
int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigValidationError& e) {
    err << e.what() << '\n';
    return kExitInvalid;
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

// Validation-stage failures (names, values) are exit 1 even when the
// underlying parser throws ParameterError.
template <class T, class Parse>
std::vector<T> parse_list(const std::vector<std::string>& names, Parse parse, const std::string& what,
                          std::vector<std::string>& issues) {
  std::vector<T> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse(n));
    } catch (const std::exception& e) {
      issues.push_back(what + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::filesystem::path persist_experiment(const ExperimentConfig& cfg, const ExperimentResult& result,
                                         const std::filesystem::path& out_dir) {
  PersistOptions opts;
  if (cfg.attack.kind == AttackKind::Fti && !result.fti_trace.empty())
    opts.extra_files.emplace_back("fti_trace.csv", fti_trace_csv(result.fti_trace));
  if (cfg.output.export_flags) opts.extra_files.emplace_back("flags.csv", result.flags_csv);
  return persist_run(result.records, result.detection, config_to_json(cfg), out_dir, opts);
}

std::pair<double, double> final_metrics(const ExperimentResult& result) {
  if (result.records.empty()) throw EmptyInputError("run has no rounds");
  const auto& last = result.records.back();
  return {last.mae_capped, last.mse_capped};
}

MatrixResult run_matrix(const ExperimentConfig& base, const FederatedData& data,
                        const std::vector<AggregatorKind>& aggregators,
                        const std::vector<AttackKind>& attacks, int jobs) {
  std::vector<ExperimentConfig> configs;
  for (auto agg : aggregators) {
    for (auto atk : attacks) {
      ExperimentConfig c = base;
      c.aggregator.kind = agg;
      c.attack.kind = atk;
      configs.push_back(std::move(c));
    }
  }
  MatrixResult out;
  out.runs.resize(configs.size());
  parallel_for(static_cast<int>(configs.size()), jobs, [&](int i) {
    const auto k = static_cast<std::size_t>(i);
    out.runs[k] = execute(configs[k], data);
  });
  for (const auto& r : out.runs) {
    MatrixCell cell{r.config.aggregator.kind, r.config.attack.kind, std::nullopt};
    if (r.result && !r.result->records.empty()) cell.mae_mse = final_metrics(*r.result);
    out.cells.push_back(cell);
  }
  out.table = summary_table(out.cells);
  return out;
}

SweepParam sweep_param_from_string(const std::string& name) {
  if (name == "fake_pct") return SweepParam::FakePct;
  if (name == "eta0") return SweepParam::Eta0;
  if (name == "fleet_size") return SweepParam::FleetSize;
  if (name == "percentile_pair") return SweepParam::PercentilePair;
  if (name == "estimator") return SweepParam::Estimator;
  throw ConfigError("unknown sweep parameter '" + name +
                    "' (fake_pct, eta0, fleet_size, percentile_pair, estimator)");
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::FakePct:
      return "fake_pct";
    case SweepParam::Eta0:
      return "eta0";
    case SweepParam::FleetSize:
      return "fleet_size";
    case SweepParam::PercentilePair:
      return "percentile_pair";
    case SweepParam::Estimator:
      return "estimator";
  }
  return "?";
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& base, SweepParam param,
                                   const std::string& value) {
  ExperimentConfig c = base;
  switch (param) {
    case SweepParam::FakePct:
      c.fleet.adversarial_pct = parse_double(value, "fake_pct");
      break;
    case SweepParam::Eta0:
      c.attack.eta0 = parse_double(value, "eta0");
      break;
    case SweepParam::FleetSize:
      c.fleet.size = parse_int(value, "fleet_size");
      break;
    case SweepParam::PercentilePair: {
      const auto colon = value.find(':');
      if (colon == std::string::npos) throw ConfigError("percentile_pair: expected lo:hi, got '" + value + "'");
      c.aggregator.glid.fixed_pair = PercentilePair{parse_double(value.substr(0, colon), "percentile_pair"),
                                                    parse_double(value.substr(colon + 1), "percentile_pair")};
      break;
    }
    case SweepParam::Estimator:
      try {
        c.aggregator.glid.estimator = estimator_from_string(value);
      } catch (const std::exception& e) {
        throw ConfigError(std::string("estimator: ") + e.what());
      }
      c.aggregator.glid.fixed_pair.reset();
      break;
  }
  return c;
}

std::vector<SweepRun> run_sweep(const ExperimentConfig& base, SweepParam param,
                                const std::vector<std::string>& values, int jobs) {
  std::vector<SweepRun> runs;
  std::vector<std::string> issues;
  for (const auto& v : values) {
    try {
      ExperimentConfig c = apply_sweep_value(base, param, v);
      for (auto& msg : c.validation_errors()) issues.push_back("value " + v + ": " + msg);
      runs.push_back({v, CellRun{std::move(c), std::nullopt, {}}});
    } catch (const ConfigError& e) {
      issues.push_back(e.what());
    }
  }
  if (!issues.empty()) throw ConfigValidationError(std::move(issues));

  // Fleet size changes the data itself; every other axis shares one load.
  std::optional<FederatedData> shared;
  if (param != SweepParam::FleetSize) shared = prepare_data(base);
  parallel_for(static_cast<int>(runs.size()), jobs, [&](int i) {
    auto& r = runs[static_cast<std::size_t>(i)];
    if (shared) {
      r.run = execute(r.run.config, *shared);
      return;
    }
    try {
      const FederatedData own = prepare_data(r.run.config);
      r.run = execute(r.run.config, own);
    } catch (const std::exception& e) {
      r.run.error = e.what();
    }
  });
  return runs;
}

std::string sweep_csv(const std::vector<SweepRun>& runs) {
  std::ostringstream os;
  os << "value,attack,mae_capped,mse_capped\n";
  for (const auto& r : runs) {
    os << r.value << ',' << to_string(r.run.config.attack.kind) << ',';
    if (r.run.result && !r.run.result->records.empty()) {
      const auto [mae, mse] = final_metrics(*r.run.result);
      os << format_exact(mae) << ',' << format_exact(mse) << '\n';
    } else {
      os << "ERR,ERR\n";
    }
  }
  return os.str();
}

int command_run(const std::filesystem::path& config, const CommandOptions& opts, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_with_options(config, opts);
    cfg.validate();
    if (opts.print_config) {
      out << config_to_json(cfg).dump(2) << '\n';
      return int{kExitOk};
    }
    const FederatedData data = prepare_data(cfg);
    const ExperimentResult result = run_experiment(cfg, data);
    const auto manifest = persist_experiment(cfg, result, cfg.output.dir);
    if (!result.records.empty()) {
      const auto [mae, mse] = final_metrics(result);
      out << "final MAE " << format_metric(mae) << "  MSE " << format_metric(mse) << '\n';
    }
    out << "manifest " << manifest.string() << '\n';
    return int{kExitOk};
  });
}

int command_matrix(const std::filesystem::path& config, const std::vector<std::string>& aggregators,
                   const std::vector<std::string>& attacks, const CommandOptions& opts,
                   std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_with_options(config, opts);
    std::vector<std::string> issues;
    const auto aggs = parse_list<AggregatorKind>(aggregators, aggregator_from_string, "aggregators", issues);
    const auto atks = parse_list<AttackKind>(attacks, attack_from_string, "attacks", issues);
    if (aggregators.empty() || attacks.empty()) issues.push_back("matrix: need at least one aggregator and one attack");
    if (!issues.empty()) throw ConfigValidationError(std::move(issues));
    cfg.validate();
    if (opts.print_config) {
      out << config_to_json(cfg).dump(2) << '\n';
      return int{kExitOk};
    }
    const FederatedData data = prepare_data(cfg);
    const MatrixResult m = run_matrix(cfg, data, aggs, atks, opts.jobs);

    // Single collector: every file is written from this thread.
    const std::filesystem::path root = cfg.output.dir;
    std::filesystem::create_directories(root);
    for (const auto& r : m.runs) {
      if (r.result) {
        persist_experiment(r.config, *r.result, root / cell_dir_name(r.config));
      } else {
        err << cell_dir_name(r.config) << ": " << r.error << '\n';
      }
    }
    write_text(root / "summary.txt", m.table.text);
    write_text(root / "summary.csv", m.table.csv);
    out << m.table.text;
    return int{kExitOk};
  });
}

int command_sweep(const std::filesystem::path& config, const std::string& param,
                  const std::vector<std::string>& values, const CommandOptions& opts,
                  std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ExperimentConfig cfg = load_with_options(config, opts);
    const SweepParam p = sweep_param_from_string(param);
    if (values.empty()) throw ConfigValidationError({"sweep: --values is empty"});
    cfg.validate();
    if (opts.print_config) {
      out << config_to_json(cfg).dump(2) << '\n';
      return int{kExitOk};
    }
    const auto runs = run_sweep(cfg, p, values, opts.jobs);
    const std::filesystem::path root = cfg.output.dir;
    std::filesystem::create_directories(root);
    for (const auto& r : runs) {
      if (r.run.result) {
        std::string name = to_string(p) + "_" + r.value;
        for (char& ch : name)
          if (ch == ':') ch = '-';
        persist_experiment(r.run.config, *r.run.result, root / name);
      } else {
        err << to_string(p) << '=' << r.value << ": " << r.run.error << '\n';
      }
    }
    const std::string csv = sweep_csv(runs);
    write_text(root / "sweep.csv", csv);
    out << csv;
    return int{kExitOk};
  });
}

}  // namespace wtpfl
