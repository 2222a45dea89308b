#include "wtpfl/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "wtpfl/rng.hpp"

namespace wtpfl {

namespace {

// Stream tags for derive_seed; keep stable, they are part of the output contract.
constexpr std::uint64_t kTrainStream = 0;
constexpr std::uint64_t kRandomAttackStream = 1;
constexpr std::uint64_t kTrimStream = 2;
constexpr std::uint64_t kServerStream = 3;

}  // namespace

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  const int threads = std::clamp(workers, 1, count);
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = count;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

PresentedUpdates present_updates(const std::vector<LocalUpdate>& updates,
                                 std::uint64_t shuffle_seed, std::vector<Truth>* truth_out) {
  if (updates.empty()) throw EmptyInputError("present_updates: no updates");
  const Eigen::Index dim = updates.front().params().size();
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  PresentedUpdates out;
  out.params.resize(dim, static_cast<Eigen::Index>(updates.size()));
  out.bs_ids.reserve(updates.size());
  if (truth_out) truth_out->clear();
  for (std::size_t c = 0; c < order.size(); ++c) {
    const auto& u = updates[order[c]];
    if (u.params().size() != dim) throw DimensionError("present_updates: inconsistent dimension");
    out.params.col(static_cast<Eigen::Index>(c)) = u.params();
    out.bs_ids.push_back(u.bs_id());
    if (truth_out) truth_out->push_back(u.truth());
  }
  return out;
}

FleetLayout FleetLayout::from_config(const ExperimentConfig& cfg) {
  FleetLayout f;
  f.threat = threat_model_of(cfg.attack.kind);
  f.adversarial = f.threat == ThreatModel::None ? 0 : cfg.fleet.adversarial_count();
  if (f.adversarial == 0) f.threat = ThreatModel::None;
  f.benign = cfg.fleet.size - f.adversarial;
  return f;
}

std::vector<const WindowedDataset*> FederatedData::test_sets() const {
  std::vector<const WindowedDataset*> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(&c.test);
  return out;
}

FederatedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrafficSeries> series;
  if (cfg.data.kind == "csv") {
    std::vector<int> cells = cfg.data.cells;
    if (cells.empty()) {
      cells = list_grid_cells(cfg.data.csv_path);
      if (static_cast<int>(cells.size()) < cfg.fleet.size)
        throw ConfigError("data.csv_path: file holds " + std::to_string(cells.size()) +
                          " cells, fleet.size needs " + std::to_string(cfg.fleet.size));
      Rng rng(derive_seed(cfg.seeds.data, {0}));
      std::shuffle(cells.begin(), cells.end(), rng);
      cells.resize(static_cast<std::size_t>(cfg.fleet.size));
      std::sort(cells.begin(), cells.end());
    }
    series = load_grid_csv(cfg.data.csv_path, cells, cfg.data.interval_minutes, cfg.data.value_columns);
  } else {
    series = generate_synthetic(cfg.fleet.size, cfg.data.length, cfg.data.period,
                                cfg.data.noise_std, cfg.seeds.data);
  }

  FederatedData data;
  data.cells.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    auto split = build_windows(series[i], cfg.window, cfg.train_split);
    split.train.bs_id = split.test.bs_id = static_cast<int>(i);
    data.cells.push_back(std::move(split));
  }
  // Root set for FLTrust: the head of cell 0's training data.
  const auto& head = data.cells.front().train;
  const Eigen::Index take = std::min(kServerRootSamples, head.size());
  data.server_root.bs_id = -1;
  data.server_root.inputs = head.inputs.topRows(take);
  data.server_root.targets = head.targets.head(take);
  data.server_root.normalization = head.normalization;
  data.server_root.target_index.assign(head.target_index.begin(), head.target_index.begin() + take);
  return data;
}

ModelArch resolved_arch(const ExperimentConfig& cfg) {
  ModelArch arch = cfg.model;
  arch.input_dim = cfg.window.input_dim();
  return arch;
}

Simulation::Simulation(const ExperimentConfig& cfg, const FederatedData& data)
    : cfg_(cfg), data_(data), arch_(resolved_arch(cfg)), fleet_(FleetLayout::from_config(cfg)) {
  cfg.validate();
  if (static_cast<int>(data.cells.size()) != fleet_.size())
    throw DimensionError("simulation: " + std::to_string(data.cells.size()) +
                         " cells prepared for a fleet of " + std::to_string(fleet_.size()));
  aggregator_ = make_aggregator(cfg.aggregator, fleet_.adversarial);
  if (cfg.attack.kind == AttackKind::Fti) fti_base_ = cfg.attack.base_model.materialize(arch_.parameter_count());
  history_.push_back(init_model(arch_, cfg.seeds.init));
}

TrainConfig Simulation::train_config(int bs_id) const {
  TrainConfig t = cfg_.train;
  t.seed = derive_seed(cfg_.seeds.round,
                       {static_cast<std::uint64_t>(round_), static_cast<std::uint64_t>(bs_id), kTrainStream});
  return t;
}

std::vector<ParamVector> Simulation::train_cells(int first, int count) const {
  std::vector<ParamVector> out(static_cast<std::size_t>(count));
  const ParamVector& current = global();
  parallel_for(count, cfg_.workers, [&](int i) {
    const int bs = first + i;
    out[static_cast<std::size_t>(i)] =
        local_train(arch_, current, data_.cells[static_cast<std::size_t>(bs)].train, train_config(bs));
  });
  return out;
}

std::vector<LocalUpdate> Simulation::collect_updates(std::optional<FtiResult>& fti) {
  const ParamVector& current = global();
  std::vector<LocalUpdate> updates;
  updates.reserve(static_cast<std::size_t>(fleet_.size()));

  auto benign = train_cells(0, fleet_.benign);
  for (int i = 0; i < fleet_.benign; ++i)
    updates.emplace_back(i, round_, std::move(benign[static_cast<std::size_t>(i)]), Truth::Benign);
  if (fleet_.adversarial == 0) return updates;

  const int first_adv = fleet_.benign;
  const int m = fleet_.adversarial;
  const auto& base_cfg = cfg_.attack.baseline;
  const GlobalView view{round_, initial(), current, history_};
  auto add_fake = [&](int j, ParamVector p) {
    updates.emplace_back(first_adv + j, round_, std::move(p), Truth::Fake);
  };
  auto add_compromised = [&](int j, ParamVector p) {
    updates.emplace_back(first_adv + j, round_, std::move(p), Truth::Compromised);
  };

  switch (cfg_.attack.kind) {
    case AttackKind::None:
      break;
    case AttackKind::Fti: {
      fti = fti_craft(current, FtiConfig{fti_base_, cfg_.attack.eta0, cfg_.attack.refinements});
      for (int j = 0; j < m; ++j) add_fake(j, fti->fake);
      break;
    }
    case AttackKind::Mpaf: {
      const ParamVector fake = mpaf_attack(initial(), current, base_cfg);
      for (int j = 0; j < m; ++j) add_fake(j, fake);
      break;
    }
    case AttackKind::History: {
      const ParamVector p = history_attack(view, base_cfg);
      for (int j = 0; j < m; ++j) add_compromised(j, p);
      break;
    }
    case AttackKind::Random:
      for (int j = 0; j < m; ++j) {
        const auto seed = derive_seed(cfg_.seeds.round, {static_cast<std::uint64_t>(round_),
                                                         static_cast<std::uint64_t>(first_adv + j),
                                                         kRandomAttackStream});
        add_compromised(j, random_attack(current.size(), base_cfg, seed));
      }
      break;
    case AttackKind::Trim: {
      const auto own = train_cells(first_adv, m);
      const UpdateMatrix known = stack_columns(own);
      const auto seed =
          derive_seed(cfg_.seeds.round, {static_cast<std::uint64_t>(round_), kTrimStream});
      const UpdateMatrix crafted = trim_attack(known, current, base_cfg, m, seed);
      for (int j = 0; j < m; ++j) add_compromised(j, crafted.col(j));
      break;
    }
    case AttackKind::Zheng: {
      CompromisedView cv{arch_, {}, {}, {}};
      for (int j = 0; j < m; ++j) {
        cv.datasets.push_back(&data_.cells[static_cast<std::size_t>(first_adv + j)].train);
        cv.train_cfgs.push_back(train_config(first_adv + j));
      }
      const ParamVector* previous = history_.size() >= 2 ? &history_[history_.size() - 2] : nullptr;
      const UpdateMatrix crafted = zheng_attack(cv, current, previous, base_cfg);
      for (int j = 0; j < m; ++j) add_compromised(j, crafted.col(j));
      break;
    }
  }
  return updates;
}

RoundOutput Simulation::step() {
  RoundOutput out;
  try {
    const ParamVector& current = global();
    auto updates = collect_updates(out.fti);
    if (static_cast<int>(updates.size()) != fleet_.size())
      throw DimensionError("presented update count differs from fleet size");

    const auto shuffle_seed = derive_seed(cfg_.seeds.shuffle, {static_cast<std::uint64_t>(round_)});
    const PresentedUpdates presented = present_updates(updates, shuffle_seed, &out.truth);
    out.bs_order = presented.bs_ids;

    ParamVector server_update;
    AggregatorContext ctx;
    ctx.round = round_;
    ctx.current = &current;
    ctx.previous = history_.size() >= 2 ? &history_[history_.size() - 2] : nullptr;
    if (aggregator_->needs_server_update()) {
      TrainConfig t = cfg_.train;
      t.seed = derive_seed(cfg_.seeds.round, {static_cast<std::uint64_t>(round_), kServerStream});
      server_update = local_train(arch_, current, data_.server_root, t);
      ctx.server_update = &server_update;
    }
    out.outcome = aggregator_->aggregate(presented, ctx);

    const ErrorMetrics err = evaluate_pooled(arch_, out.outcome.global, data_.test_sets());
    auto& rec = out.record;
    rec.round = round_;
    rec.mae_raw = err.mae;
    rec.mse_raw = err.mse;
    rec.mae_capped = std::isnan(err.mae) ? cfg_.cap : cap_metric(err.mae, cfg_.cap);
    rec.mse_capped = std::isnan(err.mse) ? cfg_.cap : cap_metric(err.mse, cfg_.cap);
    const bool over = !(err.mae < cfg_.cap);
    over_cap_streak_ = over ? over_cap_streak_ + 1 : 0;
    rec.broken = over_cap_streak_ >= cfg_.broken_rounds;
    rec.flagged_dims_per_bs.assign(static_cast<std::size_t>(fleet_.size()), 0);
    for (Eigen::Index c = 0; c < out.outcome.flags.cols(); ++c)
      rec.flagged_dims_per_bs[static_cast<std::size_t>(presented.bs_ids[static_cast<std::size_t>(c)])] =
          static_cast<int>(out.outcome.flags.col(c).count());
    if (out.fti) rec.eta_final = out.fti->eta_final;
  } catch (const RoundError&) {
    throw;
  } catch (const Error& e) {
    throw RoundError(e.what(), round_);
  }
  history_.push_back(out.outcome.global);
  ++round_;
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const FederatedData& data) {
  cfg.validate();
  Simulation sim(cfg, data);
  ExperimentResult result;
  result.initial = sim.global();
  std::vector<ConfusionCounts> detection(static_cast<std::size_t>(sim.arch().parameter_count()));
  std::ostringstream flags;
  if (cfg.output.export_flags) flags << "round,dimension,bs_id,flagged\n";

  for (int t = 0; t < cfg.rounds; ++t) {
    RoundOutput out = sim.step();
    std::vector<bool> adversarial;
    adversarial.reserve(out.truth.size());
    for (Truth tr : out.truth) adversarial.push_back(tr != Truth::Benign);
    const auto per_dim = confusion_by_dimension(out.outcome.flags, adversarial);
    for (std::size_t d = 0; d < per_dim.size(); ++d) detection[d] += per_dim[d];

    if (out.fti) {
      for (std::size_t i = 0; i < out.fti->trace.size(); ++i)
        result.fti_trace.push_back({t, static_cast<int>(i), out.fti->trace[i].eta, out.fti->trace[i].dist});
    }
    if (cfg.output.export_flags) {
      const auto& f = out.outcome.flags;
      for (Eigen::Index d = 0; d < f.rows(); ++d)
        for (Eigen::Index c = 0; c < f.cols(); ++c)
          flags << t << ',' << d << ',' << out.bs_order[static_cast<std::size_t>(c)] << ','
                << (f(d, c) ? 1 : 0) << '\n';
    }
    result.records.push_back(std::move(out.record));
  }
  result.detection = detection_report(std::move(detection));
  result.final_global = sim.global();
  if (cfg.output.export_flags) result.flags_csv = flags.str();
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const FederatedData data = prepare_data(cfg);
  return run_experiment(cfg, data);
}

std::string fti_trace_csv(const std::vector<FtiTraceRow>& rows) {
  std::ostringstream os;
  os << "round,iteration,eta,dist\n";
  for (const auto& r : rows)
    os << r.round << ',' << r.iteration << ',' << format_exact(r.eta) << ',' << format_exact(r.dist) << '\n';
  return os.str();
}

}  // namespace wtpfl
