#include "wtpfl/traffic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <string_view>
#include <tuple>

#include "wtpfl/errors.hpp"
#include "wtpfl/rng.hpp"

namespace wtpfl {

void WindowConfig::validate() const {
  if (recent < 1) throw ParameterError("window: recent lag count must be >= 1");
  if (seasonal < 0) throw ParameterError("window: seasonal lag count must be >= 0");
  if (seasonal >= 1 && period <= recent) {
    throw ParameterError("window: seasonal period must exceed the recent window");
  }
}

namespace {

struct Row {
  long long cell;
  long long timestamp_ms;
  double value;
};

std::vector<std::string_view> split_fields(std::string_view line) {
  const char delim = line.find('\t') != std::string_view::npos ? '\t' : ',';
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool looks_like_header(const std::vector<std::string_view>& f) {
  long long tmp;
  return f.size() >= 2 && !parse_number(f[0], tmp) && !parse_number(f[1], tmp);
}

// Every well-formed row of the file; cells filtered by the caller.
std::vector<Row> read_rows(const std::filesystem::path& path,
                           const std::vector<int>& value_columns) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open traffic file " + path.string(), 0);
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (line_no == 1 && looks_like_header(fields)) continue;
    auto fail = [&](const std::string& why) {
      throw IngestError(path.string() + ":" + std::to_string(line_no) + ": " + why, line_no);
    };
    if (fields.size() < 3) fail("expected cell_id, timestamp_ms and at least one value");
    Row r{};
    if (!parse_number(fields[0], r.cell)) fail("non-numeric cell id");
    if (!parse_number(fields[1], r.timestamp_ms)) fail("non-numeric timestamp");
    const std::size_t n_values = fields.size() - 2;
    auto add_column = [&](std::size_t c) {
      if (c >= n_values) fail("value column " + std::to_string(c) + " missing");
      const auto f = trim(fields[2 + c]);
      if (f.empty()) return;  // no recorded activity
      double v;
      if (!parse_number(f, v) || !std::isfinite(v)) fail("non-numeric value field");
      r.value += v;
    };
    if (value_columns.empty()) {
      for (std::size_t c = 0; c < n_values; ++c) add_column(c);
    } else {
      for (int c : value_columns) {
        if (c < 0) fail("negative value column index");
        add_column(static_cast<std::size_t>(c));
      }
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

std::vector<int> list_grid_cells(const std::filesystem::path& path) {
  std::set<int> cells;
  for (const auto& r : read_rows(path, {})) cells.insert(static_cast<int>(r.cell));
  return {cells.begin(), cells.end()};
}

std::vector<TrafficSeries> load_grid_csv(const std::filesystem::path& path,
                                         const std::vector<int>& selected_cells,
                                         int interval_minutes,
                                         const std::vector<int>& value_columns) {
  if (selected_cells.empty()) throw IngestError("empty cell selection", 0);
  if (interval_minutes <= 0) throw ParameterError("interval_minutes must be positive");
  auto rows = read_rows(path, value_columns);
  if (rows.empty()) throw IngestError(path.string() + ": no data rows", 0);
  // Fixed summation order, so the file's row order cannot change any bit.
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.cell, a.timestamp_ms, a.value) < std::tie(b.cell, b.timestamp_ms, b.value);
  });

  const long long interval_ms = static_cast<long long>(interval_minutes) * 60'000LL;
  auto bucket_of = [&](long long ts) {
    // floor division, valid for negative timestamps too
    return ts >= 0 ? ts / interval_ms : -((-ts + interval_ms - 1) / interval_ms);
  };
  long long first = bucket_of(rows.front().timestamp_ms);
  long long last = first;
  for (const auto& r : rows) {
    first = std::min(first, bucket_of(r.timestamp_ms));
    last = std::max(last, bucket_of(r.timestamp_ms));
  }
  const auto length = static_cast<std::size_t>(last - first + 1);
  if (length < 2) throw IngestError(path.string() + ": fewer than two time buckets", 0);

  std::map<int, std::vector<double>> series;
  for (int c : std::set<int>(selected_cells.begin(), selected_cells.end())) {
    series.emplace(c, std::vector<double>(length, 0.0));
  }
  std::set<int> seen;
  for (const auto& r : rows) {
    auto it = series.find(static_cast<int>(r.cell));
    if (it == series.end()) continue;
    seen.insert(it->first);
    it->second[static_cast<std::size_t>(bucket_of(r.timestamp_ms) - first)] += r.value;
  }
  std::vector<TrafficSeries> out;
  out.reserve(series.size());
  for (auto& [cell, values] : series) {
    if (!seen.count(cell)) {
      throw IngestError(path.string() + ": selected cell " + std::to_string(cell) +
                            " has no rows",
                        0);
    }
    for (double& v : values) v = std::max(v, 0.0);
    out.push_back({cell, std::move(values), interval_minutes});
  }
  return out;
}

TrafficSeries synthesize_series(int bs_id, int length, int period, double noise_std,
                                const SyntheticShape& shape, std::uint64_t noise_seed) {
  if (length < 2 || period < 1) throw ParameterError("synthesize_series: invalid sizes");
  if (!(noise_std >= 0.0)) throw ParameterError("synthesize_series: noise_std must be >= 0");
  Rng rng(noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  TrafficSeries s{bs_id, std::vector<double>(static_cast<std::size_t>(length)), 60};
  for (int t = 0; t < length; ++t) {
    const double angle = 2.0 * std::numbers::pi * t / period + shape.phase;
    const double v = shape.base + shape.amplitude * std::sin(angle) + noise_std * noise(rng);
    s.values[static_cast<std::size_t>(t)] = std::max(v, 0.0);
  }
  return s;
}

std::vector<TrafficSeries> generate_synthetic(int count, int length, int period,
                                              double noise_std, std::uint64_t seed) {
  if (count < 1) throw ParameterError("generate_synthetic: count must be >= 1");
  if (period < 1 || length < 2 * period) {
    throw ParameterError("generate_synthetic: length must be at least two periods");
  }
  if (!(noise_std >= 0.0)) throw ParameterError("generate_synthetic: noise_std must be >= 0");
  std::vector<TrafficSeries> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, {0x5348415045ULL, static_cast<std::uint64_t>(i)}));
    std::uniform_real_distribution<double> base(50.0, 150.0);
    std::uniform_real_distribution<double> rel_amp(0.3, 0.8);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    SyntheticShape shape;
    shape.base = base(rng);
    shape.amplitude = rel_amp(rng) * shape.base;
    shape.phase = phase(rng);
    out.push_back(synthesize_series(
        i, length, period, noise_std, shape,
        derive_seed(seed, {0x4e4f495345ULL, static_cast<std::uint64_t>(i)})));
  }
  return out;
}

DatasetSplit build_windows(const TrafficSeries& series, const WindowConfig& cfg,
                           double train_fraction) {
  cfg.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("build_windows: train fraction must lie in (0, 1)");
  }
  const int M = static_cast<int>(series.values.size());
  const int deepest = cfg.seasonal >= 1 ? cfg.seasonal * cfg.period : cfg.recent;
  if (M <= deepest) {
    throw InsufficientHistoryError("series " + std::to_string(series.bs_id) + " has " +
                                   std::to_string(M) + " values; needs more than " +
                                   std::to_string(deepest));
  }
  // Targets m = deepest+1 .. M (1-based); u(k) is the k-th value.
  auto u = [&](int k) { return series.values[static_cast<std::size_t>(k - 1)]; };
  const int z = M - deepest;
  const int n_train = static_cast<int>(std::floor(train_fraction * z));
  if (n_train < 1 || n_train >= z) {
    throw InsufficientHistoryError("series " + std::to_string(series.bs_id) +
                                   ": split leaves an empty train or test set");
  }
  Eigen::MatrixXd raw_in(z, cfg.input_dim());
  Eigen::VectorXd raw_out(z);
  std::vector<int> index(static_cast<std::size_t>(z));
  for (int j = 0; j < z; ++j) {
    const int m = deepest + 1 + j;
    for (int l = 1; l <= cfg.recent; ++l) raw_in(j, l - 1) = u(m - l);
    for (int l = 1; l <= cfg.seasonal; ++l) raw_in(j, cfg.recent + l - 1) = u(m - cfg.period * l);
    raw_out(j) = u(m);
    index[static_cast<std::size_t>(j)] = m;
  }

  const double lo = std::min(raw_in.topRows(n_train).minCoeff(), raw_out.head(n_train).minCoeff());
  const double hi = std::max(raw_in.topRows(n_train).maxCoeff(), raw_out.head(n_train).maxCoeff());
  Normalization norm{hi > lo ? hi - lo : 1.0, lo};

  auto make = [&](int begin, int count) {
    WindowedDataset ds;
    ds.bs_id = series.bs_id;
    ds.normalization = norm;
    ds.inputs = (raw_in.middleRows(begin, count).array() - norm.offset) / norm.scale;
    ds.targets = (raw_out.segment(begin, count).array() - norm.offset) / norm.scale;
    ds.target_index.assign(index.begin() + begin, index.begin() + begin + count);
    return ds;
  };
  return {make(0, n_train), make(n_train, z - n_train)};
}

}  // namespace wtpfl
