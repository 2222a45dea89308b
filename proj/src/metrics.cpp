#include "wtpfl/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "wtpfl/errors.hpp"

#ifndef WTPFL_VERSION
#define WTPFL_VERSION "0.0.0"
#endif

namespace wtpfl {

std::vector<ConfusionCounts> confusion_by_dimension(const FlagMatrix& flags,
                                                    const std::vector<bool>& adversarial) {
  if (static_cast<std::size_t>(flags.cols()) != adversarial.size()) {
    throw DimensionError("detection: flag matrix has " + std::to_string(flags.cols()) +
                         " columns for " + std::to_string(adversarial.size()) + " BSs");
  }
  std::vector<ConfusionCounts> out(static_cast<std::size_t>(flags.rows()));
  for (Eigen::Index d = 0; d < flags.rows(); ++d) {
    auto& c = out[static_cast<std::size_t>(d)];
    for (Eigen::Index i = 0; i < flags.cols(); ++i) {
      const bool positive = adversarial[static_cast<std::size_t>(i)];
      const bool flagged = flags(d, i);
      if (positive) {
        (flagged ? c.tp : c.fn) += 1;
      } else {
        (flagged ? c.fp : c.tn) += 1;
      }
    }
  }
  return out;
}

DetectionReport detection_report(std::vector<ConfusionCounts> per_dimension) {
  DetectionReport r;
  double fpr_sum = 0.0;
  double fnr_sum = 0.0;
  int fpr_n = 0;
  int fnr_n = 0;
  for (const auto& c : per_dimension) {
    if (c.fp + c.tn > 0) {
      fpr_sum += static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
      ++fpr_n;
    }
    if (c.fn + c.tp > 0) {
      fnr_sum += static_cast<double>(c.fn) / static_cast<double>(c.fn + c.tp);
      ++fnr_n;
    }
  }
  if (fpr_n > 0) r.fpr = fpr_sum / fpr_n;
  if (fnr_n > 0) r.fnr = fnr_sum / fnr_n;
  r.per_dimension = std::move(per_dimension);
  return r;
}

DetectionReport detection_metrics(const FlagMatrix& flags, const std::vector<bool>& adversarial) {
  return detection_report(confusion_by_dimension(flags, adversarial));
}

std::string format_exact(double x) {
  char buf[64];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string format_metric(double capped_value) {
  if (capped_value >= kMetricCap) return "100.0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", capped_value);
  return buf;
}

std::string rounds_csv(const std::vector<RoundRecord>& records) {
  std::ostringstream os;
  os << "round,mae_raw,mse_raw,mae_capped,mse_capped,broken,eta_final\n";
  for (const auto& r : records) {
    os << r.round << ',' << format_exact(r.mae_raw) << ',' << format_exact(r.mse_raw) << ','
       << format_exact(r.mae_capped) << ',' << format_exact(r.mse_capped) << ','
       << (r.broken ? 1 : 0) << ',' << (r.eta_final ? format_exact(*r.eta_final) : "") << '\n';
  }
  return os.str();
}

std::string detection_csv(const DetectionReport& report) {
  auto rate = [](long long num, long long den) -> std::string {
    return den > 0 ? format_exact(static_cast<double>(num) / static_cast<double>(den)) : "";
  };
  std::ostringstream os;
  os << "dimension,fp,fn,tp,tn,fpr,fnr\n";
  ConfusionCounts total;
  for (std::size_t d = 0; d < report.per_dimension.size(); ++d) {
    const auto& c = report.per_dimension[d];
    os << d << ',' << c.fp << ',' << c.fn << ',' << c.tp << ',' << c.tn << ',' << rate(c.fp, c.fp + c.tn)
       << ',' << rate(c.fn, c.fn + c.tp) << '\n';
    total += c;
  }
  // Summary rates are dimension averages, not ratios of the totals.
  os << "summary," << total.fp << ',' << total.fn << ',' << total.tp << ',' << total.tn << ','
     << (report.fpr ? format_exact(*report.fpr) : "") << ','
     << (report.fnr ? format_exact(*report.fnr) : "") << '\n';
  return os.str();
}

std::string config_hash(const nlohmann::json& resolved_config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : resolved_config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".wtpfl.lock") {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::FILE* f = std::fopen(path_.c_str(), "wx");
  if (f == nullptr) {
    throw IoError("cannot lock output directory " + dir.string() +
                  " (unwritable, or another writer holds " + path_.filename().string() + ")");
  }
  std::fclose(f);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::filesystem::path persist_run(const std::vector<RoundRecord>& records,
                                  const DetectionReport& detection,
                                  const nlohmann::json& resolved_config,
                                  const std::filesystem::path& out_dir,
                                  const PersistOptions& options) {
  DirectoryLock lock(out_dir);
  std::vector<std::string> files{"rounds.csv", "detection.csv", "config.json"};
  write_file(out_dir / "rounds.csv", rounds_csv(records));
  write_file(out_dir / "detection.csv", detection_csv(detection));
  write_file(out_dir / "config.json", resolved_config.dump(2) + "\n");
  for (const auto& [name, content] : options.extra_files) {
    write_file(out_dir / name, content);
    files.push_back(name);
  }
  nlohmann::json manifest{{"config_hash", config_hash(resolved_config)},
                          {"files", files},
                          {"created_at", utc_timestamp()},
                          {"tool_version", WTPFL_VERSION},
                          {"metric_units", "normalized (min-max fitted on each cell's train split)"}};
  const auto manifest_path = out_dir / "manifest.json";
  write_file(manifest_path, manifest.dump(2) + "\n");
  return manifest_path;
}

SummaryTable summary_table(const std::vector<MatrixCell>& cells) {
  static const std::vector<AttackKind> kColumnOrder{AttackKind::None,   AttackKind::Trim, AttackKind::History,
                                                    AttackKind::Random, AttackKind::Mpaf, AttackKind::Zheng,
                                                    AttackKind::Fti};
  std::set<AggregatorKind> rows_present;
  std::set<AttackKind> cols_present;
  std::map<std::pair<AggregatorKind, AttackKind>, const MatrixCell*> lookup;
  for (const auto& c : cells) {
    rows_present.insert(c.aggregator);
    cols_present.insert(c.attack);
    lookup[{c.aggregator, c.attack}] = &c;
  }
  std::vector<AttackKind> cols;
  for (auto a : kColumnOrder) {
    if (cols_present.count(a)) cols.push_back(a);
  }

  auto cell_text = [&](AggregatorKind agg, AttackKind atk, bool mae) -> std::string {
    const auto it = lookup.find({agg, atk});
    if (it == lookup.end()) return "";
    if (!it->second->mae_mse) return "ERR";
    return format_metric(mae ? it->second->mae_mse->first : it->second->mae_mse->second);
  };

  std::ostringstream txt;
  std::ostringstream csv;
  csv << "aggregator,metric";
  txt << std::left << std::setw(12) << "Rule" << std::setw(8) << "Metric";
  for (auto a : cols) {
    csv << ',' << attack_label(a);
    txt << std::right << std::setw(10) << attack_label(a);
  }
  csv << '\n';
  txt << '\n';
  for (auto agg : rows_present) {  // enum order is the fixed row order
    for (bool mae : {true, false}) {
      const char* metric = mae ? "MAE" : "MSE";
      csv << aggregator_label(agg) << ',' << metric;
      txt << std::left << std::setw(12) << (mae ? aggregator_label(agg) : "") << std::setw(8) << metric;
      for (auto a : cols) {
        const auto v = cell_text(agg, a, mae);
        csv << ',' << v;
        txt << std::right << std::setw(10) << v;
      }
      csv << '\n';
      txt << '\n';
    }
  }
  return {txt.str(), csv.str()};
}

}  // namespace wtpfl
