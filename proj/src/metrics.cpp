#include "shardsim/metrics.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace shardsim {

double cross_shard_ratio(std::int64_t intra, std::int64_t cross) {
  if (intra < 0 || cross < 0) {
    throw std::invalid_argument("cross_shard_ratio: negative count");
  }
  const std::int64_t total = intra + cross;
  if (total == 0) return 0.0;
  return static_cast<double>(cross) / static_cast<double>(total);
}

WorkloadDeviation workload_deviation(const Vec& omega) {
  if (omega.size() < 1) {
    throw std::invalid_argument("workload_deviation: empty vector");
  }
  const double mean = omega.mean();
  if (!(mean > 0.0)) return {0.0, false};
  const double ss = (omega - mean).square().sum();
  return {std::sqrt(ss / (static_cast<double>(omega.size()) * mean)), true};
}

double normalized_throughput(std::int64_t committed, double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("normalized_throughput: lambda must be > 0");
  }
  return static_cast<double>(committed) / lambda;
}

Aggregates aggregate(std::span<const EpochReport> reports) {
  Aggregates agg;
  agg.epochs = reports.size();
  if (reports.empty()) return agg;
  double ratio = 0.0;
  double deviation = 0.0;
  double throughput = 0.0;
  for (const EpochReport& r : reports) {
    ratio += r.cross_ratio;
    deviation += r.workload_deviation;
    throughput += r.normalized_throughput;
  }
  const auto n = static_cast<double>(reports.size());
  agg.mean_cross_ratio = ratio / n;
  agg.mean_workload_deviation = deviation / n;
  agg.mean_normalized_throughput = throughput / n;
  return agg;
}

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  if (result.ec != std::errc{}) {
    throw std::runtime_error("format_double: conversion failed");
  }
  return std::string(buf, result.ptr);
}

namespace {

constexpr std::string_view kMetricsHeader =
    "epoch,committed_tx,dropped_tx,intra,cross,cross_ratio,"
    "workload_deviation,normalized_throughput,proposed_mr,committed_mr";

nlohmann::json report_to_json(const EpochReport& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["committed_tx"] = r.committed_tx;
  j["dropped_tx"] = r.dropped_tx;
  j["intra"] = r.intra;
  j["cross"] = r.cross;
  j["committed_intra"] = r.committed_intra;
  j["committed_cross"] = r.committed_cross;
  j["proposed_mr"] = r.proposed_mr;
  j["committed_mr"] = r.committed_mr;
  j["cross_ratio"] = r.cross_ratio;
  j["workload_deviation"] = r.workload_deviation;
  j["workload_deviation_defined"] = r.workload_deviation_defined;
  j["normalized_throughput"] = r.normalized_throughput;
  auto& omega = j["omega"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.omega.size(); ++i) omega.push_back(r.omega[i]);
  return j;
}

EpochReport report_from_json(const nlohmann::json& j) {
  EpochReport r;
  r.epoch = j.at("epoch").get<std::uint64_t>();
  r.committed_tx = j.at("committed_tx").get<std::int64_t>();
  r.dropped_tx = j.at("dropped_tx").get<std::int64_t>();
  r.intra = j.at("intra").get<std::int64_t>();
  r.cross = j.at("cross").get<std::int64_t>();
  r.committed_intra = j.at("committed_intra").get<std::int64_t>();
  r.committed_cross = j.at("committed_cross").get<std::int64_t>();
  r.proposed_mr = j.at("proposed_mr").get<std::int64_t>();
  r.committed_mr = j.at("committed_mr").get<std::int64_t>();
  r.cross_ratio = j.at("cross_ratio").get<double>();
  r.workload_deviation = j.at("workload_deviation").get<double>();
  r.workload_deviation_defined = j.at("workload_deviation_defined").get<bool>();
  r.normalized_throughput = j.at("normalized_throughput").get<double>();
  const auto& omega = j.at("omega");
  r.omega = Vec::Zero(static_cast<Eigen::Index>(omega.size()));
  for (std::size_t i = 0; i < omega.size(); ++i) {
    r.omega[static_cast<Eigen::Index>(i)] = omega[i].get<double>();
  }
  return r;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["run_id"] = m.run_id;
  j["code_version"] = m.code_version;
  j["generated_at"] = m.generated_at;
  j["params"] = {{"k", m.params.k},     {"eta", m.params.eta},
                 {"tau", m.params.tau}, {"lambda", m.params.lambda},
                 {"beta", m.params.beta}, {"seed", m.params.seed}};
  j["allocator"] = m.allocator;
  j["init_allocator"] = m.init_allocator;
  j["window"] = m.window;
  j["noisy_mempool"] = m.noisy_mempool;
  j["raw_fusion"] = m.raw_fusion;
  j["cap_factor"] = m.cap_factor;
  j["threads"] = m.threads;
  j["trace"] = {{"source", m.trace_source},
                {"digest_sha256", m.trace_digest},
                {"transactions", m.trace_transactions},
                {"accounts", m.trace_accounts},
                {"first_block", m.first_block},
                {"last_block", m.last_block}};
  j["split"] = {{"train_fraction", m.train_fraction},
                {"train_epochs", m.train_epochs},
                {"eval_epochs_available", m.eval_epochs_available},
                {"eval_epochs_run", m.eval_epochs_run},
                {"partial_tail_blocks", m.partial_tail_blocks},
                {"partial_tail_txs", m.partial_tail_txs}};
  j["notes"] = m.notes;
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  m.run_id = j.value("run_id", "");
  m.code_version = j.value("code_version", "");
  m.generated_at = j.value("generated_at", "");
  if (j.contains("params")) {
    const auto& p = j.at("params");
    m.params.k = p.value("k", 16);
    m.params.eta = p.value("eta", 2.0);
    m.params.tau = p.value("tau", std::uint64_t{300});
    m.params.lambda = p.value("lambda", 0.0);
    m.params.beta = p.value("beta", 0.0);
    m.params.seed = p.value("seed", std::uint64_t{0});
  }
  m.allocator = j.value("allocator", "");
  m.init_allocator = j.value("init_allocator", "");
  m.window = j.value("window", std::uint64_t{0});
  m.noisy_mempool = j.value("noisy_mempool", 0.0);
  m.raw_fusion = j.value("raw_fusion", false);
  m.cap_factor = j.value("cap_factor", 1.5);
  m.threads = j.value("threads", 0u);
  if (j.contains("trace")) {
    const auto& t = j.at("trace");
    m.trace_source = t.value("source", "");
    m.trace_digest = t.value("digest_sha256", "");
    m.trace_transactions = t.value("transactions", std::uint64_t{0});
    m.trace_accounts = t.value("accounts", std::uint64_t{0});
    m.first_block = t.value("first_block", std::uint64_t{0});
    m.last_block = t.value("last_block", std::uint64_t{0});
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    m.train_fraction = s.value("train_fraction", 0.9);
    m.train_epochs = s.value("train_epochs", std::size_t{0});
    m.eval_epochs_available = s.value("eval_epochs_available", std::size_t{0});
    m.eval_epochs_run = s.value("eval_epochs_run", std::size_t{0});
    m.partial_tail_blocks = s.value("partial_tail_blocks", std::uint64_t{0});
    m.partial_tail_txs = s.value("partial_tail_txs", std::size_t{0});
  }
  if (j.contains("notes")) {
    m.notes = j.at("notes").get<std::vector<std::string>>();
  }
  return m;
}

}  // namespace

void write_metrics_csv(std::span<const EpochReport> reports,
                       std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const EpochReport& r : reports) {
    out << r.epoch << ',' << r.committed_tx << ',' << r.dropped_tx << ','
        << r.intra << ',' << r.cross << ',' << format_double(r.cross_ratio)
        << ',' << format_double(r.workload_deviation) << ','
        << format_double(r.normalized_throughput) << ',' << r.proposed_mr
        << ',' << r.committed_mr << '\n';
  }
}

void write_metrics_json(std::span<const EpochReport> reports,
                        const RunManifest& manifest, std::ostream& out) {
  nlohmann::json j;
  j["run_manifest"] = manifest_to_json(manifest);
  auto& rows = j["reports"] = nlohmann::json::array();
  for (const EpochReport& r : reports) rows.push_back(report_to_json(r));
  out << j.dump(2) << '\n';
}

std::string serialize_reports(const MetricSeries& series, ReportFormat format,
                              const RunManifest& manifest) {
  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    write_metrics_csv(series.reports, out);
  } else {
    write_metrics_json(series.reports, manifest, out);
  }
  return out.str();
}

std::string manifest_json(const RunManifest& manifest) {
  return manifest_to_json(manifest).dump(2) + "\n";
}

namespace {

[[noreturn]] void csv_fail(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("metrics parse error at line " +
                           std::to_string(line_no) + ": " + what);
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, const char* name);

template <>
std::int64_t parse_number<std::int64_t>(std::string_view field,
                                        std::size_t line_no,
                                        const char* name) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.begin(), field.end(), v);
  if (ec != std::errc{} || ptr != field.end() || field.empty()) {
    csv_fail(line_no, std::string("bad integer field ") + name);
  }
  return v;
}

template <>
std::uint64_t parse_number<std::uint64_t>(std::string_view field,
                                          std::size_t line_no,
                                          const char* name) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(field.begin(), field.end(), v);
  if (ec != std::errc{} || ptr != field.end() || field.empty()) {
    csv_fail(line_no, std::string("bad integer field ") + name);
  }
  return v;
}

template <>
double parse_number<double>(std::string_view field, std::size_t line_no,
                            const char* name) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(field.begin(), field.end(), v);
  if (ec != std::errc{} || ptr != field.end() || field.empty()) {
    csv_fail(line_no, std::string("bad numeric field ") + name);
  }
  return v;
}

}  // namespace

MetricSeries parse_metrics_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) csv_fail(1, "empty input, header expected");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) csv_fail(line_no, "unexpected header");

  MetricSeries series;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string_view fields[10];
    std::string_view rest = line;
    for (int f = 0; f < 10; ++f) {
      const auto comma = rest.find(',');
      if (f < 9) {
        if (comma == std::string_view::npos) {
          csv_fail(line_no, "expected 10 fields");
        }
        fields[f] = rest.substr(0, comma);
        rest = rest.substr(comma + 1);
      } else {
        if (comma != std::string_view::npos) {
          csv_fail(line_no, "expected 10 fields");
        }
        fields[f] = rest;
      }
    }

    EpochReport r;
    r.epoch = parse_number<std::uint64_t>(fields[0], line_no, "epoch");
    r.committed_tx =
        parse_number<std::int64_t>(fields[1], line_no, "committed_tx");
    r.dropped_tx =
        parse_number<std::int64_t>(fields[2], line_no, "dropped_tx");
    r.intra = parse_number<std::int64_t>(fields[3], line_no, "intra");
    r.cross = parse_number<std::int64_t>(fields[4], line_no, "cross");
    r.cross_ratio = parse_number<double>(fields[5], line_no, "cross_ratio");
    r.workload_deviation =
        parse_number<double>(fields[6], line_no, "workload_deviation");
    r.normalized_throughput =
        parse_number<double>(fields[7], line_no, "normalized_throughput");
    r.proposed_mr =
        parse_number<std::int64_t>(fields[8], line_no, "proposed_mr");
    r.committed_mr =
        parse_number<std::int64_t>(fields[9], line_no, "committed_mr");
    series.reports.push_back(std::move(r));
  }
  return series;
}

JsonRun parse_metrics_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("metrics parse error: ") + e.what());
  }
  JsonRun run;
  try {
    if (j.contains("run_manifest")) {
      run.manifest = manifest_from_json(j.at("run_manifest"));
    }
    for (const auto& row : j.at("reports")) {
      run.series.reports.push_back(report_from_json(row));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("metrics parse error: ") + e.what());
  }
  return run;
}

bool operator==(const EpochReport& a, const EpochReport& b) {
  return a.epoch == b.epoch && a.committed_tx == b.committed_tx &&
         a.dropped_tx == b.dropped_tx && a.intra == b.intra &&
         a.cross == b.cross && a.committed_intra == b.committed_intra &&
         a.committed_cross == b.committed_cross &&
         a.proposed_mr == b.proposed_mr && a.committed_mr == b.committed_mr &&
         a.cross_ratio == b.cross_ratio &&
         a.workload_deviation == b.workload_deviation &&
         a.workload_deviation_defined == b.workload_deviation_defined &&
         a.normalized_throughput == b.normalized_throughput &&
         a.omega.size() == b.omega.size() && (a.omega == b.omega).all();
}

}  // namespace shardsim
