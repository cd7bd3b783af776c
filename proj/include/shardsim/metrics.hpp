// Evaluation metrics and report serialization (CSV / JSON).
#pragma once

#include "shardsim/engine.hpp"
#include "shardsim/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace shardsim {

// cross / (intra + cross); 0 when the epoch had no transactions.
double cross_shard_ratio(std::int64_t intra, std::int64_t cross);

// Balance metric (sum_i (omega_i - mean)^2 / (k * mean))^0.5 — note the
// normalization by k*mean, as printed in the source formula, not a textbook
// standard deviation. All-zero omega has no mean load to normalize by:
// reported as value 0 with defined=false.
struct WorkloadDeviation {
  double value = 0.0;
  bool defined = false;
};
WorkloadDeviation workload_deviation(const Vec& omega);

// Committed transactions per epoch over single-shard capacity (the sharding
// speedup factor).
double normalized_throughput(std::int64_t committed, double lambda);

// Run-level means over the report rows, recomputable from the rows alone
// (undefined deviations contribute their reported 0, matching what a CSV
// consumer would recompute).
struct Aggregates {
  std::size_t epochs = 0;
  double mean_cross_ratio = 0.0;
  double mean_workload_deviation = 0.0;
  double mean_normalized_throughput = 0.0;
};
Aggregates aggregate(std::span<const EpochReport> reports);

// Everything needed to reproduce a run: parameters, seed, allocator choices,
// and a content digest of the trace. generated_at is the only field not
// determined by the configuration.
struct RunManifest {
  std::string run_id;
  std::string code_version;
  std::string generated_at;  // ISO-8601 UTC
  SimParams params;          // lambda holds the resolved value
  std::string allocator;
  std::string init_allocator;
  std::uint64_t window = 0;
  double noisy_mempool = 0.0;
  bool raw_fusion = false;
  double cap_factor = 1.5;
  unsigned threads = 0;
  std::string trace_source;
  std::string trace_digest;
  std::uint64_t trace_transactions = 0;
  std::uint64_t trace_accounts = 0;
  std::uint64_t first_block = 0;
  std::uint64_t last_block = 0;
  double train_fraction = 0.9;
  std::size_t train_epochs = 0;
  std::size_t eval_epochs_available = 0;
  std::size_t eval_epochs_run = 0;
  std::uint64_t partial_tail_blocks = 0;
  std::size_t partial_tail_txs = 0;
  std::vector<std::string> notes;
};

struct MetricSeries {
  std::vector<EpochReport> reports;
  Aggregates aggregates() const { return aggregate(reports); }
};

enum class ReportFormat { kCsv, kJson };

// CSV: pinned header
// epoch,committed_tx,dropped_tx,intra,cross,cross_ratio,workload_deviation,normalized_throughput,proposed_mr,committed_mr
// JSON: {"run_manifest": {...}, "reports": [...]} carrying the CSV fields
// plus omega, the committed intra/cross split, and the deviation flag.
void write_metrics_csv(std::span<const EpochReport> reports,
                       std::ostream& out);
void write_metrics_json(std::span<const EpochReport> reports,
                        const RunManifest& manifest, std::ostream& out);
std::string serialize_reports(const MetricSeries& series, ReportFormat format,
                              const RunManifest& manifest);
std::string manifest_json(const RunManifest& manifest);

// Parsers (analyze command + round-trip tests). Malformed input throws
// std::runtime_error naming the offending line. CSV rows populate only the
// columns the CSV carries.
MetricSeries parse_metrics_csv(std::istream& in);

struct JsonRun {
  RunManifest manifest;
  MetricSeries series;
};
JsonRun parse_metrics_json(std::istream& in);

// Shortest round-trip decimal form of a double (locale-independent); the
// single formatter used for all numeric report fields so recomputation from
// serialized rows is exact.
std::string format_double(double value);

bool operator==(const EpochReport& a, const EpochReport& b);

}  // namespace shardsim
