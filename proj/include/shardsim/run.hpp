// Run orchestration and the command-line surface: configuration parsing,
// trace resolution, train/eval split, the simulate/gen-trace/analyze
// commands, and report file output.
#pragma once

#include "shardsim/allocators.hpp"
#include "shardsim/metrics.hpp"
#include "shardsim/trace.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace shardsim {

inline constexpr const char* kCodeVersion = "shardsim 0.1.0";

enum class TraceSource { kNone, kFile, kUniform, kClustered };
enum class OutputFormat { kCsv, kJson, kBoth };

struct RunConfig {
  SimParams params;  // lambda 0 = derive from the evaluation segment
  AllocatorKind allocator = AllocatorKind::kPilotDriven;
  AllocatorKind init_allocator = AllocatorKind::kHashRandom;
  std::uint64_t window = 0;  // history epochs visible to clients; 0 = all
  std::uint64_t epochs = 0;  // evaluation epochs to run; 0 = all available
  double noisy_mempool = 0.0;
  bool raw_fusion = false;
  double cap_factor = 1.5;  // greedy community packing slack

  TraceSource source = TraceSource::kNone;
  std::string trace_path;
  UniformSpec uniform;
  ClusteredSpec clustered;

  std::string out = ".";  // simulate: directory; gen-trace: file path
  OutputFormat format = OutputFormat::kBoth;
  std::string run_id;   // empty = derived from config + trace digest
  unsigned threads = 0;  // from SHARDSIM_THREADS; 0 = auto
};

OutputFormat parse_format(std::string_view name);
std::string_view format_name(OutputFormat format);

struct LoadedTrace {
  Trace trace;
  std::shared_ptr<AccountInterner> interner;
  std::string source_desc;  // path or generator summary for the manifest
};

// Loads --trace or materializes the configured generator.
LoadedTrace resolve_trace(const RunConfig& config, std::ostream* warnings);

// The evaluation plan for a trace: full tau-block windows, the train/eval
// boundary, and the partial tail (never simulated).
struct SegmentPlan {
  std::vector<EpochBatch> windows;  // includes a trailing partial window
  std::size_t full_windows = 0;     // windows entirely inside the trace
  std::size_t eval_begin = 0;       // first evaluation window
  std::uint64_t partial_tail_blocks = 0;
  std::size_t partial_tail_txs = 0;

  std::size_t eval_available() const { return full_windows - eval_begin; }
};
SegmentPlan plan_segments(const Trace& trace, std::uint64_t tau,
                          double train_fraction);

struct RunOutput {
  MetricSeries series;
  RunManifest manifest;
};

// The full simulate pipeline minus file I/O: split, initial allocation,
// history seeding, epoch loop, manifest. Deterministic for a given
// (config, trace) except manifest.generated_at.
RunOutput run_simulation(const RunConfig& config, const Trace& trace,
                         std::shared_ptr<AccountInterner> interner,
                         const std::string& source_desc,
                         std::ostream* err = nullptr);

// Derived run identity: readable prefix + 8-hex digest of the resolved
// configuration and trace content.
std::string default_run_id(const RunConfig& config, double resolved_lambda,
                           const std::string& trace_digest);

int cmd_simulate(const RunConfig& config, std::ostream& out,
                 std::ostream& err);
int cmd_gen_trace(const RunConfig& config, std::ostream& out,
                  std::ostream& err);
int cmd_analyze(const std::string& path, std::ostream& out, std::ostream& err);

struct CliInvocation {
  enum class Command { kNone, kSimulate, kGenTrace, kAnalyze };
  Command command = Command::kNone;
  RunConfig config;
  std::string analyze_path;
};

// Parses command-line arguments (program name excluded). Usage errors throw
// std::invalid_argument whose message names the offending field.
CliInvocation parse_cli(const std::vector<std::string>& args);

// Full dispatch: parse + execute + error reporting. Returns the process exit
// code.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace shardsim
