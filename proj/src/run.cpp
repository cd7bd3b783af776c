#include "shardsim/run.hpp"

#include "shardsim/engine.hpp"
#include "shardsim/sha256.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace shardsim {

OutputFormat parse_format(std::string_view name) {
  if (name == "csv") return OutputFormat::kCsv;
  if (name == "json") return OutputFormat::kJson;
  if (name == "both") return OutputFormat::kBoth;
  throw std::invalid_argument("format must be one of csv, json, both");
}

std::string_view format_name(OutputFormat format) {
  switch (format) {
    case OutputFormat::kCsv:
      return "csv";
    case OutputFormat::kJson:
      return "json";
    case OutputFormat::kBoth:
      return "both";
  }
  throw std::logic_error("format_name: unknown format");
}

LoadedTrace resolve_trace(const RunConfig& config, std::ostream* warnings) {
  LoadedTrace loaded;
  loaded.interner = std::make_shared<AccountInterner>();
  switch (config.source) {
    case TraceSource::kFile: {
      std::ifstream in(config.trace_path);
      if (!in) {
        throw std::runtime_error("cannot open trace file: " +
                                 config.trace_path);
      }
      loaded.trace = load_trace(in, *loaded.interner, warnings);
      loaded.source_desc = config.trace_path;
      break;
    }
    case TraceSource::kUniform: {
      loaded.trace = gen_uniform(config.uniform, *loaded.interner);
      std::ostringstream desc;
      desc << "gen:uniform(accounts=" << config.uniform.n_accounts
           << ",txs_per_block=" << config.uniform.txs_per_block
           << ",blocks=" << config.uniform.n_blocks
           << ",seed=" << config.uniform.seed << ")";
      loaded.source_desc = desc.str();
      break;
    }
    case TraceSource::kClustered: {
      loaded.trace = gen_clustered(config.clustered, *loaded.interner);
      std::ostringstream desc;
      desc << "gen:clustered(communities=" << config.clustered.n_communities
           << ",community_size=" << config.clustered.accounts_per_community
           << ",p_intra=" << format_double(config.clustered.p_intra)
           << ",churn=" << format_double(config.clustered.churn)
           << ",txs_per_block=" << config.clustered.txs_per_block
           << ",blocks=" << config.clustered.n_blocks
           << ",seed=" << config.clustered.seed << ")";
      loaded.source_desc = desc.str();
      break;
    }
    case TraceSource::kNone:
      throw std::runtime_error("no trace source: pass --trace or --gen");
  }
  return loaded;
}

SegmentPlan plan_segments(const Trace& trace, std::uint64_t tau,
                          double train_fraction) {
  if (train_fraction < 0.0 || train_fraction >= 1.0) {
    throw std::invalid_argument("train_fraction must be in [0, 1)");
  }
  SegmentPlan plan;
  plan.windows = epoch_windows(trace, tau);
  if (plan.windows.empty()) return plan;

  plan.full_windows = plan.windows.size();
  const EpochBatch& last = plan.windows.back();
  if (last.last_block > trace.last_block) {
    plan.full_windows -= 1;
    plan.partial_tail_blocks = trace.last_block - last.first_block + 1;
    plan.partial_tail_txs = last.txs.size();
  }

  const auto boundary =
      trace.first_block +
      static_cast<std::uint64_t>(std::floor(
          train_fraction * static_cast<double>(trace.block_span())));
  while (plan.eval_begin < plan.full_windows &&
         plan.windows[plan.eval_begin].first_block < boundary) {
    ++plan.eval_begin;
  }
  return plan;
}

namespace {

std::string now_iso8601() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

}  // namespace

std::string default_run_id(const RunConfig& config, double resolved_lambda,
                           const std::string& trace_digest) {
  std::ostringstream canon;
  canon << "k=" << config.params.k << ";eta=" << format_double(config.params.eta)
        << ";tau=" << config.params.tau
        << ";lambda=" << format_double(resolved_lambda)
        << ";beta=" << format_double(config.params.beta)
        << ";seed=" << config.params.seed
        << ";alloc=" << allocator_name(config.allocator)
        << ";init=" << allocator_name(config.init_allocator)
        << ";window=" << config.window << ";epochs=" << config.epochs
        << ";noise=" << format_double(config.noisy_mempool)
        << ";raw=" << (config.raw_fusion ? 1 : 0)
        << ";cap=" << format_double(config.cap_factor)
        << ";trace=" << trace_digest;
  const std::string digest8 = hex_digest(sha256(canon.str())).substr(0, 8);
  std::ostringstream id;
  id << allocator_name(config.allocator) << "-k" << config.params.k << "-s"
     << config.params.seed << "-" << digest8;
  return id.str();
}

RunOutput run_simulation(const RunConfig& config, const Trace& trace,
                         std::shared_ptr<AccountInterner> interner,
                         const std::string& source_desc, std::ostream* err) {
  SimParams params = config.params;
  params.validate(/*require_lambda=*/false);
  if (trace.empty()) throw std::invalid_argument("trace has no transactions");

  const SegmentPlan plan = plan_segments(trace, params.tau, 0.9);
  const std::size_t avail = plan.eval_available();
  if (avail == 0) {
    throw std::invalid_argument(
        "no full evaluation epochs after the train/eval split; the trace is "
        "too short for tau=" +
        std::to_string(params.tau));
  }
  std::size_t run_count = avail;
  if (config.epochs != 0) {
    if (config.epochs > avail) {
      throw std::invalid_argument(
          "requested " + std::to_string(config.epochs) +
          " evaluation epochs but only " + std::to_string(avail) +
          " are available");
    }
    run_count = config.epochs;
  }

  if (params.lambda == 0.0) {
    std::size_t eval_txs = 0;
    for (std::size_t i = 0; i < run_count; ++i) {
      eval_txs += plan.windows[plan.eval_begin + i].txs.size();
    }
    if (eval_txs == 0) {
      throw std::invalid_argument(
          "evaluation epochs contain no transactions; pass --lambda "
          "explicitly");
    }
    params.lambda = static_cast<double>(eval_txs) /
                    static_cast<double>(run_count) /
                    static_cast<double>(params.k);
  }
  params.validate(/*require_lambda=*/true);

  // Initial allocation. The hash rule needs no precomputation (assignments
  // materialize on first lookup); the greedy community allocator partitions
  // the train-segment interaction graph.
  const bool pilot = config.allocator == AllocatorKind::kPilotDriven;
  const bool greedy_init =
      config.allocator == AllocatorKind::kGreedyCommunity ||
      (pilot && config.init_allocator == AllocatorKind::kGreedyCommunity);
  AccountShardMapping mapping(params.k, interner);
  if (greedy_init) {
    const std::size_t train_txs =
        plan.eval_begin < plan.windows.size()
            ? static_cast<std::size_t>(
                  plan.windows[plan.eval_begin].txs.data() -
                  trace.transactions.data())
            : trace.transactions.size();
    mapping = allocate_greedy_community(
        std::span<const Transaction>(trace.transactions.data(), train_txs),
        params.k, config.cap_factor, interner);
  }

  SimState state{std::move(mapping), {},
                 plan.windows.empty() ? 0
                                      : plan.windows[plan.eval_begin]
                                            .epoch_index};
  if (pilot) {
    // The train segment both seeds client histories and materializes the
    // initial assignment of every train-active account.
    for (std::size_t e = 0; e < plan.eval_begin; ++e) {
      for (const Transaction& tx : plan.windows[e].txs) {
        for (AccountIdx a : tx.accounts) state.mapping.shard_of(a);
        state.history.record_tx(tx, plan.windows[e].epoch_index);
      }
    }
  }

  EngineOptions options;
  options.params = params;
  options.allocator = config.allocator;
  options.window = config.window;
  options.noisy_mempool = config.noisy_mempool;
  options.raw_fusion = config.raw_fusion;
  options.threads = config.threads;

  RunOutput output;
  output.series.reports.reserve(run_count);
  for (std::size_t i = 0; i < run_count; ++i) {
    const EpochBatch& current = plan.windows[plan.eval_begin + i];
    EpochBatch next;
    if (plan.eval_begin + i + 1 < plan.windows.size()) {
      next = plan.windows[plan.eval_begin + i + 1];
    } else {
      next = EpochBatch{current.epoch_index + 1, current.last_block + 1,
                        current.last_block + params.tau, {}};
    }
    output.series.reports.push_back(run_epoch(state, current, next, options));
  }

  if (plan.partial_tail_txs > 0 && err) {
    *err << "note: partial trailing epoch (" << plan.partial_tail_blocks
         << " blocks, " << plan.partial_tail_txs
         << " txs) excluded from evaluation\n";
  }

  RunManifest& m = output.manifest;
  const std::string digest = trace_digest_hex(trace, *interner);
  m.run_id = config.run_id.empty()
                 ? default_run_id(config, params.lambda, digest)
                 : config.run_id;
  m.code_version = kCodeVersion;
  m.generated_at = now_iso8601();
  m.params = params;
  m.allocator = std::string(allocator_name(config.allocator));
  m.init_allocator = std::string(allocator_name(config.init_allocator));
  m.window = config.window;
  m.noisy_mempool = config.noisy_mempool;
  m.raw_fusion = config.raw_fusion;
  m.cap_factor = config.cap_factor;
  m.threads = config.threads;
  m.trace_source = source_desc;
  m.trace_digest = digest;
  m.trace_transactions = trace.transactions.size();
  m.trace_accounts = interner->size();
  m.first_block = trace.first_block;
  m.last_block = trace.last_block;
  m.train_fraction = 0.9;
  m.train_epochs = plan.eval_begin;
  m.eval_epochs_available = avail;
  m.eval_epochs_run = run_count;
  m.partial_tail_blocks = plan.partial_tail_blocks;
  m.partial_tail_txs = plan.partial_tail_txs;
  if (pilot) {
    m.notes.push_back(
        "initial allocation from the train segment via '" +
        std::string(allocator_name(config.init_allocator)) +
        "' (stand-in; no external partitioner)");
  }
  if (config.allocator == AllocatorKind::kGreedyCommunity ||
      (pilot && config.init_allocator == AllocatorKind::kGreedyCommunity)) {
    m.notes.push_back(
        "greedy community allocator is a label-propagation + bin-packing "
        "baseline (non-faithful)");
  }
  if (plan.partial_tail_txs > 0) {
    m.notes.push_back("partial trailing epoch excluded: " +
                      std::to_string(plan.partial_tail_blocks) + " blocks, " +
                      std::to_string(plan.partial_tail_txs) + " txs");
  }
  return output;
}

int cmd_simulate(const RunConfig& config, std::ostream& out,
                 std::ostream& err) {
  try {
    const LoadedTrace loaded = resolve_trace(config, &err);
    const RunOutput run = run_simulation(config, loaded.trace, loaded.interner,
                                         loaded.source_desc, &err);

    namespace fs = std::filesystem;
    const fs::path dir = config.out.empty() ? fs::path(".")
                                            : fs::path(config.out);
    std::error_code ec;
    fs::create_directories(dir, ec);  // best effort; writes report failures

    const auto write_file = [&](const fs::path& path, auto&& writer) {
      std::ofstream file(path, std::ios::binary);
      if (!file) {
        throw std::runtime_error("cannot write " + path.string());
      }
      writer(file);
      out << "wrote " << path.string() << "\n";
    };

    const std::string& base = run.manifest.run_id;
    out << "run " << base << "\n";
    for (const std::string& note : run.manifest.notes) {
      out << "note: " << note << "\n";
    }
    if (config.format == OutputFormat::kCsv ||
        config.format == OutputFormat::kBoth) {
      write_file(dir / (base + ".metrics.csv"), [&](std::ostream& f) {
        write_metrics_csv(run.series.reports, f);
      });
    }
    if (config.format == OutputFormat::kJson ||
        config.format == OutputFormat::kBoth) {
      write_file(dir / (base + ".metrics.json"), [&](std::ostream& f) {
        write_metrics_json(run.series.reports, run.manifest, f);
      });
    }
    if (config.format == OutputFormat::kCsv) {
      // CSV alone cannot carry provenance; keep the manifest beside it.
      write_file(dir / (base + ".manifest.json"),
                 [&](std::ostream& f) { f << manifest_json(run.manifest); });
    }

    const Aggregates agg = run.series.aggregates();
    out << "epochs run                  " << agg.epochs << "\n"
        << "mean cross-shard ratio      " << format_double(agg.mean_cross_ratio)
        << "\n"
        << "mean workload deviation     "
        << format_double(agg.mean_workload_deviation) << "\n"
        << "mean normalized throughput  "
        << format_double(agg.mean_normalized_throughput) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_gen_trace(const RunConfig& config, std::ostream& out,
                  std::ostream& err) {
  try {
    if (config.source != TraceSource::kUniform &&
        config.source != TraceSource::kClustered) {
      throw std::runtime_error("gen-trace requires --gen uniform|clustered");
    }
    if (config.out.empty()) {
      throw std::runtime_error("gen-trace requires --out <file>");
    }
    const LoadedTrace loaded = resolve_trace(config, &err);

    std::ofstream file(config.out, std::ios::binary);
    if (!file) {
      throw std::runtime_error("cannot write " + config.out);
    }
    write_trace_csv(loaded.trace, *loaded.interner, file);
    if (!file.good()) {
      throw std::runtime_error("write failed: " + config.out);
    }
    out << "accounts " << loaded.interner->size() << "\n"
        << "transactions " << loaded.trace.transactions.size() << "\n"
        << "blocks " << loaded.trace.block_span() << "\n"
        << "wrote " << config.out << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_analyze(const std::string& path, std::ostream& out,
                std::ostream& err) {
  try {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
      throw std::runtime_error("cannot open " + path);
    }
    // Sniff the format: JSON documents open with '{'.
    int c = file.peek();
    while (c == ' ' || c == '\n' || c == '\r' || c == '\t') {
      file.get();
      c = file.peek();
    }
    MetricSeries series;
    if (c == '{') {
      const JsonRun run = parse_metrics_json(file);
      series = run.series;
      if (!run.manifest.run_id.empty()) {
        out << "run " << run.manifest.run_id << " (allocator "
            << run.manifest.allocator << ")\n";
      }
    } else {
      series = parse_metrics_csv(file);
    }
    if (series.reports.empty()) {
      throw std::runtime_error("no report rows in " + path);
    }
    const Aggregates agg = series.aggregates();
    out << "epochs                      " << agg.epochs << "\n"
        << "mean cross-shard ratio      " << format_double(agg.mean_cross_ratio)
        << "\n"
        << "mean workload deviation     "
        << format_double(agg.mean_workload_deviation) << "\n"
        << "mean normalized throughput  "
        << format_double(agg.mean_normalized_throughput) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

unsigned threads_from_env() {
  const char* env = std::getenv("SHARDSIM_THREADS");
  if (!env || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (end == env || *end != '\0') return 0;  // unparsable -> auto
  return static_cast<unsigned>(v);
}

// One CLI11 application wired to a CliInvocation; shared by parse_cli (which
// converts errors to exceptions) and run_cli (which prints them).
struct CliSetup {
  CLI::App app{"Epoch-driven simulator for client-driven account allocation "
               "on sharded chains",
               "shardsim"};
  CliInvocation inv;
  CLI::App* sim = nullptr;
  CLI::App* gen = nullptr;
  CLI::App* ana = nullptr;

  std::string allocator_str = "pilot";
  std::string init_str = "hash";
  std::string format_str = "both";
  std::string gen_str;
  std::string config_path;

  std::uint64_t g_accounts = 1000;
  std::uint64_t g_communities = 16;
  std::uint64_t g_community_size = 40;
  double g_p_intra = 0.9;
  double g_churn = 0.0;
  std::uint64_t g_txs_per_block = 100;
  std::uint64_t g_blocks = 100;

  CliSetup() {
    app.require_subcommand(0, 1);
    sim = app.add_subcommand("simulate",
                             "Run an allocation simulation over a trace");
    gen = app.add_subcommand("gen-trace",
                             "Generate a synthetic transaction trace CSV");
    ana = app.add_subcommand("analyze",
                             "Print aggregate metrics for a metrics file");

    const auto gt1 = CLI::Validator(
        [](std::string& s) {
          double v = 0;
          try {
            v = std::stod(s);
          } catch (...) {
            return std::string("not a number");
          }
          return v > 1.0 ? std::string{} : std::string("value must be > 1");
        },
        "FLOAT>1");
    const auto gt0 = CLI::Validator(
        [](std::string& s) {
          double v = 0;
          try {
            v = std::stod(s);
          } catch (...) {
            return std::string("not a number");
          }
          return v > 0.0 ? std::string{} : std::string("value must be > 0");
        },
        "FLOAT>0");
    const auto ge1 = CLI::Validator(
        [](std::string& s) {
          double v = 0;
          try {
            v = std::stod(s);
          } catch (...) {
            return std::string("not a number");
          }
          return v >= 1.0 ? std::string{} : std::string("value must be >= 1");
        },
        "FLOAT>=1");

    // simulate
    sim->add_option("--config", config_path,
                    "Config file (key=value lines); command-line flags win");
    sim->add_option("--k", inv.config.params.k, "Shard count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim->add_option("--eta", inv.config.params.eta,
                    "Cross-shard difficulty multiplier (> 1)")
        ->check(gt1)
        ->capture_default_str();
    sim->add_option("--tau", inv.config.params.tau, "Blocks per epoch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim->add_option("--lambda", inv.config.params.lambda,
                    "Per-shard budget per epoch (default: epoch size / k)")
        ->check(gt0);
    sim->add_option("--beta", inv.config.params.beta,
                    "Known fraction of future transactions")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sim->add_option("--seed", inv.config.params.seed, "Simulation seed")
        ->capture_default_str();
    sim->add_option("--allocator", allocator_str,
                    "Allocation strategy: hash | greedy | pilot")
        ->check(CLI::IsMember({"hash", "greedy", "pilot"}))
        ->capture_default_str();
    sim->add_option("--init", init_str,
                    "Initial mapping for pilot runs: hash | greedy")
        ->check(CLI::IsMember({"hash", "greedy"}))
        ->capture_default_str();
    sim->add_option("--epochs", inv.config.epochs,
                    "Evaluation epochs to run (default: all available)")
        ->check(CLI::PositiveNumber);
    sim->add_option("--window", inv.config.window,
                    "Trailing history window in epochs (0 = entire history)")
        ->capture_default_str();
    auto* trace_opt =
        sim->add_option("--trace", inv.config.trace_path, "Trace CSV path");
    auto* gen_opt =
        sim->add_option("--gen", gen_str,
                        "Generate the trace instead: uniform | clustered")
            ->check(CLI::IsMember({"uniform", "clustered"}));
    trace_opt->excludes(gen_opt);
    gen_opt->excludes(trace_opt);
    sim->add_option("--out", inv.config.out, "Output directory")
        ->capture_default_str();
    sim->add_option("--format", format_str, "Report format: csv | json | both")
        ->check(CLI::IsMember({"csv", "json", "both"}))
        ->capture_default_str();
    sim->add_option("--noisy-mempool", inv.config.noisy_mempool,
                    "Drop probability per lookahead transaction")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sim->add_flag("--raw-fusion", inv.config.raw_fusion,
                  "Fuse raw interaction counts without normalization");
    sim->add_option("--cap-factor", inv.config.cap_factor,
                    "Greedy allocator per-shard capacity slack")
        ->check(ge1)
        ->capture_default_str();
    sim->add_option("--run-id", inv.config.run_id,
                    "Override the derived run id");
    add_generator_params(sim);

    // gen-trace
    gen->add_option("--gen", gen_str,
                    "Generator family: uniform | clustered")
        ->check(CLI::IsMember({"uniform", "clustered"}))
        ->required();
    gen->add_option("--seed", inv.config.params.seed, "Generator seed")
        ->capture_default_str();
    gen->add_option("--out", inv.config.out, "Output trace CSV path")
        ->required();
    add_generator_params(gen);

    // analyze
    ana->add_option("file", inv.analyze_path, "Metrics CSV or JSON file")
        ->required();
  }

  void add_generator_params(CLI::App* cmd) {
    cmd->add_option("--accounts", g_accounts, "uniform: account count (>= 2)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--communities", g_communities,
                    "clustered: community count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--community-size", g_community_size,
                    "clustered: accounts per community")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--p-intra", g_p_intra,
                    "clustered: probability a tx stays in its community")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--churn", g_churn,
                    "clustered: per-block fresh-account probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--txs-per-block", g_txs_per_block,
                    "transactions per block")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--blocks", g_blocks, "block count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
  }

  static std::string trimmed(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return {};
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
  }

  static double config_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (...) {
      throw std::invalid_argument("config file: invalid value for '" + key +
                                  "': " + v);
    }
  }

  static std::uint64_t config_u64(const std::string& key,
                                  const std::string& v) {
    try {
      std::size_t pos = 0;
      const unsigned long long u = std::stoull(v, &pos);
      if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
      return u;
    } catch (...) {
      throw std::invalid_argument("config file: invalid value for '" + key +
                                  "': " + v);
    }
  }

  static bool config_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config file: invalid value for '" + key +
                                "': " + v);
  }

  static double config_prob(const std::string& key, const std::string& v) {
    const double p = config_double(key, v);
    if (p < 0.0 || p > 1.0) {
      throw std::invalid_argument("config file: '" + key +
                                  "' must be in [0, 1]");
    }
    return p;
  }

  // Applies `key=value` lines from --config wherever the command line left
  // the matching flag untouched. CLI11's own config hook is bypassed: it
  // does not process files attached to subcommands.
  void apply_config_file() {
    std::ifstream in(config_path);
    if (!in) {
      throw std::invalid_argument("cannot open config file: " + config_path);
    }
    // An explicit source choice on the command line suppresses both source
    // keys so the trace/gen exclusivity cannot be violated by merging.
    const bool cli_source =
        sim->count("--trace") > 0 || sim->count("--gen") > 0;
    auto given = [&](const char* flag) { return sim->count(flag) > 0; };

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string entry = trimmed(line);
      if (entry.empty() || entry[0] == '#' || entry[0] == ';') continue;
      if (entry.front() == '[' && entry.back() == ']') continue;  // section
      const auto eq = entry.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument(
            "config file line " + std::to_string(line_no) +
            ": expected key=value");
      }
      const std::string key = trimmed(entry.substr(0, eq));
      std::string value = trimmed(entry.substr(eq + 1));
      if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                                (value.front() == '\'' &&
                                 value.back() == '\''))) {
        value = value.substr(1, value.size() - 2);
      }

      if (key == "k") {
        if (!given("--k")) {
          inv.config.params.k = static_cast<int>(config_u64(key, value));
        }
      } else if (key == "eta") {
        if (!given("--eta")) inv.config.params.eta = config_double(key, value);
      } else if (key == "tau") {
        if (!given("--tau")) inv.config.params.tau = config_u64(key, value);
      } else if (key == "lambda") {
        if (!given("--lambda")) {
          inv.config.params.lambda = config_double(key, value);
        }
      } else if (key == "beta") {
        if (!given("--beta")) inv.config.params.beta = config_prob(key, value);
      } else if (key == "seed") {
        if (!given("--seed")) inv.config.params.seed = config_u64(key, value);
      } else if (key == "allocator") {
        if (!given("--allocator")) allocator_str = value;
      } else if (key == "init") {
        if (!given("--init")) init_str = value;
      } else if (key == "epochs") {
        if (!given("--epochs")) inv.config.epochs = config_u64(key, value);
      } else if (key == "window") {
        if (!given("--window")) inv.config.window = config_u64(key, value);
      } else if (key == "trace") {
        if (!cli_source) inv.config.trace_path = value;
      } else if (key == "gen") {
        if (!cli_source) {
          if (value != "uniform" && value != "clustered") {
            throw std::invalid_argument(
                "config file: 'gen' must be uniform or clustered");
          }
          gen_str = value;
        }
      } else if (key == "out") {
        if (!given("--out")) inv.config.out = value;
      } else if (key == "format") {
        if (!given("--format")) format_str = value;
      } else if (key == "noisy-mempool") {
        if (!given("--noisy-mempool")) {
          inv.config.noisy_mempool = config_prob(key, value);
        }
      } else if (key == "raw-fusion") {
        if (!given("--raw-fusion")) {
          inv.config.raw_fusion = config_bool(key, value);
        }
      } else if (key == "cap-factor") {
        if (!given("--cap-factor")) {
          inv.config.cap_factor = config_double(key, value);
        }
      } else if (key == "run-id") {
        if (!given("--run-id")) inv.config.run_id = value;
      } else if (key == "accounts") {
        if (!given("--accounts")) g_accounts = config_u64(key, value);
      } else if (key == "communities") {
        if (!given("--communities")) g_communities = config_u64(key, value);
      } else if (key == "community-size") {
        if (!given("--community-size")) {
          g_community_size = config_u64(key, value);
        }
      } else if (key == "p-intra") {
        if (!given("--p-intra")) g_p_intra = config_prob(key, value);
      } else if (key == "churn") {
        if (!given("--churn")) g_churn = config_prob(key, value);
      } else if (key == "txs-per-block") {
        if (!given("--txs-per-block")) g_txs_per_block = config_u64(key, value);
      } else if (key == "blocks") {
        if (!given("--blocks")) g_blocks = config_u64(key, value);
      } else {
        throw std::invalid_argument("config file: unknown key '" + key + "'");
      }
    }
    if (!cli_source && !gen_str.empty() && !inv.config.trace_path.empty()) {
      throw std::invalid_argument(
          "config file: 'trace' and 'gen' are mutually exclusive");
    }
  }

  CliInvocation finish() {
    if (!config_path.empty()) apply_config_file();
    inv.config.allocator = parse_allocator(allocator_str);
    inv.config.init_allocator = parse_allocator(init_str);
    inv.config.format = parse_format(format_str);
    inv.config.threads = threads_from_env();

    if (!gen_str.empty()) {
      if (gen_str == "uniform") {
        inv.config.source = TraceSource::kUniform;
        inv.config.uniform = UniformSpec{g_accounts, g_txs_per_block, g_blocks,
                                         inv.config.params.seed};
      } else {
        inv.config.source = TraceSource::kClustered;
        inv.config.clustered =
            ClusteredSpec{g_communities,    g_community_size, g_p_intra,
                          g_txs_per_block,  g_blocks,         g_churn,
                          inv.config.params.seed};
      }
    } else if (!inv.config.trace_path.empty()) {
      inv.config.source = TraceSource::kFile;
    }

    if (app.got_subcommand(sim)) {
      inv.command = CliInvocation::Command::kSimulate;
      if (inv.config.source == TraceSource::kNone) {
        throw std::invalid_argument(
            "simulate requires a trace: pass --trace <file> or --gen "
            "uniform|clustered");
      }
    } else if (app.got_subcommand(gen)) {
      inv.command = CliInvocation::Command::kGenTrace;
    } else if (app.got_subcommand(ana)) {
      inv.command = CliInvocation::Command::kAnalyze;
    }
    return inv;
  }
};

}  // namespace

CliInvocation parse_cli(const std::vector<std::string>& args) {
  CliSetup setup;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    setup.app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    throw std::invalid_argument(e.what());
  }
  return setup.finish();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CliSetup setup;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    setup.app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return setup.app.exit(e, out, err);
  }

  CliInvocation inv;
  try {
    inv = setup.finish();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  switch (inv.command) {
    case CliInvocation::Command::kSimulate:
      return cmd_simulate(inv.config, out, err);
    case CliInvocation::Command::kGenTrace:
      return cmd_gen_trace(inv.config, out, err);
    case CliInvocation::Command::kAnalyze:
      return cmd_analyze(inv.analyze_path, out, err);
    case CliInvocation::Command::kNone:
      out << setup.app.help();
      return 1;
  }
  return 1;
}

}  // namespace shardsim
