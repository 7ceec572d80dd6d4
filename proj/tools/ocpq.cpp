// ocpq: validate OCEL 2.0 logs, evaluate query trees, generate synthetic logs
// and serve the HTTP API.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ocpq/engine.hpp"
#include "ocpq/export.hpp"
#include "ocpq/index.hpp"
#include "ocpq/ingestion.hpp"
#include "ocpq/oracle.hpp"
#include "ocpq/query_json.hpp"
#include "ocpq/server.hpp"

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kInvalid = 2,
  kTooLarge = 3,
  kOracleMismatch = 4,
  kOracleTooLarge = 5,
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw IoError("cannot write '" + path.string() + "'");
  }
}

void report(const ocpq::ValidationReport& r) {
  for (const auto& f : r.errors) spdlog::error("{} [{}]: {}", f.code, f.ref, f.message);
  for (const auto& f : r.warnings) spdlog::warn("{} [{}]: {}", f.code, f.ref, f.message);
}

/// Lenient import followed by validation, so that every finding is reported.
std::optional<ocpq::Oced> load_log(const std::string& path, bool strict) {
  ocpq::Oced log = ocpq::import_ocel2_json(read_file(path));
  auto r = ocpq::validate(log, strict);
  report(r);
  if (!r.ok()) return std::nullopt;
  return log;
}

int exit_for(ocpq::ErrorCode code) {
  switch (code) {
    case ocpq::ErrorCode::ResultTooLarge: return kTooLarge;
    case ocpq::ErrorCode::TooLargeForOracle: return kOracleTooLarge;
    case ocpq::ErrorCode::Timeout: return kFailure;
    default: return kInvalid;
  }
}

struct RunArgs {
  std::string log;
  std::string query;
  std::string out;
  std::string format = "csv";
  unsigned threads = 0;
  bool strict = false;
  bool oracle = false;
  std::size_t max_rows = 10'000'000;
};

int cmd_run(const RunArgs& a) {
  auto log = load_log(a.log, a.strict);
  if (!log) return kInvalid;
  ocpq::QueryTree tree = ocpq::parse_query_json(read_file(a.query));
  ocpq::IndexedLog idx = ocpq::build_index(*log);
  spdlog::info("indexed {} events, {} objects", idx.num_events(), idx.num_objects());

  ocpq::EvaluationOptions opts;
  opts.threads = a.threads;
  opts.max_rows_per_node = a.max_rows;
  ocpq::EvaluationResult result = ocpq::evaluate_tree(tree, idx, opts);
  spdlog::info("evaluated in {:.3f} ms", std::chrono::duration<double, std::milli>(result.wall_time).count());

  if (a.oracle) {
    ocpq::EvaluationResult expected = ocpq::brute_force_evaluate(tree, *log);
    for (std::size_t i = 0; i < result.nodes.size(); ++i) {
      if (!(result.nodes[i] == expected.nodes[i])) {
        spdlog::error("oracle mismatch at node '{}': engine {} rows, oracle {} rows", result.nodes[i].node_id,
                      result.nodes[i].rows(), expected.nodes[i].rows());
        return kOracleMismatch;
      }
    }
    spdlog::info("oracle agrees on all {} nodes", result.nodes.size());
  }

  if (!a.out.empty()) {
    std::filesystem::create_directories(a.out);
    for (const auto& n : tree.nodes) {
      write_file(std::filesystem::path(a.out) / (n.id + ".csv"), ocpq::export_csv(result, tree, idx, n.id));
    }
  }

  std::printf("node\trows\tsatisfied\tviolated\tpercent\twall_ms\n");
  auto summary = ocpq::summarize(result);
  for (std::size_t i = 0; i < summary.size(); ++i) {
    const auto& s = summary[i];
    double ms = std::chrono::duration<double, std::milli>(result.nodes[i].elapsed).count();
    std::printf("%s\t%llu\t%llu\t%llu\t%s%%\t%.3f\n", s.node_id.c_str(), static_cast<unsigned long long>(s.total_basic),
                static_cast<unsigned long long>(s.satisfied), static_cast<unsigned long long>(s.violated),
                ocpq::format_percent(s.violation_percent).c_str(), ms);
  }
  return kOk;
}

int cmd_validate(const std::string& path, bool strict) {
  auto log = load_log(path, strict);
  if (!log) return kInvalid;
  std::printf("OK, %zu events, %zu objects\n", log->events().size(), log->objects().size());
  return kOk;
}

int cmd_generate(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  nlohmann::json cfg = nlohmann::json::object();
  if (!config_path.empty()) {
    try {
      cfg = nlohmann::json::parse(read_file(config_path));
    } catch (const nlohmann::json::exception& e) {
      throw ocpq::Error(ocpq::ErrorCode::ParseError, std::string("config: ") + e.what());
    }
  }
  std::string kind = cfg.value("generator", "orders");
  ocpq::Oced log;
  try {
    if (kind == "orders") {
      ocpq::SyntheticConfig c;
      c.num_customers = cfg.value("numCustomers", c.num_customers);
      c.orders_per_customer = cfg.value("ordersPerCustomer", c.orders_per_customer);
      c.items_per_order = cfg.value("itemsPerOrder", c.items_per_order);
      c.reminder_probability = cfg.value("reminderProbability", c.reminder_probability);
      c.skip_payment_probability = cfg.value("skipPaymentProbability", c.skip_payment_probability);
      c.confirm_probability = cfg.value("confirmProbability", c.confirm_probability);
      c.seed = seed.value_or(cfg.value("seed", c.seed));
      log = ocpq::generate_synthetic(c);
    } else if (kind == "loan") {
      ocpq::LoanConfig c;
      c.applications = cfg.value("applications", c.applications);
      c.resources = cfg.value("resources", c.resources);
      c.max_offers_per_application = cfg.value("maxOffersPerApplication", c.max_offers_per_application);
      c.min_workflow_events = cfg.value("minWorkflowEvents", c.min_workflow_events);
      c.max_workflow_events = cfg.value("maxWorkflowEvents", c.max_workflow_events);
      c.seed = seed.value_or(cfg.value("seed", c.seed));
      log = ocpq::generate_loan_log(c);
    } else {
      throw ocpq::Error(ocpq::ErrorCode::ParseError, "config: unknown generator '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ocpq::Error(ocpq::ErrorCode::ParseError, std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ocpq::Error(ocpq::ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  write_file(out, ocpq::export_ocel2_json(log));
  spdlog::info("wrote {} events, {} objects to {}", log.events().size(), log.objects().size(), out);
  return kOk;
}

int cmd_serve(ocpq::ServerOptions opts) {
  ocpq::ApiServer server(opts);
  int port = server.bind();
  spdlog::info("listening on http://{}:{}", opts.host, port);
  server.listen();
  return kOk;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("ocpq");
  logger->set_pattern("%^%l%$: %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("OCPQ_LOG_LEVEL")) {
    auto parsed = spdlog::level::from_str(level);
    if (parsed != spdlog::level::off || std::string_view(level) == "off") spdlog::set_level(parsed);
  }
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Object-centric process query engine"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Evaluate a query tree on a log and print per-node summaries");
  run_cmd->add_option("--log", run.log, "OCEL 2.0 JSON log")->required();
  run_cmd->add_option("--query", run.query, "Query tree JSON")->required();
  run_cmd->add_option("--out", run.out, "Directory for per-node CSV tables");
  run_cmd->add_option("--format", run.format, "Output table format")->check(CLI::IsMember({"csv"}));
  run_cmd->add_option("--threads", run.threads, "Worker threads (0 = all cores)");
  run_cmd->add_flag("--strict", run.strict, "Reject logs violating the mandatory OCED properties");
  run_cmd->add_flag("--oracle", run.oracle, "Cross-check against the brute-force evaluator");
  run_cmd->add_option("--max-rows", run.max_rows, "Row limit per node");

  std::string validate_log;
  bool validate_strict = false;
  auto* validate_cmd = app.add_subcommand("validate", "Check a log against the mandatory OCED properties");
  validate_cmd->add_option("--log", validate_log, "OCEL 2.0 JSON log")->required();
  validate_cmd->add_flag("--strict", validate_strict, "Treat empty E2O sets and ambiguous ids as errors");

  std::string gen_config;
  std::optional<std::uint64_t> gen_seed;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic OCEL 2.0 JSON log");
  gen_cmd->add_option("--config", gen_config, "Generator configuration JSON");
  gen_cmd->add_option("--seed", gen_seed, "Random seed (overrides the config)");
  gen_cmd->add_option("--out", gen_out, "Output path")->required();

  ocpq::ServerOptions serve;
  if (const char* port = std::getenv("OCPQ_PORT")) serve.port = std::atoi(port);
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--port", serve.port, "Listening port (default $OCPQ_PORT or 8080)");
  serve_cmd->add_option("--host", serve.host, "Listening address");
  serve_cmd->add_option("--static", serve.static_dir, "Directory served at /");
  serve_cmd->add_option("--threads", serve.threads, "Worker threads per evaluation (0 = all cores)");
  serve_cmd->add_option("--max-rows", serve.max_rows_per_node, "Row limit per node");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(run);
    if (*validate_cmd) return cmd_validate(validate_log, validate_strict);
    if (*gen_cmd) return cmd_generate(gen_config, gen_seed, gen_out);
    if (*serve_cmd) return cmd_serve(serve);
  } catch (const ocpq::QueryInvalidError& e) {
    for (const auto& f : e.findings()) spdlog::error("{} [{}]: {}", f.code, f.ref, f.message);
    return kInvalid;
  } catch (const ocpq::Error& e) {
    spdlog::error("{}", e.what());
    return exit_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
  return kFailure;
}
