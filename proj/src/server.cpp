#include "ocpq/server.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <list>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "ocpq/engine.hpp"
#include "ocpq/export.hpp"
#include "ocpq/index.hpp"
#include "ocpq/ingestion.hpp"
#include "ocpq/query_json.hpp"

namespace ocpq {

namespace {

using json = nlohmann::ordered_json;

std::string content_hash(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Shared-read / exclusive-write map with least-recently-used eviction.
template <class V>
class Registry {
 public:
  explicit Registry(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

  std::shared_ptr<const V> get(const std::string& key) {
    {
      std::shared_lock lock(mutex_);
      auto it = entries_.find(key);
      if (it == entries_.end()) return nullptr;
    }
    std::unique_lock lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    order_.splice(order_.begin(), order_, it->second.second);
    return it->second.first;
  }

  void put(const std::string& key, std::shared_ptr<const V> value) {
    std::unique_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      it->second.first = std::move(value);
      order_.splice(order_.begin(), order_, it->second.second);
      return;
    }
    order_.push_front(key);
    entries_.emplace(key, std::make_pair(std::move(value), order_.begin()));
    while (entries_.size() > capacity_) {
      entries_.erase(order_.back());
      order_.pop_back();
    }
  }

 private:
  std::size_t capacity_;
  std::shared_mutex mutex_;
  std::list<std::string> order_;
  std::unordered_map<std::string, std::pair<std::shared_ptr<const V>, std::list<std::string>::iterator>> entries_;
};

struct LoadedLog {
  std::string id;
  Oced log;
  IndexedLog idx;
  std::string info;  // metadata response body
};

struct StoredResult {
  std::shared_ptr<const LoadedLog> log;
  QueryTree tree;
  EvaluationResult result;
};

json findings_json(const std::vector<Finding>& findings) {
  json arr = json::array();
  for (const auto& f : findings) arr.push_back({{"code", f.code}, {"ref", f.ref}, {"message", f.message}});
  return arr;
}

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  reply(res, status, json{{"error", code}, {"message", message}});
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return 400;
    case ErrorCode::UnknownRef:
    case ErrorCode::UnknownNode: return 404;
    case ErrorCode::QueryInvalid:
    case ErrorCode::DanglingRef:
    case ErrorCode::EventWithoutObjects:
    case ErrorCode::DuplicateId:
    case ErrorCode::UnboundVariableInPredicate: return 422;
    case ErrorCode::ResultTooLarge: return 409;
    case ErrorCode::Timeout: return 504;
    case ErrorCode::TooLargeForOracle: return 500;
  }
  return 500;
}

std::string log_info(const std::string& id, const Oced& log, const IndexedLog& idx, const ValidationReport& report) {
  auto sorted = [](const Interner& in) {
    std::set<std::string> names;
    for (std::size_t i = 0; i < in.size(); ++i) names.insert(in.name(static_cast<Code>(i)));
    return json(names);
  };
  json body;
  body["logId"] = id;
  body["counts"] = {{"events", log.events().size()}, {"objects", log.objects().size()}};
  body["eventTypes"] = sorted(idx.event_types);
  body["objectTypes"] = sorted(idx.object_types);
  body["qualifiers"] = sorted(idx.qualifiers);
  body["warnings"] = findings_json(report.warnings);
  return body.dump();
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw Error(ErrorCode::ParseError, std::string("'") + key + "' must be a non-negative integer");
  return out;
}

bool query_flag(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return false;
  auto v = req.get_param_value(key);
  return v == "1" || v == "true" || v == "yes";
}

}  // namespace

struct ApiServer::Impl {
  explicit Impl(ServerOptions o) : options(std::move(o)), logs(options.cache_capacity), results(options.cache_capacity) {}

  ServerOptions options;
  httplib::Server server;
  Registry<LoadedLog> logs;
  Registry<StoredResult> results;
  int port = -1;

  void routes() {
    server.set_payload_max_length(options.max_log_bytes);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        fail(res, status_for(e.code()), to_string(e.code()), e.what());
      } catch (const std::exception& e) {
        fail(res, 500, "Internal", e.what());
      }
    });

    server.Post("/api/log", [this](const httplib::Request& req, httplib::Response& res) { post_log(req, res); });
    server.Get(R"(/api/log/([^/]+)/info)", [this](const httplib::Request& req, httplib::Response& res) {
      auto log = logs.get(req.matches[1]);
      if (!log) return fail(res, 404, "UnknownLog", "no log '" + std::string(req.matches[1]) + "'");
      res.set_content(log->info, "application/json");
    });
    server.Post("/api/query/evaluate",
                [this](const httplib::Request& req, httplib::Response& res) { evaluate(req, res); });
    server.Get(R"(/api/result/([^/]+)/node/([^/]+))",
               [this](const httplib::Request& req, httplib::Response& res) { page(req, res); });
    server.Get(R"(/api/result/([^/]+)/node/([^/]+)/export\.csv)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 auto stored = results.get(req.matches[1]);
                 if (!stored) return fail(res, 404, "UnknownResult", "no result '" + std::string(req.matches[1]) + "'");
                 CsvOptions opts;
                 opts.include_basic_only = query_flag(req, "includeBasicOnly");
                 res.set_content(export_csv(stored->result, stored->tree, stored->log->idx, req.matches[2].str(), opts),
                                 "text/csv");
               });
    if (!options.static_dir.empty() && !server.set_mount_point("/", options.static_dir)) {
      throw std::runtime_error("static directory '" + options.static_dir + "' does not exist");
    }
  }

  void post_log(const httplib::Request& req, httplib::Response& res) {
    if (req.body.size() > options.max_log_bytes) return fail(res, 413, "PayloadTooLarge", "log exceeds the size limit");
    std::string id = content_hash(req.body);
    if (auto existing = logs.get(id)) {
      res.set_content(existing->info, "application/json");
      return;
    }
    Oced log = import_ocel2_json(req.body);
    ValidationReport report = validate(log, false);
    if (!report.ok()) {
      return reply(res, 422, json{{"error", "ValidationFailed"}, {"findings", findings_json(report.errors)}});
    }
    auto loaded = std::make_shared<LoadedLog>();
    loaded->id = id;
    loaded->idx = build_index(log);
    loaded->log = std::move(log);
    loaded->info = log_info(id, loaded->log, loaded->idx, report);
    res.set_content(loaded->info, "application/json");
    logs.put(id, std::move(loaded));
  }

  void evaluate(const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      return fail(res, 400, "ParseError", e.what());
    }
    if (!body.is_object() || !body.contains("logId") || !body["logId"].is_string() || !body.contains("tree")) {
      return fail(res, 400, "ParseError", "body must be {\"logId\": string, \"tree\": query}");
    }
    auto log = logs.get(body["logId"].get<std::string>());
    if (!log) return fail(res, 404, "UnknownLog", "no log '" + body["logId"].get<std::string>() + "'");
    QueryTree tree;
    try {
      tree = parse_query_json(body["tree"].dump());
    } catch (const QueryInvalidError& e) {
      return reply(res, 422, json{{"error", "QueryInvalid"}, {"findings", findings_json(e.findings())}});
    }
    std::string rid = content_hash(log->id + "\n" + serialize_query(tree));
    auto stored = results.get(rid);
    if (!stored) {
      EvaluationOptions opts;
      opts.threads = options.threads;
      opts.max_rows_per_node = options.max_rows_per_node;
      opts.deadline = std::chrono::steady_clock::now() + options.request_timeout;
      auto fresh = std::make_shared<StoredResult>();
      fresh->log = log;
      fresh->result = evaluate_tree(tree, log->idx, opts);
      fresh->tree = std::move(tree);
      results.put(rid, fresh);
      stored = fresh;
    }
    json out;
    out["resultId"] = rid;
    out["perNode"] = json::parse(summary_json(summarize(stored->result)));
    reply(res, 200, out);
  }

  void page(const httplib::Request& req, httplib::Response& res) {
    auto stored = results.get(req.matches[1]);
    if (!stored) return fail(res, 404, "UnknownResult", "no result '" + std::string(req.matches[1]) + "'");
    const std::string node_id = req.matches[2];
    const NodeResult* node = stored->result.find(node_id);
    const QueryNode* qn = stored->tree.find_node(node_id);
    if (!node || !qn) return fail(res, 404, "UnknownNode", "no node '" + node_id + "'");
    std::size_t offset = query_size(req, "offset", 0);
    std::size_t limit = std::min<std::size_t>(query_size(req, "limit", 100), 10'000);
    bool basic = query_flag(req, "includeBasicOnly");

    VariableTable vars(stored->tree);
    const IndexedLog& idx = stored->log->idx;
    std::vector<std::pair<std::string, std::size_t>> var_cols;
    json columns = json::array();
    for (const auto& v : qn->box.vars) {
      VarCode code = *vars.find(node_id, v.name);
      auto pos = std::find(node->columns.begin(), node->columns.end(), code) - node->columns.begin();
      var_cols.emplace_back(v.name, static_cast<std::size_t>(pos));
      columns.push_back(v.name);
    }
    auto visible = visible_rows(*node, basic);
    json rows = json::array();
    for (std::size_t k = offset; k < visible.size() && k < offset + limit; ++k) {
      std::size_t i = visible[k];
      auto cells = node->row(i);
      json binding = json::object();
      for (const auto& [name, col] : var_cols) {
        Code e = cells[col];
        binding[name] = node->kinds[col] == VarKind::Event ? idx.event_ids.name(e) : idx.object_ids.name(e);
      }
      json labels = json::object();
      auto values = node->row_labels(i);
      for (std::size_t l = 0; l < values.size(); ++l) {
        labels[qn->box.labels[l].name] = values[l] ? json(*values[l]) : json(nullptr);
      }
      json row;
      row["binding"] = std::move(binding);
      row["labels"] = std::move(labels);
      row["satisfied"] = node->cbs_excluded[i] ? json(nullptr) : json(node->satisfied(i));
      row["cbsExcluded"] = node->cbs_excluded[i] != 0;
      row["ancestorExcluded"] = node->ancestor_excluded[i] != 0;
      rows.push_back(std::move(row));
    }
    json out;
    out["total"] = visible.size();
    out["offset"] = offset;
    out["limit"] = limit;
    out["columns"] = std::move(columns);
    out["rows"] = std::move(rows);
    reply(res, 200, out);
  }
};

ApiServer::ApiServer(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) { impl_->routes(); }

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  if (impl_->port >= 0) return impl_->port;
  if (impl_->options.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->options.host);
  } else if (impl_->server.bind_to_port(impl_->options.host, impl_->options.port)) {
    impl_->port = impl_->options.port;
  }
  if (impl_->port < 0) {
    throw std::runtime_error("cannot bind " + impl_->options.host + ":" + std::to_string(impl_->options.port));
  }
  return impl_->port;
}

void ApiServer::listen() {
  bind();
  impl_->server.listen_after_bind();
}

void ApiServer::stop() { impl_->server.stop(); }

void ApiServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace ocpq
