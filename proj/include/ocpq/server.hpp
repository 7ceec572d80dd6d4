#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>

namespace ocpq {

struct ServerOptions {
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 8080;
  /// Directory served at "/" (the editor bundle); empty disables static files.
  std::string static_dir;
  std::size_t max_log_bytes = std::size_t{1} << 30;
  /// Logs and results kept per registry before least-recently-used eviction.
  std::size_t cache_capacity = 32;
  std::chrono::seconds request_timeout{120};
  unsigned threads = 0;
  std::size_t max_rows_per_node = 10'000'000;
};

/// HTTP API over ingestion and evaluation:
///   POST /api/log                                  OCEL 2.0 JSON -> log metadata
///   GET  /api/log/{logId}/info                     log metadata
///   POST /api/query/evaluate                       {logId, tree} -> {resultId, perNode}
///   GET  /api/result/{resultId}/node/{nodeId}      ?offset&limit&includeBasicOnly
///   GET  /api/result/{resultId}/node/{nodeId}/export.csv
class ApiServer {
 public:
  explicit ApiServer(ServerOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds the listening socket and returns the bound port; throws std::runtime_error on failure.
  int bind();
  /// Serves until stop(); binds first when bind() was not called.
  void listen();
  void stop();
  /// Blocks until the server accepts connections.
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ocpq
