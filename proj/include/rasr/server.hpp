#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "rasr/pipeline.hpp"

namespace httplib {
class Server;
}

namespace rasr {

struct ServerDeps {
  const VectorStore* store = nullptr;
  Embedder* embedder = nullptr;
  AsrBackend* asr = nullptr;
  ContextualDecoder* decoder = nullptr;
  int default_k = 2;
  std::optional<InstructionPrompt> instruction;
  std::optional<std::size_t> char_budget;
};

// HTTP front-end over the loaded store and backends.
//
//   GET  /health         -> {"status":"ok","chunks":N}
//   POST /v1/retrieve    -> retrieval result for {query_text, mode, k?,
//                           exclude_talk_ids?}
//   POST /v1/transcribe  -> two-pass result for {utterance_id, talk_id,
//                           audio_ref, mode, with_instruction?, k?}
//
// Statuses: 400 malformed body, 422 semantic violations (unknown mode, bad k,
// dimension mismatches, transcript required), 502 backend unreachable,
// 503 while draining, 500 otherwise.
class RasrServer {
 public:
  explicit RasrServer(ServerDeps deps);
  ~RasrServer();

  RasrServer(const RasrServer&) = delete;
  RasrServer& operator=(const RasrServer&) = delete;

  // Blocks until stop(); false when the address cannot be bound.
  bool listen(const std::string& bind_address, int port);

  // Binds an ephemeral port and serves on a background thread; returns the
  // port. Intended for tests.
  int start_background(const std::string& bind_address = "127.0.0.1");

  // Graceful shutdown: new requests get 503 while in-flight handlers finish.
  void stop();

 private:
  void route();

  ServerDeps deps_;
  std::unique_ptr<httplib::Server> server_;
  std::thread background_;
  std::atomic<bool> draining_{false};
};

}  // namespace rasr
