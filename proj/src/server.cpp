#include "rasr/server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rasr/errors.hpp"
#include "rasr/logging.hpp"

namespace rasr {

namespace {

void reply_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, status, nlohmann::json{{"error", message}});
}

// Maps an exception thrown by a handler to an HTTP status.
void reply_exception(httplib::Response& res) {
  try {
    throw;
  } catch (const RemoteUnavailable& e) {
    reply_error(res, 502, e.what());
  } catch (const MissingTranscriptError& e) {
    reply_error(res, 422, e.what());
  } catch (const ConfigError& e) {
    reply_error(res, 422, e.what());
  } catch (const DimensionMismatch& e) {
    reply_error(res, 422, e.what());
  } catch (const ZeroNormError& e) {
    reply_error(res, 422, e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, e.what());
  }
}

// Returns false (and writes the 400/422 reply) when the field is unusable.
bool read_string(const nlohmann::json& body, const char* field, bool required,
                 std::string& out, httplib::Response& res) {
  if (!body.contains(field)) {
    if (required) {
      reply_error(res, 400, std::string("missing required field '") + field +
                                "'");
      return false;
    }
    return true;
  }
  if (!body[field].is_string()) {
    reply_error(res, 400, std::string("field '") + field + "' must be a string");
    return false;
  }
  out = body[field].get<std::string>();
  return true;
}

}  // namespace

RasrServer::RasrServer(ServerDeps deps)
    : deps_(deps), server_(std::make_unique<httplib::Server>()) {
  if (deps_.store == nullptr || deps_.embedder == nullptr) {
    throw Error("server needs a loaded store and an embedder");
  }
  route();
}

RasrServer::~RasrServer() { stop(); }

void RasrServer::route() {
  server_->set_pre_routing_handler(
      [this](const httplib::Request&, httplib::Response& res) {
        if (draining_.load()) {
          reply_error(res, 503, "server is shutting down");
          return httplib::Server::HandlerResponse::Handled;
        }
        return httplib::Server::HandlerResponse::Unhandled;
      });

  server_->Get("/health", [this](const httplib::Request&,
                                 httplib::Response& res) {
    reply_json(res, 200,
               nlohmann::json{{"status", "ok"}, {"chunks", deps_.store->size()}});
  });

  server_->Post("/v1/retrieve", [this](const httplib::Request& req,
                                       httplib::Response& res) {
    const nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      reply_error(res, 400, "request body must be a JSON object");
      return;
    }
    std::string query_text;
    std::string mode_label;
    if (!read_string(body, "query_text", /*required=*/true, query_text, res) ||
        !read_string(body, "mode", /*required=*/true, mode_label, res)) {
      return;
    }
    try {
      RetrievalRequest r;
      r.query_text = query_text;
      r.k = deps_.default_k;
      if (body.contains("k")) {
        if (!body["k"].is_number_integer()) {
          reply_error(res, 400, "field 'k' must be an integer");
          return;
        }
        r.k = body["k"].get<int>();
      }
      if (r.k < 1) {
        reply_error(res, 422, "k must be >= 1");
        return;
      }
      if (body.contains("exclude_talk_ids")) {
        if (!body["exclude_talk_ids"].is_array()) {
          reply_error(res, 400, "field 'exclude_talk_ids' must be an array");
          return;
        }
        for (const auto& id : body["exclude_talk_ids"]) {
          if (!id.is_string()) {
            reply_error(res, 400, "exclude_talk_ids entries must be strings");
            return;
          }
          r.exclude_talk_ids.insert(id.get<std::string>());
        }
      }
      const QueryMode mode = QueryMode::parse(mode_label);
      const RetrievalResult result =
          retrieve(r, mode, *deps_.store, *deps_.embedder);
      reply_json(res, 200, retrieval_result_to_json(result));
    } catch (...) {
      reply_exception(res);
    }
  });

  server_->Post("/v1/transcribe", [this](const httplib::Request& req,
                                         httplib::Response& res) {
    const nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      reply_error(res, 400, "request body must be a JSON object");
      return;
    }
    if (deps_.asr == nullptr || deps_.decoder == nullptr) {
      reply_error(res, 500, "no transcription backends configured");
      return;
    }
    EvalUtterance u;
    std::string mode_label;
    if (!read_string(body, "utterance_id", true, u.utterance_id, res) ||
        !read_string(body, "talk_id", true, u.talk_id, res) ||
        !read_string(body, "audio_ref", true, u.audio_ref, res) ||
        !read_string(body, "mode", true, mode_label, res)) {
      return;
    }
    try {
      bool with_instruction = true;
      if (body.contains("with_instruction")) {
        if (!body["with_instruction"].is_boolean()) {
          reply_error(res, 400, "field 'with_instruction' must be a boolean");
          return;
        }
        with_instruction = body["with_instruction"].get<bool>();
      }
      int k = deps_.default_k;
      if (body.contains("k")) {
        if (!body["k"].is_number_integer()) {
          reply_error(res, 400, "field 'k' must be an integer");
          return;
        }
        k = body["k"].get<int>();
      }
      std::optional<QueryMode> mode;
      if (mode_label != "none") mode = QueryMode::parse(mode_label);

      PipelineDeps deps;
      deps.store = deps_.store;
      deps.embedder = deps_.embedder;
      deps.asr = deps_.asr;
      deps.decoder = deps_.decoder;
      deps.instruction = deps_.instruction;
      deps.char_budget = deps_.char_budget;
      const TwoPassResult result =
          transcribe_two_pass(u, mode, with_instruction, k, deps);
      reply_json(res, 200, two_pass_result_to_json(result));
    } catch (...) {
      reply_exception(res);
    }
  });
}

bool RasrServer::listen(const std::string& bind_address, int port) {
  log::info("server_listening",
            {{"bind", bind_address}, {"port", port}});
  return server_->listen(bind_address, port);
}

int RasrServer::start_background(const std::string& bind_address) {
  const int port = server_->bind_to_any_port(bind_address);
  if (port < 0) throw Error("failed to bind " + bind_address);
  background_ = std::thread([this]() { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void RasrServer::stop() {
  draining_.store(true);
  if (server_) server_->stop();
  if (background_.joinable()) background_.join();
}

}  // namespace rasr
