#include "rasr/http_backends.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rasr/errors.hpp"
#include "http_util.hpp"

namespace rasr {

namespace {

// One-shot POST shared by both backends; connection-level failure maps to
// RemoteUnavailable, any non-200 reply to Error.
std::string post_json(const std::string& base_url, const std::string& route,
                      const std::string& payload, int timeout_s,
                      const std::string& what) {
  const auto [host, prefix] = detail::split_endpoint(base_url);
  httplib::Client client(host);
  client.set_connection_timeout(timeout_s, 0);
  client.set_read_timeout(timeout_s, 0);
  httplib::Result res = client.Post(prefix + route, payload, "application/json");
  if (!res) {
    throw RemoteUnavailable(what + " unreachable at " + base_url + ": " +
                            httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(what + " returned status " + std::to_string(res->status));
  }
  return res->body;
}

std::string extract_text(const std::string& body, const std::string& what) {
  const nlohmann::json reply = nlohmann::json::parse(body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("text") ||
      !reply["text"].is_string()) {
    throw Error(what + " returned malformed body (expected {\"text\": str})");
  }
  return reply["text"].get<std::string>();
}

}  // namespace

HttpAsrBackend::HttpAsrBackend(std::string base_url, int timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {
  if (base_url_.empty()) throw Error("ASR backend URL must be non-empty");
}

std::string HttpAsrBackend::first_pass(const std::string& audio_ref) {
  const nlohmann::json body{{"audio_ref", audio_ref}};
  return extract_text(post_json(base_url_, "/first_pass", body.dump(),
                                timeout_s_, "ASR service"),
                      "ASR service");
}

HttpContextualDecoder::HttpContextualDecoder(std::string base_url, int timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {
  if (base_url_.empty()) throw Error("decoder backend URL must be non-empty");
}

std::string HttpContextualDecoder::decode(const PromptSequence& prompt) {
  prompt.validate();
  nlohmann::json segments = nlohmann::json::array();
  for (const PromptSegment& seg : prompt.segments) {
    segments.push_back({{"kind", segment_kind_name(seg.kind)},
                        {"payload", seg.payload}});
  }
  const nlohmann::json body{{"segments", std::move(segments)}};
  return extract_text(post_json(base_url_, "/decode", body.dump(), timeout_s_,
                                "decoder service"),
                      "decoder service");
}

std::unique_ptr<AsrBackend> make_asr_backend(
    const std::string& id, double mock_corruption_rate, std::uint64_t mock_seed,
    std::map<std::string, std::string> mock_references) {
  if (id == "mock") {
    return std::make_unique<MockAsrBackend>(mock_corruption_rate, mock_seed,
                                            std::move(mock_references));
  }
  if (id.rfind("http:", 0) == 0) {
    std::string url = id.substr(5);
    // Accept both "http:localhost:8080" and a full "http://host" URL.
    if (url.rfind("//", 0) == 0) url = "http:" + url;
    return std::make_unique<HttpAsrBackend>(url);
  }
  throw ConfigError("unknown ASR backend '" + id +
                    "' (expected mock or http:<url>)");
}

std::unique_ptr<ContextualDecoder> make_decoder_backend(const std::string& id) {
  if (id == "mock") return std::make_unique<MockContextualDecoder>();
  if (id.rfind("http:", 0) == 0) {
    std::string url = id.substr(5);
    if (url.rfind("//", 0) == 0) url = "http:" + url;
    return std::make_unique<HttpContextualDecoder>(url);
  }
  throw ConfigError("unknown decoder backend '" + id +
                    "' (expected mock or http:<url>)");
}

}  // namespace rasr
