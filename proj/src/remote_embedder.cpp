#include "rasr/remote_embedder.hpp"

#include <chrono>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rasr/logging.hpp"
#include "http_util.hpp"

namespace rasr {

using detail::split_endpoint;

RemoteEmbedder::RemoteEmbedder(const EmbedderSpec& spec)
    : spec_(spec), in_flight_(spec.max_in_flight) {
  spec_.validate();
  std::tie(host_, path_prefix_) = split_endpoint(spec_.remote_endpoint);
}

std::vector<EmbeddingVector> RemoteEmbedder::call_service(
    const std::vector<std::string>& texts) const {
  nlohmann::json body;
  body["texts"] = texts;
  body["model"] = spec_.remote_model;
  const std::string payload = body.dump();

  std::string last_error;
  int delay_ms = spec_.backoff_initial_ms;
  for (int attempt = 0; attempt <= spec_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms *= 2;
    }
    httplib::Client client(host_);
    client.set_connection_timeout(spec_.timeout_s, 0);
    client.set_read_timeout(spec_.timeout_s, 0);

    httplib::Result res;
    {
      std::counting_semaphore<>& sem = in_flight_;
      sem.acquire();
      res = client.Post(path_prefix_ + "/embed", payload, "application/json");
      sem.release();
    }

    if (!res) {
      last_error = "connect failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "service error, status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error("embedding service rejected request, status " +
                  std::to_string(res->status));
    }

    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("vectors") ||
        !reply["vectors"].is_array()) {
      throw Error("embedding service returned malformed body");
    }
    const auto& vectors = reply["vectors"];
    if (vectors.size() != texts.size()) {
      throw DimensionMismatch("embedding service returned " +
                              std::to_string(vectors.size()) + " vectors for " +
                              std::to_string(texts.size()) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const auto& row : vectors) {
      if (!row.is_array() || static_cast<int>(row.size()) != spec_.dim) {
        throw DimensionMismatch("embedding service returned dim " +
                                std::to_string(row.size()) + ", expected " +
                                std::to_string(spec_.dim));
      }
      EmbeddingVector v(spec_.dim);
      for (int i = 0; i < spec_.dim; ++i) v[i] = row[i].get<float>();
      out.push_back(std::move(v));
    }
    return out;
  }
  throw RemoteUnavailable("embedding service unavailable after " +
                          std::to_string(spec_.max_retries + 1) +
                          " attempts: " + last_error);
}

EmbeddingVector RemoteEmbedder::embed(std::string_view text) const {
  return call_service({std::string(text)}).front();
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(
    const std::vector<std::string>& texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (std::size_t at = 0; at < texts.size();
       at += static_cast<std::size_t>(spec_.batch_size)) {
    const std::size_t n =
        std::min<std::size_t>(spec_.batch_size, texts.size() - at);
    std::vector<std::string> slice(texts.begin() + at, texts.begin() + at + n);
    auto part = call_service(slice);
    for (auto& v : part) out.push_back(std::move(v));
  }
  return out;
}

}  // namespace rasr
