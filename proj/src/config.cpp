#include "rasr/config.hpp"

#include "rasr/errors.hpp"

namespace rasr {

void AppConfig::validate() const {
  if (k < 1) throw ConfigError("k must be >= 1, got " + std::to_string(k));
  try {
    chunking.validate();
    embedder.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!(mock_corruption_rate >= 0.0 && mock_corruption_rate <= 1.0)) {
    throw ConfigError("mock corruption rate must be in [0,1]");
  }
  if (server.port < 0 || server.port > 65535) {
    throw ConfigError("port must be in [0, 65535]");
  }
  if (workers < 0) throw ConfigError("workers must be >= 0");
  const auto backend_ok = [](const std::string& id) {
    return id == "mock" || id.rfind("http:", 0) == 0;
  };
  if (!backend_ok(asr_backend)) {
    throw ConfigError("ASR backend must be mock or http:<url>, got '" +
                      asr_backend + "'");
  }
  if (!backend_ok(decoder_backend)) {
    throw ConfigError("decoder backend must be mock or http:<url>, got '" +
                      decoder_backend + "'");
  }
}

nlohmann::json AppConfig::to_json() const {
  nlohmann::json embedder_json{
      {"provider", embedder.provider == EmbedderProvider::Remote
                       ? "remote"
                       : "deterministic"},
      {"dim", embedder.dim},
      {"ngram_order", embedder.ngram_order},
      {"hash_seed", embedder.hash_seed}};
  if (embedder.provider == EmbedderProvider::Remote) {
    embedder_json["endpoint"] = embedder.remote_endpoint;
    embedder_json["model"] = embedder.remote_model;
    embedder_json["batch_size"] = embedder.batch_size;
  }
  return nlohmann::json{{"db", db_path},
                        {"k", k},
                        {"chunk_size", chunking.chunk_size},
                        {"overlap", chunking.overlap},
                        {"embedder", std::move(embedder_json)},
                        {"asr", asr_backend},
                        {"decoder", decoder_backend},
                        {"mock_corruption_rate", mock_corruption_rate},
                        {"mock_seed", mock_seed},
                        {"bind", server.bind_address},
                        {"port", server.port},
                        {"workers", workers}};
}

EmbedderSpec make_embedder_spec(const std::string& id, int dim, int ngram_order,
                                std::uint64_t hash_seed) {
  if (id == "deterministic") {
    return EmbedderSpec::deterministic(dim > 0 ? dim : 256, ngram_order,
                                       hash_seed);
  }
  if (id.rfind("remote:", 0) == 0) {
    std::string endpoint = id.substr(7);
    if (endpoint.rfind("//", 0) == 0) endpoint = "http:" + endpoint;
    return EmbedderSpec::remote(endpoint, dim > 0 ? dim : 1024);
  }
  throw ConfigError("unknown embedder '" + id +
                    "' (expected deterministic or remote:<endpoint>)");
}

}  // namespace rasr
