#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "rasr/corpus.hpp"
#include "rasr/embedding.hpp"

namespace rasr {

struct ServerConfig {
  std::string bind_address = "127.0.0.1";
  int port = 8080;
};

// Resolved application configuration. Sources, strongest first: command-line
// flag, RASR_* environment variable, config file, built-in default.
struct AppConfig {
  std::string db_path;
  EmbedderSpec embedder = EmbedderSpec::deterministic();
  int k = 2;
  ChunkingConfig chunking;  // 512 / 50
  std::string asr_backend = "mock";
  std::string decoder_backend = "mock";
  double mock_corruption_rate = 0.1;
  std::uint64_t mock_seed = 0;
  ServerConfig server;
  int workers = 0;  // 0 = hardware concurrency

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
};

// Builds an EmbedderSpec from the CLI identifier "deterministic" or
// "remote:<endpoint>". A dim of 0 selects the provider default (256 hashed
// n-gram buckets, 1024 for remote) — or, where a store is already open, the
// caller substitutes the store's dimension.
EmbedderSpec make_embedder_spec(const std::string& id, int dim = 0,
                                int ngram_order = 3,
                                std::uint64_t hash_seed = 0);

}  // namespace rasr
