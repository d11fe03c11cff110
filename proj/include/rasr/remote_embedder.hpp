#pragma once

#include <semaphore>
#include <string>
#include <vector>

#include "rasr/embedding.hpp"

namespace rasr {

/// HTTP client for an external embedding service:
///   POST {endpoint}/embed  {"texts": [string], "model": string}
///   ->   {"vectors": [[number]]}
/// Retries RemoteUnavailable with exponential backoff (max_retries attempts
/// after the first). Vectors are returned verbatim; a wrong dimension is
/// fatal (DimensionMismatch). Concurrent use is bounded by max_in_flight.
class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(const EmbedderSpec& spec);

  EmbeddingVector embed(std::string_view text) const override;
  std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) const override;
  int dim() const override { return spec_.dim; }

 private:
  std::vector<EmbeddingVector> call_service(const std::vector<std::string>& texts) const;

  EmbedderSpec spec_;
  std::string host_;  // scheme://host:port
  std::string path_prefix_;
  mutable std::counting_semaphore<> in_flight_;
};

}  // namespace rasr
