#include "rasr/embedding.hpp"

#include "rasr/remote_embedder.hpp"
#include "rasr/unicode.hpp"

namespace rasr {

void EmbedderSpec::validate() const {
  if (dim < 2) throw Error("embedder dim must be >= 2");
  if (ngram_order < 1) throw Error("ngram_order must be >= 1");
  if (batch_size < 1) throw Error("batch_size must be >= 1");
  if (max_in_flight < 1) throw Error("max_in_flight must be >= 1");
  if (provider == EmbedderProvider::Remote && remote_endpoint.empty()) {
    throw Error("remote embedder requires an endpoint");
  }
}

EmbedderSpec EmbedderSpec::deterministic(int dim, int ngram_order,
                                         std::uint64_t hash_seed) {
  EmbedderSpec s;
  s.provider = EmbedderProvider::DeterministicNGram;
  s.dim = dim;
  s.ngram_order = ngram_order;
  s.hash_seed = hash_seed;
  return s;
}

EmbedderSpec EmbedderSpec::remote(std::string endpoint, int dim) {
  EmbedderSpec s;
  s.provider = EmbedderProvider::Remote;
  s.remote_endpoint = std::move(endpoint);
  s.dim = dim;
  return s;
}

std::uint32_t ngram_bucket(std::u32string_view gram, std::uint64_t seed, int dim) {
  std::uint64_t k = seed;
  for (char32_t cp : gram) {
    k = k * kNGramAccumMultiplier + static_cast<std::uint64_t>(cp);
  }
  k ^= k >> kNGramMixShift;
  k *= kNGramMixMultiplier;
  k ^= k >> kNGramMixShift;
  return static_cast<std::uint32_t>(k % static_cast<std::uint64_t>(dim));
}

std::vector<EmbeddingVector> Embedder::embed_batch(
    const std::vector<std::string>& texts) const {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed(t));
  return out;
}

DeterministicNGramEmbedder::DeterministicNGramEmbedder(const EmbedderSpec& spec)
    : dim_(spec.dim), ngram_order_(spec.ngram_order), seed_(spec.hash_seed) {
  spec.validate();
}

EmbeddingVector DeterministicNGramEmbedder::embed(std::string_view text) const {
  EmbeddingVector v = EmbeddingVector::Zero(dim_);
  const std::u32string scalars = unicode::decode_utf8(text);
  if (scalars.empty()) {
    v[0] = 1.0f;  // zero-guard basis vector: empty hypotheses still retrieve
    return v;
  }
  const std::size_t order =
      std::min<std::size_t>(static_cast<std::size_t>(ngram_order_), scalars.size());
  const std::u32string_view view(scalars);
  for (std::size_t i = 0; i + order <= scalars.size(); ++i) {
    v[ngram_bucket(view.substr(i, order), seed_, dim_)] += 1.0f;
  }
  l2_normalize(v);
  return v;
}

void l2_normalize(EmbeddingVector& v) {
  const double norm = stable_norm(v);
  if (norm == 0.0) throw ZeroNormError("cannot normalize zero vector");
  v = (v.cast<double>() / norm).cast<float>();
}

std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec) {
  spec.validate();
  switch (spec.provider) {
    case EmbedderProvider::DeterministicNGram:
      return std::make_unique<DeterministicNGramEmbedder>(spec);
    case EmbedderProvider::Remote:
      return std::make_unique<RemoteEmbedder>(spec);
  }
  throw Error("unknown embedder provider");
}

}  // namespace rasr
