#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "rasr/errors.hpp"

namespace rasr {

/// Fixed-dimension semantic representation of a chunk or query.
using EmbeddingVector = Eigen::VectorXf;

enum class EmbedderProvider { DeterministicNGram, Remote };

struct EmbedderSpec {
  EmbedderProvider provider = EmbedderProvider::DeterministicNGram;
  int dim = 256;
  int ngram_order = 3;
  std::string remote_endpoint;
  std::string remote_model = "multilingual-e5-large";
  int batch_size = 32;
  std::uint64_t hash_seed = 0;
  int max_in_flight = 4;
  int timeout_s = 30;
  int max_retries = 3;
  int backoff_initial_ms = 100;  // doubled per retry

  void validate() const;

  static EmbedderSpec deterministic(int dim = 256, int ngram_order = 3,
                                    std::uint64_t hash_seed = 0);
  static EmbedderSpec remote(std::string endpoint, int dim = 1024);
};

// Published hashing constants for the deterministic n-gram provider. Vectors
// are identical across platforms as long as these stay fixed.
inline constexpr std::uint64_t kNGramAccumMultiplier = 0x9E3779B97F4A7C15ULL;
inline constexpr std::uint64_t kNGramMixMultiplier = 0xFF51AFD7ED558CCDULL;
inline constexpr int kNGramMixShift = 33;

/// Bucket index of one character n-gram: splitmix-style accumulation of the
/// scalar values followed by a 64-bit multiply-xorshift mix, reduced mod dim.
std::uint32_t ngram_bucket(std::u32string_view gram, std::uint64_t seed, int dim);

class Embedder {
 public:
  virtual ~Embedder() = default;

  virtual EmbeddingVector embed(std::string_view text) const = 0;

  /// Elementwise equal to mapping embed(); order preserved. A failed remote
  /// batch fails the whole call.
  virtual std::vector<EmbeddingVector> embed_batch(
      const std::vector<std::string>& texts) const;

  virtual int dim() const = 0;
};

/// Hashed character n-gram term-frequency vectors, L2-normalized. N-grams run
/// over Unicode scalar values with effective order min(ngram_order, length),
/// so every non-empty text has norm 1. Empty text maps to basis vector e_0.
class DeterministicNGramEmbedder : public Embedder {
 public:
  explicit DeterministicNGramEmbedder(const EmbedderSpec& spec);

  EmbeddingVector embed(std::string_view text) const override;
  int dim() const override { return dim_; }

 private:
  int dim_;
  int ngram_order_;
  std::uint64_t seed_;
};

/// Builds the provider described by the spec (DeterministicNGram or Remote).
std::unique_ptr<Embedder> make_embedder(const EmbedderSpec& spec);

/// Ascending-index dot product with a double accumulator. This is the one
/// summation order used for similarity scores, so results are bit-stable.
template <typename DerivedA, typename DerivedB>
double stable_dot(const Eigen::MatrixBase<DerivedA>& a,
                  const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("dot: dims " + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

template <typename Derived>
double stable_norm(const Eigen::MatrixBase<Derived>& v) {
  return std::sqrt(stable_dot(v, v));
}

/// cos(a, b) = a.b / (|a||b|), clamped to [-1, 1] against rounding.
/// Throws DimensionMismatch or ZeroNormError.
template <typename DerivedA, typename DerivedB>
double cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                         const Eigen::MatrixBase<DerivedB>& b) {
  const double dot = stable_dot(a, b);
  const double na = stable_norm(a);
  const double nb = stable_norm(b);
  if (na == 0.0 || nb == 0.0) throw ZeroNormError("cosine of zero-norm vector");
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

/// In-place L2 normalization using the stable norm. Throws ZeroNormError.
void l2_normalize(EmbeddingVector& v);

}  // namespace rasr
