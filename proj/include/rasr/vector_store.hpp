#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rasr/embedding.hpp"

namespace rasr {

/// One stored chunk. The vector is kept L2-normalized so a query costs a
/// single dot product.
struct StoreEntry {
  std::string chunk_id;
  std::string talk_id;
  EmbeddingVector vector;
  std::string text;
};

struct QueryFilter {
  std::set<std::string> exclude_talk_ids;

  bool excludes(const std::string& talk_id) const {
    return exclude_talk_ids.count(talk_id) > 0;
  }
};

struct ScoredChunk {
  StoreEntry entry;
  double score = 0.0;  // cosine similarity, in [-1, 1]
};

/// Exact-scan vector database over pre-normalized embeddings. Readers share;
/// upsert/load take the store exclusively, so queries never observe a
/// partially applied batch.
class VectorStore {
 public:
  explicit VectorStore(int dim);

  // Moves are for construction-time handoff only; they do not synchronize.
  VectorStore(VectorStore&& other) noexcept
      : dim_(other.dim_),
        entries_(std::move(other.entries_)),
        by_chunk_id_(std::move(other.by_chunk_id_)) {}
  VectorStore& operator=(VectorStore&& other) noexcept {
    dim_ = other.dim_;
    entries_ = std::move(other.entries_);
    by_chunk_id_ = std::move(other.by_chunk_id_);
    return *this;
  }

  int dim() const { return dim_; }
  std::size_t size() const;

  /// Inserts or replaces by chunk_id; vectors are normalized on the way in.
  /// Returns the number of entries applied. Throws DimensionMismatch if any
  /// entry disagrees with the store dim, ZeroNormError on a zero vector.
  std::size_t upsert(std::vector<StoreEntry> entries);
  std::size_t upsert(StoreEntry entry);

  /// Exact top-k by cosine score (dot product of normalized vectors, computed
  /// with the stable ascending-index summation). Results sorted by score
  /// descending, ties broken by ascending chunk_id; excluded talks never
  /// appear; length = min(k, eligible entries). An empty store yields an
  /// empty list. The query need not be normalized.
  std::vector<ScoredChunk> top_k(const EmbeddingVector& query, int k,
                                 const QueryFilter& filter = {}) const;

  std::optional<StoreEntry> get(std::string_view chunk_id) const;

  /// Snapshot of entries passing the filter, in insertion order.
  std::vector<StoreEntry> eligible_entries(const QueryFilter& filter) const;

  /// Binary format: magic "RASRVDB1", u32 dim, u64 count, per record
  /// length-prefixed chunk_id / talk_id / text plus dim f32 values (all
  /// little-endian), then CRC32 of everything after the magic.
  void save(const std::filesystem::path& path) const;
  static VectorStore load(const std::filesystem::path& path);

 private:
  int dim_;
  std::vector<StoreEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_chunk_id_;
  mutable std::shared_mutex mutex_;
};

}  // namespace rasr
