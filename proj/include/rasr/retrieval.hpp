#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rasr/embedding.hpp"
#include "rasr/vector_store.hpp"

namespace rasr {

// How the retrieval query is derived from the recognizer output (or, during
// training, from the reference transcript).
struct QueryMode {
  enum class Kind {
    Prefix,            // first N scalar values of the hypothesis
    FullHypothesis,    // the whole hypothesis
    TranscriptOracle,  // the reference transcript (training-phase queries)
    RandomBaseline,    // ignore similarity; sample k eligible chunks uniformly
  };

  Kind kind = Kind::FullHypothesis;
  int prefix_len = 0;      // meaningful only for Kind::Prefix; always >= 1
  std::uint64_t seed = 0;  // meaningful only for Kind::RandomBaseline

  static QueryMode prefix(int n);
  static QueryMode full();
  static QueryMode oracle();
  static QueryMode random_baseline(std::uint64_t seed);

  // Canonical labels: "prefix:<N>", "full", "oracle", "rand:<seed>".
  std::string label() const;
  static QueryMode parse(const std::string& label);

  bool operator==(const QueryMode&) const = default;
};

struct RetrievalRequest {
  std::string query_text;
  int k = 2;
  std::set<std::string> exclude_talk_ids;

  void validate() const;  // throws Error if k < 1
};

struct RetrievalResult {
  std::vector<ScoredChunk> chunks;  // ordered by (score desc, chunk_id asc)
  QueryMode mode;
  std::string query_text;
};

// Derives the query text for a mode. TranscriptOracle requires a transcript
// (MissingTranscriptError otherwise); RandomBaseline keeps the hypothesis as
// the query text — the randomness applies at selection time in retrieve().
std::string build_query(const std::string& hypothesis,
                        const std::optional<std::string>& transcript,
                        const QueryMode& mode);

// Fetches up to req.k chunks. Non-random modes embed req.query_text and rank
// by cosine similarity; RandomBaseline samples uniformly without replacement
// from the eligible (post-filter) entries, reporting true cosine scores, and
// orders the sample by the same (score desc, chunk_id asc) rule.
RetrievalResult retrieve(const RetrievalRequest& req, const QueryMode& mode,
                         const VectorStore& store, Embedder& embedder);

// Joins chunk texts in result order, each prefixed "[doc i] " (1-based) and
// separated by a blank line. Empty result -> "".
std::string format_context(const RetrievalResult& result);

// JSON form used by the CLI and the HTTP service (vectors omitted).
nlohmann::json retrieval_result_to_json(const RetrievalResult& result);

}  // namespace rasr
