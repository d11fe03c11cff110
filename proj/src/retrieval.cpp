#include "rasr/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <random>

#include "rasr/errors.hpp"
#include "rasr/rng.hpp"
#include "rasr/unicode.hpp"

namespace rasr {

namespace {

// Strict non-negative integer parse of an entire string.
template <typename T>
bool parse_uint(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

QueryMode QueryMode::prefix(int n) {
  if (n < 1) throw ConfigError("prefix length must be >= 1, got " + std::to_string(n));
  QueryMode m;
  m.kind = Kind::Prefix;
  m.prefix_len = n;
  return m;
}

QueryMode QueryMode::full() {
  QueryMode m;
  m.kind = Kind::FullHypothesis;
  return m;
}

QueryMode QueryMode::oracle() {
  QueryMode m;
  m.kind = Kind::TranscriptOracle;
  return m;
}

QueryMode QueryMode::random_baseline(std::uint64_t seed) {
  QueryMode m;
  m.kind = Kind::RandomBaseline;
  m.seed = seed;
  return m;
}

std::string QueryMode::label() const {
  switch (kind) {
    case Kind::Prefix:
      return "prefix:" + std::to_string(prefix_len);
    case Kind::FullHypothesis:
      return "full";
    case Kind::TranscriptOracle:
      return "oracle";
    case Kind::RandomBaseline:
      return "rand:" + std::to_string(seed);
  }
  throw Error("unreachable query mode kind");
}

QueryMode QueryMode::parse(const std::string& label) {
  if (label == "full") return full();
  if (label == "oracle") return oracle();
  if (label.rfind("prefix:", 0) == 0) {
    int n = 0;
    if (!parse_uint(label.substr(7), n) || n < 1) {
      throw ConfigError("invalid prefix length in query mode '" + label + "'");
    }
    return prefix(n);
  }
  if (label.rfind("rand:", 0) == 0) {
    std::uint64_t seed = 0;
    if (!parse_uint(label.substr(5), seed)) {
      throw ConfigError("invalid seed in query mode '" + label + "'");
    }
    return random_baseline(seed);
  }
  throw ConfigError("unknown query mode '" + label +
                    "' (expected prefix:<N>, full, oracle, or rand:<seed>)");
}

void RetrievalRequest::validate() const {
  if (k < 1) throw Error("retrieval k must be >= 1, got " + std::to_string(k));
}

std::string build_query(const std::string& hypothesis,
                        const std::optional<std::string>& transcript,
                        const QueryMode& mode) {
  switch (mode.kind) {
    case QueryMode::Kind::Prefix:
      return unicode::scalar_prefix(hypothesis, static_cast<std::size_t>(mode.prefix_len));
    case QueryMode::Kind::FullHypothesis:
      return hypothesis;
    case QueryMode::Kind::TranscriptOracle:
      if (!transcript.has_value()) {
        throw MissingTranscriptError(
            "transcript-oracle query mode requires a transcript");
      }
      return *transcript;
    case QueryMode::Kind::RandomBaseline:
      return hypothesis;
  }
  throw Error("unreachable query mode kind");
}

RetrievalResult retrieve(const RetrievalRequest& req, const QueryMode& mode,
                         const VectorStore& store, Embedder& embedder) {
  req.validate();
  QueryFilter filter;
  filter.exclude_talk_ids = req.exclude_talk_ids;

  RetrievalResult result;
  result.mode = mode;
  result.query_text = req.query_text;

  if (mode.kind != QueryMode::Kind::RandomBaseline) {
    EmbeddingVector q = embedder.embed(req.query_text);
    result.chunks = store.top_k(q, req.k, filter);
    return result;
  }

  // Uniform sample without replacement over the eligible snapshot, via
  // selection sampling in insertion order.
  std::vector<StoreEntry> eligible = store.eligible_entries(filter);
  const std::size_t n = eligible.size();
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(req.k), n);
  std::vector<StoreEntry> sample;
  sample.reserve(take);
  std::mt19937_64 gen(mode.seed);
  for (std::size_t i = 0; i < n && sample.size() < take; ++i) {
    const std::uint64_t remaining = n - i;
    const std::uint64_t needed = take - sample.size();
    if (rng::uniform_below(gen, remaining) < needed) {
      sample.push_back(std::move(eligible[i]));
    }
  }

  EmbeddingVector q = embedder.embed(req.query_text);
  l2_normalize(q);
  for (StoreEntry& entry : sample) {
    double score = stable_dot(q, entry.vector);
    score = std::clamp(score, -1.0, 1.0);
    result.chunks.push_back(ScoredChunk{std::move(entry), score});
  }
  std::sort(result.chunks.begin(), result.chunks.end(),
            [](const ScoredChunk& a, const ScoredChunk& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.entry.chunk_id < b.entry.chunk_id;
            });
  return result;
}

std::string format_context(const RetrievalResult& result) {
  std::string out;
  for (std::size_t i = 0; i < result.chunks.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "[doc " + std::to_string(i + 1) + "] ";
    out += result.chunks[i].entry.text;
  }
  return out;
}

nlohmann::json retrieval_result_to_json(const RetrievalResult& result) {
  nlohmann::json chunks = nlohmann::json::array();
  for (const ScoredChunk& sc : result.chunks) {
    chunks.push_back({{"chunk_id", sc.entry.chunk_id},
                      {"talk_id", sc.entry.talk_id},
                      {"score", sc.score},
                      {"text", sc.entry.text}});
  }
  return nlohmann::json{{"mode", result.mode.label()},
                        {"query_text", result.query_text},
                        {"chunks", std::move(chunks)}};
}

}  // namespace rasr
