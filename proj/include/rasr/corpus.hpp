#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rasr {

/// One transcribed utterance as it arrives from the corpus source.
/// `duration_s` is clip metadata only; clips longer than 30 s are rejected.
struct UtteranceRecord {
  std::string talk_id;
  std::string utterance_id;
  std::int64_t start_index = 0;
  std::string text;
  std::optional<double> duration_s;
  std::optional<std::string> audio_ref;

  void validate() const;  // throws Error on bad duration
};

/// Half-open range of Unicode scalar offsets into TalkRecord::text.
struct UtteranceSpan {
  std::string utterance_id;
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const UtteranceSpan&) const = default;
};

/// A talk's normalized transcript: utterances joined in start_index order
/// with a single space. Spans cover every non-separator scalar of `text`.
struct TalkRecord {
  std::string talk_id;
  std::string text;
  std::vector<UtteranceSpan> utterance_spans;
};

struct ChunkingConfig {
  std::size_t chunk_size = 512;  // Unicode scalar values
  std::size_t overlap = 50;

  void validate() const;  // requires 0 <= overlap < chunk_size, chunk_size >= 1
};

/// An overlapping slice of a talk document; the unit of embedding and
/// retrieval. Offsets are Unicode scalar values into TalkRecord::text.
struct Chunk {
  std::string chunk_id;  // "<talk_id>:<zero-padded start>"
  std::string talk_id;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string text;
};

/// NFKC normalization plus whitespace-run collapse and trimming. Idempotent.
std::string normalize_text(std::string_view raw);

/// Joins the normalized utterance texts in start_index order with a single
/// space and records per-utterance spans. Throws MixedTalkError if the
/// utterances span multiple talks, EmptyInputError on an empty list.
TalkRecord build_talk(std::vector<UtteranceRecord> utterances);

/// Fixed-stride slicing: starts at 0, stride = chunk_size - overlap, the final
/// chunk keeps the remainder. Every scalar of the text lands in at least one
/// chunk; an empty or sub-size text yields exactly one chunk.
std::vector<Chunk> split_chunks(const TalkRecord& talk, const ChunkingConfig& cfg);

/// Reads UTF-8 line-delimited JSON utterance records and assembles one
/// TalkRecord per distinct talk_id (in order of first appearance).
/// Throws ParseError with the offending 1-based line number.
std::vector<TalkRecord> load_corpus(std::istream& source);

/// Parses a single corpus line. Exposed for tooling and round-trip tests.
UtteranceRecord parse_utterance_line(std::string_view line, std::size_t line_no = 0);

/// Serializes a record back to the corpus line format.
std::string to_corpus_line(const UtteranceRecord& rec);

}  // namespace rasr
