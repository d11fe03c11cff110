#include "rasr/corpus.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "rasr/errors.hpp"
#include "rasr/unicode.hpp"

namespace rasr {

namespace {
constexpr double kMaxClipSeconds = 30.0;
}

void UtteranceRecord::validate() const {
  if (talk_id.empty()) throw Error("utterance has empty talk_id");
  if (utterance_id.empty()) throw Error("utterance has empty utterance_id");
  if (duration_s && (*duration_s < 0.0 || *duration_s > kMaxClipSeconds)) {
    throw Error("duration_s out of range [0, 30]: " + std::to_string(*duration_s));
  }
}

void ChunkingConfig::validate() const {
  if (chunk_size < 1) throw Error("chunk_size must be >= 1");
  if (overlap >= chunk_size) throw Error("overlap must be < chunk_size");
}

std::string normalize_text(std::string_view raw) {
  return unicode::collapse_whitespace(unicode::nfkc(raw));
}

TalkRecord build_talk(std::vector<UtteranceRecord> utterances) {
  if (utterances.empty()) throw EmptyInputError("build_talk: no utterances");
  const std::string& talk_id = utterances.front().talk_id;
  for (const auto& u : utterances) {
    if (u.talk_id != talk_id) {
      throw MixedTalkError("build_talk: mixed talk_ids '" + talk_id + "' and '" +
                           u.talk_id + "'");
    }
  }
  std::stable_sort(utterances.begin(), utterances.end(),
                   [](const UtteranceRecord& a, const UtteranceRecord& b) {
                     return a.start_index < b.start_index;
                   });
  for (std::size_t i = 1; i < utterances.size(); ++i) {
    if (utterances[i].start_index == utterances[i - 1].start_index) {
      throw Error("build_talk: duplicate start_index " +
                  std::to_string(utterances[i].start_index) + " in talk '" +
                  talk_id + "'");
    }
  }

  TalkRecord talk;
  talk.talk_id = talk_id;
  std::size_t pos = 0;  // scalar offset into talk.text
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    if (i > 0) {
      talk.text.push_back(' ');
      ++pos;
    }
    std::string piece = normalize_text(utterances[i].text);
    const std::size_t len = unicode::scalar_count(piece);
    talk.utterance_spans.push_back({utterances[i].utterance_id, pos, pos + len});
    talk.text += piece;
    pos += len;
  }
  return talk;
}

std::vector<Chunk> split_chunks(const TalkRecord& talk, const ChunkingConfig& cfg) {
  cfg.validate();
  const std::u32string scalars = unicode::decode_utf8(talk.text);
  const std::size_t len = scalars.size();
  const std::size_t stride = cfg.chunk_size - cfg.overlap;

  std::vector<Chunk> chunks;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = std::min(start + cfg.chunk_size, len);
    Chunk c;
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), ":%08zu", start);
    c.chunk_id = talk.talk_id + suffix;
    c.talk_id = talk.talk_id;
    c.begin = start;
    c.end = end;
    c.text = unicode::encode_utf8(
        std::u32string_view(scalars).substr(start, end - start));
    chunks.push_back(std::move(c));
    if (start + cfg.chunk_size >= len) break;
    start += stride;
  }
  return chunks;
}

UtteranceRecord parse_utterance_line(std::string_view line, std::size_t line_no) {
  nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw ParseError("not a JSON object", line_no);
  }
  UtteranceRecord rec;
  try {
    rec.talk_id = obj.at("talk_id").get<std::string>();
    rec.utterance_id = obj.at("utterance_id").get<std::string>();
    rec.start_index = obj.at("index").get<std::int64_t>();
    rec.text = obj.at("text").get<std::string>();
    if (obj.contains("duration_s") && !obj["duration_s"].is_null()) {
      rec.duration_s = obj["duration_s"].get<double>();
    }
    if (obj.contains("audio_ref") && !obj["audio_ref"].is_null()) {
      rec.audio_ref = obj["audio_ref"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad utterance record: ") + e.what(), line_no);
  }
  try {
    rec.validate();
  } catch (const Error& e) {
    throw ParseError(e.what(), line_no);
  }
  return rec;
}

std::string to_corpus_line(const UtteranceRecord& rec) {
  nlohmann::json obj;
  obj["talk_id"] = rec.talk_id;
  obj["utterance_id"] = rec.utterance_id;
  obj["index"] = rec.start_index;
  obj["text"] = rec.text;
  if (rec.duration_s) obj["duration_s"] = *rec.duration_s;
  if (rec.audio_ref) obj["audio_ref"] = *rec.audio_ref;
  return obj.dump();
}

std::vector<TalkRecord> load_corpus(std::istream& source) {
  std::map<std::string, std::vector<UtteranceRecord>> by_talk;
  std::vector<std::string> talk_order;
  std::map<std::string, std::unordered_set<std::string>> seen_ids;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (line.empty()) continue;
    UtteranceRecord rec = parse_utterance_line(line, line_no);
    auto& ids = seen_ids[rec.talk_id];
    if (!ids.insert(rec.utterance_id).second) {
      throw ParseError("duplicate utterance_id '" + rec.utterance_id +
                           "' in talk '" + rec.talk_id + "'",
                       line_no);
    }
    if (by_talk.find(rec.talk_id) == by_talk.end()) talk_order.push_back(rec.talk_id);
    by_talk[rec.talk_id].push_back(std::move(rec));
  }

  std::vector<TalkRecord> talks;
  talks.reserve(talk_order.size());
  for (const auto& id : talk_order) talks.push_back(build_talk(std::move(by_talk[id])));
  return talks;
}

}  // namespace rasr
