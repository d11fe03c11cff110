#include "rasr/prompting.hpp"

#include <algorithm>
#include <charconv>

#include "rasr/errors.hpp"
#include "rasr/unicode.hpp"

namespace rasr {

namespace {

constexpr const char* kDefaultInstructionText =
    "Task Instruction: Transcribe the Audio strictly following its content. "
    "Use context to verify technical terms and domain-specific vocabulary "
    "when uncertain. Ensure the transcription reflects exactly what is "
    "spoken, with context aiding in clarifying domain-related ambiguities.";

int kind_rank(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Instruction:
      return 0;
    case SegmentKind::Context:
      return 1;
    case SegmentKind::AudioPlaceholder:
      return 2;
    case SegmentKind::HypothesisPrefix:
      return 3;
  }
  throw Error("unreachable segment kind");
}

std::optional<SegmentKind> kind_from_name(const std::string& name) {
  if (name == "instruction") return SegmentKind::Instruction;
  if (name == "context") return SegmentKind::Context;
  if (name == "audio") return SegmentKind::AudioPlaceholder;
  if (name == "hypothesis") return SegmentKind::HypothesisPrefix;
  return std::nullopt;
}

bool parse_size(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

InstructionPrompt default_instruction() {
  return InstructionPrompt{kDefaultInstructionText};
}

std::string segment_kind_name(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Instruction:
      return "instruction";
    case SegmentKind::Context:
      return "context";
    case SegmentKind::AudioPlaceholder:
      return "audio";
    case SegmentKind::HypothesisPrefix:
      return "hypothesis";
  }
  throw Error("unreachable segment kind");
}

void PromptSequence::validate() const {
  int last_rank = -1;
  std::size_t audio_count = 0;
  for (const PromptSegment& seg : segments) {
    const int rank = kind_rank(seg.kind);
    if (rank <= last_rank) {
      throw Error("prompt segments out of canonical order (instruction, "
                  "context, audio, hypothesis; no duplicates)");
    }
    last_rank = rank;
    if (seg.kind == SegmentKind::AudioPlaceholder) {
      ++audio_count;
      if (seg.payload != kAudioToken) {
        throw Error("audio placeholder payload must be the literal token");
      }
      if (seg.audio_ref.empty()) {
        throw Error("audio placeholder requires a non-empty audio_ref");
      }
      if (seg.audio_ref.find('\n') != std::string::npos) {
        throw Error("audio_ref must not contain newlines");
      }
    } else {
      if (!seg.audio_ref.empty()) {
        throw Error("audio_ref is only valid on the audio placeholder");
      }
      if (seg.payload.empty()) {
        throw Error("empty " + segment_kind_name(seg.kind) +
                    " segment must be omitted, not present with no payload");
      }
    }
  }
  if (audio_count != 1) {
    throw Error("prompt must contain exactly one audio placeholder, found " +
                std::to_string(audio_count));
  }
}

std::size_t PromptSequence::total_chars() const {
  std::size_t total = 0;
  for (const PromptSegment& seg : segments) total += unicode::scalar_count(seg.payload);
  return total;
}

PromptSequence assemble_prompt(const std::optional<InstructionPrompt>& instruction,
                               const std::string& context,
                               const std::string& audio_ref,
                               const std::string& hypothesis_prefix,
                               std::optional<std::size_t> char_budget) {
  if (audio_ref.empty()) {
    throw EmptyInputError("assemble_prompt requires a non-empty audio_ref");
  }
  if (audio_ref.find('\n') != std::string::npos) {
    throw Error("audio_ref must not contain newlines");
  }
  if (instruction.has_value() && instruction->text.empty()) {
    throw EmptyInputError("enabled instruction prompt must have non-empty text");
  }

  const std::size_t instruction_len =
      instruction.has_value() ? unicode::scalar_count(instruction->text) : 0;
  const std::size_t placeholder_len = unicode::scalar_count(kAudioToken);
  std::size_t context_len = unicode::scalar_count(context);
  std::size_t hypothesis_len = unicode::scalar_count(hypothesis_prefix);

  std::string final_context = context;
  std::string final_hypothesis = hypothesis_prefix;

  if (char_budget.has_value()) {
    const std::size_t fixed = instruction_len + placeholder_len;
    if (fixed > *char_budget) {
      throw BudgetTooSmall("instruction and audio placeholder need " +
                           std::to_string(fixed) + " chars but budget is " +
                           std::to_string(*char_budget));
    }
    const std::size_t total = fixed + context_len + hypothesis_len;
    if (total > *char_budget) {
      std::size_t overflow = total - *char_budget;
      const std::size_t context_cut = std::min(overflow, context_len);
      final_context = unicode::scalar_prefix(context, context_len - context_cut);
      context_len -= context_cut;
      overflow -= context_cut;
      if (overflow > 0) {
        final_hypothesis =
            unicode::scalar_substr(hypothesis_prefix, overflow, hypothesis_len);
        hypothesis_len -= overflow;
      }
    }
  }

  PromptSequence seq;
  seq.char_budget = char_budget;
  if (instruction.has_value()) {
    seq.segments.push_back(
        PromptSegment{SegmentKind::Instruction, instruction->text, ""});
  }
  if (!final_context.empty()) {
    seq.segments.push_back(
        PromptSegment{SegmentKind::Context, std::move(final_context), ""});
  }
  seq.segments.push_back(
      PromptSegment{SegmentKind::AudioPlaceholder, kAudioToken, audio_ref});
  if (!final_hypothesis.empty()) {
    seq.segments.push_back(PromptSegment{SegmentKind::HypothesisPrefix,
                                         std::move(final_hypothesis), ""});
  }
  seq.validate();
  return seq;
}

std::string render_text(const PromptSequence& p) {
  p.validate();
  std::string out;
  if (p.char_budget.has_value()) {
    out += "@@budget[" + std::to_string(*p.char_budget) + "]\n";
  }
  for (const PromptSegment& seg : p.segments) {
    out += "@@" + segment_kind_name(seg.kind) + "[" +
           std::to_string(unicode::scalar_count(seg.payload)) + "]";
    if (seg.kind == SegmentKind::AudioPlaceholder) {
      out += " ref=" + seg.audio_ref;
    }
    out += "\n";
    out += seg.payload;
    out += "\n";
  }
  return out;
}

PromptSequence parse_text(const std::string& rendered) {
  PromptSequence seq;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool first_line = true;

  while (pos < rendered.size()) {
    const std::size_t eol = rendered.find('\n', pos);
    if (eol == std::string::npos) {
      throw ParseError("unterminated prompt header line", line_no + 1);
    }
    const std::string header = rendered.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;

    if (header.rfind("@@", 0) != 0) {
      throw ParseError("prompt header must start with @@", line_no);
    }
    const std::size_t open = header.find('[');
    const std::size_t close = header.find(']', open == std::string::npos ? 0 : open);
    if (open == std::string::npos || close == std::string::npos) {
      throw ParseError("malformed prompt header '" + header + "'", line_no);
    }
    const std::string name = header.substr(2, open - 2);
    std::size_t declared_len = 0;
    if (!parse_size(std::string_view(header).substr(open + 1, close - open - 1),
                    declared_len)) {
      throw ParseError("malformed length in prompt header '" + header + "'",
                       line_no);
    }
    const std::string tail = header.substr(close + 1);

    if (name == "budget") {
      if (!first_line || seq.char_budget.has_value()) {
        throw ParseError("budget line only allowed once, at the start", line_no);
      }
      if (!tail.empty()) {
        throw ParseError("unexpected text after budget header", line_no);
      }
      seq.char_budget = declared_len;
      first_line = false;
      continue;
    }
    first_line = false;

    const std::optional<SegmentKind> kind = kind_from_name(name);
    if (!kind.has_value()) {
      throw ParseError("unknown prompt segment kind '" + name + "'", line_no);
    }

    std::string audio_ref;
    if (*kind == SegmentKind::AudioPlaceholder) {
      if (tail.rfind(" ref=", 0) != 0) {
        throw ParseError("audio header requires ' ref=<audio_ref>'", line_no);
      }
      audio_ref = tail.substr(5);
    } else if (!tail.empty()) {
      throw ParseError("unexpected text after prompt header '" + header + "'",
                       line_no);
    }

    const std::string payload =
        unicode::scalar_prefix(std::string_view(rendered).substr(pos), declared_len);
    if (unicode::scalar_count(payload) != declared_len) {
      throw ParseError("prompt payload shorter than declared length", line_no);
    }
    pos += payload.size();
    line_no += static_cast<std::size_t>(
        std::count(payload.begin(), payload.end(), '\n'));
    if (pos >= rendered.size() || rendered[pos] != '\n') {
      throw ParseError("prompt payload must end with a newline", line_no);
    }
    ++pos;
    ++line_no;

    seq.segments.push_back(PromptSegment{*kind, payload, std::move(audio_ref)});
  }

  seq.validate();
  return seq;
}

}  // namespace rasr
