#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace rasr {

// Literal placeholder a contextual decoder substitutes with audio embeddings.
inline constexpr const char* kAudioToken = "<|audio|>";

struct InstructionPrompt {
  std::string text;
  bool operator==(const InstructionPrompt&) const = default;
};

// The bundled default instruction used by the contextual decoding pass.
InstructionPrompt default_instruction();

enum class SegmentKind {
  Instruction,
  Context,
  AudioPlaceholder,
  HypothesisPrefix,
};

// Canonical lowercase names used by the text rendering: "instruction",
// "context", "audio", "hypothesis".
std::string segment_kind_name(SegmentKind kind);

struct PromptSegment {
  SegmentKind kind;
  std::string payload;    // for AudioPlaceholder this is always kAudioToken
  std::string audio_ref;  // non-empty only for AudioPlaceholder
  bool operator==(const PromptSegment&) const = default;
};

// An ordered conditioning sequence for the decoder: optional instruction,
// optional retrieved context, exactly one audio placeholder, and an optional
// hypothesis prefix, in that order.
struct PromptSequence {
  std::vector<PromptSegment> segments;
  std::optional<std::size_t> char_budget;

  // Throws Error when the fixed segment order is violated or the sequence
  // does not contain exactly one AudioPlaceholder.
  void validate() const;

  // Sum of payload lengths in Unicode scalar values (the placeholder counts
  // as the length of kAudioToken).
  std::size_t total_chars() const;

  bool operator==(const PromptSequence&) const = default;
};

// Builds the sequence, omitting empty optional segments. When char_budget is
// set and the total payload length exceeds it, the context is truncated from
// its tail first, then the hypothesis prefix from its head; the instruction
// and the placeholder are never truncated (BudgetTooSmall if those two alone
// exceed the budget). Lengths are Unicode scalar values.
PromptSequence assemble_prompt(const std::optional<InstructionPrompt>& instruction,
                               const std::string& context,
                               const std::string& audio_ref,
                               const std::string& hypothesis_prefix,
                               std::optional<std::size_t> char_budget = std::nullopt);

// Serializes to a line-oriented text form and parses it back; the two are
// exact inverses (parse_text(render_text(p)) == p for any valid sequence).
//
// Grammar: an optional leading "@@budget[<N>]\n", then one block per segment:
//   "@@<kind>[<len>]\n<payload>\n"            for text segments
//   "@@audio[<len>] ref=<audio_ref>\n<payload>\n"  for the placeholder
// where <len> is the payload length in scalar values; payloads may contain
// any characters including newlines and "@@".
std::string render_text(const PromptSequence& p);
PromptSequence parse_text(const std::string& rendered);

}  // namespace rasr
