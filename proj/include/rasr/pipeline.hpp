#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rasr/evaluation.hpp"
#include "rasr/prompting.hpp"
#include "rasr/retrieval.hpp"
#include "rasr/vector_store.hpp"

namespace rasr {

// First-pass recognizer: audio reference in, hypothesis text out.
class AsrBackend {
 public:
  virtual ~AsrBackend() = default;
  virtual std::string first_pass(const std::string& audio_ref) = 0;
  // Maximum safe concurrent calls; 0 means no declared limit.
  virtual int max_concurrency() const { return 0; }
};

// Second-pass decoder consuming the assembled conditioning sequence.
class ContextualDecoder {
 public:
  virtual ~ContextualDecoder() = default;
  virtual std::string decode(const PromptSequence& prompt) = 0;
  virtual int max_concurrency() const { return 0; }
};

struct EvalUtterance {
  std::string utterance_id;
  std::string talk_id;
  std::string audio_ref;
  std::string reference;

  void validate() const;  // non-empty ids, audio_ref, reference
};

// JSONL loader; one object per line with the four EvalUtterance fields.
std::vector<EvalUtterance> load_eval_dataset(std::istream& in);

// One experiment condition: which query mode supplies retrieved context
// (nullopt = none) and whether the instruction segment is present.
struct ExperimentCell {
  std::optional<QueryMode> mode;
  bool with_instruction = false;

  std::string mode_label() const { return mode ? mode->label() : "none"; }
  std::string condition_label() const {
    return with_instruction ? mode_label() + "+instr" : mode_label();
  }
};

struct ExperimentSpec {
  std::vector<ExperimentCell> cells;
  int k = 2;
  std::string asr_id = "mock";
  std::string decoder_id = "mock";
  std::string baseline_label;  // empty -> first cell's condition label

  void validate() const;  // non-empty cells, k >= 1
};

struct PipelineDeps {
  const VectorStore* store = nullptr;
  Embedder* embedder = nullptr;
  AsrBackend* asr = nullptr;
  ContextualDecoder* decoder = nullptr;
  // Instruction text used when a cell enables it; nullopt -> bundled default.
  std::optional<InstructionPrompt> instruction;
  std::optional<std::size_t> char_budget;
  int workers = 0;  // 0 = hardware concurrency
};

struct TwoPassResult {
  std::string first_pass;
  std::string final_text;
  std::optional<RetrievalResult> retrieval;  // nullopt when mode is nullopt
  bool retrieval_degraded = false;
};

// First pass, query building, retrieval (always excluding the utterance's own
// talk), prompt assembly, contextual decode. Retrieval failures degrade to an
// empty context with a warning; backend failures throw with the utterance id
// attached.
TwoPassResult transcribe_two_pass(const EvalUtterance& u,
                                  const std::optional<QueryMode>& mode,
                                  bool with_instruction, int k,
                                  const PipelineDeps& deps);

struct UtteranceAudit {
  std::string utterance_id;
  std::string talk_id;
  std::string condition;
  std::string first_pass;
  std::string final_text;
  std::optional<RetrievalResult> retrieval;
  bool retrieval_degraded = false;
  std::optional<CerReport> score;  // absent when the utterance failed
  std::string error;               // non-empty when the utterance failed
};

struct CellOutcome {
  ExperimentCell cell;
  CerReport pooled;                    // micro-average over successes
  std::vector<UtteranceAudit> audits;  // one per utterance, dataset order
  std::int64_t failed_utterances = 0;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<CellOutcome> cells;
  StrategyComparison comparison;
  std::int64_t failed_utterances = 0;
};

// Runs every cell over the dataset with a bounded worker pool. Failed
// utterances are recorded in the audits, counted, and excluded from the
// pooled aggregate. Deterministic given deterministic backends.
ExperimentReport run_experiment(const std::vector<EvalUtterance>& dataset,
                                const ExperimentSpec& spec,
                                const PipelineDeps& deps);

nlohmann::json two_pass_result_to_json(const TwoPassResult& r);
nlohmann::json experiment_report_to_json(const ExperimentReport& report);

// Deterministic stand-in for a first-pass recognizer: resolves the audio
// reference to its source text ("text:<content>" inline form, or the
// configured reference map), then substitutes one character in a fixed
// fraction of tokens, seeded per audio_ref.
class MockAsrBackend : public AsrBackend {
 public:
  explicit MockAsrBackend(double corruption_rate = 0.1, std::uint64_t seed = 0,
                          std::map<std::string, std::string> references = {});

  std::string first_pass(const std::string& audio_ref) override;

 private:
  double rate_;
  std::uint64_t seed_;
  std::map<std::string, std::string> references_;
};

// Deterministic stand-in for a context-following decoder: starts from the
// hypothesis segment and replaces any token that is not verbatim in the
// retrieved context but lies within edit distance 1 of a context token
// (ties broken lexicographically). Without a context segment it echoes the
// hypothesis. The instruction segment does not alter mock behavior.
class MockContextualDecoder : public ContextualDecoder {
 public:
  std::string decode(const PromptSequence& prompt) override;
};

}  // namespace rasr
