#pragma once

#include <memory>
#include <string>

#include "rasr/pipeline.hpp"

namespace rasr {

// Remote first-pass recognizer: POST {base_url}/first_pass with
// {"audio_ref": str}, expecting {"text": str}.
class HttpAsrBackend : public AsrBackend {
 public:
  explicit HttpAsrBackend(std::string base_url, int timeout_s = 30);
  std::string first_pass(const std::string& audio_ref) override;

 private:
  std::string base_url_;
  int timeout_s_;
};

// Remote contextual decoder: POST {base_url}/decode with
// {"segments": [{"kind": str, "payload": str}]}, expecting {"text": str}.
// Kinds use the canonical names instruction|context|audio|hypothesis.
class HttpContextualDecoder : public ContextualDecoder {
 public:
  explicit HttpContextualDecoder(std::string base_url, int timeout_s = 30);
  std::string decode(const PromptSequence& prompt) override;

 private:
  std::string base_url_;
  int timeout_s_;
};

// Backend ids accepted on the CLI: "mock" or "http:<url>".
// The mock ASR corrupts `mock_corruption_rate` of tokens using `mock_seed`
// and resolves audio refs via `mock_references` (plus inline "text:" refs).
std::unique_ptr<AsrBackend> make_asr_backend(
    const std::string& id, double mock_corruption_rate = 0.1,
    std::uint64_t mock_seed = 0,
    std::map<std::string, std::string> mock_references = {});

std::unique_ptr<ContextualDecoder> make_decoder_backend(const std::string& id);

}  // namespace rasr
