#include "rasr/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <thread>

#include "rasr/embedding.hpp"
#include "rasr/errors.hpp"
#include "rasr/logging.hpp"
#include "rasr/rng.hpp"
#include "rasr/unicode.hpp"

namespace rasr {

namespace {

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

// Context chunks are prefixed "[doc N]", which tokenizes as "[doc" and "N]".
bool is_doc_marker_token(const std::string& token) {
  if (token == "[doc") return true;
  if (token.size() >= 2 && token.back() == ']') {
    for (std::size_t i = 0; i + 1 < token.size(); ++i) {
      if (token[i] < '0' || token[i] > '9') return false;
    }
    return true;
  }
  return false;
}

nlohmann::json cer_report_to_json(const CerReport& r) {
  return nlohmann::json{{"substitutions", r.substitutions},
                        {"deletions", r.deletions},
                        {"insertions", r.insertions},
                        {"reference_chars", r.reference_chars},
                        {"cer", r.cer}};
}

nlohmann::json audit_to_json(const UtteranceAudit& a) {
  nlohmann::json j{{"utterance_id", a.utterance_id},
                   {"talk_id", a.talk_id},
                   {"condition", a.condition},
                   {"first_pass", a.first_pass},
                   {"final", a.final_text},
                   {"retrieval_degraded", a.retrieval_degraded}};
  j["retrieval"] =
      a.retrieval ? retrieval_result_to_json(*a.retrieval) : nlohmann::json();
  j["score"] = a.score ? cer_report_to_json(*a.score) : nlohmann::json();
  j["error"] = a.error.empty() ? nlohmann::json() : nlohmann::json(a.error);
  return j;
}

}  // namespace

void EvalUtterance::validate() const {
  if (utterance_id.empty()) throw Error("eval utterance needs an utterance_id");
  if (talk_id.empty()) {
    throw Error("eval utterance " + utterance_id + " needs a talk_id");
  }
  if (audio_ref.empty()) {
    throw Error("eval utterance " + utterance_id + " needs an audio_ref");
  }
  if (reference.empty()) {
    throw Error("eval utterance " + utterance_id +
                " needs a non-empty reference transcript");
  }
}

std::vector<EvalUtterance> load_eval_dataset(std::istream& in) {
  std::vector<EvalUtterance> out;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    try {
      EvalUtterance u;
      u.utterance_id = j.at("utterance_id").get<std::string>();
      u.talk_id = j.at("talk_id").get<std::string>();
      u.audio_ref = j.at("audio_ref").get<std::string>();
      u.reference = j.at("reference").get<std::string>();
      u.validate();
      if (!seen_ids.insert(u.utterance_id).second) {
        throw Error("duplicate utterance_id '" + u.utterance_id + "'");
      }
      out.push_back(std::move(u));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad eval utterance record: ") + e.what(),
                       line_no);
    } catch (const Error& e) {
      throw ParseError(std::string("bad eval utterance record: ") + e.what(),
                       line_no);
    }
  }
  return out;
}

void ExperimentSpec::validate() const {
  if (cells.empty()) throw Error("experiment needs at least one cell");
  if (k < 1) throw Error("experiment k must be >= 1");
  std::set<std::string> labels;
  for (const ExperimentCell& cell : cells) {
    if (!labels.insert(cell.condition_label()).second) {
      throw Error("duplicate experiment cell '" + cell.condition_label() + "'");
    }
  }
}

TwoPassResult transcribe_two_pass(const EvalUtterance& u,
                                  const std::optional<QueryMode>& mode,
                                  bool with_instruction, int k,
                                  const PipelineDeps& deps) {
  // Deliberately weaker than EvalUtterance::validate(): serving has no
  // reference transcript, and only the transcript-oracle mode needs one.
  if (u.utterance_id.empty()) throw Error("utterance needs an utterance_id");
  if (u.talk_id.empty()) {
    throw Error("utterance " + u.utterance_id + " needs a talk_id");
  }
  if (u.audio_ref.empty()) {
    throw Error("utterance " + u.utterance_id + " needs an audio_ref");
  }
  if (deps.asr == nullptr || deps.decoder == nullptr) {
    throw Error("pipeline needs both an ASR backend and a decoder backend");
  }

  TwoPassResult out;
  try {
    out.first_pass = deps.asr->first_pass(u.audio_ref);
  } catch (const RemoteUnavailable& e) {
    throw RemoteUnavailable("utterance " + u.utterance_id +
                            ": first-pass backend failed: " + e.what());
  } catch (const std::exception& e) {
    throw Error("utterance " + u.utterance_id +
                ": first-pass backend failed: " + e.what());
  }

  std::string context;
  if (mode.has_value()) {
    if (deps.store == nullptr || deps.embedder == nullptr) {
      throw Error("retrieval-enabled pipeline needs a store and an embedder");
    }
    std::optional<std::string> transcript;
    if (!u.reference.empty()) transcript = u.reference;
    try {
      RetrievalRequest req;
      req.query_text = build_query(out.first_pass, transcript, *mode);
      req.k = k;
      req.exclude_talk_ids = {u.talk_id};
      RetrievalResult rr = retrieve(req, *mode, *deps.store, *deps.embedder);
      context = format_context(rr);
      out.retrieval = std::move(rr);
    } catch (const MissingTranscriptError&) {
      throw;  // a caller mistake, not a degradable retrieval failure
    } catch (const std::exception& e) {
      log::warn("retrieval_degraded", {{"utterance_id", u.utterance_id},
                                       {"reason", e.what()}});
      RetrievalResult empty;
      empty.mode = *mode;
      out.retrieval = std::move(empty);
      out.retrieval_degraded = true;
      context.clear();
    }
  }

  std::optional<InstructionPrompt> instruction;
  if (with_instruction) {
    instruction = deps.instruction ? *deps.instruction : default_instruction();
  }
  const PromptSequence prompt = assemble_prompt(
      instruction, context, u.audio_ref, out.first_pass, deps.char_budget);
  try {
    out.final_text = deps.decoder->decode(prompt);
  } catch (const RemoteUnavailable& e) {
    throw RemoteUnavailable("utterance " + u.utterance_id +
                            ": decoder backend failed: " + e.what());
  } catch (const std::exception& e) {
    throw Error("utterance " + u.utterance_id +
                ": decoder backend failed: " + e.what());
  }
  return out;
}

ExperimentReport run_experiment(const std::vector<EvalUtterance>& dataset,
                                const ExperimentSpec& spec,
                                const PipelineDeps& deps) {
  spec.validate();
  if (dataset.empty()) throw EmptyInputError("experiment dataset is empty");
  for (const EvalUtterance& u : dataset) u.validate();
  if (deps.asr == nullptr || deps.decoder == nullptr) {
    throw Error("pipeline needs both an ASR backend and a decoder backend");
  }

  int workers = deps.workers;
  if (workers <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    workers = hw > 0 ? static_cast<int>(hw) : 4;
  }
  if (const int limit = deps.asr->max_concurrency(); limit > 0) {
    workers = std::min(workers, limit);
  }
  if (const int limit = deps.decoder->max_concurrency(); limit > 0) {
    workers = std::min(workers, limit);
  }
  workers = std::max(1, std::min<int>(workers,
                                      static_cast<int>(dataset.size())));

  ExperimentReport report;
  report.spec = spec;
  std::vector<StrategyRow> rows;

  for (const ExperimentCell& cell : spec.cells) {
    std::vector<UtteranceAudit> audits(dataset.size());
    std::atomic<std::size_t> next{0};

    const auto worker = [&]() {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= dataset.size()) break;
        const EvalUtterance& u = dataset[i];
        UtteranceAudit a;
        a.utterance_id = u.utterance_id;
        a.talk_id = u.talk_id;
        a.condition = cell.condition_label();
        try {
          TwoPassResult r = transcribe_two_pass(u, cell.mode,
                                                cell.with_instruction, spec.k,
                                                deps);
          a.first_pass = std::move(r.first_pass);
          a.final_text = std::move(r.final_text);
          a.retrieval = std::move(r.retrieval);
          a.retrieval_degraded = r.retrieval_degraded;
          a.score = score_pair(u.reference, a.final_text);
        } catch (const std::exception& e) {
          a.error = e.what();
          log::warn("utterance_failed", {{"utterance_id", u.utterance_id},
                                         {"condition", a.condition},
                                         {"reason", e.what()}});
        }
        audits[i] = std::move(a);
      }
    };

    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
      for (std::thread& t : pool) t.join();
    }

    CellOutcome outcome;
    outcome.cell = cell;
    std::vector<CerReport> scores;
    scores.reserve(audits.size());
    for (const UtteranceAudit& a : audits) {
      if (a.error.empty() && a.score.has_value()) {
        scores.push_back(*a.score);
      } else {
        ++outcome.failed_utterances;
      }
    }
    if (scores.empty()) {
      throw Error("every utterance failed in experiment cell '" +
                  cell.condition_label() + "'");
    }
    outcome.pooled = pool_cer(scores);
    report.failed_utterances += outcome.failed_utterances;
    rows.push_back(
        StrategyRow{cell.mode_label(), cell.with_instruction, outcome.pooled});
    outcome.audits = std::move(audits);
    report.cells.push_back(std::move(outcome));
  }

  const std::string baseline = spec.baseline_label.empty()
                                   ? spec.cells.front().condition_label()
                                   : spec.baseline_label;
  report.comparison = make_comparison(std::move(rows), baseline);
  return report;
}

nlohmann::json two_pass_result_to_json(const TwoPassResult& r) {
  nlohmann::json j{{"first_pass", r.first_pass},
                   {"final", r.final_text},
                   {"retrieval_degraded", r.retrieval_degraded}};
  j["retrieval"] =
      r.retrieval ? retrieval_result_to_json(*r.retrieval) : nlohmann::json();
  return j;
}

nlohmann::json experiment_report_to_json(const ExperimentReport& report) {
  const RenderedReport rendered = render_table(report.comparison);
  nlohmann::json cells = nlohmann::json::array();
  for (const CellOutcome& c : report.cells) {
    nlohmann::json utterances = nlohmann::json::array();
    for (const UtteranceAudit& a : c.audits) utterances.push_back(audit_to_json(a));
    cells.push_back({{"condition", c.cell.condition_label()},
                     {"mode", c.cell.mode_label()},
                     {"instruction", c.cell.with_instruction},
                     {"pooled", cer_report_to_json(c.pooled)},
                     {"failed_utterances", c.failed_utterances},
                     {"utterances", std::move(utterances)}});
  }
  return nlohmann::json{{"schema", "rasr-experiment/1"},
                        {"asr", report.spec.asr_id},
                        {"decoder", report.spec.decoder_id},
                        {"k", report.spec.k},
                        {"failed_utterances", report.failed_utterances},
                        {"comparison", rendered.report_json},
                        {"table_text", rendered.table_text},
                        {"cells", std::move(cells)}};
}

MockAsrBackend::MockAsrBackend(double corruption_rate, std::uint64_t seed,
                               std::map<std::string, std::string> references)
    : rate_(corruption_rate), seed_(seed), references_(std::move(references)) {
  if (!(rate_ >= 0.0 && rate_ <= 1.0)) {
    throw Error("mock ASR corruption rate must be in [0,1]");
  }
}

std::string MockAsrBackend::first_pass(const std::string& audio_ref) {
  std::string text;
  if (audio_ref.rfind("text:", 0) == 0) {
    text = audio_ref.substr(5);
  } else {
    const auto it = references_.find(audio_ref);
    if (it == references_.end()) {
      throw Error("mock ASR has no reference text for audio ref '" + audio_ref +
                  "'");
    }
    text = it->second;
  }

  std::vector<std::string> tokens = split_whitespace(text);
  if (tokens.empty()) return text;
  const auto corrupt_count = static_cast<std::size_t>(std::clamp<long long>(
      std::llround(rate_ * static_cast<double>(tokens.size())), 0,
      static_cast<long long>(tokens.size())));
  if (corrupt_count == 0) return join_tokens(tokens);

  std::uint64_t h = seed_;
  for (unsigned char c : audio_ref) h = h * kNGramAccumMultiplier + c;
  h ^= h >> kNGramMixShift;
  h *= kNGramMixMultiplier;
  h ^= h >> kNGramMixShift;
  std::mt19937_64 gen(h);

  std::vector<std::size_t> order(tokens.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng::shuffle(order, gen);

  for (std::size_t pick = 0; pick < corrupt_count; ++pick) {
    std::string& token = tokens[order[pick]];
    std::u32string scalars = unicode::decode_utf8(token);
    const std::size_t pos =
        static_cast<std::size_t>(rng::uniform_below(gen, scalars.size()));
    const char32_t original = scalars[pos];
    char32_t replacement;
    do {
      replacement =
          static_cast<char32_t>(U'a' + rng::uniform_below(gen, 26));
    } while (replacement == original);
    scalars[pos] = replacement;
    token = unicode::encode_utf8(scalars);
  }
  return join_tokens(tokens);
}

std::string MockContextualDecoder::decode(const PromptSequence& prompt) {
  prompt.validate();
  const PromptSegment* hypothesis = nullptr;
  const PromptSegment* context = nullptr;
  for (const PromptSegment& seg : prompt.segments) {
    if (seg.kind == SegmentKind::HypothesisPrefix) hypothesis = &seg;
    if (seg.kind == SegmentKind::Context) context = &seg;
  }
  if (hypothesis == nullptr) return "";
  std::vector<std::string> tokens = split_whitespace(hypothesis->payload);
  if (context == nullptr) return join_tokens(tokens);

  std::set<std::string> vocabulary;
  for (std::string& token : split_whitespace(context->payload)) {
    if (!is_doc_marker_token(token)) vocabulary.insert(std::move(token));
  }

  for (std::string& token : tokens) {
    if (vocabulary.count(token) > 0) continue;  // already a context term
    const std::size_t token_len = unicode::scalar_count(token);
    // Ascending (lexicographic) scan: the first hit at distance 1 is the
    // canonical replacement.
    for (const std::string& candidate : vocabulary) {
      const std::size_t cand_len = unicode::scalar_count(candidate);
      if (cand_len + 1 < token_len || token_len + 1 < cand_len) continue;
      if (char_edit_distance(token, candidate).total() == 1) {
        token = candidate;
        break;
      }
    }
  }
  return join_tokens(tokens);
}

}  // namespace rasr
