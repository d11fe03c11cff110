#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rasr {

struct EditCounts {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;

  std::int64_t total() const { return substitutions + deletions + insertions; }
  bool operator==(const EditCounts&) const = default;
};

struct CerReport {
  std::int64_t substitutions = 0;
  std::int64_t deletions = 0;
  std::int64_t insertions = 0;
  std::int64_t reference_chars = 0;
  double cer = 0.0;

  static CerReport from_counts(const EditCounts& counts,
                               std::int64_t reference_chars);
  bool operator==(const CerReport&) const = default;
};

// Minimal-cost character alignment (unit costs) over Unicode scalar values.
// The total distance is the unique DP optimum; the S/D/I split follows a
// fixed backtrace preference (match, then substitution, then deletion, then
// insertion) so the decomposition is deterministic.
EditCounts char_edit_distance(const std::string& reference,
                              const std::string& hypothesis);

// (S+D+I) / len(reference) in scalar values. Throws EmptyReferenceError when
// the reference is empty.
double cer(const std::string& reference, const std::string& hypothesis);

// Optional hook applied to both sides before alignment (e.g. to strip fillers).
using TextNormalizer = std::function<std::string(const std::string&)>;

// Full per-pair report; applies `normalizer` to both strings when provided.
CerReport score_pair(const std::string& reference, const std::string& hypothesis,
                     const TextNormalizer& normalizer = nullptr);

// Micro-average: sums counts and reference lengths, recomputes the rate.
// Throws EmptyInputError on an empty list.
CerReport pool_cer(const std::vector<CerReport>& reports);

// (base - x) / base.
double relative_improvement(double base, double x);

struct StrategyRow {
  std::string mode_label;  // query mode label, or "none" for no retrieval
  bool instruction = false;
  CerReport report;

  std::string condition_label() const {
    return instruction ? mode_label + "+instr" : mode_label;
  }
  bool operator==(const StrategyRow&) const = default;
};

struct StrategyComparison {
  std::vector<StrategyRow> rows;
  std::string baseline_label;  // condition_label() of the baseline row
  // Parallel to rows; the baseline row's own entry is 0.
  std::vector<double> relative_improvements;
};

// Locates the baseline by condition label and fills relative improvements.
// Throws Error when the baseline is missing, duplicated, or has CER 0.
StrategyComparison make_comparison(std::vector<StrategyRow> rows,
                                   const std::string& baseline_label);

struct RenderedReport {
  std::string table_text;       // aligned, human-readable
  nlohmann::json report_json;   // schema "rasr-eval/1", full precision
};

RenderedReport render_table(const StrategyComparison& cmp);

}  // namespace rasr
