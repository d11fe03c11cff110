#include "rasr/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "rasr/errors.hpp"
#include "rasr/unicode.hpp"

namespace rasr {

CerReport CerReport::from_counts(const EditCounts& counts,
                                 std::int64_t reference_chars) {
  if (reference_chars <= 0) {
    throw EmptyReferenceError("CER needs a non-empty reference");
  }
  CerReport r;
  r.substitutions = counts.substitutions;
  r.deletions = counts.deletions;
  r.insertions = counts.insertions;
  r.reference_chars = reference_chars;
  r.cer = static_cast<double>(counts.total()) /
          static_cast<double>(reference_chars);
  return r;
}

EditCounts char_edit_distance(const std::string& reference,
                              const std::string& hypothesis) {
  const std::u32string ref = unicode::decode_utf8(reference);
  const std::u32string hyp = unicode::decode_utf8(hypothesis);
  const std::size_t m = ref.size();
  const std::size_t n = hyp.size();

  // Full cost matrix; kept so the backtrace can produce the canonical split.
  std::vector<std::uint32_t> d((m + 1) * (n + 1));
  const auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& {
    return d[i * (n + 1) + j];
  };
  for (std::size_t i = 0; i <= m; ++i) at(i, 0) = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j <= n; ++j) at(0, j) = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      const std::uint32_t sub_cost = ref[i - 1] == hyp[j - 1] ? 0u : 1u;
      at(i, j) = std::min({at(i - 1, j - 1) + sub_cost, at(i - 1, j) + 1u,
                           at(i, j - 1) + 1u});
    }
  }

  EditCounts counts;
  std::size_t i = m;
  std::size_t j = n;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] &&
        at(i, j) == at(i - 1, j - 1)) {
      --i;
      --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      ++counts.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

double cer(const std::string& reference, const std::string& hypothesis) {
  const std::int64_t ref_chars =
      static_cast<std::int64_t>(unicode::scalar_count(reference));
  if (ref_chars == 0) {
    throw EmptyReferenceError("CER needs a non-empty reference");
  }
  const EditCounts counts = char_edit_distance(reference, hypothesis);
  return static_cast<double>(counts.total()) / static_cast<double>(ref_chars);
}

CerReport score_pair(const std::string& reference, const std::string& hypothesis,
                     const TextNormalizer& normalizer) {
  const std::string ref = normalizer ? normalizer(reference) : reference;
  const std::string hyp = normalizer ? normalizer(hypothesis) : hypothesis;
  const std::int64_t ref_chars =
      static_cast<std::int64_t>(unicode::scalar_count(ref));
  return CerReport::from_counts(char_edit_distance(ref, hyp), ref_chars);
}

CerReport pool_cer(const std::vector<CerReport>& reports) {
  if (reports.empty()) {
    throw EmptyInputError("cannot pool an empty list of CER reports");
  }
  EditCounts counts;
  std::int64_t ref_chars = 0;
  for (const CerReport& r : reports) {
    counts.substitutions += r.substitutions;
    counts.deletions += r.deletions;
    counts.insertions += r.insertions;
    ref_chars += r.reference_chars;
  }
  return CerReport::from_counts(counts, ref_chars);
}

double relative_improvement(double base, double x) { return (base - x) / base; }

StrategyComparison make_comparison(std::vector<StrategyRow> rows,
                                   const std::string& baseline_label) {
  std::size_t baseline_index = rows.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].condition_label() == baseline_label) {
      if (baseline_index != rows.size()) {
        throw Error("baseline label '" + baseline_label +
                    "' matches more than one row");
      }
      baseline_index = i;
    }
  }
  if (baseline_index == rows.size()) {
    throw Error("baseline label '" + baseline_label + "' not found among rows");
  }
  const double base = rows[baseline_index].report.cer;
  if (base == 0.0) {
    throw Error("baseline CER is zero; relative improvement undefined");
  }
  StrategyComparison cmp;
  cmp.rows = std::move(rows);
  cmp.baseline_label = baseline_label;
  cmp.relative_improvements.reserve(cmp.rows.size());
  for (const StrategyRow& row : cmp.rows) {
    cmp.relative_improvements.push_back(
        relative_improvement(base, row.report.cer));
  }
  return cmp;
}

RenderedReport render_table(const StrategyComparison& cmp) {
  std::vector<std::array<std::string, 7>> cells;
  cells.push_back({"condition", "S", "D", "I", "ref_chars", "CER", "rel_improvement"});
  char buf[64];
  for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
    const StrategyRow& row = cmp.rows[i];
    std::array<std::string, 7> line;
    line[0] = row.condition_label();
    line[1] = std::to_string(row.report.substitutions);
    line[2] = std::to_string(row.report.deletions);
    line[3] = std::to_string(row.report.insertions);
    line[4] = std::to_string(row.report.reference_chars);
    std::snprintf(buf, sizeof(buf), "%.4f", row.report.cer);
    line[5] = buf;
    if (row.condition_label() == cmp.baseline_label) {
      line[6] = "base";
    } else {
      std::snprintf(buf, sizeof(buf), "%+.2f%%",
                    cmp.relative_improvements[i] * 100.0);
      line[6] = buf;
    }
    cells.push_back(std::move(line));
  }

  std::array<std::size_t, 7> width{};
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      width[c] = std::max(width[c], line[c].size());
    }
  }
  std::string text;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c > 0) text += "  ";
      text += cells[r][c];
      text.append(width[c] - cells[r][c].size(), ' ');
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    text += "\n";
    if (r == 0) {
      std::size_t rule = 0;
      for (std::size_t c = 0; c < width.size(); ++c) rule += width[c] + (c ? 2 : 0);
      text.append(rule, '-');
      text += "\n";
    }
  }

  nlohmann::json rows_json = nlohmann::json::array();
  for (std::size_t i = 0; i < cmp.rows.size(); ++i) {
    const StrategyRow& row = cmp.rows[i];
    nlohmann::json entry{{"mode", row.mode_label},
                         {"instruction", row.instruction},
                         {"condition", row.condition_label()},
                         {"substitutions", row.report.substitutions},
                         {"deletions", row.report.deletions},
                         {"insertions", row.report.insertions},
                         {"reference_chars", row.report.reference_chars},
                         {"cer", row.report.cer}};
    if (row.condition_label() == cmp.baseline_label) {
      entry["relative_improvement_vs_baseline"] = nullptr;
    } else {
      entry["relative_improvement_vs_baseline"] = cmp.relative_improvements[i];
    }
    rows_json.push_back(std::move(entry));
  }
  nlohmann::json report{{"schema", "rasr-eval/1"},
                        {"baseline", cmp.baseline_label},
                        {"rows", std::move(rows_json)}};
  return RenderedReport{std::move(text), std::move(report)};
}

}  // namespace rasr
