#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mbt/metrics.hpp"

namespace mbt {

struct NumberCell {
  std::optional<double> value;  // absent renders as "-"
  int decimals = 2;

  bool operator==(const NumberCell&) const = default;
};

using Cell = std::variant<std::string, NumberCell>;

struct Table {
  std::string name;  // file stem for delimited output
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<Cell>> rows;
};

struct ReportTables {
  Table accuracy;     // EM / F1 / LLM
  Table efficiency;   // Degen / Len / AES (LLM)
  Table lengths;      // overall / correct / incorrect / valid
  Table aes;          // AES per accuracy metric
  Table behavioral;   // xi_OT / xi_UT / Meta
  Table inclusion;    // substring and judge inclusion, correct vs. incorrect

  std::vector<const Table*> all() const {
    return {&accuracy, &efficiency, &lengths, &aes, &behavioral, &inclusion};
  }
};

/// `baseline` names a run by label or run_id; every dataset present needs one.
/// AES cells are recomputed against that dataset's baseline.
ReportTables build_report(std::span<const MetricReport> runs, std::string_view baseline);

enum class ReportFormat { aligned_text, delimited };
ReportFormat parse_report_format(std::string_view s);

std::string format_cell(const Cell& cell);
std::string emit(const Table& table, ReportFormat format);
std::string emit(const ReportTables& tables, ReportFormat format);

}  // namespace mbt
