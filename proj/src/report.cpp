#include "mbt/report.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "mbt/errors.hpp"
#include "mbt/text.hpp"

namespace mbt {

namespace {

NumberCell num(std::optional<double> v, int decimals) { return {v, decimals}; }

std::optional<double> aes_cell(const MetricReport& r, const char* key) {
  const auto it = r.aes_by_metric.find(key);
  if (it == r.aes_by_metric.end()) return std::nullopt;
  return it->second;
}

std::optional<double> count_cell(std::size_t n) { return static_cast<double>(n); }

const MetricReport* find_baseline(std::span<const MetricReport> runs, std::string_view dataset,
                                  std::string_view baseline) {
  for (const auto& r : runs) {
    if (r.dataset == dataset && (r.label == baseline || r.run_id == baseline)) return &r;
  }
  return nullptr;
}

std::string display_name(const MetricReport& r) { return r.label.empty() ? r.run_id : r.label; }

}  // namespace

ReportTables build_report(std::span<const MetricReport> runs, std::string_view baseline) {
  std::vector<std::string> datasets;
  for (const auto& r : runs) {
    if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) {
      datasets.push_back(r.dataset);
    }
  }
  std::vector<MetricReport> ordered;
  for (const auto& d : datasets) {
    const MetricReport* base = find_baseline(runs, d, baseline);
    if (base == nullptr) {
      throw DomainError("baseline '" + std::string(baseline) + "' not found for dataset '" + d + "'");
    }
    for (const auto& r : runs) {
      if (r.dataset != d) continue;
      auto copy = r;
      apply_aes(copy, *base);
      ordered.push_back(std::move(copy));
    }
  }

  ReportTables t;
  t.accuracy = {"accuracy", "Accuracy", {"Dataset", "Method", "EM", "F1", "LLM"}, {}};
  t.efficiency = {"efficiency", "Efficiency", {"Dataset", "Method", "Degen", "Len", "AES"}, {}};
  t.lengths = {"lengths", "Average length by subset",
               {"Dataset", "Method", "Overall", "Correct", "Incorrect", "Valid"}, {}};
  t.aes = {"aes", "AES by accuracy metric", {"Dataset", "Method", "AES-EM", "AES-F1", "AES-LLM"}, {}};
  t.behavioral = {"behavioral", "Reasoning behavior", {"Dataset", "Method", "xi_OT", "xi_UT", "Meta"}, {}};
  t.inclusion = {"inclusion", "Answer inclusion (%)",
                 {"Dataset", "Method", "Substr-Correct", "Substr-Incorrect", "Judge-Correct",
                  "Judge-Incorrect"},
                 {}};

  for (const auto& r : ordered) {
    const Cell ds = r.dataset;
    const Cell name = display_name(r);
    t.accuracy.rows.push_back({ds, name, num(r.em, 2), num(r.f1, 2), num(r.llm_acc, 2)});
    t.efficiency.rows.push_back({ds, name, num(count_cell(r.degen_count), 0),
                                 num(r.lengths.overall.mean, 0), num(aes_cell(r, "llm"), 2)});
    t.lengths.rows.push_back({ds, name, num(r.lengths.overall.mean, 0),
                              num(r.lengths.correct.mean, 0), num(r.lengths.incorrect.mean, 0),
                              num(r.lengths.valid.mean, 0)});
    t.aes.rows.push_back({ds, name, num(aes_cell(r, "em"), 2), num(aes_cell(r, "f1"), 2),
                          num(aes_cell(r, "llm"), 2)});
    t.behavioral.rows.push_back({ds, name, num(r.xi_ot, 4), num(r.xi_ut, 4), num(r.meta_avg, 2)});
    t.inclusion.rows.push_back({ds, name, num(r.substring_correct, 2),
                                num(r.substring_incorrect, 2), num(r.inclusion_correct, 2),
                                num(r.inclusion_incorrect, 2)});
  }
  return t;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "text" || s == "aligned") return ReportFormat::aligned_text;
  if (s == "csv" || s == "delimited") return ReportFormat::delimited;
  throw ConfigError("unknown report format '" + std::string(s) + "' (expected text or csv)");
}

std::string format_cell(const Cell& cell) {
  if (const auto* s = std::get_if<std::string>(&cell)) return *s;
  const auto& n = std::get<NumberCell>(cell);
  if (!n.value) return "-";
  std::string out = fmt::format("{:.{}f}", *n.value, n.decimals);
  // Avoid printing "-0.00" for values that round to zero.
  if (out.front() == '-' && out.find_first_not_of("-0.") == std::string::npos) out.erase(0, 1);
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string emit(const Table& table, ReportFormat format) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back(table.header);
  for (const auto& row : table.rows) {
    auto& line = cells.emplace_back();
    for (const auto& c : row) line.push_back(format_cell(c));
  }
  std::string out;
  if (format == ReportFormat::delimited) {
    for (const auto& line : cells) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        if (i) out += ',';
        out += csv_field(line[i]);
      }
      out += '\n';
    }
    return out;
  }
  std::vector<std::size_t> width(table.header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size() && i < width.size(); ++i) {
      width[i] = std::max(width[i], text::utf8_length(line[i]));
    }
  }
  out += table.title + '\n';
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      const auto& c = cells[r][i];
      const std::string pad(width[i] - text::utf8_length(c), ' ');
      if (i) line += "  ";
      // Text columns are left aligned, numbers right aligned.
      const bool text_col = r == 0 || (r > 0 && std::holds_alternative<std::string>(table.rows[r - 1][i]));
      line += text_col ? c + pad : pad + c;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (const auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
    }
  }
  return out;
}

std::string emit(const ReportTables& tables, ReportFormat format) {
  std::string out;
  bool first = true;
  for (const auto* t : tables.all()) {
    if (!first) out += '\n';
    first = false;
    out += emit(*t, format);
  }
  return out;
}

}  // namespace mbt
