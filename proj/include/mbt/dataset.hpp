#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mbt {

enum class Source { hotpotqa, musique, twowiki };
enum class Split { train, validation };

std::string_view to_string(Source s) noexcept;
std::string_view to_string(Split s) noexcept;
/// Accepts "hotpotqa", "musique", "2wiki". Throws ConfigError otherwise.
Source parse_source(std::string_view tag);
Split parse_split(std::string_view tag);

struct Document {
  std::string title;
  std::string body;
  std::optional<bool> is_supporting;  // MuSiQue only

  bool operator==(const Document&) const = default;
};

struct QAExample {
  std::string id;
  std::string question;
  std::string gold_answer;
  std::vector<Document> documents;
  Source source = Source::hotpotqa;
  Split split = Split::validation;

  bool operator==(const QAExample&) const = default;
};

/// Parses a dataset file in its original release format. HotpotQA and 2Wiki are one JSON array whose
/// records carry `context` as [title, [sentence, ...]] pairs; MuSiQue is one JSON
/// record per line with `paragraphs`. Sentences are joined with a single space.
/// Answer aliases are ignored. Throws RecordError (index + field path) on malformed
/// input.
std::vector<QAExample> load_dataset(Source format, std::istream& in,
                                    Split split = Split::validation);

/// "Title: <title>\n<body>" per document, blocks separated by one blank line.
std::string render_context(const QAExample& example);

/// Copy of `example` keeping only documents flagged is_supporting=true. Examples
/// without any flags are returned unchanged.
QAExample supporting_only(QAExample example);

// Unified corpus: one record per line.
nlohmann::ordered_json to_json(const QAExample& example);
QAExample example_from_json(const nlohmann::json& j, std::size_t index = 0);
void write_corpus(std::ostream& out, std::span<const QAExample> examples);
std::vector<QAExample> read_corpus(std::istream& in);
std::vector<QAExample> read_corpus_file(const std::string& path);

}  // namespace mbt
