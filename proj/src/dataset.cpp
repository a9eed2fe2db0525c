#include "mbt/dataset.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include "mbt/errors.hpp"
#include "mbt/text.hpp"

namespace mbt {

using nlohmann::json;

std::string_view to_string(Source s) noexcept {
  switch (s) {
    case Source::hotpotqa: return "hotpotqa";
    case Source::musique: return "musique";
    case Source::twowiki: return "2wiki";
  }
  return "unknown";
}

std::string_view to_string(Split s) noexcept {
  return s == Split::train ? "train" : "validation";
}

Source parse_source(std::string_view tag) {
  if (tag == "hotpotqa") return Source::hotpotqa;
  if (tag == "musique") return Source::musique;
  if (tag == "2wiki") return Source::twowiki;
  throw ConfigError("unknown dataset format '" + std::string(tag) +
                    "' (expected hotpotqa, musique or 2wiki)");
}

Split parse_split(std::string_view tag) {
  if (tag == "train") return Split::train;
  if (tag == "validation" || tag == "dev") return Split::validation;
  throw ConfigError("unknown split '" + std::string(tag) + "'");
}

namespace {

const json& require(const json& record, const char* key, std::size_t index,
                    const std::string& path) {
  if (!record.is_object()) throw RecordError(index, path, "expected an object");
  auto it = record.find(key);
  if (it == record.end()) {
    throw RecordError(index, path.empty() ? key : path + "." + key, "missing field");
  }
  return *it;
}

std::string require_text(const json& record, const char* key, std::size_t index,
                         const std::string& path = {}) {
  const json& v = require(record, key, index, path);
  std::string field = path.empty() ? key : path + "." + key;
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (!v.is_string()) throw RecordError(index, field, "expected a string");
  std::string s = v.get<std::string>();
  if (text::trim(s).empty()) throw RecordError(index, field, "empty value");
  return s;
}

void check_document(const Document& d, std::size_t index, const std::string& path) {
  if (text::trim(d.title).empty()) throw RecordError(index, path + ".title", "empty title");
  if (text::trim(d.body).empty()) throw RecordError(index, path + ".body", "empty body");
}

QAExample parse_context_record(const json& r, std::size_t index, Source source, Split split) {
  QAExample ex;
  ex.source = source;
  ex.split = split;
  ex.id = require_text(r, "_id", index);
  ex.question = require_text(r, "question", index);
  ex.gold_answer = require_text(r, "answer", index);
  const json& ctx = require(r, "context", index, {});
  if (!ctx.is_array() || ctx.empty()) throw RecordError(index, "context", "expected a non-empty array");
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    const std::string path = "context[" + std::to_string(i) + "]";
    const json& pair = ctx[i];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_array()) {
      throw RecordError(index, path, "expected [title, [sentence, ...]]");
    }
    Document d;
    d.title = pair[0].get<std::string>();
    for (std::size_t k = 0; k < pair[1].size(); ++k) {
      if (!pair[1][k].is_string()) {
        throw RecordError(index, path + "[1][" + std::to_string(k) + "]", "expected a string");
      }
      if (k > 0) d.body.push_back(' ');
      d.body += pair[1][k].get<std::string>();
    }
    check_document(d, index, path);
    ex.documents.push_back(std::move(d));
  }
  return ex;
}

QAExample parse_musique_record(const json& r, std::size_t index, Split split) {
  QAExample ex;
  ex.source = Source::musique;
  ex.split = split;
  ex.id = require_text(r, "id", index);
  ex.question = require_text(r, "question", index);
  ex.gold_answer = require_text(r, "answer", index);
  const json& paragraphs = require(r, "paragraphs", index, {});
  if (!paragraphs.is_array() || paragraphs.empty()) {
    throw RecordError(index, "paragraphs", "expected a non-empty array");
  }
  for (std::size_t i = 0; i < paragraphs.size(); ++i) {
    const std::string path = "paragraphs[" + std::to_string(i) + "]";
    const json& p = paragraphs[i];
    Document d;
    d.title = require_text(p, "title", index, path);
    d.body = require_text(p, "paragraph_text", index, path);
    if (auto it = p.find("is_supporting"); it != p.end()) {
      if (!it->is_boolean()) throw RecordError(index, path + ".is_supporting", "expected a boolean");
      d.is_supporting = it->get<bool>();
    }
    check_document(d, index, path);
    ex.documents.push_back(std::move(d));
  }
  return ex;
}

json parse_json(std::string_view text, std::size_t index) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw RecordError(index, "", std::string("invalid JSON: ") + e.what());
  }
}

void check_unique(std::span<const QAExample> examples) {
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    if (!seen.insert(examples[i].id).second) {
      throw RecordError(i, "id", "duplicate id '" + examples[i].id + "'");
    }
  }
}

}  // namespace

std::vector<QAExample> load_dataset(Source format, std::istream& in, Split split) {
  std::vector<QAExample> out;
  if (format == Source::musique) {
    std::string line;
    std::size_t index = 0;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      out.push_back(parse_musique_record(parse_json(line, index), index, split));
      ++index;
    }
  } else {
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json doc = parse_json(all, 0);
    if (!doc.is_array()) throw RecordError(0, "", "expected a top-level array of records");
    out.reserve(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
      out.push_back(parse_context_record(doc[i], i, format, split));
    }
  }
  check_unique(out);
  return out;
}

std::string render_context(const QAExample& example) {
  std::string out;
  for (const Document& d : example.documents) {
    if (!out.empty()) out += "\n\n";
    out += "Title: ";
    out += d.title;
    out += '\n';
    out += d.body;
  }
  return out;
}

QAExample supporting_only(QAExample example) {
  bool flagged = false;
  for (const auto& d : example.documents) flagged |= d.is_supporting.has_value();
  if (!flagged) return example;
  std::erase_if(example.documents,
                [](const Document& d) { return !d.is_supporting.value_or(false); });
  return example;
}

nlohmann::ordered_json to_json(const QAExample& example) {
  nlohmann::ordered_json j;
  j["id"] = example.id;
  j["source"] = to_string(example.source);
  j["split"] = to_string(example.split);
  j["question"] = example.question;
  j["gold_answer"] = example.gold_answer;
  auto docs = nlohmann::ordered_json::array();
  for (const auto& d : example.documents) {
    nlohmann::ordered_json dj;
    dj["title"] = d.title;
    dj["body"] = d.body;
    if (d.is_supporting) dj["is_supporting"] = *d.is_supporting;
    docs.push_back(std::move(dj));
  }
  j["documents"] = std::move(docs);
  return j;
}

QAExample example_from_json(const json& j, std::size_t index) {
  QAExample ex;
  ex.id = require_text(j, "id", index);
  ex.question = require_text(j, "question", index);
  ex.gold_answer = require_text(j, "gold_answer", index);
  try {
    ex.source = parse_source(require_text(j, "source", index));
    ex.split = parse_split(require_text(j, "split", index));
  } catch (const ConfigError& e) {
    throw RecordError(index, "source", e.what());
  }
  const json& docs = require(j, "documents", index, {});
  if (!docs.is_array() || docs.empty()) throw RecordError(index, "documents", "expected a non-empty array");
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const std::string path = "documents[" + std::to_string(i) + "]";
    Document d;
    d.title = require_text(docs[i], "title", index, path);
    d.body = require_text(docs[i], "body", index, path);
    if (auto it = docs[i].find("is_supporting"); it != docs[i].end()) d.is_supporting = it->get<bool>();
    ex.documents.push_back(std::move(d));
  }
  return ex;
}

void write_corpus(std::ostream& out, std::span<const QAExample> examples) {
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

std::vector<QAExample> read_corpus(std::istream& in) {
  std::vector<QAExample> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(example_from_json(parse_json(line, index), index));
    ++index;
  }
  check_unique(out);
  return out;
}

std::vector<QAExample> read_corpus_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus '" + path + "'");
  return read_corpus(in);
}

}  // namespace mbt
