#include "mbt/prompts.hpp"

#include <algorithm>
#include <cstdlib>
#include <optional>
#include <fstream>
#include <sstream>

#include "mbt/errors.hpp"
#include "mbt/text.hpp"

#ifndef MBT_TEMPLATE_DIR
#define MBT_TEMPLATE_DIR "assets/templates"
#endif

namespace mbt {

namespace {

constexpr std::array<std::string_view, 5> kPlaceholders = {
    "question", "answer", "context", "reasoning_trace", "prediction"};

std::string rstrip_lines(std::string_view body) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto nl = body.find('\n', pos);
    std::string_view line = body.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    while (!line.empty() && text::is_space(line.back())) line.remove_suffix(1);
    out += line;
    if (nl == std::string_view::npos) break;
    out += '\n';
    pos = nl + 1;
  }
  return std::string(text::trim(out));
}

// Calls on_text for literal spans and on_placeholder for each recognized {name}.
template <class OnText, class OnPlaceholder>
void scan(std::string_view body, OnText on_text, OnPlaceholder on_placeholder) {
  std::size_t pos = 0;
  std::size_t literal_begin = 0;
  while ((pos = body.find('{', pos)) != std::string_view::npos) {
    const auto close = body.find('}', pos);
    if (close == std::string_view::npos) break;
    const std::string_view name = body.substr(pos + 1, close - pos - 1);
    if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) != kPlaceholders.end()) {
      on_text(body.substr(literal_begin, pos - literal_begin));
      on_placeholder(name);
      pos = close + 1;
      literal_begin = pos;
    } else {
      ++pos;
    }
  }
  on_text(body.substr(literal_begin));
}

}  // namespace

std::string_view to_string(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::answer_inclusion: return "answer_inclusion";
    case TemplateId::mbt_s: return "mbt_s";
    case TemplateId::mbt_r: return "mbt_r";
    case TemplateId::overthinking: return "overthinking";
    case TemplateId::underthinking: return "underthinking";
    case TemplateId::metacognition: return "metacognition";
    case TemplateId::base_qa: return "base_qa";
    case TemplateId::metacog_prompting: return "metacog_prompting";
    case TemplateId::correctness_judge: return "correctness_judge";
  }
  return "unknown";
}

TemplateId parse_template_id(std::string_view name) {
  for (TemplateId id : kAllTemplates) {
    if (to_string(id) == name) return id;
  }
  throw ConfigError("unknown template '" + std::string(name) + "'");
}

PromptTemplate parse_template(TemplateId id, std::string_view text) {
  PromptTemplate t;
  t.id = id;
  std::size_t pos = 0;
  std::optional<Role> role;
  std::string body;
  auto flush = [&] {
    if (!role) return;
    t.messages.push_back({*role, rstrip_lines(body)});
    body.clear();
  };
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (line.size() > 4 && line.starts_with("[[") && line.ends_with("]]")) {
      flush();
      role = parse_role(line.substr(2, line.size() - 4));
      continue;
    }
    if (!role) {
      if (text::trim(line).empty()) continue;
      throw ConfigError("template '" + std::string(to_string(id)) + "' must start with a [[role]] line");
    }
    body += line;
    body += '\n';
  }
  flush();
  if (t.messages.empty()) throw ConfigError("template '" + std::string(to_string(id)) + "' is empty");
  for (const auto& m : t.messages) {
    scan(m.body, [](std::string_view) {}, [&](std::string_view name) { t.placeholders.emplace(name); });
  }
  return t;
}

TemplateLibrary TemplateLibrary::load(const std::filesystem::path& dir) {
  TemplateLibrary lib;
  for (TemplateId id : kAllTemplates) {
    const auto path = dir / (std::string(to_string(id)) + ".txt");
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("missing template asset " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    lib.templates_.emplace(id, parse_template(id, ss.str()));
  }
  return lib;
}

std::filesystem::path TemplateLibrary::default_dir() {
  if (const char* env = std::getenv("MBT_TEMPLATE_DIR"); env && *env) return env;
  return MBT_TEMPLATE_DIR;
}

TemplateLibrary TemplateLibrary::load_default() { return load(default_dir()); }

const PromptTemplate& TemplateLibrary::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ConfigError("template not loaded: " + std::string(to_string(id)));
  return it->second;
}

std::vector<ChatMessage> TemplateLibrary::render(TemplateId id, const Bindings& bindings) const {
  const PromptTemplate& t = get(id);
  for (const auto& name : t.placeholders) {
    if (!bindings.contains(name)) {
      throw TemplateError(name, "template '" + std::string(to_string(id)) +
                                    "' is missing binding for placeholder '" + name + "'");
    }
  }
  for (const auto& [name, _] : bindings) {
    if (!t.placeholders.contains(name)) {
      throw TemplateError(name, "template '" + std::string(to_string(id)) +
                                    "' has no placeholder '" + name + "'");
    }
  }
  std::vector<ChatMessage> out;
  out.reserve(t.messages.size());
  for (const auto& m : t.messages) {
    std::string content;
    content.reserve(m.body.size());
    scan(
        m.body, [&](std::string_view lit) { content += lit; },
        [&](std::string_view name) { content += bindings.find(name)->second; });
    out.push_back({m.role, std::move(content)});
  }
  return out;
}

}  // namespace mbt
