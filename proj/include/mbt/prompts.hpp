#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mbt/gateway.hpp"

namespace mbt {

enum class TemplateId {
  answer_inclusion,
  mbt_s,
  mbt_r,
  overthinking,
  underthinking,
  metacognition,
  base_qa,
  metacog_prompting,
  correctness_judge,  // project-specific judge prompt
};

inline constexpr std::array kAllTemplates = {
    TemplateId::answer_inclusion, TemplateId::mbt_s,         TemplateId::mbt_r,
    TemplateId::overthinking,     TemplateId::underthinking, TemplateId::metacognition,
    TemplateId::base_qa,          TemplateId::metacog_prompting, TemplateId::correctness_judge,
};

std::string_view to_string(TemplateId id) noexcept;
TemplateId parse_template_id(std::string_view name);

/// Placeholder name -> value. Recognized names: question, answer, context,
/// reasoning_trace, prediction.
using Bindings = std::map<std::string, std::string, std::less<>>;

struct MessageTemplate {
  Role role = Role::user;
  std::string body;
};

struct PromptTemplate {
  TemplateId id{};
  std::vector<MessageTemplate> messages;
  std::set<std::string, std::less<>> placeholders;
};

/// Parses a template asset: each message starts with a `[[role]]` line; trailing
/// whitespace is stripped per line and each message body is trimmed.
PromptTemplate parse_template(TemplateId id, std::string_view text);

class TemplateLibrary {
public:
  /// Loads `<dir>/<template-name>.txt` for every TemplateId.
  static TemplateLibrary load(const std::filesystem::path& dir);
  /// $MBT_TEMPLATE_DIR if set, otherwise the asset directory baked in at build time.
  static TemplateLibrary load_default();
  static std::filesystem::path default_dir();

  const PromptTemplate& get(TemplateId id) const;

  /// Substitutes every placeholder in one pass. Throws TemplateError naming the
  /// placeholder when a required binding is missing or an extra one is supplied.
  std::vector<ChatMessage> render(TemplateId id, const Bindings& bindings) const;

private:
  std::map<TemplateId, PromptTemplate> templates_;
};

}  // namespace mbt
