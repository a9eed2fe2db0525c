#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mbt::jsonl {

/// Calls fn(record, index) for every non-blank line. Throws RecordError on bad JSON.
void for_each(const std::filesystem::path& path,
              const std::function<void(const nlohmann::json&, std::size_t)>& fn);

/// Writes lines to a temp file and renames it over `path`.
void write_atomic(const std::filesystem::path& path, const std::vector<std::string>& lines);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace mbt::jsonl
