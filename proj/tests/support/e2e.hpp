#pragma once

#include <filesystem>
#include <string>

#include "mbt/config.hpp"
#include "mbt/gateway.hpp"
#include "mbt/prompts.hpp"

namespace mbt::testing {

inline std::filesystem::path e2e_dir() { return std::filesystem::path(MBT_TEST_FIXTURES) / "e2e"; }

/// ingest -> generate (base, metaprompt) -> judge -> metrics -> report inside `work`.
void run_e2e(const RunConfig& config, const Gateway& gateway, const TemplateLibrary& templates,
             const std::filesystem::path& raw_dataset, const std::filesystem::path& work);

}  // namespace mbt::testing
