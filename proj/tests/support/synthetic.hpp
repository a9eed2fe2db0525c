#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "mbt/dataset.hpp"
#include "mbt/gateway.hpp"

namespace mbt::testing {

std::uint64_t fnv1a(std::string_view s);

/// Deterministic stand-in for student, teacher and judge endpoints. It recognizes
/// each prompt template by its opening line and answers from the corpus, so every
/// pipeline stage sees a realistic mix: correct, paraphrased, answer-inclusive,
/// plainly wrong, degenerated and tag-less generations; YES/NO and scored judge
/// replies (some needing the re-ask); truncated and re-wrapped trace prefixes.
class SyntheticResponder final : public Transport {
public:
  explicit SyntheticResponder(std::vector<QAExample> corpus);
  CompletionResult send(const CompletionRequest& request) override;
  bool uses_network() const noexcept override { return false; }

private:
  std::map<std::string, QAExample, std::less<>> by_question_;
};

/// Forwards to another transport and records every exchange as a fixture.
class RecordingTransport final : public Transport {
public:
  explicit RecordingTransport(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}
  CompletionResult send(const CompletionRequest& request) override;
  bool uses_network() const noexcept override { return inner_->uses_network(); }
  FixtureStore fixtures() const;

private:
  std::shared_ptr<Transport> inner_;
  mutable std::mutex mu_;
  FixtureStore store_;
};

/// Returns canned outcomes in order; a step with a non-200 status throws a
/// TransportError carrying that status.
class ScriptedTransport final : public Transport {
public:
  struct Step {
    int status = 200;
    CompletionResult result;
  };
  explicit ScriptedTransport(std::vector<Step> steps) : steps_(std::move(steps)) {}
  CompletionResult send(const CompletionRequest& request) override;
  std::size_t calls() const;
  std::vector<CompletionRequest> requests() const;

private:
  mutable std::mutex mu_;
  std::vector<Step> steps_;
  std::size_t next_ = 0;
  std::vector<CompletionRequest> seen_;
};

CompletionResult reply(std::string content, FinishReason finish = FinishReason::stop,
                       std::optional<std::int64_t> tokens = std::nullopt);

}  // namespace mbt::testing
