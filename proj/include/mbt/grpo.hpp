#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mbt::grpo {

/// Token-level F1 between predicted and gold answers, in [0, 1].
double f1_reward(std::string_view pred, std::string_view gold);

/// (r - mean) / std with the sample (n-1) standard deviation. All zeros when the
/// std is zero or below `eps_std`. Throws DomainError for fewer than two rewards.
std::vector<double> group_advantages(std::span<const double> rewards, double eps_std = 1e-6);

/// min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)
double clipped_term(double ratio, double adv, double eps_clip);

/// exp(d) - d - 1 with d = ref - cur; non-negative, zero iff d == 0.
double kl_penalty(double cur_logprob, double ref_logprob);

struct OutputLogprobs {
  std::vector<double> current;
  std::vector<double> old;
  std::vector<double> ref;
};

struct Group {
  std::vector<double> rewards;
  std::vector<OutputLogprobs> outputs;
  double eps_clip = 0.2;
  double beta_kl = 1e-3;
  double eps_std = 1e-6;

  /// Throws DomainError when shapes or coefficients are invalid.
  void validate() const;
};

struct Options {
  // Divide each output's surrogate sum by its token count.
  bool normalize_surrogate_by_length = false;
};

struct Breakdown {
  std::vector<double> advantages;
  std::vector<std::vector<double>> ratios;
  std::vector<std::vector<double>> surrogate;  // clipped term per token
  std::vector<std::vector<double>> kl;         // penalty per token
  double surrogate_mean = 0.0;                 // (1/G) sum_i sum_t
  double kl_mean = 0.0;                        // mean over all tokens of the group
  double objective = 0.0;                      // -(surrogate_mean - beta * kl_mean)
};

Breakdown evaluate(const Group& group, const Options& options = {});
double objective(const Group& group, const Options& options = {});

nlohmann::ordered_json to_json(const Breakdown& b);

/// Reads a group record: {"rewards": [...]} or {"predictions": [...], "gold": "..."},
/// plus "outputs": [{"logp_current", "logp_old", "logp_ref"}] and optional
/// eps_clip / beta_kl / eps_std.
Group group_from_json(const nlohmann::json& j);

}  // namespace mbt::grpo
