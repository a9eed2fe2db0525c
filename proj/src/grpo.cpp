#include "mbt/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mbt/errors.hpp"
#include "mbt/metrics.hpp"

namespace mbt::grpo {

double f1_reward(std::string_view pred, std::string_view gold) { return token_f1(pred, gold); }

std::vector<double> group_advantages(std::span<const double> rewards, double eps_std) {
  const std::size_t n = rewards.size();
  if (n < 2) throw DomainError("group_advantages: need at least two rewards");
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (const double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> adv(n, 0.0);
  if (sd == 0.0 || sd < eps_std) return adv;
  for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

double clipped_term(double ratio, double adv, double eps_clip) {
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  return std::min(ratio * adv, clipped * adv);
}

double kl_penalty(double cur_logprob, double ref_logprob) {
  const double d = ref_logprob - cur_logprob;
  // Taylor form near zero, where expm1(d) - d would cancel to 0.
  if (std::abs(d) < 1e-5) return d * d * (0.5 + d / 6.0 + d * d / 24.0);
  return std::expm1(d) - d;
}

void Group::validate() const {
  if (rewards.size() < 2) throw DomainError("group needs at least two outputs");
  if (outputs.size() != rewards.size()) {
    throw DomainError("group has " + std::to_string(rewards.size()) + " rewards but " +
                      std::to_string(outputs.size()) + " outputs");
  }
  if (!(eps_clip > 0.0 && eps_clip < 1.0)) throw DomainError("eps_clip must lie in (0, 1)");
  if (!(beta_kl >= 0.0)) throw DomainError("beta_kl must be non-negative");
  if (!(eps_std >= 0.0)) throw DomainError("eps_std must be non-negative");
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const auto& o = outputs[i];
    if (o.current.size() != o.old.size() || o.current.size() != o.ref.size()) {
      throw DomainError("output " + std::to_string(i) + ": log-prob sequences differ in length");
    }
  }
}

Breakdown evaluate(const Group& group, const Options& options) {
  group.validate();
  Breakdown b;
  b.advantages = group_advantages(group.rewards, group.eps_std);
  const std::size_t g = group.outputs.size();
  double surrogate_total = 0.0;
  double kl_total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const auto& o = group.outputs[i];
    auto& ratios = b.ratios.emplace_back();
    auto& terms = b.surrogate.emplace_back();
    auto& kls = b.kl.emplace_back();
    double sum = 0.0;
    for (std::size_t t = 0; t < o.current.size(); ++t) {
      const double rho = std::exp(o.current[t] - o.old[t]);
      ratios.push_back(rho);
      terms.push_back(clipped_term(rho, b.advantages[i], group.eps_clip));
      kls.push_back(kl_penalty(o.current[t], o.ref[t]));
      sum += terms.back();
      kl_total += kls.back();
    }
    tokens += o.current.size();
    if (options.normalize_surrogate_by_length && !o.current.empty()) {
      sum /= static_cast<double>(o.current.size());
    }
    surrogate_total += sum;
  }
  b.surrogate_mean = surrogate_total / static_cast<double>(g);
  b.kl_mean = tokens == 0 ? 0.0 : kl_total / static_cast<double>(tokens);
  b.objective = -(b.surrogate_mean - group.beta_kl * b.kl_mean);
  return b;
}

double objective(const Group& group, const Options& options) {
  return evaluate(group, options).objective;
}

nlohmann::ordered_json to_json(const Breakdown& b) {
  nlohmann::ordered_json j;
  j["advantages"] = b.advantages;
  j["ratios"] = b.ratios;
  j["surrogate"] = b.surrogate;
  j["kl"] = b.kl;
  j["surrogate_mean"] = b.surrogate_mean;
  j["kl_mean"] = b.kl_mean;
  j["objective"] = b.objective;
  return j;
}

Group group_from_json(const nlohmann::json& j) {
  Group g;
  try {
    if (j.contains("rewards")) {
      g.rewards = j.at("rewards").get<std::vector<double>>();
    } else if (j.contains("predictions")) {
      const auto gold = j.at("gold").get<std::string>();
      for (const auto& p : j.at("predictions")) {
        g.rewards.push_back(f1_reward(p.get<std::string>(), gold));
      }
    } else {
      throw DomainError("group record needs 'rewards' or 'predictions' + 'gold'");
    }
    for (const auto& o : j.at("outputs")) {
      g.outputs.push_back({o.at("logp_current").get<std::vector<double>>(),
                           o.at("logp_old").get<std::vector<double>>(),
                           o.at("logp_ref").get<std::vector<double>>()});
    }
    g.eps_clip = j.value("eps_clip", g.eps_clip);
    g.beta_kl = j.value("beta_kl", g.beta_kl);
    g.eps_std = j.value("eps_std", g.eps_std);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed group record: ") + e.what());
  }
  g.validate();
  return g;
}

}  // namespace mbt::grpo
