#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compgen/data/example.hpp"
#include "compgen/grad/rng.hpp"

namespace compgen::eval {

using FeatureVector = std::vector<double>;

/// One prompt plus one candidate per leave-out key; exactly one candidate
/// carries the prompt's key.
struct SelectionTask {
  std::vector<std::string> tokens;
  std::string key;
  std::vector<FeatureVector> candidates;
  std::vector<std::string> candidate_keys;
  std::size_t answer = 0;
};

/// Prompt key uniform over the distinct keys of `pool`; one fresh sample per
/// key; candidate order shuffled. Throws ConfigurationError for < 2 keys.
std::vector<SelectionTask> build_tasks(const std::vector<data::Example>& pool, std::size_t n, grad::Rng& rng);

using Selector = std::function<std::size_t(const std::vector<std::string>& tokens,
                                           const std::vector<FeatureVector>& candidates)>;

struct PromptTally {
  std::size_t n = 0;
  std::size_t correct = 0;
};

struct EvalReport {
  std::size_t n_tasks = 0;
  std::size_t n_correct = 0;
  std::size_t n_failed = 0;  // selector threw; counted as incorrect
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::map<std::string, PromptTally> per_prompt;
  std::vector<std::string> failures;
  std::string fingerprint;
  nlohmann::ordered_json config;
  double wall_seconds = 0.0;

  /// Timing fields are omitted when include_timing is false so that reports
  /// from identical runs compare byte-for-byte.
  nlohmann::ordered_json to_json(bool include_timing = true) const;
  /// accuracy=<f> n=<i> ci99=[lo,hi]
  std::string summary_line() const;
};

/// Wilson score interval at 99% confidence.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n);

/// Hex FNV-1a digest of the compact JSON dump.
std::string config_fingerprint(const nlohmann::ordered_json& config);

EvalReport evaluate(const Selector& selector, const std::vector<SelectionTask>& tasks,
                    const nlohmann::ordered_json& config = nlohmann::ordered_json::object());

}  // namespace compgen::eval
