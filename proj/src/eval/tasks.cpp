#include "compgen/eval/tasks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "compgen/grad/serialize.hpp"

namespace compgen::eval {

std::vector<SelectionTask> build_tasks(const std::vector<data::Example>& pool, std::size_t n, grad::Rng& rng) {
  const auto keys = data::distinct_keys(pool);
  if (keys.size() < 2) throw data::ConfigurationError("build_tasks: need at least 2 distinct keys");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < pool.size(); ++i) groups[pool[i].key].push_back(i);

  std::vector<SelectionTask> tasks;
  tasks.reserve(n);
  std::vector<std::size_t> order(keys.size());
  for (std::size_t t = 0; t < n; ++t) {
    SelectionTask task;
    const std::size_t prompt = rng.index(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) order[k] = k;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      const auto& members = groups.at(keys[order[pos]]);
      const auto& ex = pool[members[rng.index(members.size())]];
      task.candidates.push_back(ex.features);
      task.candidate_keys.push_back(ex.key);
      if (order[pos] == prompt) {
        task.answer = pos;
        task.tokens = ex.tokens;
        task.key = ex.key;
      }
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t n) {
  if (n == 0) return {0.0, 1.0};
  constexpr double z = 2.5758293035489004;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

std::string config_fingerprint(const nlohmann::ordered_json& config) {
  return grad::hex64(grad::fnv1a64(config.dump()));
}

EvalReport evaluate(const Selector& selector, const std::vector<SelectionTask>& tasks,
                    const nlohmann::ordered_json& config) {
  const auto start = std::chrono::steady_clock::now();
  EvalReport r;
  r.config = config;
  r.fingerprint = config_fingerprint(config);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    auto& tally = r.per_prompt[task.key];
    ++tally.n;
    ++r.n_tasks;
    try {
      if (selector(task.tokens, task.candidates) == task.answer) {
        ++tally.correct;
        ++r.n_correct;
      }
    } catch (const std::exception& e) {
      ++r.n_failed;
      r.failures.push_back("task " + std::to_string(t) + ": " + e.what());
    }
  }
  r.accuracy = r.n_tasks ? static_cast<double>(r.n_correct) / static_cast<double>(r.n_tasks) : 0.0;
  std::tie(r.ci_low, r.ci_high) = wilson_interval(r.n_correct, r.n_tasks);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

nlohmann::ordered_json EvalReport::to_json(bool include_timing) const {
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& [key, t] : per_prompt) {
    per[key] = {{"n", t.n}, {"correct", t.correct},
                {"accuracy", t.n ? static_cast<double>(t.correct) / static_cast<double>(t.n) : 0.0}};
  }
  nlohmann::ordered_json j = {{"n_tasks", n_tasks},   {"n_correct", n_correct}, {"n_failed", n_failed},
                              {"accuracy", accuracy}, {"ci99", {ci_low, ci_high}}, {"per_prompt", per},
                              {"failures", failures}, {"fingerprint", fingerprint}, {"config", config}};
  if (include_timing) j["wall_seconds"] = wall_seconds;
  return j;
}

std::string EvalReport::summary_line() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "accuracy=%.4f n=%zu ci99=[%.4f,%.4f]", accuracy, n_tasks, ci_low, ci_high);
  return buf;
}

}  // namespace compgen::eval
