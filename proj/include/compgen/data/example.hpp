#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace compgen::data {

/// Raised for invalid generator or split settings (e.g. a leave-out key that
/// matches nothing).
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A feature vector paired with the words that describe it.
struct Example {
  std::vector<double> features;
  std::vector<std::string> tokens;
  std::string key;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();

  friend bool operator==(const Example&, const Example&) = default;
};

/// Canonical description key: tokens joined by single spaces.
std::string join_tokens(const std::vector<std::string>& tokens);

Example make_example(std::vector<double> features, std::vector<std::string> tokens,
                     nlohmann::ordered_json meta = nlohmann::ordered_json::object());

template <class T>
const std::string& key_of(const T& item) {
  return item.key;
}

/// Train/holdout partition by description key.
template <class T>
struct Split {
  std::vector<T> train;
  std::vector<T> holdout;
  std::set<std::string> holdout_keys;

  /// Throws ConfigurationError if a train item carries a holdout key or a
  /// holdout item carries any other key.
  void validate() const {
    for (const auto& item : train) {
      if (holdout_keys.count(key_of(item)) != 0) {
        throw ConfigurationError("train item carries holdout key '" + key_of(item) + "'");
      }
    }
    for (const auto& item : holdout) {
      if (holdout_keys.count(key_of(item)) == 0) {
        throw ConfigurationError("holdout item carries non-holdout key '" + key_of(item) + "'");
      }
    }
  }

  friend bool operator==(const Split&, const Split&) = default;
};

/// Partitions `dataset` by key, preserving order within each side. Every
/// holdout key must match at least one item.
template <class T>
Split<T> apply_leave_out(const std::vector<T>& dataset, const std::set<std::string>& holdout_keys) {
  if (holdout_keys.empty()) throw ConfigurationError("leave-out key set is empty");
  Split<T> split;
  split.holdout_keys = holdout_keys;
  std::set<std::string> seen;
  for (const auto& item : dataset) {
    if (holdout_keys.count(key_of(item)) != 0) {
      seen.insert(key_of(item));
      split.holdout.push_back(item);
    } else {
      split.train.push_back(item);
    }
  }
  for (const auto& key : holdout_keys) {
    if (seen.count(key) == 0) throw ConfigurationError("leave-out key '" + key + "' matches no example");
  }
  split.validate();
  return split;
}

/// Distinct keys in first-appearance order.
template <class T>
std::vector<std::string> distinct_keys(const std::vector<T>& items) {
  std::vector<std::string> keys;
  std::set<std::string> seen;
  for (const auto& item : items) {
    if (seen.insert(key_of(item)).second) keys.push_back(key_of(item));
  }
  return keys;
}

}  // namespace compgen::data
