#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compgen/data/example.hpp"

namespace compgen::ide {

class VocabularyError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Ordered set of unique words with dense indices 0..V-1.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> words);

  /// Words in first-appearance order over the examples' tokens.
  static Vocab from_examples(const std::vector<data::Example>& examples);

  std::size_t size() const { return words_.size(); }
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  std::size_t index(const std::string& word) const;
  std::vector<std::size_t> indices(const std::vector<std::string>& tokens) const;
  const std::string& word(std::size_t i) const { return words_.at(i); }
  const std::vector<std::string>& words() const { return words_; }

  /// {word: index} manifest.
  nlohmann::ordered_json to_json() const;
  static Vocab from_json(const nlohmann::ordered_json& manifest);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace compgen::ide
