#include "compgen/ide/vocab.hpp"

#include "compgen/grad/serialize.hpp"

namespace compgen::ide {

Vocab::Vocab(std::vector<std::string> words) : words_(std::move(words)) {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) throw std::invalid_argument("duplicate vocabulary word '" + words_[i] + "'");
  }
}

Vocab Vocab::from_examples(const std::vector<data::Example>& examples) {
  std::vector<std::string> words;
  std::map<std::string, std::size_t> seen;
  for (const auto& ex : examples) {
    for (const auto& t : ex.tokens) {
      if (seen.emplace(t, words.size()).second) words.push_back(t);
    }
  }
  return Vocab(std::move(words));
}

std::size_t Vocab::index(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) throw VocabularyError("unknown word '" + word + "'");
  return it->second;
}

std::vector<std::size_t> Vocab::indices(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(index(t));
  return out;
}

nlohmann::ordered_json Vocab::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < words_.size(); ++i) j[words_[i]] = i;
  return j;
}

Vocab Vocab::from_json(const nlohmann::ordered_json& manifest) {
  try {
    std::vector<std::string> words(manifest.size());
    std::vector<bool> filled(manifest.size(), false);
    for (const auto& [word, idx] : manifest.items()) {
      const auto i = idx.get<std::size_t>();
      if (i >= words.size() || filled[i]) throw grad::ParseError("vocab manifest indices are not dense");
      words[i] = word;
      filled[i] = true;
    }
    return Vocab(std::move(words));
  } catch (const nlohmann::json::exception& e) {
    throw grad::ParseError(std::string("vocab manifest: ") + e.what());
  }
}

}  // namespace compgen::ide
