#include "compgen/data/jsonl.hpp"

#include <sstream>

#include "compgen/grad/serialize.hpp"

namespace compgen::data {

using grad::ParseError;

std::string example_to_jsonl_line(const Example& example) {
  std::string line = "{\"features\": [";
  for (std::size_t i = 0; i < example.features.size(); ++i) {
    if (i) line += ", ";
    line += grad::format_double(example.features[i]);
  }
  line += "], \"tokens\": " + nlohmann::json(example.tokens).dump();
  line += ", \"key\": " + nlohmann::json(example.key).dump();
  line += ", \"meta\": " + example.meta.dump() + "}";
  return line;
}

Example example_from_json_line(const std::string& line, std::size_t line_number) {
  const std::string where = "line " + std::to_string(line_number);
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ", byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    Example ex;
    ex.features = j.at("features").get<std::vector<double>>();
    ex.tokens = j.at("tokens").get<std::vector<std::string>>();
    ex.key = j.at("key").get<std::string>();
    ex.meta = j.value("meta", nlohmann::ordered_json::object());
    if (ex.tokens.empty()) throw ParseError(where + ": empty token list");
    return ex;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": " + e.what());
  }
}

std::string encode_jsonl(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& ex : examples) out += example_to_jsonl_line(ex) + "\n";
  return out;
}

namespace {

template <class F>
void for_each_line(const std::string& text, F&& f) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    f(line, number);
  }
}

}  // namespace

std::vector<Example> decode_jsonl(const std::string& text) {
  std::vector<Example> out;
  for_each_line(text, [&](const std::string& line, std::size_t n) { out.push_back(example_from_json_line(line, n)); });
  return out;
}

std::string encode_split_jsonl(const Split<Example>& split) {
  std::string out;
  auto emit = [&out](const Example& ex, const char* side) {
    Example tagged = ex;
    tagged.meta["split"] = side;
    out += example_to_jsonl_line(tagged) + "\n";
  };
  for (const auto& ex : split.train) emit(ex, "train");
  for (const auto& ex : split.holdout) emit(ex, "holdout");
  return out;
}

Split<Example> decode_split_jsonl(const std::string& text) {
  Split<Example> split;
  for_each_line(text, [&](const std::string& line, std::size_t n) {
    Example ex = example_from_json_line(line, n);
    auto it = ex.meta.find("split");
    if (it == ex.meta.end() || !it->is_string()) {
      throw ParseError("line " + std::to_string(n) + ": missing meta.split");
    }
    const std::string side = it->get<std::string>();
    ex.meta.erase("split");
    if (side == "train") {
      split.train.push_back(std::move(ex));
    } else if (side == "holdout") {
      split.holdout_keys.insert(ex.key);
      split.holdout.push_back(std::move(ex));
    } else {
      throw ParseError("line " + std::to_string(n) + ": unknown split '" + side + "'");
    }
  });
  try {
    split.validate();
  } catch (const ConfigurationError& e) {
    throw ParseError(e.what());
  }
  return split;
}

void write_jsonl(const Split<Example>& split, const std::filesystem::path& path) {
  grad::write_file_atomic(path, encode_split_jsonl(split));
}

Split<Example> read_jsonl(const std::filesystem::path& path) {
  try {
    return decode_split_jsonl(grad::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_examples_jsonl(const std::vector<Example>& examples, const std::filesystem::path& path) {
  grad::write_file_atomic(path, encode_jsonl(examples));
}

std::vector<Example> read_examples_jsonl(const std::filesystem::path& path) {
  try {
    return decode_jsonl(grad::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace compgen::data
