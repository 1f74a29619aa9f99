#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "compgen/data/example.hpp"

namespace compgen::data {

// One Example per line: {"features": [...], "tokens": [...], "key": "...", "meta": {...}}.
// Split files tag each line with meta.split = "train" | "holdout"; the tag is
// stripped again on read. Floats carry 17 significant digits.

std::string example_to_jsonl_line(const Example& example);
Example example_from_json_line(const std::string& line, std::size_t line_number);

std::string encode_jsonl(const std::vector<Example>& examples);
std::vector<Example> decode_jsonl(const std::string& text);

std::string encode_split_jsonl(const Split<Example>& split);
Split<Example> decode_split_jsonl(const std::string& text);

void write_jsonl(const Split<Example>& split, const std::filesystem::path& path);
Split<Example> read_jsonl(const std::filesystem::path& path);

void write_examples_jsonl(const std::vector<Example>& examples, const std::filesystem::path& path);
std::vector<Example> read_examples_jsonl(const std::filesystem::path& path);

}  // namespace compgen::data
