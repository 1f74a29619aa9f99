#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "compgen/grad/params.hpp"

namespace compgen::grad {

/// Raised for malformed input files; the message carries the location.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a file cannot be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decimal with 17 significant digits; parses back to the identical double.
std::string format_double(double value);

/// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Checkpoint document:
///   {"format": "compgen-params/1", "step": <n>, "meta": {...},
///    "parameters": {"<name>": {"shape": [...], "data": [...]}, ...}}
/// Parameters appear in ParamSet order; floats use format_double.
std::string params_to_json(const ParamSet& params, const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());
ParamSet params_from_json(std::string_view text, nlohmann::ordered_json* meta = nullptr);

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params,
                     const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());
ParamSet load_checkpoint(const std::filesystem::path& path, nlohmann::ordered_json* meta = nullptr);

}  // namespace compgen::grad
