#include "compgen/grad/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace compgen::grad {

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string params_to_json(const ParamSet& params, const nlohmann::ordered_json& meta) {
  std::string out;
  out += "{\"format\": \"compgen-params/1\", \"step\": " + std::to_string(params.step());
  out += ", \"meta\": " + meta.dump();
  out += ", \"parameters\": {";
  bool first = true;
  for (const auto& p : params.entries()) {
    if (!first) out += ", ";
    first = false;
    out += "\n  " + nlohmann::json(p.name).dump() + ": {\"shape\": [";
    for (std::size_t i = 0; i < p.value.shape().size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(p.value.shape()[i]);
    }
    out += "], \"data\": [";
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      if (i) out += ", ";
      out += format_double(p.value[i]);
    }
    out += "]}";
  }
  out += "\n}}\n";
  return out;
}

ParamSet params_from_json(std::string_view text, nlohmann::ordered_json* meta) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "compgen-params/1") throw ParseError("checkpoint: unknown format");
    ParamSet params;
    for (const auto& [name, entry] : doc.at("parameters").items()) {
      Shape shape = entry.at("shape").get<Shape>();
      std::vector<double> data = entry.at("data").get<std::vector<double>>();
      params.add(name, Tensor(std::move(shape), std::move(data)));
    }
    params.set_step(doc.at("step").get<std::uint64_t>());
    if (meta != nullptr) *meta = doc.value("meta", nlohmann::ordered_json::object());
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params, const nlohmann::ordered_json& meta) {
  write_file_atomic(path, params_to_json(params, meta));
}

ParamSet load_checkpoint(const std::filesystem::path& path, nlohmann::ordered_json* meta) {
  return params_from_json(read_file(path), meta);
}

}  // namespace compgen::grad
