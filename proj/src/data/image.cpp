#include "compgen/data/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "compgen/grad/serialize.hpp"

namespace compgen::data {

using grad::ParseError;

double iou(const BBox& a, const BBox& b) {
  const int r0 = std::max(a.row_min, b.row_min), r1 = std::min(a.row_max, b.row_max);
  const int c0 = std::max(a.col_min, b.col_min), c1 = std::min(a.col_max, b.col_max);
  long inter = 0;
  if (r0 <= r1 && c0 <= c1) inter = static_cast<long>(r1 - r0 + 1) * (c1 - c0 + 1);
  const long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

nlohmann::ordered_json bbox_to_json(const BBox& box) {
  return {{"row_min", box.row_min}, {"row_max", box.row_max}, {"col_min", box.col_min}, {"col_max", box.col_max}};
}

BBox bbox_from_json(const nlohmann::ordered_json& j) {
  return BBox{j.at("row_min").get<int>(), j.at("row_max").get<int>(), j.at("col_min").get<int>(),
              j.at("col_max").get<int>()};
}

nlohmann::ordered_json truth_to_json(const SceneTruth& truth) {
  return {{"color", truth.color},
          {"shape", truth.shape},
          {"center", {truth.center_row, truth.center_col}},
          {"half_extent", truth.half_extent},
          {"bbox", bbox_to_json(truth.bbox)}};
}

SceneTruth truth_from_json(const nlohmann::ordered_json& j) {
  SceneTruth t;
  t.color = j.at("color").get<std::string>();
  t.shape = j.at("shape").get<std::string>();
  t.center_row = j.at("center").at(0).get<int>();
  t.center_col = j.at("center").at(1).get<int>();
  t.half_extent = j.at("half_extent").get<int>();
  t.bbox = bbox_from_json(j.at("bbox"));
  return t;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (double v : image.pixels) {
    const double c = std::clamp(v, 0.0, 1.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * c))));
  }
  return out;
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw ParseError(std::string("ppm: ") + what + " too large at byte " + std::to_string(start));
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("ppm: expected ") + what + " at byte " + std::to_string(start));
    return value;
  }

  std::size_t pos_ = 0;

 private:
  const std::string& bytes_;
};

}  // namespace

Image decode_ppm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ParseError("ppm: missing P6 magic at byte 0");
  HeaderReader reader(bytes);
  reader.pos_ = 2;
  const long width = reader.number("width");
  const long height = reader.number("height");
  const long maxval = reader.number("maxval");
  if (width <= 0 || height <= 0) throw ParseError("ppm: non-positive extent");
  if (maxval != 255) throw ParseError("ppm: only maxval 255 is supported, got " + std::to_string(maxval));
  if (reader.pos_ >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[reader.pos_]))) {
    throw ParseError("ppm: expected single whitespace after maxval at byte " + std::to_string(reader.pos_));
  }
  const std::size_t data_start = reader.pos_ + 1;
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() < data_start + expected) {
    throw ParseError("ppm: truncated pixel data, expected " + std::to_string(expected) + " bytes from offset " +
                     std::to_string(data_start) + ", file ends at byte " + std::to_string(bytes.size()));
  }
  Image image(static_cast<std::size_t>(height), static_cast<std::size_t>(width));
  for (std::size_t i = 0; i < expected; ++i) {
    image.pixels[i] = static_cast<double>(static_cast<unsigned char>(bytes[data_start + i])) / 255.0;
  }
  return image;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  grad::write_file_atomic(path, encode_ppm(image));
}

Image read_ppm(const std::filesystem::path& path) {
  try {
    return decode_ppm(grad::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_scene(const SceneImage& scene, const std::filesystem::path& dir, const std::string& stem) {
  write_ppm(scene.image, dir / (stem + ".ppm"));
  nlohmann::ordered_json side = {{"key", scene.key}, {"tokens", scene.tokens}, {"truth", truth_to_json(scene.truth)}};
  grad::write_file_atomic(dir / (stem + ".json"), side.dump(2) + "\n");
}

SceneImage read_scene(const std::filesystem::path& dir, const std::string& stem) {
  SceneImage scene;
  scene.image = read_ppm(dir / (stem + ".ppm"));
  try {
    const auto side = nlohmann::ordered_json::parse(grad::read_file(dir / (stem + ".json")));
    scene.key = side.at("key").get<std::string>();
    scene.tokens = side.at("tokens").get<std::vector<std::string>>();
    scene.truth = truth_from_json(side.at("truth"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError((dir / (stem + ".json")).string() + ": " + e.what());
  }
  return scene;
}

}  // namespace compgen::data
