#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace compgen::data {

/// H x W x 3 raster, row-major with interleaved channels, values in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w * 3, fill) {}

  double& at(std::size_t row, std::size_t col, std::size_t channel) {
    return pixels[(row * width + col) * 3 + channel];
  }
  double at(std::size_t row, std::size_t col, std::size_t channel) const {
    return pixels[(row * width + col) * 3 + channel];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Inclusive pixel bounds.
struct BBox {
  int row_min = 0;
  int row_max = 0;
  int col_min = 0;
  int col_max = 0;

  int height() const { return row_max - row_min + 1; }
  int width() const { return col_max - col_min + 1; }
  long area() const { return static_cast<long>(height()) * width(); }
  bool contains(int row, int col) const {
    return row >= row_min && row <= row_max && col >= col_min && col <= col_max;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection over union of two inclusive boxes.
double iou(const BBox& a, const BBox& b);

nlohmann::ordered_json bbox_to_json(const BBox& box);
BBox bbox_from_json(const nlohmann::ordered_json& j);

/// Ground-truth factors of a rendered scene.
struct SceneTruth {
  std::string color;
  std::string shape;
  int center_row = 0;
  int center_col = 0;
  int half_extent = 0;
  /// Tight bounds of the rasterized object pixels.
  BBox bbox;

  friend bool operator==(const SceneTruth&, const SceneTruth&) = default;
};

struct SceneImage {
  Image image;
  SceneTruth truth;
  std::vector<std::string> tokens;
  std::string key;

  friend bool operator==(const SceneImage&, const SceneImage&) = default;
};

nlohmann::ordered_json truth_to_json(const SceneTruth& truth);
SceneTruth truth_from_json(const nlohmann::ordered_json& j);

/// Binary P6, maxval 255. Each channel byte is round(255 * clamp(v, 0, 1)).
std::string encode_ppm(const Image& image);
/// Bytes are mapped back as byte / 255. Throws grad::ParseError with the byte offset on malformed input.
Image decode_ppm(const std::string& bytes);

void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

/// Writes `<stem>.ppm` plus a `<stem>.json` sidecar holding the truth annotations.
void write_scene(const SceneImage& scene, const std::filesystem::path& dir, const std::string& stem);
SceneImage read_scene(const std::filesystem::path& dir, const std::string& stem);

}  // namespace compgen::data
