#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "compgen/data/image.hpp"

namespace compgen::vision {

inline constexpr double kDefaultSaliencyBase = 8.0;
inline constexpr double kDefaultSaliencyThreshold = 0.5;
inline constexpr std::size_t kDefaultPatchSize = 32;

class NoObjectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iso-feature suppression map. Only interior cells carry a value; the
/// one-pixel border is invalid and stored as 0.
struct SaliencyMap {
  std::size_t height = 0;
  std::size_t width = 0;
  double base = kDefaultSaliencyBase;
  std::vector<double> values;

  bool valid(std::size_t row, std::size_t col) const {
    return row > 0 && col > 0 && row + 1 < height && col + 1 < width;
  }
  double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }
};

/// s = B - sum over the 8 neighbours of (1 - |x - x'|), RGB Euclidean distance.
SaliencyMap saliency(const data::Image& image, double base = kDefaultSaliencyBase);

/// Bounding box of all valid cells with s > threshold. Throws NoObjectError if none.
data::BBox locate(const SaliencyMap& map, double threshold = kDefaultSaliencyThreshold);

/// Square window centred on the box, shifted (never shrunk) to stay inside the image.
data::Image clip_patch(const data::Image& image, const data::BBox& box, std::size_t patch_size = kDefaultPatchSize);

/// Grayscale rendering: byte = round(255 * (s - lo) / (hi - lo)) with lo/hi the
/// map's extremes over valid cells. Returns the bounds used.
struct SaliencyExport {
  double lo = 0.0;
  double hi = 0.0;
};
SaliencyExport write_saliency_ppm(const SaliencyMap& map, const std::filesystem::path& ppm_path,
                                  const std::filesystem::path& sidecar_path);

}  // namespace compgen::vision
