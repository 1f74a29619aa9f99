#include "compgen/vision/saliency.hpp"

#include <algorithm>
#include <cmath>

#include "compgen/grad/serialize.hpp"
#include "compgen/grad/tensor.hpp"

namespace compgen::vision {

SaliencyMap saliency(const data::Image& image, double base) {
  if (image.height < 3 || image.width < 3) throw grad::DimensionError("saliency: image must be at least 3x3");
  SaliencyMap map;
  map.height = image.height;
  map.width = image.width;
  map.base = base;
  map.values.assign(image.height * image.width, 0.0);
  for (std::size_t r = 1; r + 1 < image.height; ++r) {
    for (std::size_t c = 1; c + 1 < image.width; ++c) {
      double suppression = 0.0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const std::size_t rr = r + dr, cc = c + dc;
          double d2 = 0.0;
          for (std::size_t ch = 0; ch < 3; ++ch) {
            const double diff = image.at(r, c, ch) - image.at(rr, cc, ch);
            d2 += diff * diff;
          }
          suppression += 1.0 - std::sqrt(d2);
        }
      }
      map.values[r * image.width + c] = base - suppression;
    }
  }
  return map;
}

data::BBox locate(const SaliencyMap& map, double threshold) {
  data::BBox box{static_cast<int>(map.height), -1, static_cast<int>(map.width), -1};
  for (std::size_t r = 1; r + 1 < map.height; ++r) {
    for (std::size_t c = 1; c + 1 < map.width; ++c) {
      if (!(map.at(r, c) > threshold)) continue;
      box.row_min = std::min(box.row_min, static_cast<int>(r));
      box.row_max = std::max(box.row_max, static_cast<int>(r));
      box.col_min = std::min(box.col_min, static_cast<int>(c));
      box.col_max = std::max(box.col_max, static_cast<int>(c));
    }
  }
  if (box.row_max < 0) throw NoObjectError("no object: no saliency above " + grad::format_double(threshold));
  return box;
}

data::Image clip_patch(const data::Image& image, const data::BBox& box, std::size_t patch_size) {
  if (image.height < patch_size || image.width < patch_size) {
    throw grad::DimensionError("clip_patch: image smaller than patch");
  }
  const long half = static_cast<long>(patch_size / 2);
  auto origin = [&](int lo, int hi, std::size_t extent) {
    const long centre = (static_cast<long>(lo) + hi) / 2;
    return static_cast<std::size_t>(std::clamp(centre - half, 0L, static_cast<long>(extent - patch_size)));
  };
  const std::size_t top = origin(box.row_min, box.row_max, image.height);
  const std::size_t left = origin(box.col_min, box.col_max, image.width);
  data::Image patch(patch_size, patch_size);
  for (std::size_t r = 0; r < patch_size; ++r) {
    const auto src = image.pixels.begin() + static_cast<long>(((top + r) * image.width + left) * 3);
    std::copy(src, src + static_cast<long>(patch_size * 3), patch.pixels.begin() + static_cast<long>(r * patch_size * 3));
  }
  return patch;
}

SaliencyExport write_saliency_ppm(const SaliencyMap& map, const std::filesystem::path& ppm_path,
                                  const std::filesystem::path& sidecar_path) {
  SaliencyExport bounds{INFINITY, -INFINITY};
  for (std::size_t r = 0; r < map.height; ++r) {
    for (std::size_t c = 0; c < map.width; ++c) {
      if (!map.valid(r, c)) continue;
      bounds.lo = std::min(bounds.lo, map.at(r, c));
      bounds.hi = std::max(bounds.hi, map.at(r, c));
    }
  }
  if (!std::isfinite(bounds.lo)) bounds = {0.0, 0.0};
  const double span = bounds.hi > bounds.lo ? bounds.hi - bounds.lo : 1.0;
  data::Image gray(map.height, map.width, 0.0);
  for (std::size_t r = 0; r < map.height; ++r) {
    for (std::size_t c = 0; c < map.width; ++c) {
      const double v = map.valid(r, c) ? (map.at(r, c) - bounds.lo) / span : 0.0;
      for (std::size_t ch = 0; ch < 3; ++ch) gray.at(r, c, ch) = v;
    }
  }
  data::write_ppm(gray, ppm_path);
  nlohmann::ordered_json side = {{"mapping", "byte = round(255 * (s - lo) / (hi - lo)); border cells = 0"},
                                 {"lo", bounds.lo},
                                 {"hi", bounds.hi},
                                 {"base", map.base},
                                 {"height", map.height},
                                 {"width", map.width}};
  grad::write_file_atomic(sidecar_path, side.dump(2) + "\n");
  return bounds;
}

}  // namespace compgen::vision
