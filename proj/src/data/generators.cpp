#include "compgen/data/generators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace compgen::data {

namespace {

const std::vector<std::string> kToyColors = {"red", "green", "blue"};
const std::vector<std::string> kToyMaterials = {"rubber", "metal"};
const std::vector<std::string> kToyShapes = {"ball", "triangle", "rectangle"};

const std::vector<std::string> kBabyTypes = {"wall", "floor", "door", "key", "ball", "box"};
const std::vector<std::string> kBabyColors = {"red", "green", "blue", "purple", "yellow", "grey"};
const std::vector<std::string> kBabyStates = {"open", "closed", "locked"};
constexpr int kBabyTypeOffset = 2;  // wall=2 ... box=7

const std::vector<std::string> kThorShapes = {"apple", "countertop", "bottle", "creditcard",
                                              "bowl",  "mug",        "laptop", "cup"};

const std::map<std::string, std::array<double, 3>> kSceneFill = {
    {"red", {0.9, 0.1, 0.1}}, {"green", {0.1, 0.8, 0.1}}, {"blue", {0.1, 0.1, 0.9}}};
const std::vector<std::string> kSceneColors = {"red", "green", "blue"};
const std::vector<std::string> kSceneShapes = {"sphere", "cube", "cylinder"};

std::size_t index_of(const std::vector<std::string>& list, const std::string& word) {
  auto it = std::find(list.begin(), list.end(), word);
  if (it == list.end()) throw ConfigurationError("unknown word '" + word + "'");
  return static_cast<std::size_t>(it - list.begin());
}

}  // namespace

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) key += ' ';
    key += tokens[i];
  }
  return key;
}

Example make_example(std::vector<double> features, std::vector<std::string> tokens, nlohmann::ordered_json meta) {
  if (tokens.empty()) throw ConfigurationError("example needs at least one token");
  Example ex;
  ex.key = join_tokens(tokens);
  ex.features = std::move(features);
  ex.tokens = std::move(tokens);
  ex.meta = std::move(meta);
  return ex;
}

// ---- toy -----------------------------------------------------------------

std::vector<double> toy_encoding(const std::string& color, const std::string& material, const std::string& shape) {
  std::vector<double> f(kToyDim, 0.0);
  f[index_of(kToyColors, color)] = 1.0;
  f[3] = static_cast<double>(index_of(kToyMaterials, material));
  f[4] = 0.5 * static_cast<double>(index_of(kToyShapes, shape));
  return f;
}

std::vector<Example> gen_toy(grad::Rng& rng, int n_per_combo, double noise_sigma) {
  if (n_per_combo < 1) throw ConfigurationError("n_per_combo must be >= 1");
  std::vector<Example> out;
  out.reserve(18 * static_cast<std::size_t>(n_per_combo));
  for (const auto& color : kToyColors) {
    for (const auto& material : kToyMaterials) {
      for (const auto& shape : kToyShapes) {
        const auto base = toy_encoding(color, material, shape);
        for (int k = 0; k < n_per_combo; ++k) {
          auto f = base;
          for (double& v : f) v += noise_sigma * rng.normal();
          out.push_back(make_example(std::move(f), {color, material, shape},
                                     {{"color", color}, {"material", material}, {"shape", shape}}));
        }
      }
    }
  }
  return out;
}

std::vector<std::string> toy_vocabulary() {
  std::vector<std::string> v = kToyColors;
  v.insert(v.end(), kToyMaterials.begin(), kToyMaterials.end());
  v.insert(v.end(), kToyShapes.begin(), kToyShapes.end());
  return v;
}

std::set<std::string> toy_holdout_keys() {
  return {"red metal ball",      "red rubber triangle",  "blue rubber rectangle",
          "blue metal triangle", "green metal triangle", "green rubber ball"};
}

// ---- BabyAI --------------------------------------------------------------

std::vector<Example> gen_babyai(grad::Rng& rng, int n) {
  if (n < 1) throw ConfigurationError("n must be >= 1");
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::size_t type = rng.index(kBabyTypes.size());
    const std::size_t color = rng.index(kBabyColors.size());
    const bool is_door = kBabyTypes[type] == "door";
    const std::size_t state = is_door ? rng.index(kBabyStates.size()) : 0;
    std::vector<std::string> tokens = {"a", kBabyColors[color]};
    if (is_door) tokens.push_back(kBabyStates[state]);
    tokens.push_back(kBabyTypes[type]);
    std::vector<double> f = {static_cast<double>(type + kBabyTypeOffset), static_cast<double>(color),
                             static_cast<double>(state)};
    out.push_back(make_example(std::move(f), std::move(tokens)));
  }
  return out;
}

std::vector<std::string> babyai_vocabulary() {
  std::vector<std::string> v = {"a"};
  v.insert(v.end(), kBabyColors.begin(), kBabyColors.end());
  v.insert(v.end(), kBabyStates.begin(), kBabyStates.end());
  v.insert(v.end(), kBabyTypes.begin(), kBabyTypes.end());
  return v;
}

std::set<std::string> babyai_holdout_keys() {
  return {"a green locked door", "a blue locked door", "a red locked door", "a blue ball", "a green ball",
          "a yellow key",        "a grey wall",        "a blue box",        "a grey floor"};
}

// ---- AI2Thor -------------------------------------------------------------

std::string mass_word(double mass) { return mass < 0.4 ? "light" : "heavy"; }

std::string temperature_word(double temperature) {
  if (temperature < 0.3) return "cold";
  if (temperature < 0.6) return "room-temperature";
  return "hot";
}

std::vector<std::string> ai2thor_attribute_words(const std::vector<double>& f) {
  return {mass_word(f.at(0)), temperature_word(f.at(1)), f.at(2) > 0.5 ? "toggled" : "untoggled",
          f.at(3) > 0.5 ? "broken" : "unbroken", f.at(4) > 0.5 ? "dirty" : "clean"};
}

std::vector<Example> gen_ai2thor(grad::Rng& rng, int n) {
  if (n < 1) throw ConfigurationError("n must be >= 1");
  std::vector<Example> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::size_t shape = rng.index(kThorShapes.size());
    std::vector<double> f(kAi2ThorDim);
    f[0] = rng.uniform();
    f[1] = rng.uniform();
    f[2] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    f[3] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    f[4] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    f[5] = static_cast<double>(shape);
    const auto words = ai2thor_attribute_words(f);
    const std::string attribute = words[rng.index(words.size())];
    out.push_back(make_example(std::move(f), {"a", attribute, kThorShapes[shape]}));
  }
  return out;
}

std::vector<std::string> ai2thor_vocabulary() {
  std::vector<std::string> v = {"a",       "light",     "heavy",    "cold",     "room-temperature", "hot",
                                "toggled", "untoggled", "broken",   "unbroken", "dirty",            "clean"};
  v.insert(v.end(), kThorShapes.begin(), kThorShapes.end());
  return v;
}

std::set<std::string> ai2thor_holdout_keys() {
  return {"a cold apple", "a unbroken countertop", "a hot bottle", "a light creditcard", "a dirty bowl"};
}

// ---- scenes --------------------------------------------------------------

SceneImage render_scene(const std::string& color, const std::string& shape, int center_row, int center_col,
                        int half_extent, grad::Rng& noise_rng, const SceneConfig& config) {
  auto fill_it = kSceneFill.find(color);
  if (fill_it == kSceneFill.end()) throw ConfigurationError("unknown scene color '" + color + "'");
  const std::size_t shape_index = index_of(kSceneShapes, shape);
  const int size = static_cast<int>(config.size);
  const int h = half_extent;
  if (center_row - h < config.margin || center_row + h > size - 1 - config.margin || center_col - h < config.margin ||
      center_col + h > size - 1 - config.margin) {
    throw ConfigurationError("object does not fit inside the margin");
  }
  // Capsule radius; the straight segment spans the remaining vertical extent.
  const double radius = 0.6 * h;
  const double segment = h - radius;

  SceneImage scene;
  scene.image = Image(config.size, config.size, config.background);
  BBox box{size, -1, size, -1};
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double dr = r - center_row, dc = c - center_col;
      bool inside = false;
      switch (shape_index) {
        case 0:
          inside = dr * dr + dc * dc <= static_cast<double>(h) * h;
          break;
        case 1:
          inside = std::abs(dr) <= h && std::abs(dc) <= h;
          break;
        default: {
          const double excess = std::max(0.0, std::abs(dr) - segment);
          inside = excess * excess + dc * dc <= radius * radius;
          break;
        }
      }
      if (!inside) continue;
      for (std::size_t ch = 0; ch < 3; ++ch) scene.image.at(r, c, ch) = fill_it->second[ch];
      box.row_min = std::min(box.row_min, r);
      box.row_max = std::max(box.row_max, r);
      box.col_min = std::min(box.col_min, c);
      box.col_max = std::max(box.col_max, c);
    }
  }
  if (config.noise_sigma > 0.0) {
    for (double& v : scene.image.pixels) v = std::clamp(v + config.noise_sigma * noise_rng.normal(), 0.0, 1.0);
  }
  scene.truth = SceneTruth{color, shape, center_row, center_col, h, box};
  scene.tokens = {color, shape};
  scene.key = join_tokens(scene.tokens);
  return scene;
}

std::vector<SceneImage> gen_scenes(const grad::Rng& rng, int per_description, const SceneConfig& config) {
  if (per_description < 1) throw ConfigurationError("per_description must be >= 1");
  const int size = static_cast<int>(config.size);
  if (size < 2 * (config.max_half_extent + config.margin) + 1 || config.min_half_extent < 1 ||
      config.min_half_extent > config.max_half_extent) {
    throw ConfigurationError("scene size cannot hold the configured object extents");
  }
  std::vector<SceneImage> out;
  std::uint64_t description = 0;
  for (const auto& color : kSceneColors) {
    for (const auto& shape : kSceneShapes) {
      grad::Rng stream = rng.derive(description++);
      for (int k = 0; k < per_description; ++k) {
        const int h = static_cast<int>(stream.integer(config.min_half_extent, config.max_half_extent));
        const int lo = config.margin + h, hi = size - 1 - config.margin - h;
        const int row = static_cast<int>(stream.integer(lo, hi));
        const int col = static_cast<int>(stream.integer(lo, hi));
        out.push_back(render_scene(color, shape, row, col, h, stream, config));
      }
    }
  }
  return out;
}

std::vector<std::string> scene_colors() { return kSceneColors; }
std::vector<std::string> scene_shapes() { return kSceneShapes; }

std::vector<std::string> scene_vocabulary() {
  std::vector<std::string> v = kSceneColors;
  v.insert(v.end(), kSceneShapes.begin(), kSceneShapes.end());
  return v;
}

std::set<std::string> scene_holdout_keys() { return {"red cube", "blue cylinder", "green sphere"}; }

}  // namespace compgen::data
