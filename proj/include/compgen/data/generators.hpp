#pragma once

#include <set>
#include <string>
#include <vector>

#include "compgen/data/example.hpp"
#include "compgen/data/image.hpp"
#include "compgen/grad/rng.hpp"

namespace compgen::data {

// Toy: 5-d [r, g, b, material, shape] with 3 colors x 2 materials x 3 shapes.
//   color     red=(1,0,0) green=(0,1,0) blue=(0,0,1)
//   material  rubber=0 metal=1
//   shape     ball=0 triangle=0.5 rectangle=1
// Tokens [color, material, shape]; N(0, noise_sigma^2) added to every dim.
inline constexpr std::size_t kToyDim = 5;
std::vector<Example> gen_toy(grad::Rng& rng, int n_per_combo = 500, double noise_sigma = 0.05);
std::vector<double> toy_encoding(const std::string& color, const std::string& material, const std::string& shape);
std::vector<std::string> toy_vocabulary();
std::set<std::string> toy_holdout_keys();

// BabyAI: 3-d integer [type, color, state].
//   type   wall=2 floor=3 door=4 key=5 ball=6 box=7
//   color  red=0 green=1 blue=2 purple=3 yellow=4 grey=5
//   state  open=0 closed=1 locked=2 (doors only; 0 otherwise)
// Tokens ["a", color, (state), type]; no noise.
inline constexpr std::size_t kBabyAiDim = 3;
std::vector<Example> gen_babyai(grad::Rng& rng, int n = 9000);
std::vector<std::string> babyai_vocabulary();
std::set<std::string> babyai_holdout_keys();

// AI2Thor: 6-d [mass, temperature, toggled, broken, dirty, shape].
//   mass, temperature ~ U[0, 1); booleans 0/1; shape index 0..7 over
//   apple countertop bottle creditcard bowl mug laptop cup.
// Tokens ["a", attribute, shape] with the attribute drawn uniformly from the
// six words consistent with the vector.
inline constexpr std::size_t kAi2ThorDim = 6;
std::vector<Example> gen_ai2thor(grad::Rng& rng, int n = 9000);
std::vector<std::string> ai2thor_vocabulary();
std::set<std::string> ai2thor_holdout_keys();
/// "light" below 0.4, otherwise "heavy".
std::string mass_word(double mass);
/// "cold" below 0.3, "room-temperature" below 0.6, otherwise "hot".
std::string temperature_word(double temperature);
/// The six attribute words consistent with an AI2Thor feature vector.
std::vector<std::string> ai2thor_attribute_words(const std::vector<double>& features);

struct SceneConfig {
  std::size_t size = 64;
  int min_half_extent = 6;
  int max_half_extent = 12;
  int margin = 2;
  double noise_sigma = 0.01;
  double background = 0.5;
};

// Scenes: one object on gray, 3 colors x {sphere, cube, cylinder}.
//   sphere = filled disc, cube = filled square, cylinder = vertical capsule
//   red=(0.9,0.1,0.1) green=(0.1,0.8,0.1) blue=(0.1,0.1,0.9)
// Description i gets the independent stream rng.derive(i).
std::vector<SceneImage> gen_scenes(const grad::Rng& rng, int per_description = 50, const SceneConfig& config = {});
SceneImage render_scene(const std::string& color, const std::string& shape, int center_row, int center_col,
                        int half_extent, grad::Rng& noise_rng, const SceneConfig& config = {});
std::vector<std::string> scene_colors();
std::vector<std::string> scene_shapes();
std::vector<std::string> scene_vocabulary();
std::set<std::string> scene_holdout_keys();

}  // namespace compgen::data
