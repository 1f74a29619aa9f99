#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "compgen/data/generators.hpp"
#include "compgen/data/jsonl.hpp"
#include "compgen/data/transforms.hpp"
#include "compgen/grad/serialize.hpp"
#include "compgen/grad/tape.hpp"

namespace d = compgen::data;
using compgen::grad::Rng;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("compgen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const d::Example& first_with_key(const std::vector<d::Example>& xs, const std::string& key) {
  auto it = std::find_if(xs.begin(), xs.end(), [&](const auto& e) { return e.key == key; });
  EXPECT_NE(it, xs.end()) << key;
  return *it;
}

void expect_closed_vocabulary(const std::vector<d::Example>& xs, const std::vector<std::string>& vocab) {
  std::set<std::string> v(vocab.begin(), vocab.end());
  for (const auto& ex : xs)
    for (const auto& t : ex.tokens) EXPECT_TRUE(v.count(t)) << t;
}

}  // namespace

TEST(GenToy, DefaultCountIs9000) {
  Rng rng(1);
  auto xs = d::gen_toy(rng);
  EXPECT_EQ(xs.size(), 9000u);
  EXPECT_EQ(d::distinct_keys(xs).size(), 18u);
  expect_closed_vocabulary(xs, d::toy_vocabulary());
}

TEST(GenToy, RedMetalBallNearEncoding) {
  Rng rng(2);
  auto xs = d::gen_toy(rng, 50);
  const std::vector<double> expected = {1, 0, 0, 1, 0};
  for (const auto& ex : xs) {
    if (ex.key != "red metal ball") continue;
    ASSERT_EQ(ex.tokens, (std::vector<std::string>{"red", "metal", "ball"}));
    for (std::size_t j = 0; j < 5; ++j) EXPECT_LT(std::abs(ex.features[j] - expected[j]), 4 * 0.05);
  }
}

TEST(GenToy, NoiselessEncodingIsExact) {
  Rng rng(3);
  auto xs = d::gen_toy(rng, 1, 0.0);
  EXPECT_EQ(first_with_key(xs, "blue rubber rectangle").features, (std::vector<double>{0, 0, 1, 0, 1}));
  EXPECT_EQ(first_with_key(xs, "green metal triangle").features, (std::vector<double>{0, 1, 0, 1, 0.5}));
}

TEST(GenBabyAi, EncodingTables) {
  Rng rng(4);
  auto xs = d::gen_babyai(rng, 9000);
  EXPECT_EQ(first_with_key(xs, "a blue locked door").features, (std::vector<double>{4, 2, 2}));
  EXPECT_EQ(first_with_key(xs, "a red ball").features[1], 0.0);
  for (const auto& ex : xs) {
    for (double v : ex.features) EXPECT_EQ(v, std::floor(v));
    EXPECT_EQ(ex.tokens.front(), "a");
    const bool door = ex.tokens.back() == "door";
    EXPECT_EQ(ex.tokens.size(), door ? 4u : 3u);
    if (!door) {
      EXPECT_EQ(ex.features[2], 0.0);
    }
  }
  expect_closed_vocabulary(xs, d::babyai_vocabulary());
  EXPECT_EQ(d::distinct_keys(xs).size(), 48u);
}

TEST(GenAi2Thor, ThresholdWords) {
  EXPECT_EQ(d::mass_word(0.2), "light");
  EXPECT_EQ(d::mass_word(0.4), "heavy");
  EXPECT_EQ(d::temperature_word(0.45), "room-temperature");
  EXPECT_EQ(d::temperature_word(0.1), "cold");
  EXPECT_EQ(d::temperature_word(0.6), "hot");
  auto words = d::ai2thor_attribute_words({0.2, 0.45, 1, 0, 1, 3});
  EXPECT_NE(std::find(words.begin(), words.end(), "unbroken"), words.end());
  EXPECT_NE(std::find(words.begin(), words.end(), "light"), words.end());
}

TEST(GenAi2Thor, DescriptionsConsistentWithVectors) {
  Rng rng(5);
  auto xs = d::gen_ai2thor(rng, 3000);
  for (const auto& ex : xs) {
    ASSERT_EQ(ex.tokens.size(), 3u);
    EXPECT_EQ(ex.tokens[0], "a");
    auto allowed = d::ai2thor_attribute_words(ex.features);
    EXPECT_NE(std::find(allowed.begin(), allowed.end(), ex.tokens[1]), allowed.end());
    EXPECT_GE(ex.features[0], 0.0);
    EXPECT_LT(ex.features[0], 1.0);
  }
  expect_closed_vocabulary(xs, d::ai2thor_vocabulary());
  for (const auto& key : d::ai2thor_holdout_keys()) first_with_key(xs, key);
}

TEST(GenScenes, CountsAndLeaveOut) {
  Rng rng(6);
  auto scenes = d::gen_scenes(rng);
  EXPECT_EQ(scenes.size(), 450u);
  auto split = d::apply_leave_out(scenes, d::scene_holdout_keys());
  EXPECT_EQ(split.train.size(), 300u);
  EXPECT_EQ(split.holdout.size(), 150u);
  for (const auto& s : scenes) {
    EXPECT_GE(s.truth.bbox.row_min, 2);
    EXPECT_GE(s.truth.bbox.col_min, 2);
    EXPECT_LE(s.truth.bbox.row_max, 61);
    EXPECT_LE(s.truth.bbox.col_max, 61);
    for (double v : s.image.pixels) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(GenScenes, NoiseFreeCubeHasTwoColors) {
  Rng rng(7);
  d::SceneConfig cfg;
  cfg.noise_sigma = 0.0;
  auto scene = d::render_scene("red", "cube", 30, 33, 8, rng, cfg);
  std::set<std::array<double, 3>> colors;
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t c = 0; c < 64; ++c)
      colors.insert({scene.image.at(r, c, 0), scene.image.at(r, c, 1), scene.image.at(r, c, 2)});
  EXPECT_EQ(colors.size(), 2u);
  EXPECT_EQ(scene.truth.bbox, (d::BBox{22, 38, 25, 41}));
}

TEST(GenScenes, ShapesHaveExpectedFootprints) {
  Rng rng(8);
  d::SceneConfig cfg;
  cfg.noise_sigma = 0.0;
  auto sphere = d::render_scene("blue", "sphere", 32, 32, 10, rng, cfg);
  auto cylinder = d::render_scene("blue", "cylinder", 32, 32, 10, rng, cfg);
  EXPECT_EQ(sphere.truth.bbox, (d::BBox{22, 42, 22, 42}));
  EXPECT_EQ(cylinder.truth.bbox.height(), 21);
  EXPECT_LT(cylinder.truth.bbox.width(), cylinder.truth.bbox.height());
  EXPECT_THROW(d::render_scene("blue", "cube", 5, 32, 10, rng, cfg), d::ConfigurationError);
}

TEST(LeaveOut, ToyKeepsTwelveCombos) {
  Rng rng(9);
  auto split = d::apply_leave_out(d::gen_toy(rng, 10), d::toy_holdout_keys());
  EXPECT_EQ(d::distinct_keys(split.train).size(), 12u);
  EXPECT_EQ(d::distinct_keys(split.holdout).size(), 6u);
  for (const auto& ex : split.train) EXPECT_EQ(split.holdout_keys.count(ex.key), 0u);
}

TEST(LeaveOut, UnknownKeyIsConfigurationError) {
  Rng rng(10);
  auto xs = d::gen_toy(rng, 2);
  EXPECT_THROW(d::apply_leave_out(xs, {"purple metal ball"}), d::ConfigurationError);
  EXPECT_THROW(d::apply_leave_out(xs, {}), d::ConfigurationError);
}

TEST(LeaveOut, BabyAiAndAi2ThorKeysAllPresent) {
  Rng rng(11);
  auto baby = d::apply_leave_out(d::gen_babyai(rng, 9000), d::babyai_holdout_keys());
  EXPECT_EQ(d::distinct_keys(baby.holdout).size(), 9u);
  auto thor = d::apply_leave_out(d::gen_ai2thor(rng, 9000), d::ai2thor_holdout_keys());
  EXPECT_EQ(d::distinct_keys(thor.holdout).size(), 5u);
}

TEST(Rotate, ZeroIsIdentity) {
  std::vector<double> f = {0.3, -1, 2, 0.7, 0.2};
  EXPECT_EQ(d::rotate_vector(f, 0.0, d::default_toy_planes()), f);
}

TEST(Rotate, NinetyDegreesIsSignedSwap) {
  auto out = d::rotate_vector({9, 8, 7, 0.4, 1.5}, 90.0, {{3, 4}});
  EXPECT_EQ(out[0], 9);
  EXPECT_NEAR(out[3], -1.5, 1e-15);
  EXPECT_NEAR(out[4], 0.4, 1e-15);
}

TEST(Rotate, InverseAndNormPreserved) {
  Rng rng(12);
  for (double theta : {10.0, 30.0, 45.0, 60.0, 80.0, 137.0}) {
    std::vector<double> f(6);
    for (double& v : f) v = rng.uniform(-2, 2);
    auto r = d::rotate_vector(f, theta, {{0, 5}, {2, 3}});
    EXPECT_NEAR(std::hypot(r[0], r[5]), std::hypot(f[0], f[5]), 1e-12);
    EXPECT_NEAR(std::hypot(r[2], r[3]), std::hypot(f[2], f[3]), 1e-12);
    auto back = d::rotate_vector(r, -theta, {{0, 5}, {2, 3}});
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(back[i], f[i], 1e-12);
  }
}

TEST(Rotate, OverlappingPlanesRejected) {
  EXPECT_THROW(d::rotate_vector({1, 2, 3}, 10, {{0, 1}, {1, 2}}), d::ConfigurationError);
  EXPECT_THROW(d::rotate_vector({1, 2, 3}, 10, {{0, 3}}), d::ConfigurationError);
}

TEST(DropAttribute, DropsColorOrMaterialEvenly) {
  Rng rng(13);
  const std::vector<std::string> in = {"blue", "rubber", "triangle"};
  int first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto out = d::drop_attribute(in, rng);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[1], "triangle");
    if (out[0] == "rubber") {
      ++first;
    } else {
      EXPECT_EQ(out[0], "blue");
    }
  }
  EXPECT_NEAR(first / double(n), 0.5, 0.02);
}

TEST(DropAttribute, TooShortIsUsageError) {
  Rng rng(14);
  EXPECT_THROW(d::drop_attribute({"blue", "triangle"}, rng), compgen::grad::UsageError);
}

TEST(Jsonl, SplitRoundTripAndDeterminism) {
  auto make = [] {
    Rng rng(15);
    return d::apply_leave_out(d::gen_toy(rng, 5), d::toy_holdout_keys());
  };
  auto split = make();
  auto dir = temp_dir("jsonl");
  d::write_jsonl(split, dir / "a.jsonl");
  d::write_jsonl(make(), dir / "b.jsonl");
  EXPECT_EQ(compgen::grad::read_file(dir / "a.jsonl"), compgen::grad::read_file(dir / "b.jsonl"));
  auto back = d::read_jsonl(dir / "a.jsonl");
  EXPECT_TRUE(back == split);
}

TEST(Jsonl, MalformedLineReportsLineNumber) {
  const std::string text = d::example_to_jsonl_line(d::make_example({1.0}, {"x"})) + "\n{\"features\": [1,\n";
  try {
    d::decode_jsonl(text);
    FAIL() << "expected ParseError";
  } catch (const compgen::grad::ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Ppm, RoundTripWithinQuantizationBound) {
  Rng rng(16);
  auto scenes = d::gen_scenes(rng, 1);
  auto dir = temp_dir("ppm");
  d::write_ppm(scenes[0].image, dir / "s.ppm");
  auto back = d::read_ppm(dir / "s.ppm");
  ASSERT_EQ(back.height, 64u);
  ASSERT_EQ(back.width, 64u);
  for (std::size_t i = 0; i < back.pixels.size(); ++i) {
    EXPECT_LE(std::abs(back.pixels[i] - scenes[0].image.pixels[i]), 1.0 / 510.0 + 1e-15);
  }
}

TEST(Ppm, TruncatedFileIsParseError) {
  d::Image img(4, 5, 0.25);
  std::string bytes = d::encode_ppm(img);
  EXPECT_NO_THROW(d::decode_ppm(bytes));
  EXPECT_THROW(d::decode_ppm(bytes.substr(0, bytes.size() - 7)), compgen::grad::ParseError);
  EXPECT_THROW(d::decode_ppm(bytes.substr(0, 4)), compgen::grad::ParseError);
  EXPECT_THROW(d::decode_ppm("P3\n1 1\n255\n"), compgen::grad::ParseError);
}

TEST(Ppm, SceneSidecarRoundTrip) {
  Rng rng(17);
  auto scenes = d::gen_scenes(rng, 1);
  auto dir = temp_dir("scene");
  d::write_scene(scenes[4], dir, "scene_0004");
  auto back = d::read_scene(dir, "scene_0004");
  EXPECT_EQ(back.truth, scenes[4].truth);
  EXPECT_EQ(back.key, scenes[4].key);
}

TEST(Iou, Basics) {
  d::BBox a{0, 9, 0, 9};
  EXPECT_DOUBLE_EQ(d::iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(d::iou(a, d::BBox{20, 25, 20, 25}), 0.0);
  EXPECT_DOUBLE_EQ(d::iou(a, d::BBox{0, 4, 0, 9}), 0.5);
}
