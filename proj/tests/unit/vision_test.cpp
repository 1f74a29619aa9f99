#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "compgen/data/generators.hpp"
#include "compgen/grad/gradcheck.hpp"
#include "compgen/grad/serialize.hpp"
#include "compgen/vision/vae.hpp"

namespace d = compgen::data;
namespace g = compgen::grad;
namespace v = compgen::vision;

namespace {

d::Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  g::Rng rng(seed);
  d::Image img(h, w);
  for (double& p : img.pixels) p = rng.uniform();
  return img;
}

// Direct transcription of the suppression sum for a single interior pixel.
double saliency_at(const d::Image& img, std::size_t r, std::size_t c, double base) {
  double s = base;
  for (std::size_t rr = r - 1; rr <= r + 1; ++rr) {
    for (std::size_t cc = c - 1; cc <= c + 1; ++cc) {
      if (rr == r && cc == c) continue;
      const double dr = img.at(r, c, 0) - img.at(rr, cc, 0);
      const double dg = img.at(r, c, 1) - img.at(rr, cc, 1);
      const double db = img.at(r, c, 2) - img.at(rr, cc, 2);
      s -= 1.0 - std::sqrt(dr * dr + dg * dg + db * db);
    }
  }
  return s;
}

}  // namespace

TEST(Saliency, UniformImageIsZero) {
  d::Image img(8, 8, 0.5);
  auto m = v::saliency(img);
  for (std::size_t r = 1; r < 7; ++r)
    for (std::size_t c = 1; c < 7; ++c) EXPECT_EQ(m.at(r, c), 0.0);
  EXPECT_FALSE(m.valid(0, 3));
  EXPECT_THROW(v::locate(m), v::NoObjectError);
}

TEST(Saliency, IsolatedPixelScoresBase) {
  d::Image img(5, 5, 0.0);
  img.at(2, 2, 0) = 1.0;  // distance 1 from every neighbour
  auto m = v::saliency(img);
  EXPECT_DOUBLE_EQ(m.at(2, 2), 8.0);
  // Neighbours see one unit-distance pixel.
  EXPECT_DOUBLE_EQ(m.at(1, 1), 1.0);
}

TEST(Saliency, MatchesDirectSumOn3x3) {
  auto img = random_image(3, 3, 4);
  EXPECT_NEAR(v::saliency(img, 8.0).at(1, 1), saliency_at(img, 1, 1, 8.0), 1e-12);
  auto big = random_image(9, 7, 5);
  auto m = v::saliency(big, 6.5);
  for (std::size_t r = 1; r < 8; ++r)
    for (std::size_t c = 1; c < 6; ++c) EXPECT_NEAR(m.at(r, c), saliency_at(big, r, c, 6.5), 1e-12);
}

TEST(Saliency, TranslationInvariant) {
  auto img = random_image(6, 6, 6);
  for (double& p : img.pixels) p *= 0.5;
  auto shifted = img;
  for (std::size_t i = 0; i < shifted.pixels.size(); ++i) shifted.pixels[i] += (i % 3 == 0 ? 0.3 : 0.1);
  auto a = v::saliency(img), b = v::saliency(shifted);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
}

TEST(Locate, SinglePixelBox) {
  d::Image img(6, 6, 0.0);
  auto m = v::saliency(img);
  m.values[3 * 6 + 2] = 4.0;
  EXPECT_EQ(v::locate(m), (d::BBox{3, 3, 2, 2}));
}

TEST(Locate, ScenesOverlapTruthAndContainPeak) {
  g::Rng rng(7);
  auto scenes = d::gen_scenes(rng, 5);
  for (const auto& s : scenes) {
    auto m = v::saliency(s.image);
    auto box = v::locate(m);
    EXPECT_GE(d::iou(box, s.truth.bbox), 0.5) << s.key;
    std::size_t best = 0;
    for (std::size_t i = 0; i < m.values.size(); ++i)
      if (m.valid(i / m.width, i % m.width) && m.values[i] > m.values[best]) best = i;
    EXPECT_TRUE(box.contains(static_cast<int>(best / m.width), static_cast<int>(best % m.width)));
  }
}

TEST(ClipPatch, CentreAndCorner) {
  auto img = random_image(64, 64, 8);
  auto centre = v::clip_patch(img, {28, 35, 28, 35});
  ASSERT_EQ(centre.height, 32u);
  for (std::size_t r = 0; r < 32; ++r)
    for (std::size_t c = 0; c < 32; ++c)
      for (std::size_t ch = 0; ch < 3; ++ch) ASSERT_EQ(centre.at(r, c, ch), img.at(r + 15, c + 15, ch));
  auto corner = v::clip_patch(img, {1, 5, 58, 62});
  EXPECT_EQ(corner.width, 32u);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    EXPECT_EQ(corner.at(0, 31, ch), img.at(0, 63, ch));
    EXPECT_EQ(corner.at(31, 0, ch), img.at(31, 32, ch));
  }
}

TEST(Kl, Identities) {
  EXPECT_EQ(v::kl_to_standard_normal({0, 0, 0, 0}, {1, 1, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(v::kl_to_standard_normal({1, 0, 0, 0}, {1, 1, 1, 1}), 0.5);
  g::Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> mu(4), var(4);
    for (int j = 0; j < 4; ++j) {
      mu[j] = rng.normal();
      var[j] = std::exp(rng.normal());
    }
    EXPECT_GE(v::kl_to_standard_normal(mu, var), 0.0);
  }
}

TEST(Vae, ShapesRangeAndPurity) {
  g::Rng rng(10);
  v::VaeModel m({}, rng);
  auto patch = random_image(32, 32, 11);
  auto a = v::vae_encode(m, patch), b = v::vae_encode(m, patch);
  EXPECT_EQ(a.mean.size(), 4u);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.variance, b.variance);
  auto out = v::vae_decode(m, {3.0, -2.0, 0.5, 10.0});
  ASSERT_EQ(out.height, 32u);
  for (double p : out.pixels) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
  EXPECT_THROW(v::vae_encode(m, random_image(16, 16, 1)), g::DimensionError);
}

TEST(Vae, ElboGradCheckWithFrozenNoise) {
  // Same layer stack at a reduced size. Fewer LeakyReLU units means fewer kinks
  // inside the finite-difference step, and the wider init keeps encoder
  // gradients well above roundoff.
  v::VaeConfig cfg;
  cfg.patch_size = 8;
  cfg.conv1_channels = 4;
  cfg.conv2_channels = 8;
  cfg.init_scale = 0.5;
  g::Rng rng(12);
  v::VaeModel m(cfg, rng);
  std::vector<d::Image> patches = {random_image(8, 8, 13), random_image(8, 8, 14)};
  const auto x = v::patches_to_tensor(patches, 8);
  g::Tensor eps({2, 4});
  g::Rng noise(15);
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = noise.normal();
  auto report = g::grad_check_report(
      [&](g::Tape& t, g::ParamSet& p) { return v::elbo_loss(t, m, p, x, eps).loss; }, m.params(), {.eps = 1e-5});
  EXPECT_LT(report.max_relative_error, 1e-3) << report.worst_parameter << "[" << report.worst_index << "]";
  EXPECT_EQ(report.coordinates_checked, m.params().scalar_count());
}

TEST(Vae, TrainingDeterministicAndCheckpoint) {
  g::Rng rng(16);
  auto scenes = d::gen_scenes(rng, 2);
  std::vector<d::Image> patches;
  for (const auto& s : scenes) patches.push_back(v::pipeline_patch(s.image));
  v::VaeTrainConfig tc;
  tc.epochs = 2;
  tc.batch = 8;
  auto a = v::train_vae(patches, tc), b = v::train_vae(patches, tc);
  EXPECT_EQ(v::vae_model_to_json(a.model), v::vae_model_to_json(b.model));
  auto path = std::filesystem::temp_directory_path() / "compgen_vae_ckpt" / "vae.json";
  v::save_vae_model(a.model, path);
  EXPECT_EQ(v::vae_model_to_json(v::load_vae_model(path)), v::vae_model_to_json(a.model));
  std::filesystem::remove_all(path.parent_path());
}

TEST(Pipeline, UniformImageHasNoObject) {
  g::Rng rng(17);
  v::VaeModel m({}, rng);
  EXPECT_THROW(v::pipeline_features(m, d::Image(64, 64, 0.5)), v::NoObjectError);
  g::Rng srng(18);
  auto scenes = d::gen_scenes(srng, 1);
  EXPECT_EQ(v::pipeline_features(m, scenes[0].image), v::pipeline_features(m, scenes[0].image));
}

TEST(SaliencyExport, SidecarRecordsBounds) {
  g::Rng rng(19);
  auto scenes = d::gen_scenes(rng, 1);
  auto dir = std::filesystem::temp_directory_path() / "compgen_saliency_export";
  auto map = v::saliency(scenes[0].image);
  auto bounds = v::write_saliency_ppm(map, dir / "s.ppm", dir / "s.json");
  auto side = nlohmann::json::parse(g::read_file(dir / "s.json"));
  EXPECT_EQ(side["lo"].get<double>(), bounds.lo);
  EXPECT_EQ(side["hi"].get<double>(), bounds.hi);
  EXPECT_EQ(d::read_ppm(dir / "s.ppm").height, 64u);
  std::filesystem::remove_all(dir);
}
