#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "compgen/baseline/clip.hpp"
#include "compgen/data/generators.hpp"
#include "compgen/grad/gradcheck.hpp"

namespace b = compgen::baseline;
namespace d = compgen::data;
namespace g = compgen::grad;

namespace {

b::ClipToyModel small_model(std::uint64_t seed = 1, double init_scale = 0.1) {
  g::Rng rng(seed);
  b::ClipConfig cfg;
  cfg.init_scale = init_scale;
  return b::ClipToyModel(compgen::ide::Vocab({"a", "red", "blue", "ball", "key"}), 3, cfg, rng);
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(ClipToy, EncodingsAreUnitNorm) {
  auto m = small_model();
  EXPECT_NEAR(norm(m.encode_features(std::vector<double>{1.0, 2.0, 0.0})), 1.0, 1e-9);
  EXPECT_NEAR(norm(m.encode_text({"a", "red", "ball"})), 1.0, 1e-9);
  EXPECT_EQ(m.encode_text({"a", "red", "ball"}).size(), 16u);
  EXPECT_EQ(m.encode_text({"a", "red", "ball"}), m.encode_text({"a", "red", "ball"}));
  EXPECT_NE(m.encode_text({"a", "red", "ball"}), m.encode_text({"ball", "red", "a"}));
  EXPECT_THROW(m.encode_text({"a", "green"}), compgen::ide::VocabularyError);
  EXPECT_THROW(m.encode_text({}), g::UsageError);
}

TEST(ClipToy, RaggedBatchMatchesSingleRows) {
  auto m = small_model(2);
  g::ParamSet p = m.params();
  g::Tape tape;
  auto batch = m.encode_text(tape, {{"a", "red", "ball"}, {"blue", "key"}}, p).value();
  auto short_row = m.encode_text({"blue", "key"});
  auto long_row = m.encode_text({"a", "red", "ball"});
  for (std::size_t k = 0; k < 16; ++k) {
    EXPECT_NEAR(batch.at(0, k), long_row[k], 1e-15);
    EXPECT_NEAR(batch.at(1, k), short_row[k], 1e-15);
  }
}

TEST(Cosine, Examples) {
  const std::vector<double> u = {0.6, 0.8}, v = {-0.6, -0.8}, w = {0.8, -0.6};
  EXPECT_DOUBLE_EQ(b::cosine_score(u, u), 1.0);
  EXPECT_DOUBLE_EQ(b::cosine_score(u, v), -1.0);
  EXPECT_NEAR(b::cosine_score(u, w), 0.0, 1e-15);
  EXPECT_THROW(b::cosine_score(u, std::vector<double>{0.0, 0.0}), std::domain_error);
}

TEST(InfoNce, BoundsAndGradient) {
  g::Tape tape;
  auto t = tape.constant(g::Tensor::matrix({{1.0, 0.0}, {0.0, 1.0}}));
  auto f = tape.constant(g::Tensor::matrix({{1.0, 0.0}, {0.0, 1.0}}));
  const double loss = b::info_nce(t, f, 0.07).value().item();
  EXPECT_GE(loss, 0.0);
  EXPECT_NEAR(loss, std::log1p(std::exp(-1.0 / 0.07)), 1e-12);
  auto single = tape.constant(g::Tensor::matrix({{1.0, 0.0}}));
  EXPECT_THROW(b::info_nce(single, single, 0.07), d::ConfigurationError);

  // Wider init so recurrent-weight gradients sit well above roundoff.
  auto m = small_model(3, 0.5);
  std::vector<std::vector<std::string>> texts = {{"a", "red", "ball"}, {"blue", "key"}, {"a", "blue", "ball"}};
  g::Tensor feats = g::Tensor::matrix({{0.0, 6.0, 0.0}, {2.0, 5.0, 1.0}, {2.0, 6.0, 0.0}});
  double err = g::grad_check(
      [&](g::Tape& tp, g::ParamSet& p) {
        return b::info_nce(m.encode_text(tp, texts, p), m.encode_features(tp, tp.constant(feats), p), 0.07);
      },
      m.params());
  EXPECT_LT(err, 1e-4);
}

TEST(TrainBaseline, ConfigErrorsAndDeterminism) {
  g::Rng rng(4);
  auto data = d::gen_babyai(rng, 120);
  b::BaselineTrainConfig tc;
  tc.epochs = 2;
  tc.batch = 1;
  EXPECT_THROW(b::train_baseline(data, tc), d::ConfigurationError);
  tc.batch = 32;
  auto x = b::train_baseline(data, tc), y = b::train_baseline(data, tc);
  EXPECT_EQ(b::baseline_model_to_json(x.model), b::baseline_model_to_json(y.model));
  for (double l : x.epoch_losses) EXPECT_GE(l, 0.0);
}

TEST(TrainBaseline, ToyLossHalves) {
  g::Rng rng(5);
  auto split = d::apply_leave_out(d::gen_toy(rng, 100), d::toy_holdout_keys());
  b::BaselineTrainConfig tc;
  tc.epochs = 40;
  auto r = b::train_baseline(split.train, tc);
  EXPECT_LT(r.final_loss, 0.5 * r.epoch_losses.front());
  EXPECT_LT(r.final_loss, std::log(64.0));
}

TEST(SelectBaseline, SingleCandidateAndOrder) {
  auto m = small_model();
  EXPECT_EQ(b::select_baseline(m, {"a", "red", "ball"}, {{1.0, 2.0, 3.0}}), 0u);
  std::vector<std::vector<double>> c = {{0.0, 6.0, 0.0}, {2.0, 5.0, 1.0}, {4.0, 1.0, 2.0}};
  const auto first = b::select_baseline(m, {"a", "red", "ball"}, c);
  std::vector<std::vector<double>> rev(c.rbegin(), c.rend());
  EXPECT_EQ(b::select_baseline(m, {"a", "red", "ball"}, rev), c.size() - 1 - first);
  EXPECT_THROW(b::select_baseline(m, {"a"}, {{1.0}}), g::DimensionError);
  EXPECT_THROW(b::select_baseline(m, {"a"}, {}), g::UsageError);
}

TEST(BaselineCheckpoint, RoundTrip) {
  auto m = small_model();
  auto path = std::filesystem::temp_directory_path() / "compgen_baseline_ckpt" / "m.json";
  b::save_baseline_model(m, path);
  auto back = b::load_baseline_model(path);
  EXPECT_EQ(b::baseline_model_to_json(back), b::baseline_model_to_json(m));
  std::filesystem::remove_all(path.parent_path());
}
