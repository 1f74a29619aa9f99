#include "compgen/eval/experiments.hpp"

#include <algorithm>
#include <cstdio>

#include "compgen/data/image.hpp"
#include "compgen/grad/serialize.hpp"

namespace compgen::eval {

nlohmann::ordered_json IdeSettings::to_json() const {
  return {{"train", train.to_json()},
          {"model", model.to_json()},
          {"base_entropy", base_entropy},
          {"temperature", temperature}};
}

Selector ide_selector(const ide::DensityModel& model, double base_entropy, double temperature) {
  return [&model, base_entropy, temperature](const std::vector<std::string>& tokens,
                                             const std::vector<FeatureVector>& candidates) {
    return ide::select(model, tokens, candidates, base_entropy, temperature);
  };
}

Selector baseline_selector(const baseline::ClipToyModel& model) {
  return [&model](const std::vector<std::string>& tokens, const std::vector<FeatureVector>& candidates) {
    return baseline::select_baseline(model, tokens, candidates);
  };
}

namespace {

std::vector<data::Example> rotated(const std::vector<data::Example>& xs, double theta,
                                   const std::vector<data::PlanePair>& planes) {
  std::vector<data::Example> out;
  out.reserve(xs.size());
  for (const auto& ex : xs) out.push_back(data::rotate_features(ex, theta, planes));
  return out;
}

}  // namespace

std::vector<SweepPoint> rotation_sweep(const data::Split<data::Example>& split, const std::vector<double>& angles,
                                       const std::vector<data::PlanePair>& planes, const IdeSettings& s,
                                       std::size_t n_tasks, std::uint64_t task_seed) {
  if (angles.empty()) throw data::ConfigurationError("rotation_sweep: no angles");
  std::vector<SweepPoint> points;
  for (double theta : angles) {
    const auto train = rotated(split.train, theta, planes);
    const auto holdout = rotated(split.holdout, theta, planes);
    auto trained = ide::train_ide(train, s.train, s.model);
    grad::Rng task_rng(task_seed);
    const auto tasks = build_tasks(holdout, n_tasks, task_rng);
    nlohmann::ordered_json planes_json = nlohmann::ordered_json::array();
    for (const auto& p : planes) planes_json.push_back({p.first, p.second});
    nlohmann::ordered_json config = {
        {"experiment", "rotation_sweep"}, {"theta", theta},       {"planes", planes_json},
        {"ide", s.to_json()},             {"n_tasks", n_tasks},   {"task_seed", task_seed}};
    points.push_back({theta, evaluate(ide_selector(trained.model, s.base_entropy, s.temperature), tasks, config)});
  }
  return points;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
  std::string out = "theta,accuracy,ci_low,ci_high\n";
  for (const auto& p : points) {
    out += grad::format_double(p.theta) + "," + grad::format_double(p.report.accuracy) + "," +
           grad::format_double(p.report.ci_low) + "," + grad::format_double(p.report.ci_high) + "\n";
  }
  return out;
}

AbResult setting_ab_compare(const data::Split<data::Example>& split, const IdeSettings& s, std::size_t n_tasks,
                            std::uint64_t task_seed, std::uint64_t drop_seed) {
  AbResult result;
  grad::Rng drop_rng(drop_seed);
  for (const auto& ex : split.train) {
    result.partial_train.push_back(data::make_example(ex.features, data::drop_attribute(ex.tokens, drop_rng), ex.meta));
  }
  grad::Rng task_rng(task_seed);
  const auto tasks = build_tasks(split.holdout, n_tasks, task_rng);
  // The full vocabulary keeps both models' word indices aligned.
  const ide::Vocab vocab = ide::Vocab::from_examples(split.train);
  auto run = [&](const std::vector<data::Example>& train, const char* setting) {
    auto trained = ide::train_ide(train, s.train, s.model, &vocab);
    nlohmann::ordered_json config = {{"experiment", "setting_ab"}, {"setting", setting},       {"ide", s.to_json()},
                                     {"n_tasks", n_tasks},         {"task_seed", task_seed}, {"drop_seed", drop_seed}};
    return evaluate(ide_selector(trained.model, s.base_entropy, s.temperature), tasks, config);
  };
  result.full = run(split.train, "A");
  result.partial = run(result.partial_train, "B");
  return result;
}

HeatmapBounds export_heatmap(const ide::DensityModel& model, double base_entropy, const std::filesystem::path& csv_path,
                             const std::filesystem::path& ppm_path, std::size_t cell) {
  const auto gm = ide::gain_matrix(model, base_entropy);
  grad::write_file_atomic(csv_path, gm.to_csv());

  HeatmapBounds b{gm.gain[0][0], gm.gain[0][0]};
  for (const auto& row : gm.gain) {
    for (double g : row) {
      b.lo = std::min(b.lo, g);
      b.hi = std::max(b.hi, g);
    }
  }
  const std::size_t rows = gm.gain.size(), cols = gm.gain.front().size();
  const double span = b.hi > b.lo ? b.hi - b.lo : 1.0;
  data::Image img(rows * cell, cols * cell);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      const double t = (gm.gain[i][j] - b.lo) / span;
      for (std::size_t r = 0; r < cell; ++r) {
        for (std::size_t c = 0; c < cell; ++c) {
          img.at(i * cell + r, j * cell + c, 0) = t;
          img.at(i * cell + r, j * cell + c, 1) = 0.0;
          img.at(i * cell + r, j * cell + c, 2) = 1.0 - t;
        }
      }
    }
  }
  data::write_ppm(img, ppm_path);
  nlohmann::ordered_json side = {{"colormap", "rgb = (t, 0, 1 - t), t = (g - lo) / (hi - lo)"},
                                 {"lo", b.lo},
                                 {"hi", b.hi},
                                 {"base_entropy", base_entropy},
                                 {"cell", cell},
                                 {"rows", gm.words},
                                 {"columns", cols}};
  auto side_path = ppm_path;
  side_path += ".json";
  grad::write_file_atomic(side_path, side.dump(2) + "\n");
  return b;
}

}  // namespace compgen::eval
