#pragma once

#include <filesystem>
#include <vector>

#include "compgen/baseline/clip.hpp"
#include "compgen/data/transforms.hpp"
#include "compgen/eval/tasks.hpp"
#include "compgen/ide/compose.hpp"

namespace compgen::eval {

struct IdeSettings {
  ide::TrainConfig train;
  ide::DensityConfig model;
  double base_entropy = ide::kDefaultBaseEntropy;
  double temperature = ide::kDefaultTemperature;

  nlohmann::ordered_json to_json() const;
};

Selector ide_selector(const ide::DensityModel& model, double base_entropy = ide::kDefaultBaseEntropy,
                      double temperature = ide::kDefaultTemperature);
Selector baseline_selector(const baseline::ClipToyModel& model);

struct SweepPoint {
  double theta = 0.0;
  EvalReport report;
};

/// For each angle: rotate train and holdout features on `planes`, retrain IDE
/// from scratch, evaluate on tasks drawn with `task_seed` (identical task
/// structure at every angle).
std::vector<SweepPoint> rotation_sweep(const data::Split<data::Example>& split, const std::vector<double>& angles,
                                       const std::vector<data::PlanePair>& planes, const IdeSettings& settings,
                                       std::size_t n_tasks, std::uint64_t task_seed);
/// theta,accuracy,ci_low,ci_high
std::string sweep_to_csv(const std::vector<SweepPoint>& points);

struct AbResult {
  EvalReport full;     // setting A: full descriptions
  EvalReport partial;  // setting B: one of the first two attributes dropped per example
  std::vector<data::Example> partial_train;
};

AbResult setting_ab_compare(const data::Split<data::Example>& split, const IdeSettings& settings, std::size_t n_tasks,
                            std::uint64_t task_seed, std::uint64_t drop_seed);

struct HeatmapBounds {
  double lo = 0.0;
  double hi = 0.0;
};

/// Gain matrix as CSV, plus a PPM with one `cell` x `cell` block per entry on a
/// linear blue-to-red ramp between the matrix extremes. The bounds go to
/// `<ppm>.json`.
HeatmapBounds export_heatmap(const ide::DensityModel& model, double base_entropy, const std::filesystem::path& csv_path,
                             const std::filesystem::path& ppm_path, std::size_t cell = 16);

}  // namespace compgen::eval
