#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "compgen/baseline/clip.hpp"
#include "compgen/data/transforms.hpp"
#include "compgen/eval/experiments.hpp"
#include "compgen/vision/vae.hpp"

namespace compgen::cli {

using Json = nlohmann::ordered_json;

/// Bad flags, unknown config keys, or values of the wrong type. Exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::set<std::string> kDatasets = {"toy", "babyai", "ai2thor", "scenes"};

/// Every configurable value with its default. A user config may only set keys
/// that appear here.
Json default_config();

/// Recursively overlays `patch` onto `base`. Unknown keys and type changes
/// throw UsageError naming the dotted key path.
void overlay(Json& base, const Json& patch, const std::string& where = "");

/// Sets a dotted key ("ide.train.epochs") on a resolved config.
void set_key(Json& config, const std::string& dotted, const Json& value);

struct DatasetSettings {
  std::string name;
  std::uint64_t seed = 0;
  int toy_per_combo = 500;
  double toy_noise = 0.05;
  int babyai_n = 9000;
  int ai2thor_n = 9000;
  int scenes_per_description = 50;
};

struct SaliencySettings {
  double base = 8.0;
  double threshold = 0.5;
};

struct EvalSettings {
  std::size_t n_tasks = 3000;
  std::uint64_t task_seed = 0;
  std::uint64_t drop_seed = 0;
  std::vector<double> angles;
  std::vector<data::PlanePair> planes;
  std::size_t heatmap_cell = 16;
};

/// Typed view of a resolved config.
struct RunConfig {
  DatasetSettings dataset;
  eval::IdeSettings ide;
  baseline::ClipConfig baseline_model;
  baseline::BaselineTrainConfig baseline_train;
  vision::VaeConfig vae_model;
  vision::VaeTrainConfig vae_train;
  SaliencySettings saliency;
  EvalSettings eval;
  std::string run_root;
  Json resolved;
};

RunConfig parse_run_config(const Json& resolved);

/// 16 hex digits of FNV-1a over the compact dump.
std::string json_hash(const Json& j);

/// Precedence: --run-root flag, then COMPGEN_RUN_ROOT, then the config value.
std::filesystem::path resolve_run_root(const RunConfig& config, const std::string& flag);

}  // namespace compgen::cli
