#include "run_config.hpp"

#include <cstdlib>

#include "compgen/grad/serialize.hpp"

namespace compgen::cli {

Json default_config() {
  const eval::IdeSettings ide;
  return {
      {"dataset",
       {{"name", "toy"},
        {"seed", 0},
        {"toy_per_combo", 500},
        {"toy_noise", 0.05},
        {"babyai_n", 9000},
        {"ai2thor_n", 9000},
        {"scenes_per_description", 50}}},
      {"ide", ide.to_json()},
      {"baseline", {{"model", baseline::ClipConfig{}.to_json()}, {"train", baseline::BaselineTrainConfig{}.to_json()}}},
      {"vae", {{"model", vision::VaeConfig{}.to_json()}, {"train", vision::VaeTrainConfig{}.to_json()}}},
      {"saliency", {{"base", vision::kDefaultSaliencyBase}, {"threshold", vision::kDefaultSaliencyThreshold}}},
      {"eval",
       {{"n_tasks", 3000},
        {"task_seed", 0},
        {"drop_seed", 0},
        {"angles", {0, 10, 30, 45, 60, 80, 90}},
        {"planes", {{3, 4}}},
        {"heatmap_cell", 16}}},
      {"run_root", "runs"},
  };
}

namespace {

bool compatible(const Json& a, const Json& b) {
  if (a.is_number() && b.is_number()) {
    // Integers may not silently become fractions.
    return !(a.is_number_integer() && b.is_number_float());
  }
  return a.type() == b.type();
}

}  // namespace

void overlay(Json& base, const Json& patch, const std::string& where) {
  if (!patch.is_object()) throw UsageError("config" + (where.empty() ? "" : " key '" + where + "'") + " must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw UsageError("unknown config key '" + path + "'");
    Json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, path);
    } else {
      if (!compatible(slot, value)) throw UsageError("config key '" + path + "' has the wrong type");
      slot = value;
    }
  }
}

void set_key(Json& config, const std::string& dotted, const Json& value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t dot; (dot = dotted.find('.', start)) != std::string::npos; start = dot + 1) {
    parts.push_back(dotted.substr(start, dot - start));
  }
  parts.push_back(dotted.substr(start));
  Json patch = value;
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
  overlay(config, patch);
}

namespace {

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError("config key '" + where + "." + key + "' is missing or has the wrong type");
  }
}

}  // namespace

RunConfig parse_run_config(const Json& resolved) {
  RunConfig c;
  c.resolved = resolved;
  const Json& d = resolved.at("dataset");
  c.dataset.name = get<std::string>(d, "name", "dataset");
  if (kDatasets.count(c.dataset.name) == 0) throw UsageError("unknown dataset '" + c.dataset.name + "'");
  c.dataset.seed = get<std::uint64_t>(d, "seed", "dataset");
  c.dataset.toy_per_combo = get<int>(d, "toy_per_combo", "dataset");
  c.dataset.toy_noise = get<double>(d, "toy_noise", "dataset");
  c.dataset.babyai_n = get<int>(d, "babyai_n", "dataset");
  c.dataset.ai2thor_n = get<int>(d, "ai2thor_n", "dataset");
  c.dataset.scenes_per_description = get<int>(d, "scenes_per_description", "dataset");

  const Json& ide = resolved.at("ide");
  c.ide.model = ide::DensityConfig::from_json(ide.at("model"));
  const Json& it = ide.at("train");
  c.ide.train.epochs = get<int>(it, "epochs", "ide.train");
  c.ide.train.batch = get<std::size_t>(it, "batch", "ide.train");
  c.ide.train.lr = get<double>(it, "lr", "ide.train");
  c.ide.train.seed = get<std::uint64_t>(it, "seed", "ide.train");
  c.ide.base_entropy = get<double>(ide, "base_entropy", "ide");
  c.ide.temperature = get<double>(ide, "temperature", "ide");

  const Json& b = resolved.at("baseline");
  c.baseline_model = baseline::ClipConfig::from_json(b.at("model"));
  const Json& bt = b.at("train");
  c.baseline_train.epochs = get<int>(bt, "epochs", "baseline.train");
  c.baseline_train.batch = get<std::size_t>(bt, "batch", "baseline.train");
  c.baseline_train.lr = get<double>(bt, "lr", "baseline.train");
  c.baseline_train.temperature = get<double>(bt, "temperature", "baseline.train");
  c.baseline_train.seed = get<std::uint64_t>(bt, "seed", "baseline.train");

  const Json& v = resolved.at("vae");
  c.vae_model = vision::VaeConfig::from_json(v.at("model"));
  const Json& vt = v.at("train");
  c.vae_train.epochs = get<int>(vt, "epochs", "vae.train");
  c.vae_train.batch = get<std::size_t>(vt, "batch", "vae.train");
  c.vae_train.lr = get<double>(vt, "lr", "vae.train");
  c.vae_train.seed = get<std::uint64_t>(vt, "seed", "vae.train");

  const Json& s = resolved.at("saliency");
  c.saliency.base = get<double>(s, "base", "saliency");
  c.saliency.threshold = get<double>(s, "threshold", "saliency");

  const Json& e = resolved.at("eval");
  c.eval.n_tasks = get<std::size_t>(e, "n_tasks", "eval");
  c.eval.task_seed = get<std::uint64_t>(e, "task_seed", "eval");
  c.eval.drop_seed = get<std::uint64_t>(e, "drop_seed", "eval");
  c.eval.angles = get<std::vector<double>>(e, "angles", "eval");
  for (const auto& pair : e.at("planes")) {
    if (!pair.is_array() || pair.size() != 2) throw UsageError("config key 'eval.planes' must hold [i, j] pairs");
    c.eval.planes.emplace_back(pair[0].get<std::size_t>(), pair[1].get<std::size_t>());
  }
  c.eval.heatmap_cell = get<std::size_t>(e, "heatmap_cell", "eval");
  c.run_root = resolved.at("run_root").get<std::string>();
  return c;
}

std::string json_hash(const Json& j) { return grad::hex64(grad::fnv1a64(j.dump())); }

std::filesystem::path resolve_run_root(const RunConfig& config, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("COMPGEN_RUN_ROOT"); env != nullptr && *env != '\0') return env;
  return config.run_root;
}

}  // namespace compgen::cli
