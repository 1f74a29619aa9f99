#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "compgen/data/generators.hpp"
#include "compgen/data/jsonl.hpp"
#include "compgen/grad/serialize.hpp"
#include "compgen/vision/saliency.hpp"
#include "run_config.hpp"

namespace compgen::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// Flag values as parsed; unset optionals leave the config untouched.
struct Flags {
  std::string config_path;
  std::vector<std::string> set;
  std::string run_root;
  std::string data_dir;
  std::string checkpoint;
  std::string vae_checkpoint;
  std::string pool = "holdout";
  std::optional<std::string> dataset;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<std::size_t> n_tasks;
  std::optional<std::string> angles;
  std::optional<std::string> planes;
  std::optional<double> saliency_base;
  std::optional<double> saliency_threshold;
  std::optional<std::size_t> patch_size;
  std::optional<std::size_t> latent_dim;
  std::optional<double> base_entropy;
  std::optional<double> temperature;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_angles(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--angles: '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw UsageError("--angles: empty list");
  return out;
}

// "3:4,0:1" -> [[3,4],[0,1]]
Json parse_planes(const std::string& text) {
  Json out = Json::array();
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument(item);
      out.push_back({std::stoul(item.substr(0, colon)), std::stoul(item.substr(colon + 1))});
    } catch (const std::exception&) {
      throw UsageError("--planes: expected i:j pairs, got '" + item + "'");
    }
  }
  return out;
}

// Where --seed/--epochs/--batch/--lr land depends on the command.
RunConfig resolve(const Flags& f, const std::string& command, const std::string& model) {
  Json config = default_config();
  if (!f.config_path.empty()) {
    Json file;
    try {
      file = Json::parse(grad::read_file(f.config_path));
    } catch (const nlohmann::json::parse_error& e) {
      throw grad::ParseError(f.config_path + ": " + e.what());
    }
    overlay(config, file);
  }
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    Json value;
    try {
      value = Json::parse(kv.substr(eq + 1));
    } catch (const nlohmann::json::parse_error&) {
      value = kv.substr(eq + 1);
    }
    set_key(config, kv.substr(0, eq), value);
  }
  if (f.dataset) set_key(config, "dataset.name", *f.dataset);
  const std::string train_section = model == "baseline" ? "baseline.train" : model == "vae" ? "vae.train" : "ide.train";
  if (f.seed) {
    if (command == "gen") {
      set_key(config, "dataset.seed", *f.seed);
    } else if (command == "train") {
      set_key(config, train_section + ".seed", *f.seed);
    } else {
      set_key(config, "eval.task_seed", *f.seed);
    }
  }
  if (f.epochs) set_key(config, train_section + ".epochs", *f.epochs);
  if (f.batch) set_key(config, train_section + ".batch", *f.batch);
  if (f.lr) set_key(config, train_section + ".lr", *f.lr);
  if (f.n_tasks) set_key(config, "eval.n_tasks", *f.n_tasks);
  if (f.angles) set_key(config, "eval.angles", parse_angles(*f.angles));
  if (f.planes) set_key(config, "eval.planes", parse_planes(*f.planes));
  if (f.saliency_base) set_key(config, "saliency.base", *f.saliency_base);
  if (f.saliency_threshold) set_key(config, "saliency.threshold", *f.saliency_threshold);
  if (f.patch_size) set_key(config, "vae.model.patch_size", *f.patch_size);
  if (f.latent_dim) set_key(config, "vae.model.latent_dim", *f.latent_dim);
  if (f.base_entropy) set_key(config, "ide.base_entropy", *f.base_entropy);
  if (f.temperature) set_key(config, "ide.temperature", *f.temperature);
  return parse_run_config(config);
}

std::string file_hash(const fs::path& p) { return grad::hex64(grad::fnv1a64(grad::read_file(p))); }

// Collects outputs and metrics, then writes manifest.json last and atomically.
class Run {
 public:
  Run(const RunConfig& config, const fs::path& dir, const std::vector<std::string>& argv)
      : config_(config), dir_(dir), started_(utc_now()), clock_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
    manifest_ = {{"tool", "compgen"}, {"version", kToolVersion}, {"command", argv}};
  }

  const fs::path& dir() const { return dir_; }
  void input(const std::string& name, const fs::path& path) { inputs_[name] = {{"path", path.string()}, {"hash", file_hash(path)}}; }
  void output(const fs::path& path) { outputs_[fs::relative(path, dir_).string()] = file_hash(path); }
  Json& metrics() { return metrics_; }

  void finish() {
    manifest_["config"] = config_.resolved;
    manifest_["config_hash"] = json_hash(config_.resolved);
    manifest_["seeds"] = {{"dataset", config_.dataset.seed},
                          {"ide_train", config_.ide.train.seed},
                          {"baseline_train", config_.baseline_train.seed},
                          {"vae_train", config_.vae_train.seed},
                          {"task", config_.eval.task_seed},
                          {"drop", config_.eval.drop_seed}};
    manifest_["inputs"] = inputs_;
    manifest_["outputs"] = outputs_;
    manifest_["metrics"] = metrics_;
    manifest_["started_at"] = started_;
    manifest_["finished_at"] = utc_now();
    manifest_["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_).count();
    grad::write_file_atomic(dir_ / "manifest.json", manifest_.dump(2) + "\n");
  }

 private:
  const RunConfig& config_;
  fs::path dir_;
  std::string started_;
  std::chrono::steady_clock::time_point clock_;
  Json manifest_;
  Json inputs_ = Json::object();
  Json outputs_ = Json::object();
  Json metrics_ = Json::object();
};

// ---- addressing ------------------------------------------------------------
// Every artifact directory is named by a hash of exactly the config sections it
// depends on, so later commands can find earlier outputs without extra flags.

Json data_identity(const RunConfig& c) { return {{"dataset", c.resolved["dataset"]}}; }

Json vae_identity(const RunConfig& c) {
  return {{"data", data_identity(c)}, {"vae", c.resolved["vae"]}, {"saliency", c.resolved["saliency"]}};
}

Json model_identity(const RunConfig& c, const std::string& model) {
  if (model == "vae") return vae_identity(c);
  if (model == "baseline") return {{"data", data_identity(c)}, {"baseline", c.resolved["baseline"]}};
  Json id = {{"data", data_identity(c)}, {"ide", c.resolved["ide"]}};
  if (c.dataset.name == "scenes") id["features"] = vae_identity(c);
  return id;
}

fs::path data_dir(const RunConfig& c, const fs::path& root, const Flags& f) {
  if (!f.data_dir.empty()) return f.data_dir;
  return root / "data" / (c.dataset.name + "-" + json_hash(data_identity(c)));
}

fs::path model_dir(const RunConfig& c, const fs::path& root, const std::string& model) {
  return root / "train" / (model + "-" + c.dataset.name + "-" + json_hash(model_identity(c, model)));
}

fs::path checkpoint_path(const RunConfig& c, const fs::path& root, const std::string& model, const std::string& flag) {
  return flag.empty() ? model_dir(c, root, model) / "checkpoint.json" : fs::path(flag);
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw grad::IoError(what + " not found: " + p.string());
}

// ---- datasets --------------------------------------------------------------

data::Split<data::Example> generate_features(const RunConfig& c) {
  grad::Rng rng(c.dataset.seed);
  const auto& d = c.dataset;
  if (d.name == "toy") return data::apply_leave_out(data::gen_toy(rng, d.toy_per_combo, d.toy_noise), data::toy_holdout_keys());
  if (d.name == "babyai") return data::apply_leave_out(data::gen_babyai(rng, d.babyai_n), data::babyai_holdout_keys());
  return data::apply_leave_out(data::gen_ai2thor(rng, d.ai2thor_n), data::ai2thor_holdout_keys());
}

struct SceneSplit {
  std::vector<data::SceneImage> train;
  std::vector<data::SceneImage> holdout;
};

SceneSplit read_scene_split(const fs::path& dir) {
  const auto index_path = dir / "scenes.json";
  require_file(index_path, "scene index");
  Json index;
  try {
    index = Json::parse(grad::read_file(index_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw grad::ParseError(index_path.string() + ": " + e.what());
  }
  SceneSplit split;
  for (const auto& stem : index.at("train")) split.train.push_back(data::read_scene(dir / "images", stem.get<std::string>()));
  for (const auto& stem : index.at("holdout")) split.holdout.push_back(data::read_scene(dir / "images", stem.get<std::string>()));
  return split;
}

data::Split<data::Example> read_feature_split(const fs::path& dir) {
  const auto path = dir / "split.jsonl";
  require_file(path, "dataset");
  return data::read_jsonl(path);
}

// Feature-vector split for any dataset; scenes go through the image pipeline.
data::Split<data::Example> load_examples(const RunConfig& c, const fs::path& dir, const vision::VaeModel* vae, Run& run) {
  if (c.dataset.name != "scenes") {
    run.input("dataset", dir / "split.jsonl");
    return read_feature_split(dir);
  }
  run.input("dataset", dir / "scenes.json");
  const auto scenes = read_scene_split(dir);
  data::Split<data::Example> split;
  split.holdout_keys = data::scene_holdout_keys();
  auto features = [&](const data::SceneImage& s) {
    return data::make_example(vision::pipeline_features(*vae, s.image, c.saliency.base, c.saliency.threshold), s.tokens);
  };
  for (const auto& s : scenes.train) split.train.push_back(features(s));
  for (const auto& s : scenes.holdout) split.holdout.push_back(features(s));
  return split;
}

std::optional<vision::VaeModel> load_vae_for(const RunConfig& c, const fs::path& root, const Flags& f, Run& run) {
  if (c.dataset.name != "scenes") return std::nullopt;
  const auto path = checkpoint_path(c, root, "vae", f.vae_checkpoint);
  require_file(path, "vae checkpoint");
  run.input("vae_checkpoint", path);
  return vision::load_vae_model(path);
}

// ---- commands --------------------------------------------------------------

int cmd_gen(const RunConfig& c, const fs::path& root, const Flags& f, const std::vector<std::string>& argv,
            std::ostream& out) {
  Run run(c, data_dir(c, root, f), argv);
  if (c.dataset.name == "scenes") {
    grad::Rng rng(c.dataset.seed);
    const auto scenes = data::gen_scenes(rng, c.dataset.scenes_per_description);
    const auto holdout = data::scene_holdout_keys();
    Json index = {{"holdout_keys", holdout}, {"train", Json::array()}, {"holdout", Json::array()}};
    char stem[32];
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      std::snprintf(stem, sizeof stem, "scene_%04zu", i);
      data::write_scene(scenes[i], run.dir() / "images", stem);
      run.output(run.dir() / "images" / (std::string(stem) + ".ppm"));
      run.output(run.dir() / "images" / (std::string(stem) + ".json"));
      index[holdout.count(scenes[i].key) ? "holdout" : "train"].push_back(stem);
    }
    grad::write_file_atomic(run.dir() / "scenes.json", index.dump(2) + "\n");
    run.output(run.dir() / "scenes.json");
    run.metrics() = {{"n_train", index["train"].size()}, {"n_holdout", index["holdout"].size()}};
  } else {
    const auto split = generate_features(c);
    data::write_jsonl(split, run.dir() / "split.jsonl");
    run.output(run.dir() / "split.jsonl");
    run.metrics() = {{"n_train", split.train.size()}, {"n_holdout", split.holdout.size()}};
  }
  run.finish();
  out << "dataset=" << c.dataset.name << " train=" << run.metrics()["n_train"] << " holdout=" << run.metrics()["n_holdout"]
      << " dir=" << run.dir().string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& c, const std::string& model, const fs::path& root, const Flags& f,
              const std::vector<std::string>& argv, std::ostream& out) {
  const auto dir = data_dir(c, root, f);
  Run run(c, model_dir(c, root, model), argv);
  const auto ckpt = run.dir() / "checkpoint.json";
  const Json extra = {{"config_hash", json_hash(model_identity(c, model))}};
  double final_loss = 0.0;
  std::vector<double> curve;
  if (model == "vae") {
    if (c.dataset.name != "scenes") throw UsageError("train vae needs --dataset scenes");
    run.input("dataset", dir / "scenes.json");
    const auto scenes = read_scene_split(dir);
    std::vector<data::Image> patches;
    for (const auto& s : scenes.train) {
      patches.push_back(vision::pipeline_patch(s.image, c.vae_model.patch_size, c.saliency.base, c.saliency.threshold));
    }
    auto result = vision::train_vae(patches, c.vae_train, c.vae_model);
    vision::save_vae_model(result.model, ckpt, extra);
    final_loss = result.final_loss;
    curve = result.epoch_losses;
    run.metrics()["reconstruction_mse"] = vision::reconstruction_mse(result.model, patches);
    run.metrics()["final_kl"] = result.epoch_kl.back();
  } else {
    auto vae = load_vae_for(c, root, f, run);
    const auto split = load_examples(c, dir, vae ? &*vae : nullptr, run);
    if (model == "baseline") {
      auto result = baseline::train_baseline(split.train, c.baseline_train, c.baseline_model);
      baseline::save_baseline_model(result.model, ckpt, extra);
      final_loss = result.final_loss;
      curve = result.epoch_losses;
    } else {
      auto result = ide::train_ide(split.train, c.ide.train, c.ide.model);
      ide::save_density_model(result.model, ckpt, extra);
      final_loss = result.final_loss;
      curve = result.epoch_losses;
    }
  }
  run.output(ckpt);
  run.metrics()["final_loss"] = final_loss;
  run.metrics()["epoch_losses"] = curve;
  run.finish();
  out << "final_loss=" << grad::format_double(final_loss) << " checkpoint=" << ckpt.string() << "\n";
  return kExitOk;
}

void write_report(Run& run, const eval::EvalReport& report, const std::string& name) {
  // Reports omit wall time so reruns are byte-identical; timing lives in the manifest.
  grad::write_file_atomic(run.dir() / name, report.to_json(false).dump(2) + "\n");
  run.output(run.dir() / name);
}

int cmd_eval(const RunConfig& c, std::string model, const fs::path& root, const Flags& f,
             const std::vector<std::string>& argv, std::ostream& out) {
  if (model == "pipeline") {
    if (c.dataset.name != "scenes") throw UsageError("eval pipeline needs --dataset scenes");
    model = "ide";
  }
  if (f.pool != "holdout" && f.pool != "train") throw UsageError("--pool must be 'train' or 'holdout'");
  const Json identity = {{"model", model_identity(c, model)}, {"eval", c.resolved["eval"]}, {"pool", f.pool}};
  Run run(c, root / "eval" / (model + "-" + c.dataset.name + "-" + json_hash(identity)), argv);
  const auto ckpt = checkpoint_path(c, root, model, f.checkpoint);
  require_file(ckpt, model + " checkpoint");
  run.input("checkpoint", ckpt);
  auto vae = load_vae_for(c, root, f, run);
  const auto split = load_examples(c, data_dir(c, root, f), vae ? &*vae : nullptr, run);
  grad::Rng task_rng(c.eval.task_seed);
  const auto tasks = eval::build_tasks(f.pool == "train" ? split.train : split.holdout, c.eval.n_tasks, task_rng);
  const Json report_config = {{"model", model}, {"identity", identity}, {"checkpoint_hash", file_hash(ckpt)}};
  eval::EvalReport report;
  if (model == "baseline") {
    const auto m = baseline::load_baseline_model(ckpt);
    report = eval::evaluate(eval::baseline_selector(m), tasks, report_config);
  } else {
    const auto m = ide::load_density_model(ckpt);
    report = eval::evaluate(eval::ide_selector(m, c.ide.base_entropy, c.ide.temperature), tasks, report_config);
  }
  write_report(run, report, "report.json");
  run.metrics() = report.to_json(true);
  run.finish();
  out << report.summary_line() << "\n";
  return kExitOk;
}

int cmd_sweep(const RunConfig& c, const fs::path& root, const Flags& f, const std::vector<std::string>& argv,
              std::ostream& out) {
  const Json identity = {{"data", data_identity(c)}, {"ide", c.resolved["ide"]}, {"eval", c.resolved["eval"]}};
  Run run(c, root / "sweep" / (c.dataset.name + "-" + json_hash(identity)), argv);
  const auto dir = data_dir(c, root, f);
  run.input("dataset", dir / "split.jsonl");
  const auto split = read_feature_split(dir);
  const auto points = eval::rotation_sweep(split, c.eval.angles, c.eval.planes, c.ide, c.eval.n_tasks, c.eval.task_seed);
  grad::write_file_atomic(run.dir() / "sweep.csv", eval::sweep_to_csv(points));
  run.output(run.dir() / "sweep.csv");
  Json per_angle = Json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    write_report(run, points[i].report, "report_" + std::to_string(i) + ".json");
    per_angle.push_back({{"theta", points[i].theta}, {"accuracy", points[i].report.accuracy}});
    out << "theta=" << grad::format_double(points[i].theta) << " " << points[i].report.summary_line() << "\n";
  }
  run.metrics()["points"] = per_angle;
  run.finish();
  return kExitOk;
}

int cmd_ab(const RunConfig& c, const fs::path& root, const Flags& f, const std::vector<std::string>& argv,
           std::ostream& out) {
  const Json identity = {{"data", data_identity(c)}, {"ide", c.resolved["ide"]}, {"eval", c.resolved["eval"]}};
  Run run(c, root / "ab" / (c.dataset.name + "-" + json_hash(identity)), argv);
  const auto dir = data_dir(c, root, f);
  run.input("dataset", dir / "split.jsonl");
  const auto split = read_feature_split(dir);
  const auto r = eval::setting_ab_compare(split, c.ide, c.eval.n_tasks, c.eval.task_seed, c.eval.drop_seed);
  write_report(run, r.full, "report_A.json");
  write_report(run, r.partial, "report_B.json");
  run.metrics() = {{"accuracy_A", r.full.accuracy}, {"accuracy_B", r.partial.accuracy}};
  run.finish();
  out << "setting=A " << r.full.summary_line() << "\n";
  out << "setting=B " << r.partial.summary_line() << "\n";
  return kExitOk;
}

int cmd_heatmap(const RunConfig& c, const fs::path& root, const Flags& f, const std::vector<std::string>& argv,
                std::ostream& out) {
  const auto ckpt = checkpoint_path(c, root, "ide", f.checkpoint);
  require_file(ckpt, "ide checkpoint");
  const Json identity = {{"checkpoint", file_hash(ckpt)}, {"ide", c.resolved["ide"]}, {"eval", c.resolved["eval"]}};
  Run run(c, root / "heatmap" / json_hash(identity), argv);
  run.input("checkpoint", ckpt);
  const auto model = ide::load_density_model(ckpt);
  const auto b = eval::export_heatmap(model, c.ide.base_entropy, run.dir() / "gain.csv", run.dir() / "gain.ppm",
                                      c.eval.heatmap_cell);
  for (const char* name : {"gain.csv", "gain.ppm", "gain.ppm.json"}) run.output(run.dir() / name);
  run.metrics() = {{"lo", b.lo}, {"hi", b.hi}};
  run.finish();
  out << "gain_lo=" << grad::format_double(b.lo) << " gain_hi=" << grad::format_double(b.hi)
      << " csv=" << (run.dir() / "gain.csv").string() << "\n";
  return kExitOk;
}

int cmd_saliency(const RunConfig& c, const std::string& image_path, const fs::path& root,
                 const std::vector<std::string>& argv, std::ostream& out) {
  require_file(image_path, "image");
  const Json identity = {{"image", file_hash(image_path)}, {"saliency", c.resolved["saliency"]}};
  Run run(c, root / "saliency" / json_hash(identity), argv);
  run.input("image", image_path);
  const auto image = data::read_ppm(image_path);
  const auto map = vision::saliency(image, c.saliency.base);
  const auto bounds = vision::write_saliency_ppm(map, run.dir() / "saliency.ppm", run.dir() / "saliency.json");
  Json bbox;
  std::string line;
  try {
    const auto box = vision::locate(map, c.saliency.threshold);
    bbox = {{"bbox", data::bbox_to_json(box)}};
    line = "bbox=[" + std::to_string(box.row_min) + "," + std::to_string(box.row_max) + "," +
           std::to_string(box.col_min) + "," + std::to_string(box.col_max) + "]";
  } catch (const vision::NoObjectError&) {
    bbox = {{"bbox", nullptr}, {"error", "no object"}};
    line = "bbox=none";
  }
  bbox["threshold"] = c.saliency.threshold;
  bbox["base"] = c.saliency.base;
  grad::write_file_atomic(run.dir() / "bbox.json", bbox.dump(2) + "\n");
  for (const char* name : {"saliency.ppm", "saliency.json", "bbox.json"}) run.output(run.dir() / name);
  run.metrics() = {{"lo", bounds.lo}, {"hi", bounds.hi}, {"bbox", bbox["bbox"]}};
  run.finish();
  out << line << " dir=" << run.dir().string() << "\n";
  return kExitOk;
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_path, "JSON config overlay; unknown keys are rejected");
  app->add_option("--set", f.set, "Override one config key, e.g. --set ide.train.epochs=50");
  app->add_option("--run-root", f.run_root, "Artifact root (default: $COMPGEN_RUN_ROOT, then config run_root)");
  app->add_option("--data-dir", f.data_dir, "Dataset directory instead of the hashed location");
  app->add_option("--seed", f.seed, "Dataset seed for gen, training seed for train, task seed otherwise");
  app->add_option("--saliency-base", f.saliency_base, "Base activation B");
  app->add_option("--saliency-threshold", f.saliency_threshold, "Saliency threshold for locate");
  app->add_option("--patch-size", f.patch_size, "VAE patch side");
  app->add_option("--latent-dim", f.latent_dim, "VAE latent width");
}

void add_dataset(CLI::App* app, Flags& f) {
  app->add_option("--dataset", f.dataset, "toy | babyai | ai2thor | scenes");
}

void add_training(CLI::App* app, Flags& f) {
  app->add_option("--epochs", f.epochs);
  app->add_option("--batch", f.batch);
  app->add_option("--lr", f.lr);
}

void add_eval(CLI::App* app, Flags& f) {
  app->add_option("--n-tasks", f.n_tasks);
  app->add_option("--base-entropy", f.base_entropy, "Base entropy E");
  app->add_option("--temperature", f.temperature, "Composition temperature");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"compgen: compositional grounding experiments", "compgen"};
  app.require_subcommand(1);
  Flags f;
  std::string target;

  auto* gen = app.add_subcommand("gen", "Generate a dataset");
  gen->add_option("dataset", target, "toy | babyai | ai2thor | scenes")->required();
  add_common(gen, f);

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("model", target, "ide | vae | baseline")->required()->check(CLI::IsMember({"ide", "vae", "baseline"}));
  add_common(train, f);
  add_dataset(train, f);
  add_training(train, f);
  train->add_option("--vae-checkpoint", f.vae_checkpoint);

  auto* ev = app.add_subcommand("eval", "Evaluate a trained model on selection tasks");
  ev->add_option("model", target, "ide | baseline | pipeline")->required()->check(CLI::IsMember({"ide", "baseline", "pipeline"}));
  add_common(ev, f);
  add_dataset(ev, f);
  add_eval(ev, f);
  ev->add_option("--checkpoint", f.checkpoint);
  ev->add_option("--vae-checkpoint", f.vae_checkpoint);
  ev->add_option("--pool", f.pool, "holdout | train");

  auto* sweep = app.add_subcommand("sweep", "Rotation sweep: retrain and evaluate per angle");
  add_common(sweep, f);
  add_dataset(sweep, f);
  add_training(sweep, f);
  add_eval(sweep, f);
  sweep->add_option("--angles", f.angles, "Comma-separated degrees");
  sweep->add_option("--planes", f.planes, "Comma-separated i:j rotation planes");

  auto* ab = app.add_subcommand("ab-compare", "Full versus partial descriptions");
  add_common(ab, f);
  add_dataset(ab, f);
  add_training(ab, f);
  add_eval(ab, f);

  auto* heat = app.add_subcommand("heatmap", "Export the word-by-dimension gain matrix");
  add_common(heat, f);
  add_dataset(heat, f);
  heat->add_option("--base-entropy", f.base_entropy, "Base entropy E");
  heat->add_option("--checkpoint", f.checkpoint);

  auto* sal = app.add_subcommand("saliency", "Saliency map and bounding box for one PPM image");
  sal->add_option("image", target, "PPM path")->required();
  add_common(sal, f);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::vector<std::string> argv = {"compgen"};
  argv.insert(argv.end(), args.begin(), args.end());
  try {
    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "gen") {
      if (kDatasets.count(target) == 0) throw UsageError("unknown dataset '" + target + "'");
      f.dataset = target;
    }
    const RunConfig config = resolve(f, name, target);
    const fs::path root = resolve_run_root(config, f.run_root);
    if (name == "gen") return cmd_gen(config, root, f, argv, out);
    if (name == "train") return cmd_train(config, target, root, f, argv, out);
    if (name == "eval") return cmd_eval(config, target, root, f, argv, out);
    if (name == "sweep") return cmd_sweep(config, root, f, argv, out);
    if (name == "ab-compare") return cmd_ab(config, root, f, argv, out);
    if (name == "heatmap") return cmd_heatmap(config, root, f, argv, out);
    return cmd_saliency(config, target, root, argv, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const data::ConfigurationError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const grad::UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const grad::DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const grad::IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const grad::ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const grad::NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace compgen::cli
