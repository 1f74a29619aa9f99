#include "compgen/ide/density.hpp"

#include <cmath>
#include <numeric>

#include "compgen/grad/adam.hpp"
#include "compgen/grad/serialize.hpp"

namespace compgen::ide {

using grad::ParamSet;
using grad::Shape;
using grad::Tape;
using grad::Tensor;
using grad::Var;

namespace {

constexpr const char* kEmbedding = "embedding";
constexpr const char* kHiddenW = "hidden.weight";
constexpr const char* kHiddenB = "hidden.bias";
constexpr const char* kHeadW = "head.weight";
constexpr const char* kHeadB = "head.bias";

void check_config(const DensityConfig& c, std::size_t feature_dim) {
  if (c.embed_dim == 0 || c.hidden == 0 || feature_dim == 0) {
    throw data::ConfigurationError("density model widths must be positive");
  }
  if (!std::isfinite(c.logvar_min) || !std::isfinite(c.logvar_max) || !(c.logvar_min < c.logvar_max)) {
    throw data::ConfigurationError("log-variance clamp bounds must be finite with lo < hi");
  }
}

void check_shape(const ParamSet& p, const char* name, const Shape& expected) {
  if (!p.contains(name)) throw grad::ParseError(std::string("density model missing parameter '") + name + "'");
  if (p[name].value.shape() != expected) {
    throw grad::DimensionError(std::string("parameter '") + name + "' has shape " +
                               grad::shape_string(p[name].value.shape()) + ", expected " +
                               grad::shape_string(expected));
  }
}

}  // namespace

nlohmann::ordered_json DensityConfig::to_json() const {
  return {{"embed_dim", embed_dim}, {"hidden", hidden},         {"slope", slope},
          {"logvar_min", logvar_min}, {"logvar_max", logvar_max}, {"init_scale", init_scale}};
}

DensityConfig DensityConfig::from_json(const nlohmann::ordered_json& j) {
  DensityConfig c;
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden = j.value("hidden", c.hidden);
  c.slope = j.value("slope", c.slope);
  c.logvar_min = j.value("logvar_min", c.logvar_min);
  c.logvar_max = j.value("logvar_max", c.logvar_max);
  c.init_scale = j.value("init_scale", c.init_scale);
  return c;
}

DensityModel::DensityModel(Vocab vocab, std::size_t feature_dim, const DensityConfig& config, grad::Rng& rng)
    : vocab_(std::move(vocab)), feature_dim_(feature_dim), config_(config) {
  check_config(config_, feature_dim_);
  if (vocab_.size() == 0) throw data::ConfigurationError("empty vocabulary");
  const double s = config_.init_scale;
  params_.add_uniform(kEmbedding, {vocab_.size(), config_.embed_dim}, rng, s);
  params_.add_uniform(kHiddenW, {config_.hidden, config_.embed_dim}, rng, s);
  params_.add_uniform(kHiddenB, {config_.hidden}, rng, s);
  params_.add_uniform(kHeadW, {2 * feature_dim_, config_.hidden}, rng, s);
  params_.add_uniform(kHeadB, {2 * feature_dim_}, rng, s);
}

DensityModel::DensityModel(Vocab vocab, std::size_t feature_dim, const DensityConfig& config, ParamSet params)
    : vocab_(std::move(vocab)), feature_dim_(feature_dim), config_(config), params_(std::move(params)) {
  check_config(config_, feature_dim_);
  check_shape(params_, kEmbedding, {vocab_.size(), config_.embed_dim});
  check_shape(params_, kHiddenW, {config_.hidden, config_.embed_dim});
  check_shape(params_, kHiddenB, {config_.hidden});
  check_shape(params_, kHeadW, {2 * feature_dim_, config_.hidden});
  check_shape(params_, kHeadB, {2 * feature_dim_});
}

DensityModel::Heads DensityModel::forward(Tape& tape, std::span<const std::size_t> words, ParamSet& params) const {
  Var table = tape.parameter(params[kEmbedding]);
  Var emb = grad::gather_rows(table, words);
  Var h = grad::leaky_relu(
      grad::linear(emb, tape.parameter(params[kHiddenW]), tape.parameter(params[kHiddenB])), config_.slope);
  Var out = grad::linear(h, tape.parameter(params[kHeadW]), tape.parameter(params[kHeadB]));
  Var mu = grad::slice_cols(out, 0, feature_dim_);
  Var logvar = grad::clamp(grad::slice_cols(out, feature_dim_, 2 * feature_dim_), config_.logvar_min,
                           config_.logvar_max);
  return {mu, logvar};
}

WordDensity DensityModel::predict(const std::string& word) const { return predict(vocab_.index(word)); }

WordDensity DensityModel::predict(std::size_t word_index) const {
  if (word_index >= vocab_.size()) throw VocabularyError("word index " + std::to_string(word_index) + " out of range");
  // Inference works on a private copy so the model stays immutable.
  ParamSet local = params_;
  Tape tape;
  const std::size_t idx[1] = {word_index};
  Heads heads = forward(tape, idx, local);
  WordDensity out;
  const auto& mu = heads.mean.value();
  const auto& lv = heads.logvar.value();
  for (std::size_t j = 0; j < feature_dim_; ++j) {
    out.mean.push_back(mu[j]);
    out.variance.push_back(std::exp(lv[j]));
  }
  return out;
}

std::vector<WordDensity> DensityModel::predict_all() const {
  ParamSet local = params_;
  Tape tape;
  std::vector<std::size_t> idx(vocab_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Heads heads = forward(tape, idx, local);
  const auto& mu = heads.mean.value();
  const auto& lv = heads.logvar.value();
  std::vector<WordDensity> out(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    for (std::size_t j = 0; j < feature_dim_; ++j) {
      out[i].mean.push_back(mu.at(i, j));
      out[i].variance.push_back(std::exp(lv.at(i, j)));
    }
  }
  return out;
}

double nll_loss(std::span<const double> mean, std::span<const double> variance, std::span<const double> features) {
  if (mean.size() != variance.size() || mean.size() != features.size()) {
    throw grad::DimensionError("nll_loss: mismatched lengths");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    if (!(variance[j] > 0.0)) throw grad::NumericalError("nll_loss: non-positive variance");
    const double r = features[j] - mean[j];
    total += 0.5 * (std::log(variance[j]) + r * r / variance[j]);
  }
  return total;
}

Var nll_loss(const Var& mean, const Var& logvar, const Var& features) {
  if (mean.shape() != logvar.shape() || mean.shape() != features.shape()) {
    throw grad::DimensionError("nll_loss: mismatched shapes " + grad::shape_string(mean.shape()) + ", " +
                               grad::shape_string(logvar.shape()) + ", " + grad::shape_string(features.shape()));
  }
  const std::size_t rows = mean.shape().size() == 2 ? mean.shape()[0] : 1;
  Var precision = grad::exp(grad::scale(logvar, -1.0));
  Var per = grad::add(logvar, grad::mul(grad::square(grad::sub(features, mean)), precision));
  return grad::scale(grad::sum(per), 0.5 / static_cast<double>(rows));
}

Var description_nll(Tape& tape, const DensityModel& model, ParamSet& params,
                    std::span<const data::Example* const> batch) {
  const std::size_t d = model.feature_dim();
  std::vector<std::size_t> words;
  std::vector<double> targets;
  for (const data::Example* ex : batch) {
    if (ex->features.size() != d) {
      throw grad::DimensionError("example '" + ex->key + "' has " + std::to_string(ex->features.size()) +
                                 " features, model expects " + std::to_string(d));
    }
    for (const auto& tok : ex->tokens) {
      words.push_back(model.vocab().index(tok));
      targets.insert(targets.end(), ex->features.begin(), ex->features.end());
    }
  }
  if (words.empty()) throw grad::UsageError("description_nll: empty batch");
  auto heads = model.forward(tape, words, params);
  Var f = tape.constant(Tensor({words.size(), d}, std::move(targets)));
  return nll_loss(heads.mean, heads.logvar, f);
}

nlohmann::ordered_json TrainConfig::to_json() const {
  return {{"epochs", epochs}, {"batch", batch}, {"lr", lr}, {"seed", seed}};
}

TrainResult train_ide(const std::vector<data::Example>& train, const TrainConfig& tc, const DensityConfig& mc,
                      const Vocab* vocab) {
  if (train.empty()) throw data::ConfigurationError("train_ide: empty training split");
  if (tc.epochs <= 0 || tc.batch == 0 || !(tc.lr > 0.0)) {
    throw data::ConfigurationError("train_ide: epochs, batch and lr must be positive");
  }
  grad::Rng rng(tc.seed);
  grad::Rng init_rng = rng.derive(1);
  grad::Rng order_rng = rng.derive(2);

  Vocab v = vocab ? *vocab : Vocab::from_examples(train);
  DensityModel model(std::move(v), train.front().features.size(), mc, init_rng);
  ParamSet& params = model.params();
  grad::Adam adam({.lr = tc.lr});

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}, 0.0};
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double weighted = 0.0;
    std::size_t pairs = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      const std::size_t end = std::min(order.size(), start + tc.batch);
      std::vector<const data::Example*> batch;
      std::size_t batch_pairs = 0;
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back(&train[order[k]]);
        batch_pairs += train[order[k]].tokens.size();
      }
      Tape tape;
      params.zero_grad();
      Var loss = description_nll(tape, model, params, batch);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw grad::NumericalError("train_ide: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(params.step()));
      }
      tape.backward(loss);
      adam.step(params);
      weighted += value * static_cast<double>(batch_pairs);
      pairs += batch_pairs;
    }
    result.epoch_losses.push_back(weighted / static_cast<double>(pairs));
  }
  result.final_loss = result.epoch_losses.back();
  result.model = std::move(model);
  return result;
}

std::string density_model_to_json(const DensityModel& model, const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json meta = {{"kind", "ide"},
                                 {"feature_dim", model.feature_dim()},
                                 {"config", model.config().to_json()},
                                 {"vocab", model.vocab().to_json()}};
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  return grad::params_to_json(model.params(), meta);
}

void save_density_model(const DensityModel& model, const std::filesystem::path& path,
                        const nlohmann::ordered_json& extra) {
  grad::write_file_atomic(path, density_model_to_json(model, extra));
}

DensityModel load_density_model(const std::filesystem::path& path) {
  nlohmann::ordered_json meta;
  ParamSet params = grad::load_checkpoint(path, &meta);
  try {
    if (meta.value("kind", "") != "ide") throw grad::ParseError(path.string() + ": not a density model checkpoint");
    return DensityModel(Vocab::from_json(meta.at("vocab")), meta.at("feature_dim").get<std::size_t>(),
                        DensityConfig::from_json(meta.at("config")), std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw grad::ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace compgen::ide
