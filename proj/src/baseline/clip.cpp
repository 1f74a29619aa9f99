#include "compgen/baseline/clip.hpp"

#include <cmath>
#include <numeric>

#include "compgen/grad/adam.hpp"
#include "compgen/grad/serialize.hpp"

namespace compgen::baseline {

using grad::ParamSet;
using grad::Tape;
using grad::Tensor;
using grad::Var;

nlohmann::ordered_json ClipConfig::to_json() const {
  return {{"feature_hidden", feature_hidden}, {"embed_dim", embed_dim}, {"lstm_hidden", lstm_hidden},
          {"joint_dim", joint_dim},           {"slope", slope},         {"init_scale", init_scale}};
}

ClipConfig ClipConfig::from_json(const nlohmann::ordered_json& j) {
  ClipConfig c;
  c.feature_hidden = j.value("feature_hidden", c.feature_hidden);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.joint_dim = j.value("joint_dim", c.joint_dim);
  c.slope = j.value("slope", c.slope);
  c.init_scale = j.value("init_scale", c.init_scale);
  return c;
}

ClipToyModel::ClipToyModel(ide::Vocab vocab, std::size_t feature_dim, const ClipConfig& c, grad::Rng& rng)
    : vocab_(std::move(vocab)), feature_dim_(feature_dim), config_(c) {
  if (vocab_.size() == 0 || feature_dim_ == 0) throw data::ConfigurationError("baseline: empty vocabulary or features");
  const double s = c.init_scale;
  params_.add_uniform("feat.l1.weight", {c.feature_hidden, feature_dim_}, rng, s);
  params_.add_uniform("feat.l1.bias", {c.feature_hidden}, rng, s);
  params_.add_uniform("feat.l2.weight", {c.feature_hidden, c.feature_hidden}, rng, s);
  params_.add_uniform("feat.l2.bias", {c.feature_hidden}, rng, s);
  params_.add_uniform("feat.proj.weight", {c.joint_dim, c.feature_hidden}, rng, s);
  params_.add_uniform("feat.proj.bias", {c.joint_dim}, rng, s);
  params_.add_uniform("text.embedding", {vocab_.size(), c.embed_dim}, rng, s);
  grad::add_lstm_params(params_, "text.lstm", c.embed_dim, c.lstm_hidden, rng, s);
  params_.add_uniform("text.proj.weight", {c.joint_dim, c.lstm_hidden}, rng, s);
  params_.add_uniform("text.proj.bias", {c.joint_dim}, rng, s);
}

ClipToyModel::ClipToyModel(ide::Vocab vocab, std::size_t feature_dim, const ClipConfig& c, ParamSet params)
    : vocab_(std::move(vocab)), feature_dim_(feature_dim), config_(c), params_(std::move(params)) {
  // A dry forward pass validates every expected parameter and shape.
  encode_features(std::vector<double>(feature_dim_, 0.0));
  if (vocab_.size()) encode_text({vocab_.word(0)});
  if (params_["text.embedding"].value.shape() != grad::Shape{vocab_.size(), c.embed_dim}) {
    throw grad::DimensionError("baseline: embedding table does not match vocabulary");
  }
}

Var ClipToyModel::encode_features(Tape& tape, const Var& features, ParamSet& p) const {
  auto dense = [&](const Var& x, const std::string& name) {
    return grad::linear(x, tape.parameter(p[name + ".weight"]), tape.parameter(p[name + ".bias"]));
  };
  Var h = grad::leaky_relu(dense(features, "feat.l1"), config_.slope);
  h = grad::leaky_relu(dense(h, "feat.l2"), config_.slope);
  return grad::l2_normalize_rows(dense(h, "feat.proj"));
}

Var ClipToyModel::encode_text(Tape& tape, const std::vector<std::vector<std::string>>& texts, ParamSet& p) const {
  const std::size_t n = texts.size();
  const std::size_t hidden = config_.lstm_hidden;
  std::size_t longest = 0;
  for (const auto& t : texts) {
    if (t.empty()) throw grad::UsageError("encode_text: empty token list");
    longest = std::max(longest, t.size());
  }
  Var table = tape.parameter(p["text.embedding"]);
  auto weights = grad::LstmWeights::bind(tape, p, "text.lstm");
  grad::LstmState state{tape.constant(Tensor({n, hidden}, 0.0)), tape.constant(Tensor({n, hidden}, 0.0))};
  for (std::size_t step = 0; step < longest; ++step) {
    std::vector<std::size_t> idx(n, 0);
    Tensor keep({n, hidden}, 1.0), hold({n, hidden}, 0.0);
    bool ragged = false;
    for (std::size_t r = 0; r < n; ++r) {
      if (step < texts[r].size()) {
        idx[r] = vocab_.index(texts[r][step]);
      } else {
        ragged = true;
        for (std::size_t k = 0; k < hidden; ++k) {
          keep[r * hidden + k] = 0.0;
          hold[r * hidden + k] = 1.0;
        }
      }
    }
    auto next = grad::lstm_step(state, grad::gather_rows(table, idx), weights);
    if (ragged) {
      Var mk = tape.constant(std::move(keep)), mh = tape.constant(std::move(hold));
      next.h = grad::add(grad::mul(mk, next.h), grad::mul(mh, state.h));
      next.c = grad::add(grad::mul(mk, next.c), grad::mul(mh, state.c));
    }
    state = next;
  }
  Var z = grad::linear(state.h, tape.parameter(p["text.proj.weight"]), tape.parameter(p["text.proj.bias"]));
  return grad::l2_normalize_rows(z);
}

std::vector<double> ClipToyModel::encode_features(std::span<const double> features) const {
  if (features.size() != feature_dim_) throw grad::DimensionError("encode_features: wrong feature width");
  ParamSet local = params_;
  Tape tape;
  Var x = tape.constant(Tensor({1, feature_dim_}, std::vector<double>(features.begin(), features.end())));
  return encode_features(tape, x, local).value().values();
}

std::vector<double> ClipToyModel::encode_text(const std::vector<std::string>& tokens) const {
  ParamSet local = params_;
  Tape tape;
  return encode_text(tape, {tokens}, local).value().values();
}

double cosine_score(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw grad::DimensionError("cosine_score: length mismatch");
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw std::domain_error("cosine_score: zero vector");
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

Var info_nce(const Var& text, const Var& features, double temperature) {
  const std::size_t b = text.shape()[0];
  if (b < 2) throw data::ConfigurationError("info_nce: batch of at least 2 required");
  std::vector<std::size_t> diag(b);
  std::iota(diag.begin(), diag.end(), std::size_t{0});
  Var logits = grad::scale(grad::matmul(text, grad::transpose(features)), 1.0 / temperature);
  Var a = grad::cross_entropy_rows(logits, diag);
  Var c = grad::cross_entropy_rows(grad::transpose(logits), diag);
  return grad::scale(grad::add(a, c), 0.5);
}

nlohmann::ordered_json BaselineTrainConfig::to_json() const {
  return {{"epochs", epochs}, {"batch", batch}, {"lr", lr}, {"temperature", temperature}, {"seed", seed}};
}

BaselineTrainResult train_baseline(const std::vector<data::Example>& train, const BaselineTrainConfig& tc,
                                   const ClipConfig& mc, const ide::Vocab* vocab) {
  if (tc.batch < 2) throw data::ConfigurationError("train_baseline: batch must be at least 2");
  if (train.size() < 2) throw data::ConfigurationError("train_baseline: need at least 2 examples");
  if (tc.epochs <= 0 || !(tc.lr > 0.0) || !(tc.temperature > 0.0)) {
    throw data::ConfigurationError("train_baseline: epochs, lr and temperature must be positive");
  }
  grad::Rng rng(tc.seed);
  grad::Rng init_rng = rng.derive(1);
  grad::Rng order_rng = rng.derive(2);
  ClipToyModel model(vocab ? *vocab : ide::Vocab::from_examples(train), train.front().features.size(), mc, init_rng);
  const std::size_t d = model.feature_dim();
  ParamSet& params = model.params();
  grad::Adam adam({.lr = tc.lr});

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  BaselineTrainResult result{model, {}, 0.0};
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + 1 < order.size(); start += tc.batch) {
      const std::size_t end = std::min(order.size(), start + tc.batch);
      if (end - start < 2) break;
      std::vector<std::vector<std::string>> texts;
      std::vector<double> feats;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = train[order[k]];
        if (ex.features.size() != d) throw grad::DimensionError("train_baseline: ragged feature widths");
        texts.push_back(ex.tokens);
        feats.insert(feats.end(), ex.features.begin(), ex.features.end());
      }
      Tape tape;
      params.zero_grad();
      Var f = tape.constant(Tensor({end - start, d}, std::move(feats)));
      Var loss = info_nce(model.encode_text(tape, texts, params), model.encode_features(tape, f, params),
                          tc.temperature);
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw grad::NumericalError("train_baseline: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(params.step()));
      }
      tape.backward(loss);
      adam.step(params);
      total += value;
      ++batches;
    }
    result.epoch_losses.push_back(total / static_cast<double>(batches));
  }
  result.final_loss = result.epoch_losses.back();
  result.model = std::move(model);
  return result;
}

std::size_t select_baseline(const ClipToyModel& model, const std::vector<std::string>& tokens,
                            const std::vector<std::vector<double>>& candidates) {
  if (candidates.empty()) throw grad::UsageError("select_baseline: no candidates");
  const auto text = model.encode_text(tokens);
  std::size_t best = 0;
  double best_score = -2.0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (candidates[k].size() != model.feature_dim()) throw grad::DimensionError("select_baseline: candidate width");
    const double s = cosine_score(text, model.encode_features(candidates[k]));
    if (s > best_score) {
      best = k;
      best_score = s;
    }
  }
  return best;
}

std::string baseline_model_to_json(const ClipToyModel& model, const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json meta = {{"kind", "baseline"},
                                 {"feature_dim", model.feature_dim()},
                                 {"config", model.config().to_json()},
                                 {"vocab", model.vocab().to_json()}};
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  return grad::params_to_json(model.params(), meta);
}

void save_baseline_model(const ClipToyModel& model, const std::filesystem::path& path,
                         const nlohmann::ordered_json& extra) {
  grad::write_file_atomic(path, baseline_model_to_json(model, extra));
}

ClipToyModel load_baseline_model(const std::filesystem::path& path) {
  nlohmann::ordered_json meta;
  ParamSet params = grad::load_checkpoint(path, &meta);
  try {
    if (meta.value("kind", "") != "baseline") throw grad::ParseError(path.string() + ": not a baseline checkpoint");
    return ClipToyModel(ide::Vocab::from_json(meta.at("vocab")), meta.at("feature_dim").get<std::size_t>(),
                        ClipConfig::from_json(meta.at("config")), std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw grad::ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace compgen::baseline
