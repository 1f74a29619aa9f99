#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "compgen/data/example.hpp"
#include "compgen/grad/ops.hpp"
#include "compgen/grad/params.hpp"
#include "compgen/ide/vocab.hpp"

namespace compgen::ide {

struct DensityConfig {
  std::size_t embed_dim = 4;
  std::size_t hidden = 32;
  double slope = 0.1;
  double logvar_min = -10.0;
  double logvar_max = 10.0;
  double init_scale = 0.1;

  nlohmann::ordered_json to_json() const;
  static DensityConfig from_json(const nlohmann::ordered_json& j);
};

/// Per-word Gaussian over each feature dimension.
struct WordDensity {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Word embedding table plus a shared two-layer network
///   embedding[4] -> dense(hidden) -> LeakyReLU -> dense(2d) = (mu, log var).
/// Words are processed one at a time; a prediction never sees the other
/// words of its description.
class DensityModel {
 public:
  DensityModel(Vocab vocab, std::size_t feature_dim, const DensityConfig& config, grad::Rng& rng);
  DensityModel(Vocab vocab, std::size_t feature_dim, const DensityConfig& config, grad::ParamSet params);

  const Vocab& vocab() const { return vocab_; }
  std::size_t feature_dim() const { return feature_dim_; }
  const DensityConfig& config() const { return config_; }
  grad::ParamSet& params() { return params_; }
  const grad::ParamSet& params() const { return params_; }

  struct Heads {
    grad::Var mean;    // [N x d]
    grad::Var logvar;  // [N x d], clamped
  };
  /// Taped forward pass for a batch of word indices, reading weights from `params`.
  Heads forward(grad::Tape& tape, std::span<const std::size_t> words, grad::ParamSet& params) const;

  /// sigma^2 = exp(clamp(log var, lo, hi)). Throws VocabularyError for unknown words.
  WordDensity predict(const std::string& word) const;
  WordDensity predict(std::size_t word_index) const;
  /// Predictions for every vocabulary word, in vocabulary order.
  std::vector<WordDensity> predict_all() const;

 private:
  Vocab vocab_;
  std::size_t feature_dim_;
  DensityConfig config_;
  grad::ParamSet params_;
};

/// sum_j 1/2 [log var_j + (f_j - mu_j)^2 / var_j].
double nll_loss(std::span<const double> mean, std::span<const double> variance, std::span<const double> features);

/// Taped mean over rows of the same quantity, with variance given as log var.
grad::Var nll_loss(const grad::Var& mean, const grad::Var& logvar, const grad::Var& features);

/// Builds the batch loss: every (example, word) pair is charged the example's
/// full feature vector; the result is the mean over pairs.
grad::Var description_nll(grad::Tape& tape, const DensityModel& model, grad::ParamSet& params,
                          std::span<const data::Example* const> batch);

struct TrainConfig {
  int epochs = 200;
  std::size_t batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
};

struct TrainResult {
  DensityModel model;
  std::vector<double> epoch_losses;
  double final_loss = 0.0;
};

/// Adam on the mean description NLL. Vocabulary defaults to the training
/// tokens. Deterministic given config.seed; throws grad::NumericalError on a
/// non-finite loss.
TrainResult train_ide(const std::vector<data::Example>& train, const TrainConfig& train_config,
                      const DensityConfig& model_config = {}, const Vocab* vocab = nullptr);

/// Checkpoint: parameter document with meta {kind, feature_dim, config, vocab}.
void save_density_model(const DensityModel& model, const std::filesystem::path& path,
                        const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
DensityModel load_density_model(const std::filesystem::path& path);
std::string density_model_to_json(const DensityModel& model,
                                  const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

}  // namespace compgen::ide
