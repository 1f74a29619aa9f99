#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "compgen/data/example.hpp"
#include "compgen/grad/lstm.hpp"
#include "compgen/ide/vocab.hpp"

namespace compgen::baseline {

struct ClipConfig {
  std::size_t feature_hidden = 32;
  std::size_t embed_dim = 8;
  std::size_t lstm_hidden = 16;
  std::size_t joint_dim = 16;
  double slope = 0.1;
  double init_scale = 0.1;

  nlohmann::ordered_json to_json() const;
  static ClipConfig from_json(const nlohmann::ordered_json& j);
};

/// Two-tower contrastive model.
///   features: dense -> LeakyReLU -> dense -> LeakyReLU -> projection
///   text:     embedding -> LSTM (final hidden state) -> projection
/// Both towers end in an L2 normalisation.
class ClipToyModel {
 public:
  ClipToyModel(ide::Vocab vocab, std::size_t feature_dim, const ClipConfig& config, grad::Rng& rng);
  ClipToyModel(ide::Vocab vocab, std::size_t feature_dim, const ClipConfig& config, grad::ParamSet params);

  const ide::Vocab& vocab() const { return vocab_; }
  std::size_t feature_dim() const { return feature_dim_; }
  const ClipConfig& config() const { return config_; }
  grad::ParamSet& params() { return params_; }
  const grad::ParamSet& params() const { return params_; }

  /// Rows are unit-norm embeddings. `features` is [N x d].
  grad::Var encode_features(grad::Tape& tape, const grad::Var& features, grad::ParamSet& params) const;
  /// Variable-length descriptions; shorter rows keep their state once their tokens run out.
  grad::Var encode_text(grad::Tape& tape, const std::vector<std::vector<std::string>>& texts,
                        grad::ParamSet& params) const;

  std::vector<double> encode_features(std::span<const double> features) const;
  std::vector<double> encode_text(const std::vector<std::string>& tokens) const;

 private:
  ide::Vocab vocab_;
  std::size_t feature_dim_;
  ClipConfig config_;
  grad::ParamSet params_;
};

/// Dot product of the normalised inputs. Throws std::domain_error on a zero vector.
double cosine_score(std::span<const double> u, std::span<const double> v);

/// Symmetric in-batch cross-entropy over the [B x B] similarity matrix scaled by 1/temperature.
grad::Var info_nce(const grad::Var& text, const grad::Var& features, double temperature);

struct BaselineTrainConfig {
  int epochs = 200;
  std::size_t batch = 64;
  double lr = 1e-3;
  double temperature = 0.07;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
};

struct BaselineTrainResult {
  ClipToyModel model;
  std::vector<double> epoch_losses;
  double final_loss = 0.0;
};

/// Batches of fewer than two examples are skipped (no negatives); a configured
/// batch below 2 throws ConfigurationError.
BaselineTrainResult train_baseline(const std::vector<data::Example>& train, const BaselineTrainConfig& train_config,
                                   const ClipConfig& model_config = {}, const ide::Vocab* vocab = nullptr);

/// Highest cosine score wins; ties go to the lowest index.
std::size_t select_baseline(const ClipToyModel& model, const std::vector<std::string>& tokens,
                            const std::vector<std::vector<double>>& candidates);

std::string baseline_model_to_json(const ClipToyModel& model,
                                   const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
void save_baseline_model(const ClipToyModel& model, const std::filesystem::path& path,
                         const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
ClipToyModel load_baseline_model(const std::filesystem::path& path);

}  // namespace compgen::baseline
