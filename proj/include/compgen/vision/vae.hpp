#pragma once

#include <filesystem>
#include <vector>

#include "compgen/data/image.hpp"
#include "compgen/grad/ops.hpp"
#include "compgen/grad/params.hpp"
#include "compgen/vision/saliency.hpp"

namespace compgen::vision {

struct VaeConfig {
  std::size_t patch_size = kDefaultPatchSize;
  std::size_t latent_dim = 4;
  std::size_t conv1_channels = 16;
  std::size_t conv2_channels = 32;
  double slope = 0.1;
  double init_scale = 0.1;

  /// Spatial extent after the two stride-2 convolutions.
  std::size_t bottleneck() const { return patch_size / 4; }
  std::size_t flat() const { return conv2_channels * bottleneck() * bottleneck(); }

  nlohmann::ordered_json to_json() const;
  static VaeConfig from_json(const nlohmann::ordered_json& j);
};

/// encoder: conv(3->16, k4 s2 p1) -> conv(16->32) -> dense -> (mu, log var) in R^latent each
/// decoder: dense -> [32, P/4, P/4] -> deconv(32->16) -> deconv(16->3) -> sigmoid
/// Hidden activations are LeakyReLU.
class VaeModel {
 public:
  VaeModel(const VaeConfig& config, grad::Rng& rng);
  VaeModel(const VaeConfig& config, grad::ParamSet params);

  const VaeConfig& config() const { return config_; }
  grad::ParamSet& params() { return params_; }
  const grad::ParamSet& params() const { return params_; }

  struct Posterior {
    grad::Var mean;    // [N x latent]
    grad::Var logvar;  // [N x latent]
  };
  Posterior encode(grad::Tape& tape, const grad::Var& patches, grad::ParamSet& params) const;
  /// [N x latent] -> [N, 3, P, P] in (0, 1).
  grad::Var decode(grad::Tape& tape, const grad::Var& z, grad::ParamSet& params) const;

 private:
  VaeConfig config_;
  grad::ParamSet params_;
};

/// HWC images -> [N, 3, P, P]. All patches must be P x P.
grad::Tensor patches_to_tensor(const std::vector<data::Image>& patches, std::size_t patch_size);
data::Image tensor_to_patch(const grad::Tensor& batch, std::size_t index);

struct LatentGaussian {
  std::vector<double> mean;
  std::vector<double> variance;
};
LatentGaussian vae_encode(const VaeModel& model, const data::Image& patch);
data::Image vae_decode(const VaeModel& model, const std::vector<double>& z);

/// 1/2 sum (mu^2 + var - 1 - log var) per row, averaged over rows.
grad::Var kl_to_standard_normal(const grad::Var& mean, const grad::Var& logvar);
double kl_to_standard_normal(const std::vector<double>& mean, const std::vector<double>& variance);

struct ElboTerms {
  grad::Var loss;            // reconstruction + KL, mean over the batch
  grad::Var reconstruction;  // squared error summed over pixels, mean over the batch
  grad::Var kl;
};
/// Reparameterised ELBO with caller-supplied noise `eps` [N x latent].
ElboTerms elbo_loss(grad::Tape& tape, const VaeModel& model, grad::ParamSet& params, const grad::Tensor& patches,
                    const grad::Tensor& eps);
/// Same, drawing eps ~ N(0, I) from `rng`.
ElboTerms elbo_loss(grad::Tape& tape, const VaeModel& model, grad::ParamSet& params, const grad::Tensor& patches,
                    grad::Rng& rng);

struct VaeTrainConfig {
  int epochs = 300;
  std::size_t batch = 200;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
};

struct VaeTrainResult {
  VaeModel model;
  std::vector<double> epoch_losses;  // per-patch ELBO loss
  std::vector<double> epoch_kl;
  double final_loss = 0.0;
};

VaeTrainResult train_vae(const std::vector<data::Image>& patches, const VaeTrainConfig& train_config,
                         const VaeConfig& model_config = {});

/// Mean per-pixel squared error of decode(mu) against each patch.
double reconstruction_mse(const VaeModel& model, const std::vector<data::Image>& patches);

/// saliency -> locate -> clip_patch -> posterior mean.
std::vector<double> pipeline_features(const VaeModel& model, const data::Image& image,
                                      double base = kDefaultSaliencyBase,
                                      double threshold = kDefaultSaliencyThreshold);
/// The patch pipeline_features would encode.
data::Image pipeline_patch(const data::Image& image, std::size_t patch_size = kDefaultPatchSize,
                           double base = kDefaultSaliencyBase, double threshold = kDefaultSaliencyThreshold);

std::string vae_model_to_json(const VaeModel& model,
                              const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
void save_vae_model(const VaeModel& model, const std::filesystem::path& path,
                    const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
VaeModel load_vae_model(const std::filesystem::path& path);

}  // namespace compgen::vision
