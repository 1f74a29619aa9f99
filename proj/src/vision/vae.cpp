#include "compgen/vision/vae.hpp"

#include <cmath>
#include <numeric>

#include "compgen/data/example.hpp"
#include "compgen/grad/adam.hpp"
#include "compgen/grad/serialize.hpp"

namespace compgen::vision {

using grad::ParamSet;
using grad::Shape;
using grad::Tape;
using grad::Tensor;
using grad::Var;

namespace {
constexpr std::size_t kKernel = 4, kStride = 2, kPad = 1;
}

nlohmann::ordered_json VaeConfig::to_json() const {
  return {{"patch_size", patch_size},       {"latent_dim", latent_dim}, {"conv1_channels", conv1_channels},
          {"conv2_channels", conv2_channels}, {"slope", slope},           {"init_scale", init_scale}};
}

VaeConfig VaeConfig::from_json(const nlohmann::ordered_json& j) {
  VaeConfig c;
  c.patch_size = j.value("patch_size", c.patch_size);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.conv1_channels = j.value("conv1_channels", c.conv1_channels);
  c.conv2_channels = j.value("conv2_channels", c.conv2_channels);
  c.slope = j.value("slope", c.slope);
  c.init_scale = j.value("init_scale", c.init_scale);
  return c;
}

VaeModel::VaeModel(const VaeConfig& c, grad::Rng& rng) : config_(c) {
  if (c.patch_size == 0 || c.patch_size % 4 != 0 || c.latent_dim == 0) {
    throw data::ConfigurationError("vae: patch size must be a positive multiple of 4 and latent_dim positive");
  }
  const double s = c.init_scale;
  const std::size_t c1 = c.conv1_channels, c2 = c.conv2_channels, z = c.latent_dim;
  params_.add_uniform("enc.conv1.weight", {c1, 3, kKernel, kKernel}, rng, s);
  params_.add_uniform("enc.conv1.bias", {c1}, rng, s);
  params_.add_uniform("enc.conv2.weight", {c2, c1, kKernel, kKernel}, rng, s);
  params_.add_uniform("enc.conv2.bias", {c2}, rng, s);
  params_.add_uniform("enc.dense.weight", {2 * z, c.flat()}, rng, s);
  params_.add_uniform("enc.dense.bias", {2 * z}, rng, s);
  params_.add_uniform("dec.dense.weight", {c.flat(), z}, rng, s);
  params_.add_uniform("dec.dense.bias", {c.flat()}, rng, s);
  params_.add_uniform("dec.deconv1.weight", {c2, c1, kKernel, kKernel}, rng, s);
  params_.add_uniform("dec.deconv1.bias", {c1}, rng, s);
  params_.add_uniform("dec.deconv2.weight", {c1, 3, kKernel, kKernel}, rng, s);
  params_.add_uniform("dec.deconv2.bias", {3}, rng, s);
}

VaeModel::VaeModel(const VaeConfig& c, ParamSet params) : config_(c), params_(std::move(params)) {
  grad::Rng probe(0);
  VaeModel reference(c, probe);
  for (const auto& p : reference.params().entries()) {
    if (!params_.contains(p.name)) throw grad::ParseError("vae checkpoint missing parameter '" + p.name + "'");
    if (params_[p.name].value.shape() != p.value.shape()) {
      throw grad::DimensionError("vae parameter '" + p.name + "' has shape " +
                                 grad::shape_string(params_[p.name].value.shape()));
    }
  }
}

VaeModel::Posterior VaeModel::encode(Tape& tape, const Var& x, ParamSet& p) const {
  const auto& xs = x.shape();
  if (xs.size() != 4 || xs[1] != 3 || xs[2] != config_.patch_size || xs[3] != config_.patch_size) {
    throw grad::DimensionError("vae encode: expected [N, 3, " + std::to_string(config_.patch_size) + ", " +
                               std::to_string(config_.patch_size) + "], got " + grad::shape_string(xs));
  }
  auto param = [&](const char* name) { return tape.parameter(p[name]); };
  Var h = grad::leaky_relu(grad::conv2d(x, param("enc.conv1.weight"), param("enc.conv1.bias"), kStride, kPad),
                           config_.slope);
  h = grad::leaky_relu(grad::conv2d(h, param("enc.conv2.weight"), param("enc.conv2.bias"), kStride, kPad),
                       config_.slope);
  h = grad::reshape(h, {xs[0], config_.flat()});
  Var out = grad::linear(h, param("enc.dense.weight"), param("enc.dense.bias"));
  const std::size_t z = config_.latent_dim;
  return {grad::slice_cols(out, 0, z), grad::slice_cols(out, z, 2 * z)};
}

Var VaeModel::decode(Tape& tape, const Var& z, ParamSet& p) const {
  if (z.shape().size() != 2 || z.shape()[1] != config_.latent_dim) {
    throw grad::DimensionError("vae decode: expected [N x " + std::to_string(config_.latent_dim) + "]");
  }
  auto param = [&](const char* name) { return tape.parameter(p[name]); };
  const std::size_t n = z.shape()[0], b = config_.bottleneck();
  Var h = grad::leaky_relu(grad::linear(z, param("dec.dense.weight"), param("dec.dense.bias")), config_.slope);
  h = grad::reshape(h, {n, config_.conv2_channels, b, b});
  h = grad::leaky_relu(
      grad::conv_transpose2d(h, param("dec.deconv1.weight"), param("dec.deconv1.bias"), kStride, kPad),
      config_.slope);
  h = grad::conv_transpose2d(h, param("dec.deconv2.weight"), param("dec.deconv2.bias"), kStride, kPad);
  return grad::sigmoid(h);
}

Tensor patches_to_tensor(const std::vector<data::Image>& patches, std::size_t p) {
  if (patches.empty()) throw grad::UsageError("patches_to_tensor: no patches");
  Tensor t({patches.size(), 3, p, p});
  for (std::size_t n = 0; n < patches.size(); ++n) {
    const auto& img = patches[n];
    if (img.height != p || img.width != p) {
      throw grad::DimensionError("patch " + std::to_string(n) + " is " + std::to_string(img.height) + "x" +
                                 std::to_string(img.width) + ", expected " + std::to_string(p));
    }
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t r = 0; r < p; ++r)
        for (std::size_t c = 0; c < p; ++c) t[((n * 3 + ch) * p + r) * p + c] = img.at(r, c, ch);
  }
  return t;
}

data::Image tensor_to_patch(const Tensor& batch, std::size_t n) {
  const std::size_t p = batch.shape().at(2);
  data::Image img(p, p);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < p; ++c) img.at(r, c, ch) = batch[((n * 3 + ch) * p + r) * p + c];
  return img;
}

LatentGaussian vae_encode(const VaeModel& model, const data::Image& patch) {
  ParamSet local = model.params();
  Tape tape;
  auto post = model.encode(tape, tape.constant(patches_to_tensor({patch}, model.config().patch_size)), local);
  LatentGaussian out{post.mean.value().values(), post.logvar.value().values()};
  for (double& v : out.variance) v = std::exp(v);
  return out;
}

data::Image vae_decode(const VaeModel& model, const std::vector<double>& z) {
  ParamSet local = model.params();
  Tape tape;
  Var x = model.decode(tape, tape.constant(Tensor({1, z.size()}, z)), local);
  return tensor_to_patch(x.value(), 0);
}

Var kl_to_standard_normal(const Var& mean, const Var& logvar) {
  const double rows = static_cast<double>(mean.shape()[0]);
  Var per = grad::sub(grad::add(grad::square(mean), grad::exp(logvar)), grad::add_scalar(logvar, 1.0));
  return grad::scale(grad::sum(per), 0.5 / rows);
}

double kl_to_standard_normal(const std::vector<double>& mean, const std::vector<double>& variance) {
  if (mean.size() != variance.size()) throw grad::DimensionError("kl: length mismatch");
  double kl = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    if (!(variance[j] > 0.0)) throw std::domain_error("kl: variance must be positive");
    kl += 0.5 * (mean[j] * mean[j] + variance[j] - 1.0 - std::log(variance[j]));
  }
  return kl;
}

ElboTerms elbo_loss(Tape& tape, const VaeModel& model, ParamSet& params, const Tensor& patches, const Tensor& eps) {
  const std::size_t n = patches.shape().at(0);
  if (eps.shape() != Shape{n, model.config().latent_dim}) {
    throw grad::DimensionError("elbo_loss: eps must be [N x latent]");
  }
  Var x = tape.constant(patches);
  auto post = model.encode(tape, x, params);
  Var sigma = grad::exp(grad::scale(post.logvar, 0.5));
  Var z = grad::add(post.mean, grad::mul(sigma, tape.constant(eps)));
  Var recon_x = model.decode(tape, z, params);
  Var recon = grad::scale(grad::sum(grad::square(grad::sub(recon_x, x))), 1.0 / static_cast<double>(n));
  Var kl = kl_to_standard_normal(post.mean, post.logvar);
  return {grad::add(recon, kl), recon, kl};
}

ElboTerms elbo_loss(Tape& tape, const VaeModel& model, ParamSet& params, const Tensor& patches, grad::Rng& rng) {
  Tensor eps({patches.shape().at(0), model.config().latent_dim});
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return elbo_loss(tape, model, params, patches, eps);
}

nlohmann::ordered_json VaeTrainConfig::to_json() const {
  return {{"epochs", epochs}, {"batch", batch}, {"lr", lr}, {"seed", seed}};
}

VaeTrainResult train_vae(const std::vector<data::Image>& patches, const VaeTrainConfig& tc, const VaeConfig& mc) {
  if (patches.empty()) throw data::ConfigurationError("train_vae: no patches");
  if (tc.epochs <= 0 || tc.batch == 0 || !(tc.lr > 0.0)) {
    throw data::ConfigurationError("train_vae: epochs, batch and lr must be positive");
  }
  grad::Rng rng(tc.seed);
  grad::Rng init_rng = rng.derive(1);
  grad::Rng order_rng = rng.derive(2);
  grad::Rng noise_rng = rng.derive(3);
  VaeModel model(mc, init_rng);
  ParamSet& params = model.params();
  grad::Adam adam({.lr = tc.lr});
  const Tensor all = patches_to_tensor(patches, mc.patch_size);
  const std::size_t per = 3 * mc.patch_size * mc.patch_size;

  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  VaeTrainResult result{model, {}, {}, 0.0};
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0, kl_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch) {
      const std::size_t end = std::min(order.size(), start + tc.batch);
      Tensor batch({end - start, 3, mc.patch_size, mc.patch_size});
      for (std::size_t k = start; k < end; ++k) {
        std::copy_n(all.data().begin() + static_cast<long>(order[k] * per), per,
                    batch.data().begin() + static_cast<long>((k - start) * per));
      }
      Tape tape;
      params.zero_grad();
      auto terms = elbo_loss(tape, model, params, batch, noise_rng);
      const double value = terms.loss.value().item();
      const double kl = terms.kl.value().item();
      if (!std::isfinite(value)) {
        throw grad::NumericalError("train_vae: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(params.step()));
      }
      if (kl < -1e-9) throw grad::NumericalError("train_vae: negative KL " + grad::format_double(kl));
      tape.backward(terms.loss);
      adam.step(params);
      loss_sum += value * static_cast<double>(end - start);
      kl_sum += kl * static_cast<double>(end - start);
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(patches.size()));
    result.epoch_kl.push_back(kl_sum / static_cast<double>(patches.size()));
  }
  result.final_loss = result.epoch_losses.back();
  result.model = std::move(model);
  return result;
}

double reconstruction_mse(const VaeModel& model, const std::vector<data::Image>& patches) {
  ParamSet local = model.params();
  Tape tape;
  const Tensor x = patches_to_tensor(patches, model.config().patch_size);
  auto post = model.encode(tape, tape.constant(x), local);
  const Tensor& y = model.decode(tape, post.mean, local).value();
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) total += (y[i] - x[i]) * (y[i] - x[i]);
  return total / static_cast<double>(x.size());
}

data::Image pipeline_patch(const data::Image& image, std::size_t patch_size, double base, double threshold) {
  return clip_patch(image, locate(saliency(image, base), threshold), patch_size);
}

std::vector<double> pipeline_features(const VaeModel& model, const data::Image& image, double base,
                                      double threshold) {
  return vae_encode(model, pipeline_patch(image, model.config().patch_size, base, threshold)).mean;
}

std::string vae_model_to_json(const VaeModel& model, const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json meta = {{"kind", "vae"}, {"config", model.config().to_json()}};
  for (const auto& [k, v] : extra.items()) meta[k] = v;
  return grad::params_to_json(model.params(), meta);
}

void save_vae_model(const VaeModel& model, const std::filesystem::path& path, const nlohmann::ordered_json& extra) {
  grad::write_file_atomic(path, vae_model_to_json(model, extra));
}

VaeModel load_vae_model(const std::filesystem::path& path) {
  nlohmann::ordered_json meta;
  ParamSet params = grad::load_checkpoint(path, &meta);
  try {
    if (meta.value("kind", "") != "vae") throw grad::ParseError(path.string() + ": not a VAE checkpoint");
    return VaeModel(VaeConfig::from_json(meta.at("config")), std::move(params));
  } catch (const nlohmann::json::exception& e) {
    throw grad::ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace compgen::vision
