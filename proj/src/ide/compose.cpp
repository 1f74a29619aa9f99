#include "compgen/ide/compose.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>

#include "compgen/grad/serialize.hpp"

namespace compgen::ide {

double gaussian_entropy(double variance) {
  if (!(variance > 0.0)) throw std::domain_error("gaussian_entropy: variance must be positive");
  return 0.5 * std::log(2.0 * std::numbers::pi * variance) + 0.5;
}

double information_gain(double entropy, double base_entropy) {
  const double g = base_entropy - entropy;
  static std::atomic<bool> warned{false};
  if (g < 0.0 && !warned.exchange(true)) {
    std::clog << "warning: negative information gain " << g << " (base entropy " << base_entropy
              << " is below a word entropy of " << entropy << ")\n";
  }
  return g;
}

GainProfile gain_profile(const DensityModel& model, const std::vector<std::string>& tokens, double base_entropy,
                         double temperature) {
  if (tokens.empty()) throw grad::UsageError("compose: empty token list");
  if (!(temperature > 0.0)) throw data::ConfigurationError("compose: temperature must be positive");
  GainProfile p;
  p.tokens = tokens;
  p.dim = model.feature_dim();
  p.base_entropy = base_entropy;
  p.temperature = temperature;
  const std::size_t n = tokens.size();
  for (const auto& tok : tokens) {
    WordDensity wd = model.predict(tok);
    std::vector<double> e(p.dim), g(p.dim);
    for (std::size_t j = 0; j < p.dim; ++j) {
      e[j] = gaussian_entropy(wd.variance[j]);
      g[j] = information_gain(e[j], base_entropy);
    }
    p.mean.push_back(std::move(wd.mean));
    p.variance.push_back(std::move(wd.variance));
    p.entropy.push_back(std::move(e));
    p.gain.push_back(std::move(g));
  }
  p.weight.assign(n, std::vector<double>(p.dim, 0.0));
  for (std::size_t j = 0; j < p.dim; ++j) {
    double top = p.gain[0][j];
    for (std::size_t i = 1; i < n; ++i) top = std::max(top, p.gain[i][j]);
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p.weight[i][j] = std::exp((p.gain[i][j] - top) / temperature);
      z += p.weight[i][j];
    }
    for (std::size_t i = 0; i < n; ++i) p.weight[i][j] /= z;
  }
  return p;
}

std::vector<double> compose(const GainProfile& p) {
  std::vector<double> out(p.dim, 0.0);
  for (std::size_t i = 0; i < p.tokens.size(); ++i) {
    for (std::size_t j = 0; j < p.dim; ++j) out[j] += p.weight[i][j] * p.mean[i][j];
  }
  return out;
}

std::vector<double> compose(const DensityModel& model, const std::vector<std::string>& tokens, double base_entropy,
                            double temperature) {
  return compose(gain_profile(model, tokens, base_entropy, temperature));
}

double score(std::span<const double> inferred, std::span<const double> candidate) {
  if (inferred.size() != candidate.size()) {
    throw grad::DimensionError("score: lengths " + std::to_string(inferred.size()) + " and " +
                               std::to_string(candidate.size()));
  }
  double s = 0.0;
  for (std::size_t j = 0; j < inferred.size(); ++j) {
    const double r = candidate[j] - inferred[j];
    s += r * r;
  }
  return -std::sqrt(s);
}

std::size_t select_inferred(std::span<const double> inferred, const std::vector<std::vector<double>>& candidates) {
  if (candidates.empty()) throw grad::UsageError("select: no candidates");
  for (const auto& c : candidates) {
    if (c.size() != candidates.front().size() || c.size() != inferred.size()) {
      throw grad::DimensionError("select: candidate dimensions disagree");
    }
  }
  std::size_t best = 0;
  double best_score = score(inferred, candidates[0]);
  for (std::size_t k = 1; k < candidates.size(); ++k) {
    const double s = score(inferred, candidates[k]);
    if (s > best_score) {
      best = k;
      best_score = s;
    }
  }
  return best;
}

std::size_t select(const DensityModel& model, const std::vector<std::string>& tokens,
                   const std::vector<std::vector<double>>& candidates, double base_entropy, double temperature) {
  const auto inferred = compose(model, tokens, base_entropy, temperature);
  return select_inferred(inferred, candidates);
}

GainMatrix gain_matrix(const DensityModel& model, double base_entropy) {
  GainMatrix m;
  m.words = model.vocab().words();
  for (const auto& wd : model.predict_all()) {
    std::vector<double> row;
    for (double v : wd.variance) row.push_back(information_gain(gaussian_entropy(v), base_entropy));
    m.gain.push_back(std::move(row));
  }
  return m;
}

std::string GainMatrix::to_csv() const {
  std::string out = "word";
  const std::size_t d = gain.empty() ? 0 : gain.front().size();
  for (std::size_t j = 0; j < d; ++j) out += "," + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < words.size(); ++i) {
    out += words[i];
    for (double g : gain[i]) out += "," + grad::format_double(g);
    out += "\n";
  }
  return out;
}

}  // namespace compgen::ide
