#include "compgen/data/transforms.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "compgen/grad/tape.hpp"

namespace compgen::data {

std::vector<double> rotate_vector(const std::vector<double>& features, double degrees,
                                  const std::vector<PlanePair>& planes) {
  std::set<std::size_t> used;
  for (const auto& [i, j] : planes) {
    if (i >= features.size() || j >= features.size() || i == j) {
      throw ConfigurationError("rotation plane (" + std::to_string(i) + ", " + std::to_string(j) + ") invalid for dim " +
                               std::to_string(features.size()));
    }
    if (!used.insert(i).second || !used.insert(j).second) throw ConfigurationError("rotation planes overlap");
  }
  const double t = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  std::vector<double> out = features;
  for (const auto& [i, j] : planes) {
    out[i] = features[i] * c - features[j] * s;
    out[j] = features[i] * s + features[j] * c;
  }
  return out;
}

Example rotate_features(const Example& example, double degrees, const std::vector<PlanePair>& planes) {
  Example out = example;
  out.features = rotate_vector(example.features, degrees, planes);
  return out;
}

std::vector<std::string> drop_attribute(const std::vector<std::string>& tokens, grad::Rng& rng) {
  if (tokens.size() < 3) {
    throw grad::UsageError("drop_attribute needs at least 3 tokens, got " + std::to_string(tokens.size()));
  }
  std::vector<std::string> out = tokens;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(rng.index(2)));
  return out;
}

}  // namespace compgen::data
