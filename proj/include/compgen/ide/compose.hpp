#pragma once

#include <span>
#include <string>
#include <vector>

#include "compgen/ide/density.hpp"

namespace compgen::ide {

inline constexpr double kDefaultBaseEntropy = 3.0;
inline constexpr double kDefaultTemperature = 0.1;

/// 1/2 log(2 pi var) + 1/2. Throws std::domain_error for var <= 0.
double gaussian_entropy(double variance);

/// E - e. A negative result is allowed; the first one per process is logged to stderr.
double information_gain(double entropy, double base_entropy = kDefaultBaseEntropy);

/// Per (token, dim) densities, entropies, gains and composition weights.
/// Row i of each matrix corresponds to tokens[i].
struct GainProfile {
  std::vector<std::string> tokens;
  std::size_t dim = 0;
  double base_entropy = kDefaultBaseEntropy;
  double temperature = kDefaultTemperature;
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> variance;
  std::vector<std::vector<double>> entropy;
  std::vector<std::vector<double>> gain;
  std::vector<std::vector<double>> weight;  // softmax over tokens of gain / temperature, per dim
};

GainProfile gain_profile(const DensityModel& model, const std::vector<std::string>& tokens,
                         double base_entropy = kDefaultBaseEntropy, double temperature = kDefaultTemperature);

/// Gain-weighted mixture of the per-word means.
std::vector<double> compose(const DensityModel& model, const std::vector<std::string>& tokens,
                            double base_entropy = kDefaultBaseEntropy, double temperature = kDefaultTemperature);
std::vector<double> compose(const GainProfile& profile);

/// Negated Euclidean distance; larger is better.
double score(std::span<const double> inferred, std::span<const double> candidate);

/// Index of the best-scoring candidate; ties go to the lowest index.
std::size_t select(const DensityModel& model, const std::vector<std::string>& tokens,
                   const std::vector<std::vector<double>>& candidates, double base_entropy = kDefaultBaseEntropy,
                   double temperature = kDefaultTemperature);
std::size_t select_inferred(std::span<const double> inferred, const std::vector<std::vector<double>>& candidates);

struct GainMatrix {
  std::vector<std::string> words;
  std::vector<std::vector<double>> gain;  // V x d

  std::string to_csv() const;
};

GainMatrix gain_matrix(const DensityModel& model, double base_entropy = kDefaultBaseEntropy);

}  // namespace compgen::ide
