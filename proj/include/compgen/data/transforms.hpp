#pragma once

#include <string>
#include <utility>
#include <vector>

#include "compgen/data/example.hpp"
#include "compgen/grad/rng.hpp"

namespace compgen::data {

using PlanePair = std::pair<std::size_t, std::size_t>;

/// Givens rotation by `degrees` in each listed (i, j) plane:
///   x_i' = x_i cos t - x_j sin t,  x_j' = x_i sin t + x_j cos t.
/// Planes must be disjoint and in range.
std::vector<double> rotate_vector(const std::vector<double>& features, double degrees,
                                  const std::vector<PlanePair>& planes);
Example rotate_features(const Example& example, double degrees, const std::vector<PlanePair>& planes);

/// Material/shape plane of the toy encoding.
inline std::vector<PlanePair> default_toy_planes() { return {{3, 4}}; }

/// Deletes tokens[0] or tokens[1] with equal probability. Needs >= 3 tokens.
std::vector<std::string> drop_attribute(const std::vector<std::string>& tokens, grad::Rng& rng);

}  // namespace compgen::data
