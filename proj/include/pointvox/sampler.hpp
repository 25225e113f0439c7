#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pointvox/core.hpp"

namespace pointvox {

enum class SamplingStrategy {
  Fps,        // greedy max-min Euclidean distance
  SemanticFps,  // key = score * min distance to the selected set
  TopK,       // highest scores
};

struct SampleRequest {
  std::vector<Vec3> candidates;  // BEV centers use z = 0
  std::vector<double> scores;    // foreground probability in [0, 1]
  std::size_t count = 0;
  SamplingStrategy strategy = SamplingStrategy::SemanticFps;
  /// Overrides the default first pick (index 0 for FPS, argmax score for S-FPS).
  std::optional<std::size_t> seed_index;
};

struct SampleResult {
  std::vector<std::size_t> indices;  // selection order
  /// Key of each pick when it was chosen: +inf for the seed pick, the
  /// (weighted) min distance for later picks, the score for TopK.
  std::vector<double> keys;
};

/// Ties resolve to the lowest candidate index. Throws InvalidCount when the
/// count is zero or exceeds the candidates, InvalidArgument on bad scores.
SampleResult sample(const SampleRequest& req);

/// Index of the maximum score, lowest index on ties.
std::size_t argmax_score(std::span<const double> scores);

}  // namespace pointvox
