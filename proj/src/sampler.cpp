#include "pointvox/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace pointvox {

namespace {

void validate(const SampleRequest& req) {
  const std::size_t n = req.candidates.size();
  if (req.strategy != SamplingStrategy::Fps && req.scores.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "one score per candidate required");
  }
  if (!req.scores.empty() && req.scores.size() != n) {
    throw Error(ErrorCode::ShapeMismatch, "one score per candidate required");
  }
  for (double s : req.scores) {
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw Error(ErrorCode::InvalidArgument, "scores must lie in [0, 1]");
  }
  if (req.count == 0 || req.count > n) {
    throw Error(ErrorCode::InvalidCount,
                "requested " + std::to_string(req.count) + " samples from " + std::to_string(n) + " candidates");
  }
  if (req.seed_index && *req.seed_index >= n) throw Error(ErrorCode::InvalidArgument, "seed index out of range");
}

SampleResult top_k(const SampleRequest& req) {
  std::vector<std::size_t> order(req.candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return req.scores[a] > req.scores[b]; });
  order.resize(req.count);
  SampleResult out;
  out.indices = order;
  for (auto i : order) out.keys.push_back(req.scores[i]);
  return out;
}

SampleResult farthest(const SampleRequest& req, bool weighted) {
  const std::size_t n = req.candidates.size();
  std::size_t seed = 0;
  if (req.seed_index) {
    seed = *req.seed_index;
  } else if (weighted) {
    seed = argmax_score(req.scores);
  }

  SampleResult out;
  out.indices.reserve(req.count);
  out.keys.reserve(req.count);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);

  std::size_t current = seed;
  double current_key = std::numeric_limits<double>::infinity();
  for (std::size_t step = 0; step < req.count; ++step) {
    out.indices.push_back(current);
    out.keys.push_back(current_key);
    taken[current] = 1;
    if (step + 1 == req.count) break;

    const Vec3 anchor = req.candidates[current];
    std::size_t best = n;
    double best_key = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d = (req.candidates[i] - anchor).norm();
      if (d < min_dist[i]) min_dist[i] = d;
      const double key = weighted ? req.scores[i] * min_dist[i] : min_dist[i];
      if (key > best_key) {  // strict: first index wins ties
        best_key = key;
        best = i;
      }
    }
    current = best;
    current_key = best_key;
  }
  return out;
}

}  // namespace

std::size_t argmax_score(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::InvalidCount, "argmax over empty scores");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

SampleResult sample(const SampleRequest& req) {
  validate(req);
  switch (req.strategy) {
    case SamplingStrategy::Fps: return farthest(req, false);
    case SamplingStrategy::SemanticFps: return farthest(req, true);
    case SamplingStrategy::TopK: return top_k(req);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown sampling strategy");
}

}  // namespace pointvox
