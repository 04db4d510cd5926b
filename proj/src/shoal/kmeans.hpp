#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "shoal/rng.hpp"
#include "shoal/types.hpp"

namespace shoal {

struct KMeansResult {
  std::vector<Vec2> centroids;
  std::vector<std::size_t> labels;        // cluster index per point
  std::vector<double> objective_history;  // within-cluster SSE after each assignment pass
  int iterations = 0;
};

inline constexpr int kKMeansMaxIterations = 100;
inline constexpr double kKMeansTolerance = 1e-9;

/// Lloyd iterations from k-means++ seeding (or from `warm_start` when it has
/// exactly k entries). Stops when no centroid moves by 1e-9 or after 100 passes.
/// A cluster left empty takes the point farthest from its current centroid.
KMeansResult kmeans_partition(std::span<const Vec2> points, std::size_t k, Rng& rng,
                              std::span<const Vec2> warm_start = {});

/// Bijection agent -> cluster minimizing total distance (exhaustive, up to 9 agents).
std::vector<std::size_t> assign_agents_to_clusters(std::span<const Vec2> agents, std::span<const Vec2> centroids);

inline constexpr std::size_t kMaxAssignable = 9;

}  // namespace shoal
