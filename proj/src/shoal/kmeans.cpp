#include "shoal/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace shoal {

namespace {

double sq_dist(Vec2 a, Vec2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

std::vector<Vec2> seed_plus_plus(std::span<const Vec2> points, std::size_t k, Rng& rng) {
  std::vector<Vec2> centers;
  centers.reserve(k);
  centers.push_back(points[rng.uniform_index(points.size())]);
  std::vector<double> d2(points.size());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, sq_dist(points[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      // All remaining points coincide with a center; any choice is equivalent.
      pick = rng.uniform_index(points.size());
    }
    centers.push_back(points[pick]);
  }
  return centers;
}

double assign(std::span<const Vec2> points, const std::vector<Vec2>& centers, std::vector<std::size_t>& labels) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::size_t best = 0;
    double best_d = sq_dist(points[i], centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
      const double d = sq_dist(points[i], centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    labels[i] = best;
    sse += best_d;
  }
  return sse;
}

void repair_empty(std::span<const Vec2> points, const std::vector<Vec2>& centers, std::vector<std::size_t>& labels) {
  const std::size_t k = centers.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> counts(k, 0);
    for (auto l : labels) ++counts[l];
    if (counts[c] > 0) continue;
    std::size_t far = points.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (counts[labels[i]] <= 1) continue;  // never empty another cluster
      const double d = sq_dist(points[i], centers[labels[i]]);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far < points.size()) labels[far] = c;
  }
}

double objective(std::span<const Vec2> points, const std::vector<Vec2>& centers,
                 const std::vector<std::size_t>& labels) {
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) sse += sq_dist(points[i], centers[labels[i]]);
  return sse;
}

}  // namespace

KMeansResult kmeans_partition(std::span<const Vec2> points, std::size_t k, Rng& rng,
                              std::span<const Vec2> warm_start) {
  if (k < 1) fail(ErrorKind::InvalidArgument, "k-means needs k >= 1");
  if (k > points.size())
    fail(ErrorKind::InvalidArgument,
         "k-means: k=" + std::to_string(k) + " exceeds the number of points (" + std::to_string(points.size()) + ")");

  KMeansResult res;
  res.centroids = warm_start.size() == k ? std::vector<Vec2>(warm_start.begin(), warm_start.end())
                                          : seed_plus_plus(points, k, rng);
  res.labels.assign(points.size(), 0);

  for (int it = 0; it < kKMeansMaxIterations; ++it) {
    assign(points, res.centroids, res.labels);
    repair_empty(points, res.centroids, res.labels);
    res.objective_history.push_back(objective(points, res.centroids, res.labels));

    std::vector<Vec2> sums(k);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      sums[res.labels[i]] = sums[res.labels[i]] + points[i];
      ++counts[res.labels[i]];
    }
    double moved = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const Vec2 next = counts[c] ? (1.0 / static_cast<double>(counts[c])) * sums[c] : res.centroids[c];
      moved = std::max(moved, distance(next, res.centroids[c]));
      res.centroids[c] = next;
    }
    res.iterations = it + 1;
    if (moved < kKMeansTolerance) break;
  }
  assign(points, res.centroids, res.labels);
  repair_empty(points, res.centroids, res.labels);
  return res;
}

std::vector<std::size_t> assign_agents_to_clusters(std::span<const Vec2> agents, std::span<const Vec2> centroids) {
  if (agents.size() != centroids.size())
    fail(ErrorKind::InvalidArgument, "agent/cluster count mismatch: " + std::to_string(agents.size()) + " vs " +
                                         std::to_string(centroids.size()));
  if (agents.size() > kMaxAssignable)
    fail(ErrorKind::InvalidArgument, "cluster assignment supports at most 9 agents");
  std::vector<std::size_t> perm(agents.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::size_t> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) cost += distance(agents[i], centroids[perm[i]]);
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace shoal
