#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "shoal/session.hpp"

namespace shoal {

struct Histogram {
  std::vector<double> bin_edges;
  std::vector<double> counts;  // densities once normalized
  bool normalized = false;

  std::size_t bins() const { return counts.size(); }
  double width(std::size_t i) const { return bin_edges[i + 1] - bin_edges[i]; }
};

/// n_bins equal bins over [0,1]; x = 1 lands in the last bin.
Histogram make_histogram(const std::vector<double>& samples, std::size_t n_bins);
void normalize(Histogram& h);

struct OccupancyResult {
  double target_pct = 0.0;
  double intermediate_pct = 0.0;
  double opposite_pct = 0.0;
};

enum class Zone { Target, Intermediate, Opposite };

/// Right: target is x >= 0.7, opposite x < 0.3. Left applies the same rule to 1 - x.
Zone classify_zone(double x, TargetEnd end);

OccupancyResult area_occupancy(const std::vector<SessionLog>& logs);

struct DirectionalHistograms {
  Histogram left;
  Histogram right;
};
DirectionalHistograms directional_histograms(const std::vector<SessionLog>& logs, std::size_t n_bins);

inline constexpr double kBhattacharyyaFloor = 1e-12;
double bhattacharyya_distance(const Histogram& h1, const Histogram& h2);

struct FiveNumber {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};
/// Linear interpolation between closest ranks; `sorted` must be ascending and non-empty.
double quantile_sorted(const std::vector<double>& sorted, double q);
FiveNumber five_number(std::vector<double> values);

struct SubIntervalStats {
  std::uint32_t block = 0;
  std::uint32_t first_step = 0;
  TargetEnd target_end = TargetEnd::Right;
  FiveNumber x;
};
std::vector<SubIntervalStats> subinterval_stats(const SessionLog& log);

struct MetricsReport {
  std::string condition;
  std::size_t sessions = 0;
  std::size_t steps = 0;
  std::size_t n_bins = 0;
  OccupancyResult occupancy;
  double bhattacharyya = 0.0;
  DirectionalHistograms histograms;
  std::vector<std::vector<SubIntervalStats>> blocks;  // per session
};

MetricsReport compute_report(const std::vector<SessionLog>& logs, std::size_t n_bins = 30,
                             const std::string& condition = "all");

/// Writes metrics.tsv, hist_left.tsv, hist_right.tsv and boxstats.tsv into out_dir.
void write_report(const MetricsReport& report, const std::filesystem::path& out_dir);

std::string format_double(double v);

}  // namespace shoal
