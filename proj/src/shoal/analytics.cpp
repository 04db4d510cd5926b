#include "shoal/analytics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace shoal {

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

Histogram make_histogram(const std::vector<double>& samples, std::size_t n_bins) {
  if (n_bins < 2) fail(ErrorKind::InvalidArgument, "histograms need at least 2 bins");
  Histogram h;
  h.bin_edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) h.bin_edges[i] = static_cast<double>(i) / static_cast<double>(n_bins);
  h.counts.assign(n_bins, 0.0);
  for (double x : samples) {
    if (!(x >= 0.0 && x <= 1.0)) fail(ErrorKind::InvalidArgument, "histogram sample outside [0,1]: " + format_double(x));
    auto bin = static_cast<std::size_t>(x * static_cast<double>(n_bins));
    bin = std::min(bin, n_bins - 1);
    h.counts[bin] += 1.0;
  }
  return h;
}

void normalize(Histogram& h) {
  double mass = 0.0;
  for (std::size_t i = 0; i < h.bins(); ++i) mass += h.counts[i];
  if (mass <= 0.0) fail(ErrorKind::Degenerate, "cannot normalize an empty histogram");
  for (std::size_t i = 0; i < h.bins(); ++i) h.counts[i] /= mass * h.width(i);
  h.normalized = true;
}

Zone classify_zone(double x, TargetEnd end) {
  // Left is evaluated on the reflected coordinate so both directions share one rule.
  const double u = end == TargetEnd::Right ? x : 1.0 - x;
  if (u >= 0.7) return Zone::Target;
  if (u < 0.3) return Zone::Opposite;
  return Zone::Intermediate;
}

OccupancyResult area_occupancy(const std::vector<SessionLog>& logs) {
  std::size_t counts[3] = {0, 0, 0};
  std::size_t total = 0;
  for (const auto& log : logs)
    for (const auto& r : log.records) {
      ++counts[static_cast<int>(classify_zone(centroid(r.fish).x, r.target_end))];
      ++total;
    }
  if (total == 0) fail(ErrorKind::InvalidArgument, "occupancy needs at least one logged step");
  const double n = static_cast<double>(total);
  OccupancyResult o;
  o.target_pct = 100.0 * counts[0] / n;
  o.intermediate_pct = 100.0 * counts[1] / n;
  o.opposite_pct = 100.0 * counts[2] / n;
  return o;
}

DirectionalHistograms directional_histograms(const std::vector<SessionLog>& logs, std::size_t n_bins) {
  std::vector<double> left, right;
  for (const auto& log : logs)
    for (const auto& r : log.records) (r.target_end == TargetEnd::Left ? left : right).push_back(centroid(r.fish).x);
  if (left.empty()) fail(ErrorKind::InvalidArgument, "no samples for leftward guidance");
  if (right.empty()) fail(ErrorKind::InvalidArgument, "no samples for rightward guidance");
  DirectionalHistograms d{make_histogram(left, n_bins), make_histogram(right, n_bins)};
  normalize(d.left);
  normalize(d.right);
  return d;
}

double bhattacharyya_distance(const Histogram& h1, const Histogram& h2) {
  if (h1.bin_edges != h2.bin_edges) fail(ErrorKind::InvalidArgument, "histogram bin edges differ");
  if (!h1.normalized || !h2.normalized) fail(ErrorKind::InvalidArgument, "histograms must be normalized");
  double bc = 0.0;
  for (std::size_t i = 0; i < h1.bins(); ++i) {
    const double w = h1.width(i);
    bc += std::sqrt((h1.counts[i] * w) * (h2.counts[i] * w));
  }
  return -std::log(std::max(bc, kBhattacharyyaFloor));
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) fail(ErrorKind::InvalidArgument, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

FiveNumber five_number(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {values.front(), quantile_sorted(values, 0.25), quantile_sorted(values, 0.5), quantile_sorted(values, 0.75),
          values.back()};
}

std::vector<SubIntervalStats> subinterval_stats(const SessionLog& log) {
  const std::uint32_t block_len = log.header.config.protocol.switch_every;
  std::vector<SubIntervalStats> out;
  std::vector<double> xs;
  auto flush = [&](std::uint32_t block, TargetEnd end) {
    if (xs.empty()) return;
    out.push_back({block, block * block_len, end, five_number(std::move(xs))});
    xs.clear();
  };
  std::uint32_t current = 0;
  TargetEnd end = TargetEnd::Right;
  for (const auto& r : log.records) {
    const std::uint32_t block = r.step / block_len;
    if (block != current) flush(current, end);
    current = block;
    end = r.target_end;
    for (const auto& f : r.fish) xs.push_back(f.x);
  }
  flush(current, end);
  return out;
}

MetricsReport compute_report(const std::vector<SessionLog>& logs, std::size_t n_bins, const std::string& condition) {
  if (logs.empty()) fail(ErrorKind::InvalidArgument, "report needs at least one session log");
  MetricsReport rep;
  rep.condition = condition;
  rep.sessions = logs.size();
  for (const auto& l : logs) rep.steps += l.records.size();
  rep.n_bins = n_bins;
  rep.occupancy = area_occupancy(logs);
  rep.histograms = directional_histograms(logs, n_bins);
  rep.bhattacharyya = bhattacharyya_distance(rep.histograms.left, rep.histograms.right);
  for (const auto& l : logs) rep.blocks.push_back(subinterval_stats(l));
  return rep;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + p.string() + "'");
  return out;
}

void write_histogram(const Histogram& h, const std::filesystem::path& p) {
  auto out = open_out(p);
  out << "bin_lo\tbin_hi\tdensity\n";
  for (std::size_t i = 0; i < h.bins(); ++i)
    out << format_double(h.bin_edges[i]) << '\t' << format_double(h.bin_edges[i + 1]) << '\t'
        << format_double(h.counts[i]) << '\n';
}

}  // namespace

void write_report(const MetricsReport& rep, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create report directory '" + dir.string() + "': " + ec.message());
  {
    auto out = open_out(dir / "metrics.tsv");
    out << "condition\tsessions\tsteps\tn_bins\ttarget_pct\tintermediate_pct\topposite_pct\tbhattacharyya\n";
    out << rep.condition << '\t' << rep.sessions << '\t' << rep.steps << '\t' << rep.n_bins << '\t'
        << format_double(rep.occupancy.target_pct) << '\t' << format_double(rep.occupancy.intermediate_pct) << '\t'
        << format_double(rep.occupancy.opposite_pct) << '\t' << format_double(rep.bhattacharyya) << '\n';
  }
  write_histogram(rep.histograms.left, dir / "hist_left.tsv");
  write_histogram(rep.histograms.right, dir / "hist_right.tsv");
  auto out = open_out(dir / "boxstats.tsv");
  out << "session\tblock\tfirst_step\ttarget\tmin\tq1\tmedian\tq3\tmax\n";
  for (std::size_t s = 0; s < rep.blocks.size(); ++s)
    for (const auto& b : rep.blocks[s])
      out << s << '\t' << b.block << '\t' << b.first_step << '\t' << to_string(b.target_end) << '\t'
          << format_double(b.x.min) << '\t' << format_double(b.x.q1) << '\t' << format_double(b.x.median) << '\t'
          << format_double(b.x.q3) << '\t' << format_double(b.x.max) << '\n';
  if (!out) fail(ErrorKind::Io, "failed writing report files in '" + dir.string() + "'");
}

}  // namespace shoal
