#include "shoal/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <json.hpp>

namespace shoal {

namespace {

constexpr double kMaxCondition = 1e12;

void check_region(const CameraRegion& r) {
  if (r.bottom_right.u == r.top_left.u || r.bottom_right.v == r.top_left.v)
    fail(ErrorKind::Degenerate, "camera region is degenerate (zero width or height)");
}

}  // namespace

Vec2 normalize_camera_point(Pixel p, const CameraRegion& r) {
  check_region(r);
  return {(p.u - r.top_left.u) / (r.bottom_right.u - r.top_left.u),
          (p.v - r.top_left.v) / (r.bottom_right.v - r.top_left.v)};
}

Pixel denormalize_camera_point(Vec2 pos, const CameraRegion& r) {
  check_region(r);
  return {r.top_left.u + pos.x * (r.bottom_right.u - r.top_left.u),
          r.top_left.v + pos.y * (r.bottom_right.v - r.top_left.v)};
}

AffineMap fit_affine(const CalibrationSet& calib) {
  const auto n = calib.camera_points.size();
  if (n != calib.display_spots.size())
    fail(ErrorKind::InvalidArgument, "calibration set: display and camera lists differ in length");
  if (n < 3) fail(ErrorKind::Degenerate, "calibration set needs at least 3 point pairs");

  Eigen::MatrixXd F(3, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd S(2, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const auto& c = calib.camera_points[static_cast<std::size_t>(i)];
    const auto& d = calib.display_spots[static_cast<std::size_t>(i)];
    F.col(i) << c.u, c.v, 1.0;
    S.col(i) << d.u, d.v;
  }
  const Eigen::Matrix3d gram = F * F.transpose();
  const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(gram, Eigen::EigenvaluesOnly).eigenvalues();
  if (!(ev(0) > 0.0) || ev(2) / ev(0) > kMaxCondition)
    fail(ErrorKind::Degenerate, "calibration degenerate: camera points are collinear or duplicated");

  const Eigen::Matrix<double, 2, 3> A = S * F.transpose() * gram.inverse();
  AffineMap map;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c) map.a[static_cast<std::size_t>(r * 3 + c)] = A(r, c);
  for (double v : map.a)
    if (!std::isfinite(v)) fail(ErrorKind::Numeric, "calibration produced non-finite coefficients");
  return map;
}

Pixel apply_affine(const AffineMap& m, Pixel p) {
  return {m(0, 0) * p.u + m(0, 1) * p.v + m(0, 2), m(1, 0) * p.u + m(1, 1) * p.v + m(1, 2)};
}

double affine_residual(const AffineMap& map, const CalibrationSet& calib) {
  double sum = 0.0;
  for (std::size_t i = 0; i < calib.camera_points.size(); ++i) {
    const Pixel q = apply_affine(map, calib.camera_points[i]);
    const double du = q.u - calib.display_spots[i].u;
    const double dv = q.v - calib.display_spots[i].v;
    sum += du * du + dv * dv;
  }
  return sum;
}

Pixel virtual_to_display(Vec2 pos, Pixel d0, Pixel d1) {
  return {pos.x * (d1.u - d0.u) + d0.u, pos.y * (d1.v - d0.v) + d0.v};
}

CalibrationSet read_calibration_set(const std::filesystem::path& path, std::optional<CameraRegion>* region) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open calibration file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, "calibration file '" + path.string() + "': " + e.what());
  }
  CalibrationSet set;
  try {
    for (const auto& pair : j.at("pairs")) {
      const auto& d = pair.at("display");
      const auto& c = pair.at("camera");
      set.display_spots.push_back({d.at(0).get<double>(), d.at(1).get<double>()});
      set.camera_points.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
    }
    if (region && j.contains("region")) {
      const auto& r = j.at("region");
      *region = CameraRegion{{r.at(0).get<double>(), r.at(1).get<double>()},
                             {r.at(2).get<double>(), r.at(3).get<double>()}};
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, "calibration file '" + path.string() + "': " + e.what());
  }
  return set;
}

void write_calibration_set(const CalibrationSet& set, const std::filesystem::path& path,
                           const std::optional<CameraRegion>& region) {
  nlohmann::json j;
  j["pairs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < set.camera_points.size(); ++i) {
    j["pairs"].push_back({{"display", {set.display_spots[i].u, set.display_spots[i].v}},
                          {"camera", {set.camera_points[i].u, set.camera_points[i].v}}});
  }
  if (region)
    j["region"] = {region->top_left.u, region->top_left.v, region->bottom_right.u, region->bottom_right.v};
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write calibration file '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

CalibrationResult calibrate(const CalibrationSet& set, const std::optional<CameraRegion>& region) {
  CalibrationResult r;
  r.map = fit_affine(set);
  r.rms_residual = std::sqrt(affine_residual(r.map, set) / static_cast<double>(set.camera_points.size()));
  if (region) {
    check_region(*region);
    r.region = region;
    r.display_corners = std::array<Pixel, 2>{apply_affine(r.map, region->top_left),
                                             apply_affine(r.map, region->bottom_right)};
  }
  return r;
}

void write_calibration_result(const CalibrationResult& result, const std::filesystem::path& path) {
  nlohmann::json j;
  const auto& a = result.map.a;
  j["affine"] = {{a[0], a[1], a[2]}, {a[3], a[4], a[5]}};
  j["rms_residual"] = result.rms_residual;
  if (result.region) {
    const auto& r = *result.region;
    j["region"] = {r.top_left.u, r.top_left.v, r.bottom_right.u, r.bottom_right.v};
  }
  if (result.display_corners) {
    const auto& d = *result.display_corners;
    j["display_corners"] = {{d[0].u, d[0].v}, {d[1].u, d[1].v}};
  }
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write calibration result '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

}  // namespace shoal
