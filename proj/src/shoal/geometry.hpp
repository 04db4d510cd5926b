#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <vector>

#include "shoal/types.hpp"

namespace shoal {

/// A pixel pair in either camera or display coordinates.
struct Pixel {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(Pixel, Pixel) = default;
};

/// Swimming-region corners as seen by the camera.
struct CameraRegion {
  Pixel top_left;
  Pixel bottom_right;
};

/// 2x3 row-major map from homogeneous camera pixels to display pixels.
struct AffineMap {
  std::array<double, 6> a{1, 0, 0, 0, 1, 0};
  double operator()(int row, int col) const { return a[static_cast<std::size_t>(row * 3 + col)]; }
};

struct CalibrationSet {
  std::vector<Pixel> display_spots;
  std::vector<Pixel> camera_points;
};

/// Maps a camera detection into the unit tank frame. Not clamped: detections
/// outside the region land outside [0,1]^2 so callers can flag them.
Vec2 normalize_camera_point(Pixel point, const CameraRegion& region);
/// Inverse of normalize_camera_point.
Pixel denormalize_camera_point(Vec2 pos, const CameraRegion& region);

/// Least-squares fit A = S F^T (F F^T)^-1 over homogenized camera points.
/// Throws Error(Degenerate) when F F^T has condition number above 1e12.
AffineMap fit_affine(const CalibrationSet& calib);

Pixel apply_affine(const AffineMap& map, Pixel camera_point);

/// Sum of squared display-space residuals of `map` over the set.
double affine_residual(const AffineMap& map, const CalibrationSet& calib);

/// Display pixel for a normalized agent position, given the display images
/// d0, d1 of the region corners.
Pixel virtual_to_display(Vec2 pos, Pixel d0, Pixel d1);

struct CalibrationResult {
  AffineMap map;
  double rms_residual = 0.0;
  std::optional<CameraRegion> region;
  std::optional<std::array<Pixel, 2>> display_corners;
};

/// File format: JSON {"pairs": [{"display": [x, y], "camera": [u, v]}, ...],
///                     "region": [u0, v0, u1, v1]}   (region optional)
CalibrationSet read_calibration_set(const std::filesystem::path& path, std::optional<CameraRegion>* region = nullptr);
void write_calibration_set(const CalibrationSet& set, const std::filesystem::path& path,
                           const std::optional<CameraRegion>& region = std::nullopt);

CalibrationResult calibrate(const CalibrationSet& set, const std::optional<CameraRegion>& region);
void write_calibration_result(const CalibrationResult& result, const std::filesystem::path& path);

}  // namespace shoal
