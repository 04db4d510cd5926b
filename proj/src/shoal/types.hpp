#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace shoal {

/// Position in the normalized arena, [0,1]^2 for anything produced by the dynamics.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }
inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }
inline bool in_unit_square(Vec2 v) { return v.x >= 0.0 && v.x <= 1.0 && v.y >= 0.0 && v.y <= 1.0; }

inline Vec2 clamp_unit(Vec2 v) {
  return {std::clamp(v.x, 0.0, 1.0), std::clamp(v.y, 0.0, 1.0)};
}

inline Vec2 centroid(const std::vector<Vec2>& pts) {
  Vec2 c{};
  for (const auto& p : pts) c = c + p;
  const double n = static_cast<double>(pts.size());
  return {c.x / n, c.y / n};
}

enum class TargetEnd { Left = 0, Right = 1 };

inline double target_x(TargetEnd end) { return end == TargetEnd::Right ? 1.0 : 0.0; }
inline TargetEnd opposite(TargetEnd end) {
  return end == TargetEnd::Right ? TargetEnd::Left : TargetEnd::Right;
}
inline std::string_view to_string(TargetEnd end) {
  return end == TargetEnd::Right ? "right" : "left";
}

/// Error categories surfaced through the C API as distinct status codes.
enum class ErrorKind {
  InvalidArgument,
  Io,
  Parse,
  Validation,
  Numeric,
  Degenerate,
  Protocol,
  Network,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace shoal
