#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shoal/config.hpp"
#include "shoal/mlp.hpp"

namespace shoal {

struct CurvePoint {
  std::uint64_t step = 0;
  double r_bar = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

/// Frozen policy plus everything needed to reproduce or evaluate it.
struct PolicyCheckpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  Mlp net;
  RunConfig config;
  std::vector<CurvePoint> curve;

  friend bool operator==(const PolicyCheckpoint&, const PolicyCheckpoint&) = default;
};

/// Little-endian layout:
///   "SHOALPOL" | u32 version | u32 n, n bytes config text | u32 L, L x (u32 out, u32 in)
///   | per layer: out*in f64 weights (row-major), out f64 biases
///   | u32 m, m x (u64 step, f64 r_bar) | u64 FNV-1a of all preceding bytes
std::string serialize_checkpoint(const PolicyCheckpoint& ckpt);
PolicyCheckpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::filesystem::path& path);
PolicyCheckpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a 64 of the serialized bytes.
std::uint64_t checkpoint_digest(const PolicyCheckpoint& ckpt);

}  // namespace shoal
