#pragma once

#include <span>

#include "gpfield/sparse_grid.hpp"
#include "gpfield/test_points.hpp"
#include "gpfield/types.hpp"

namespace gpfield {

struct FusionConfig {
  double voxel_size = 0.05;
  double surface_band = 0.1;      // |d| within which a sample counts as a surface measurement
  double variance_max = 4e-5;     // scale that maps distance variance onto [0, 1)
  double property_variance_max = 1.0;
  double weight_cap = 100.0;
  int channels = 0;
};

/// One local-field inference at a test point, signed.
struct FusionSample {
  GridCoord coord;
  double distance = 0.0;  // signed
  double variance = 0.0;
  Properties property{};
  double property_variance = 0.0;
};

/// Normalised fusion weight 1 - min(v / v_max, 0.99).
double fusion_weight(double variance, double variance_max);

/// Variance-weighted running mean of distance and properties for one voxel.
VoxelState fuse_point(const VoxelState& state, const FusionSample& sample, const FusionConfig& cfg);

struct FusionStats {
  std::size_t voxels_touched = 0;
  std::size_t leaves_activated = 0;
  std::size_t new_leaves = 0;
};

/// Fuses every sample into the grid and marks the touched leaves active.
FusionStats fuse_frame(GlobalGrid& grid, std::span<const FusionSample> samples, const FusionConfig& cfg);

}  // namespace gpfield
