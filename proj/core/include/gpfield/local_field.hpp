#pragma once

#include <span>
#include <vector>

#include "gpfield/gp.hpp"
#include "gpfield/kdtree.hpp"
#include "gpfield/sparse_grid.hpp"
#include "gpfield/types.hpp"

namespace gpfield {

/// One posed sensor frame. Points are in the sensor frame.
struct Frame {
  std::vector<Vec3> points;
  std::vector<Properties> properties;  // empty, or one entry per point
  int channels = 0;
  Pose pose;
  double timestamp = 0.0;
};

/// Occupied voxels of a frame, grouped by leaf.
struct VoxelizedCloud {
  struct LeafRange {
    GridCoord origin;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  double voxel_size = 0.0;
  int channels = 0;
  std::vector<GridCoord> coords;
  std::vector<Vec3> centers;             // world frame
  std::vector<Vec3> means;               // mean raw point per voxel, world frame
  std::vector<Properties> properties;    // mean of the raw points per voxel
  std::vector<LeafRange> leaves;         // sorted by origin

  std::size_t size() const { return coords.size(); }
};

/// Groups world-frame points into voxels via a local sparse grid.
/// Throws EmptyFrame for a frame without points.
VoxelizedCloud voxelize(const Frame& frame, double voxel_size);

struct LocalInference {
  double distance = 0.0;  // unsigned, metres
  double variance = 0.0;  // propagated distance variance
  Properties property{};
  double property_variance = 0.0;
  std::uint32_t model = 0;
};

/// Per-frame local GP distance field: one GP per populated leaf, queries
/// routed to the model with the nearest centroid.
class LocalField {
 public:
  struct Model {
    GridCoord origin;                  // host leaf
    std::vector<GridCoord> leaves;     // host plus merged small leaves
    GpLeafModel gp;
  };

  /// Leaves holding fewer voxels than this are merged into the nearest
  /// populated leaf's model.
  static constexpr std::size_t kMinLeafPoints = 4;

  static LocalField build(const VoxelizedCloud& cloud, const KernelParams& params);

  LocalInference query(const Vec3& x) const;
  std::uint32_t nearest_model(const Vec3& x) const;

  std::span<const Model> models() const { return models_; }
  std::size_t model_count() const { return models_.size(); }

 private:
  std::vector<Model> models_;  // sorted by host leaf origin
  KdTree centroids_;
};

}  // namespace gpfield
