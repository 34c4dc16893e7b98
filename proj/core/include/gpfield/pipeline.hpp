#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gpfield/config.hpp"
#include "gpfield/global_field.hpp"
#include "gpfield/local_field.hpp"
#include "gpfield/meshing.hpp"
#include "gpfield/sparse_grid.hpp"

namespace gpfield {

enum class Stage : int {
  Voxelize,
  LocalField,
  TestPoints,
  Inference,
  Fusion,
  Meshing,
  GlobalUpdate,
  GlobalTrain,  // eager node training; zero unless enabled
  kCount,
};

inline constexpr std::array<std::string_view, static_cast<int>(Stage::kCount)> kStageNames{
    "voxelize", "local_field", "test_points", "inference", "fusion", "meshing", "global_update", "global_train"};

struct FrameStats {
  std::size_t frame = 0;
  std::array<double, static_cast<int>(Stage::kCount)> stage_ms{};
  double total_ms = 0.0;
  std::size_t points = 0;        // raw points in the frame
  std::size_t voxels = 0;        // occupied voxels after voxelization
  std::size_t test_points = 0;
  std::size_t voxels_fused = 0;
  std::size_t leaves_active = 0;
  std::size_t new_leaves = 0;
  long mesh_vertex_delta = 0;

  double ms(Stage s) const { return stage_ms[static_cast<int>(s)]; }
  double stage_sum() const;
};

/// Stats CSV with header "frame,stage,ms,points,voxels,leaves": one row per
/// stage plus a "total" row per frame. `points` counts test points, `voxels`
/// the voxels fused and `leaves` the leaves active in that frame.
void write_stats_csv(std::ostream& out, const std::vector<FrameStats>& stats);

/// Full mapping state: fused grid, incremental surface mesh, global field.
class Mapper {
 public:
  explicit Mapper(PipelineConfig cfg = {});

  /// voxelize, local field, test points, inference, fusion, meshing, global
  /// update. Errors are rethrown with the frame index prepended.
  FrameStats integrate_frame(const Frame& frame);

  /// Replaces the state with a stored grid and crossing lists; the mesh is
  /// re-extracted from the grid.
  void restore(GlobalGrid grid, const CrossingLists& crossings);

  const PipelineConfig& config() const { return cfg_; }
  const GlobalGrid& grid() const { return grid_; }
  const GlobalField& field() const { return field_; }
  GlobalField& field() { return field_; }
  const SurfaceMesher& mesher() const { return mesher_; }
  TriangleMesh mesh() const { return mesher_.assemble(); }
  std::size_t frames() const { return frames_; }

  /// Global-field query signed against the fused grid.
  FieldQueryResult query(const Vec3& x) const { return field_.query(x, &grid_); }

 private:
  PipelineConfig cfg_;
  GlobalGrid grid_;
  SurfaceMesher mesher_;
  GlobalField field_;
  std::size_t frames_ = 0;
};

}  // namespace gpfield
