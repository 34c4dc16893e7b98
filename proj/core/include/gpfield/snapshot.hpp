#pragma once

#include <filesystem>

#include "gpfield/config.hpp"
#include "gpfield/meshing.hpp"
#include "gpfield/sparse_grid.hpp"

namespace gpfield {

class Mapper;

/// Map state on disk. Layout (little-endian):
///   "GPFMAP01"
///   u32 config length, config as key=value text
///   f64 voxel size
///   u64 leaf count, then per leaf in origin order:
///     i32 x3 origin, u64 x8 value mask,
///     per set voxel in index order: f32 distance, f32 weight, f32 x3 property,
///     f32 property weight, u8 observed
///   u64 list count, then per list: i32 x3 leaf origin, u64 n, f64 x3n points
/// The mesh is not stored; it is re-extracted from the grid on load.
struct Snapshot {
  PipelineConfig config;
  GlobalGrid grid;
  CrossingLists crossings;
};

void save_snapshot(const std::filesystem::path& path, const PipelineConfig& cfg, const GlobalGrid& grid,
                   const CrossingLists& crossings);
void save_snapshot(const std::filesystem::path& path, const Mapper& mapper);

/// Throws IoFailure on a missing, truncated or foreign file.
Snapshot load_snapshot(const std::filesystem::path& path);

/// Mapper rebuilt from a snapshot.
Mapper restore_mapper(Snapshot snap);

}  // namespace gpfield
