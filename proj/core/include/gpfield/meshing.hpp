#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gpfield/sparse_grid.hpp"
#include "gpfield/types.hpp"

namespace gpfield {

/// Identifies a grid edge by its lower endpoint voxel and axis.
struct EdgeKey {
  GridCoord voxel;
  std::uint8_t axis = 0;

  friend bool operator==(const EdgeKey&, const EdgeKey&) = default;
  friend auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& e) const noexcept {
    return GridCoordHash{}(e.voxel) * 3u + e.axis;
  }
};

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Properties> vertex_properties;
  std::vector<GridCoord> vertex_leaf;  // leaf containing each vertex
  std::vector<EdgeKey> vertex_edge;    // grid edge each vertex was interpolated on
  int channels = 0;

  bool empty() const { return vertices.empty(); }
};

/// Triangles of the cells owned by one leaf (cells whose minimum corner lies
/// in the leaf). Vertices are unique per edge within the leaf.
struct LeafMesh {
  std::vector<Vec3> vertices;
  std::vector<Properties> properties;
  std::vector<EdgeKey> edges;
  std::vector<std::array<std::uint32_t, 3>> triangles;
};

/// Runs marching cubes over the cells owned by `leaf_origin`, reading a
/// one-voxel halo from the neighbouring leaves. Cells with any missing or
/// unobserved corner are skipped.
LeafMesh mesh_leaf(const GlobalGrid& grid, const GridCoord& leaf_origin, int channels);

/// Marching cubes over the given leaves, merged into one mesh with vertices
/// shared across cells. Leaves are processed in sorted order.
TriangleMesh marching_cubes(const GlobalGrid& grid, std::span<const GridCoord> leaves, int channels);

using CrossingLists = std::map<GridCoord, std::vector<Vec3>>;

/// Reduces surface points to at most one per voxel (the mean of the points in
/// that voxel), keeping the per-leaf training set within 512 points.
std::vector<Vec3> downsample_crossings(std::span<const Vec3> points, double voxel_size);

/// Mesh vertices grouped by the leaf that contains them.
CrossingLists zero_crossings(const TriangleMesh& mesh);

/// Incrementally maintained surface: one LeafMesh per leaf, re-extracted
/// whenever the leaf or a neighbour it reads from changed.
class SurfaceMesher {
 public:
  explicit SurfaceMesher(int channels = 0) : channels_(channels) {}

  /// Re-meshes the active leaves plus the lower neighbours whose cells read
  /// into them. Returns fresh crossing lists for every leaf whose crossings
  /// may have changed; an empty list means the leaf has no crossings.
  CrossingLists update(const GlobalGrid& grid, std::span<const GridCoord> active_leaves);

  /// Re-meshes every allocated leaf.
  CrossingLists rebuild(const GlobalGrid& grid);

  TriangleMesh assemble() const;
  std::size_t vertex_count() const;
  std::size_t triangle_count() const;
  const std::map<GridCoord, LeafMesh>& leaf_meshes() const { return meshes_; }

 private:
  std::vector<Vec3> crossings_for(const GridCoord& leaf, double voxel_size) const;

  int channels_;
  double voxel_size_ = 1.0;
  std::map<GridCoord, LeafMesh> meshes_;
};

}  // namespace gpfield
