#include "gpfield/meshing.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "gpfield/marching_cubes.hpp"

namespace gpfield {

namespace {

constexpr int kDim = GlobalGrid::kLeafDim;
constexpr int kHalo = kDim + 1;
constexpr double kMinTriangleArea = 1e-12;

// Neighbour leaf origins at -1/0 offsets (dir = -1) or 0/+1 offsets (dir = +1)
// along each axis, excluding the leaf itself.
std::vector<GridCoord> neighbour_leaves(const GridCoord& origin, int dir) {
  std::vector<GridCoord> out;
  for (int dx = 0; dx <= 1; ++dx)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dz = 0; dz <= 1; ++dz) {
        if (dx == 0 && dy == 0 && dz == 0) continue;
        out.push_back({origin.i + dir * dx * kDim, origin.j + dir * dy * kDim, origin.k + dir * dz * kDim});
      }
  return out;
}

}  // namespace

LeafMesh mesh_leaf(const GlobalGrid& grid, const GridCoord& leaf_origin, int channels) {
  LeafMesh mesh;
  const GlobalGrid::Leaf* self = grid.find_leaf(leaf_origin);
  if (!self) return mesh;
  const double vs = grid.voxel_size();

  // Gather the leaf plus a one-voxel halo on the positive sides.
  std::array<const VoxelState*, kHalo * kHalo * kHalo> block{};
  auto slot = [](int x, int y, int z) { return (x * kHalo + y) * kHalo + z; };
  for (int dx = 0; dx <= 1; ++dx)
    for (int dy = 0; dy <= 1; ++dy)
      for (int dz = 0; dz <= 1; ++dz) {
        const GlobalGrid::Leaf* leaf =
            grid.find_leaf({leaf_origin.i + dx * kDim, leaf_origin.j + dy * kDim, leaf_origin.k + dz * kDim});
        if (!leaf) continue;
        const int x0 = dx * kDim, y0 = dy * kDim, z0 = dz * kDim;
        const int x1 = dx ? kHalo : kDim, y1 = dy ? kHalo : kDim, z1 = dz ? kHalo : kDim;
        for (int x = x0; x < x1; ++x)
          for (int y = y0; y < y1; ++y)
            for (int z = z0; z < z1; ++z) {
              const VoxelState* s = leaf->get(GlobalGrid::Leaf::index({x, y, z}));
              block[slot(x, y, z)] = (s && s->observed) ? s : nullptr;
            }
      }

  const auto& table = mc::case_table();
  std::unordered_map<EdgeKey, std::uint32_t, EdgeKeyHash> vertex_of;
  std::array<const VoxelState*, 8> corner{};

  for (int x = 0; x < kDim; ++x)
    for (int y = 0; y < kDim; ++y)
      for (int z = 0; z < kDim; ++z) {
        int cube_case = 0;
        bool complete = true;
        for (int c = 0; c < 8 && complete; ++c) {
          const auto& o = mc::kCornerOffsets[c];
          corner[c] = block[slot(x + o[0], y + o[1], z + o[2])];
          complete = corner[c] != nullptr;
          if (complete && corner[c]->distance < 0.0f) cube_case |= 1 << c;
        }
        if (!complete || cube_case == 0 || cube_case == 255) continue;

        auto vertex = [&](int e) -> std::uint32_t {
          int a = mc::kEdgeCorners[e][0], b = mc::kEdgeCorners[e][1];
          int axis = 0;
          while (mc::kCornerOffsets[a][axis] == mc::kCornerOffsets[b][axis]) ++axis;
          if (mc::kCornerOffsets[a][axis] > mc::kCornerOffsets[b][axis]) std::swap(a, b);
          const auto& oa = mc::kCornerOffsets[a];
          const GridCoord va{leaf_origin.i + x + oa[0], leaf_origin.j + y + oa[1], leaf_origin.k + z + oa[2]};
          const EdgeKey key{va, static_cast<std::uint8_t>(axis)};
          auto [it, inserted] = vertex_of.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
          if (!inserted) return it->second;
          const double da = corner[a]->distance, db = corner[b]->distance;
          const double t = da / (da - db);
          Vec3 p = grid_to_world(va, vs);
          p[axis] += t * vs;
          Properties prop{};
          for (int ch = 0; ch < channels; ++ch)
            prop[ch] = static_cast<float>(corner[a]->property[ch] + t * (corner[b]->property[ch] - corner[a]->property[ch]));
          mesh.vertices.push_back(p);
          mesh.properties.push_back(prop);
          mesh.edges.push_back(key);
          return it->second;
        };

        for (const mc::Triangle& tri : table[cube_case]) {
          const std::array<std::uint32_t, 3> ids{vertex(tri[0]), vertex(tri[1]), vertex(tri[2])};
          const Vec3& p0 = mesh.vertices[ids[0]];
          const double area = 0.5 * (mesh.vertices[ids[1]] - p0).cross(mesh.vertices[ids[2]] - p0).norm();
          if (area > kMinTriangleArea) mesh.triangles.push_back(ids);
        }
      }
  return mesh;
}

namespace {

void append_leaf_mesh(TriangleMesh& out, std::unordered_map<EdgeKey, std::uint32_t, EdgeKeyHash>& index,
                      const LeafMesh& leaf, double vs) {
  std::vector<std::uint32_t> remap(leaf.vertices.size());
  for (std::size_t v = 0; v < leaf.vertices.size(); ++v) {
    auto [it, inserted] = index.try_emplace(leaf.edges[v], static_cast<std::uint32_t>(out.vertices.size()));
    if (inserted) {
      out.vertices.push_back(leaf.vertices[v]);
      out.vertex_properties.push_back(leaf.properties[v]);
      out.vertex_edge.push_back(leaf.edges[v]);
      out.vertex_leaf.push_back(GlobalGrid::leaf_origin(world_to_grid(leaf.vertices[v], vs)));
    }
    remap[v] = it->second;
  }
  for (const auto& t : leaf.triangles) out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
}

}  // namespace

TriangleMesh marching_cubes(const GlobalGrid& grid, std::span<const GridCoord> leaves, int channels) {
  std::vector<GridCoord> order(leaves.begin(), leaves.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  TriangleMesh out;
  out.channels = channels;
  std::unordered_map<EdgeKey, std::uint32_t, EdgeKeyHash> index;
  for (const GridCoord& o : order) append_leaf_mesh(out, index, mesh_leaf(grid, o, channels), grid.voxel_size());
  return out;
}

std::vector<Vec3> downsample_crossings(std::span<const Vec3> points, double voxel_size) {
  std::map<GridCoord, std::pair<Vec3, int>> cells;
  for (const Vec3& p : points) {
    auto& [sum, n] = cells.try_emplace(world_to_grid(p, voxel_size), Vec3::Zero(), 0).first->second;
    sum += p;
    ++n;
  }
  std::vector<Vec3> out;
  out.reserve(cells.size());
  for (const auto& [c, acc] : cells) out.push_back(acc.first / acc.second);
  return out;
}

CrossingLists zero_crossings(const TriangleMesh& mesh) {
  CrossingLists raw;
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) raw[mesh.vertex_leaf[v]].push_back(mesh.vertices[v]);
  return raw;
}

std::vector<Vec3> SurfaceMesher::crossings_for(const GridCoord& leaf, double vs) const {
  // Vertices inside `leaf` come from cells owned by the leaf or by its lower
  // neighbours. Shared edges are counted once.
  std::set<EdgeKey> seen;
  std::vector<Vec3> pts;
  std::vector<GridCoord> sources = neighbour_leaves(leaf, -1);
  sources.push_back(leaf);
  for (const GridCoord& src : sources) {
    auto it = meshes_.find(src);
    if (it == meshes_.end()) continue;
    const LeafMesh& m = it->second;
    for (std::size_t v = 0; v < m.vertices.size(); ++v) {
      if (GlobalGrid::leaf_origin(world_to_grid(m.vertices[v], vs)) != leaf) continue;
      if (seen.insert(m.edges[v]).second) pts.push_back(m.vertices[v]);
    }
  }
  return pts;
}

CrossingLists SurfaceMesher::update(const GlobalGrid& grid, std::span<const GridCoord> active_leaves) {
  voxel_size_ = grid.voxel_size();
  std::set<GridCoord> remesh;
  for (const GridCoord& a : active_leaves) {
    remesh.insert(a);
    for (const GridCoord& n : neighbour_leaves(a, -1))
      if (grid.find_leaf(n)) remesh.insert(n);
  }

  std::set<GridCoord> affected;
  for (const GridCoord& r : remesh) {
    LeafMesh m = mesh_leaf(grid, r, channels_);
    if (m.vertices.empty()) {
      meshes_.erase(r);
    } else {
      meshes_[r] = std::move(m);
    }
    affected.insert(r);
    for (const GridCoord& n : neighbour_leaves(r, +1))
      if (grid.find_leaf(n)) affected.insert(n);
  }

  CrossingLists out;
  for (const GridCoord& leaf : affected) out[leaf] = crossings_for(leaf, grid.voxel_size());
  return out;
}

CrossingLists SurfaceMesher::rebuild(const GlobalGrid& grid) {
  meshes_.clear();
  std::vector<GridCoord> all;
  for (const auto* leaf : grid.leaves()) all.push_back(leaf->origin);
  return update(grid, all);
}

TriangleMesh SurfaceMesher::assemble() const {
  TriangleMesh out;
  out.channels = channels_;
  std::unordered_map<EdgeKey, std::uint32_t, EdgeKeyHash> index;
  for (const auto& [origin, m] : meshes_) append_leaf_mesh(out, index, m, voxel_size_);
  return out;
}

std::size_t SurfaceMesher::vertex_count() const {
  std::size_t n = 0;
  for (const auto& [o, m] : meshes_) n += m.vertices.size();
  return n;
}

std::size_t SurfaceMesher::triangle_count() const {
  std::size_t n = 0;
  for (const auto& [o, m] : meshes_) n += m.triangles.size();
  return n;
}

}  // namespace gpfield
