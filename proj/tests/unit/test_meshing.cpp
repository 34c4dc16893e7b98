#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <gpfield/marching_cubes.hpp>
#include <gpfield/meshing.hpp>
#include <gpfield/ply.hpp>

#include "test_support.hpp"

using namespace gpfield;
using gpfield::testing::Gen;

namespace {

constexpr double kVs = 0.05;

VoxelState observed(double d) {
  VoxelState s;
  s.distance = static_cast<float>(d);
  s.weight = 1.0f;
  s.observed = true;
  return s;
}

// Sphere SDF sampled in a band around the surface.
GlobalGrid sphere_grid(double r, double band = 3 * kVs) {
  GlobalGrid grid(kVs);
  const int n = static_cast<int>(std::ceil((r + band) / kVs)) + 1;
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j)
      for (int k = -n; k <= n; ++k) {
        const GridCoord c{i, j, k};
        const double d = grid_to_world(c, kVs).norm() - r;
        if (std::abs(d) <= band) grid.set(c, observed(d));
      }
  return grid;
}

std::vector<GridCoord> all_leaves(const GlobalGrid& grid) {
  std::vector<GridCoord> out;
  for (const auto* l : grid.leaves()) out.push_back(l->origin);
  return out;
}

double triangle_area(const TriangleMesh& m, const std::array<std::uint32_t, 3>& t) {
  return 0.5 * (m.vertices[t[1]] - m.vertices[t[0]]).cross(m.vertices[t[2]] - m.vertices[t[0]]).norm();
}

}  // namespace

TEST_CASE("case table structure") {
  const auto& table = mc::case_table();
  CHECK(table[0].empty());
  CHECK(table[255].empty());
  for (int c = 0; c < 256; ++c) {
    // Complementary cases cross the same edges.
    CHECK(mc::edge_mask(c) == mc::edge_mask(255 - c));
    for (const auto& tri : table[c])
      for (auto e : tri) CHECK(((mc::edge_mask(c) >> e) & 1) == 1);
  }
  CHECK(table[1].size() == 1);
}

TEST_CASE("all-positive cell has no triangles, single inside corner has one") {
  GlobalGrid grid(kVs);
  for (const auto& o : mc::kCornerOffsets) grid.set({o[0], o[1], o[2]}, observed(0.02));
  CHECK(mesh_leaf(grid, {0, 0, 0}, 0).triangles.empty());

  grid.set({0, 0, 0}, observed(-0.02));
  const LeafMesh lm = mesh_leaf(grid, {0, 0, 0}, 0);
  REQUIRE(lm.triangles.size() == 1);
  REQUIRE(lm.vertices.size() == 3);
  const Vec3 c0 = grid_to_world({0, 0, 0}, kVs);
  for (const Vec3& v : lm.vertices) CHECK((v - c0).norm() == doctest::Approx(0.5 * kVs));
}

TEST_CASE("unobserved corners suppress the cell") {
  GlobalGrid grid(kVs);
  for (const auto& o : mc::kCornerOffsets) grid.set({o[0], o[1], o[2]}, observed(0.02));
  grid.set({0, 0, 0}, observed(-0.02));
  VoxelState hidden = observed(0.02);
  hidden.observed = false;
  grid.set({1, 1, 1}, hidden);
  CHECK(mesh_leaf(grid, {0, 0, 0}, 0).triangles.empty());
}

TEST_CASE("sphere mesh: radii, edge-use watertightness, zero crossings") {
  const GlobalGrid grid = sphere_grid(1.0);
  const auto leaves = all_leaves(grid);
  const TriangleMesh mesh = marching_cubes(grid, leaves, 0);
  REQUIRE(!mesh.empty());

  double worst = 0.0;
  for (const Vec3& v : mesh.vertices) worst = std::max(worst, std::abs(v.norm() - 1.0));
  CHECK(worst < 0.5 * kVs);

  std::map<std::pair<std::uint32_t, std::uint32_t>, int> uses;
  for (const auto& t : mesh.triangles) {
    for (auto i : t) REQUIRE(i < mesh.vertices.size());
    CHECK(triangle_area(mesh, t) > 1e-12);
    for (int e = 0; e < 3; ++e) {
      auto a = t[e], b = t[(e + 1) % 3];
      ++uses[{std::min(a, b), std::max(a, b)}];
    }
  }
  for (const auto& [edge, n] : uses) CHECK(n == 2);

  // Every vertex sits on a grid edge with opposite signs; interpolated D vanishes there.
  for (std::size_t n = 0; n < mesh.vertices.size(); ++n) {
    const EdgeKey& e = mesh.vertex_edge[n];
    GridCoord b = e.voxel;
    b[e.axis] += 1;
    const double da = grid.find(e.voxel)->distance, db = grid.find(b)->distance;
    CHECK((da < 0.0) != (db < 0.0));
    const Vec3 pa = grid_to_world(e.voxel, kVs);
    const double t = (mesh.vertices[n] - pa)[e.axis] / kVs;
    CHECK(std::abs(da + t * (db - da)) < 1e-6);
    CHECK(GlobalGrid::leaf_origin(world_to_grid(mesh.vertices[n], kVs)) == mesh.vertex_leaf[n]);
  }

  const CrossingLists lists = zero_crossings(mesh);
  std::size_t total = 0, close = 0;
  for (const auto& [origin, pts] : lists) {
    for (const Vec3& p : pts) {
      CHECK(GlobalGrid::leaf_origin(world_to_grid(p, kVs)) == origin);
      close += std::abs(p.norm() - 1.0) < 0.5 * kVs ? 1 : 0;
    }
    total += pts.size();
  }
  CHECK(total == mesh.vertices.size());
  CHECK(close >= 0.99 * total);
}

TEST_CASE("meshing is deterministic and order independent") {
  const GlobalGrid grid = sphere_grid(0.6);
  auto leaves = all_leaves(grid);
  const TriangleMesh a = marching_cubes(grid, leaves, 0);
  Gen g(3);
  std::shuffle(leaves.begin(), leaves.end(), g.engine());
  const TriangleMesh b = marching_cubes(grid, leaves, 0);
  CHECK(a.vertices == b.vertices);
  CHECK(a.triangles == b.triangles);
}

TEST_CASE("plane inside one leaf and empty meshes") {
  CHECK(zero_crossings(TriangleMesh{}).empty());
  GlobalGrid grid(kVs);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      for (int k = 0; k < 8; ++k) grid.set({i, j, k}, observed((k - 3.5) * kVs + 0.01));
  const std::vector<GridCoord> leaf{{0, 0, 0}};
  const TriangleMesh mesh = marching_cubes(grid, leaf, 0);
  REQUIRE(!mesh.empty());
  const CrossingLists lists = zero_crossings(mesh);
  REQUIRE(lists.size() == 1);
  CHECK(lists.begin()->second.size() == mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) CHECK(v.z() == doctest::Approx(4 * kVs - 0.01));
}

TEST_CASE("vertex properties are interpolated along the edge") {
  GlobalGrid grid(kVs);
  for (const auto& o : mc::kCornerOffsets) {
    VoxelState s = observed(o[2] == 0 ? -0.01 : 0.03);
    s.property = {o[2] == 0 ? 0.0f : 1.0f, 0.5f, 0.0f};
    grid.set({o[0], o[1], o[2]}, s);
  }
  const std::vector<GridCoord> leaf{{0, 0, 0}};
  const TriangleMesh mesh = marching_cubes(grid, leaf, 3);
  REQUIRE(mesh.vertices.size() == 4);
  for (const auto& p : mesh.vertex_properties) {
    CHECK(p[0] == doctest::Approx(0.25));
    CHECK(p[1] == doctest::Approx(0.5));
  }
}

TEST_CASE("downsampling keeps one mean point per voxel") {
  const std::vector<Vec3> pts{Vec3(0.01, 0.01, 0.01), Vec3(0.03, 0.01, 0.01), Vec3(0.07, 0.01, 0.01)};
  const auto out = downsample_crossings(pts, kVs);
  REQUIRE(out.size() == 2);
  std::set<double> xs{out[0].x(), out[1].x()};
  CHECK(xs.count(0.02) + xs.count(0.07) == 2);
}

TEST_CASE("incremental mesher matches a full re-extraction") {
  Gen g(19);
  GlobalGrid grid(kVs);
  SurfaceMesher mesher(0);
  for (int step = 0; step < 25; ++step) {
    // Perturb a random blob of voxels around a wobbling sphere surface.
    const Vec3 c = g.point(-0.3, 0.3);
    const double r = g.uniform(0.2, 0.4);
    const int n = static_cast<int>(std::ceil((r + 0.15) / kVs)) + 1;
    const GridCoord cc = world_to_grid(c, kVs);
    for (int i = -n; i <= n; ++i)
      for (int j = -n; j <= n; ++j)
        for (int k = -n; k <= n; ++k) {
          const GridCoord v = cc + GridCoord{i, j, k};
          const double d = (grid_to_world(v, kVs) - c).norm() - r;
          if (std::abs(d) > 0.15) continue;
          auto& leaf = grid.touch_leaf(v);
          leaf.voxels[GlobalGrid::Leaf::index(v)] = observed(d);
          leaf.value_mask.set(GlobalGrid::Leaf::index(v));
          grid.mark_active(leaf);
        }
    std::vector<GridCoord> active;
    for (const auto* l : grid.active_leaves()) active.push_back(l->origin);
    const CrossingLists changed = mesher.update(grid, active);
    grid.clear_active();

    const TriangleMesh full = marching_cubes(grid, all_leaves(grid), 0);
    const TriangleMesh inc = mesher.assemble();
    CHECK(inc.triangles.size() == full.triangles.size());
    CHECK(inc.vertices.size() == full.vertices.size());

    // The returned lists agree with the full mesh for every leaf they name.
    const CrossingLists truth = zero_crossings(full);
    for (const auto& [origin, pts] : changed) {
      const auto it = truth.find(origin);
      const std::size_t expect = it == truth.end() ? 0 : it->second.size();
      CHECK(pts.size() == expect);
    }
  }
  SurfaceMesher rebuilt(0);
  rebuilt.rebuild(grid);
  CHECK(rebuilt.triangle_count() == mesher.triangle_count());
}

TEST_CASE("PLY export round trip") {
  const auto dir = testing::scratch_dir("ply");
  TriangleMesh tri;
  tri.channels = 3;
  tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0.5)};
  tri.vertex_properties = {Properties{1, 0, 0}, Properties{0, 1, 0}, Properties{0, 0, 1}};
  tri.triangles = {{0, 1, 2}};
  export_ply(tri, dir / "tri.ply");
  const TriangleMesh back = read_ply(dir / "tri.ply");
  CHECK(back.vertices == tri.vertices);
  CHECK(back.triangles == tri.triangles);
  CHECK(back.channels == 3);
  for (std::size_t n = 0; n < 3; ++n)
    for (int c = 0; c < 3; ++c) CHECK(back.vertex_properties[n][c] == tri.vertex_properties[n][c]);

  export_ply(TriangleMesh{}, dir / "empty.ply");
  const TriangleMesh none = read_ply(dir / "empty.ply");
  CHECK(none.vertices.empty());
  CHECK(none.triangles.empty());

  const GlobalGrid grid = sphere_grid(0.5);
  const TriangleMesh sphere = marching_cubes(grid, all_leaves(grid), 0);
  export_ply(sphere, dir / "sphere.ply");
  const TriangleMesh s2 = read_ply(dir / "sphere.ply");
  CHECK(s2.vertices == sphere.vertices);
  CHECK(s2.triangles == sphere.triangles);

  CHECK_THROWS_AS(export_ply(tri, dir / "missing" / "x.ply"), IoFailure);
  CHECK_THROWS_AS(read_ply(dir / "nope.ply"), IoFailure);
}

TEST_CASE("ASCII PLY with quads is fan-split") {
  const auto dir = testing::scratch_dir("ply_ascii");
  {
    std::ofstream out(dir / "quad.ply");
    out << "ply\nformat ascii 1.0\ncomment test\nelement vertex 4\nproperty float x\nproperty float y\n"
           "property float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n"
           "element face 1\nproperty list uchar int vertex_indices\nend_header\n"
           "0 0 0 255 0 0\n1 0 0 0 255 0\n1 1 0 0 0 255\n0 1 0 255 255 255\n4 0 1 2 3\n";
  }
  const TriangleMesh m = read_ply(dir / "quad.ply");
  CHECK(m.vertices.size() == 4);
  CHECK(m.triangles.size() == 2);
  CHECK(m.vertex_properties[0][0] == doctest::Approx(1.0));
  {
    std::ofstream out(dir / "bad.ply");
    out << "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\n"
           "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n3 0 1 2\n";
  }
  CHECK_THROWS_AS(read_ply(dir / "bad.ply"), IoFailure);
}
