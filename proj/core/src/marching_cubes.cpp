#include "gpfield/marching_cubes.hpp"

#include <algorithm>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gpfield::mc {

namespace {

struct Face {
  std::array<int, 4> corners;  // cyclic
  std::array<int, 4> edges;    // edges[i] joins corners[i] and corners[i+1]
};

constexpr std::array<Face, 6> kFaces{{
    {{0, 1, 2, 3}, {0, 1, 2, 3}},
    {{4, 5, 6, 7}, {4, 5, 6, 7}},
    {{0, 1, 5, 4}, {0, 9, 4, 8}},
    {{3, 2, 6, 7}, {2, 10, 6, 11}},
    {{0, 3, 7, 4}, {3, 11, 7, 8}},
    {{1, 2, 6, 5}, {1, 10, 5, 9}},
}};

Eigen::Vector3d corner_pos(int c) {
  return {double(kCornerOffsets[c][0]), double(kCornerOffsets[c][1]), double(kCornerOffsets[c][2])};
}

Eigen::Vector3d edge_mid(int e) {
  return 0.5 * (corner_pos(kEdgeCorners[e][0]) + corner_pos(kEdgeCorners[e][1]));
}

std::vector<Triangle> polygonize(int cube_case) {
  auto inside = [cube_case](int c) { return ((cube_case >> c) & 1) != 0; };

  // Each crossing edge lies on two faces and is linked to one partner edge on
  // each of them.
  std::array<std::array<int, 2>, 12> link;
  std::array<int, 12> link_count{};
  for (auto& l : link) l = {-1, -1};
  auto connect = [&](int a, int b) {
    link[a][link_count[a]++] = b;
    link[b][link_count[b]++] = a;
  };

  for (const Face& f : kFaces) {
    std::array<int, 4> crossing{};
    int n = 0;
    for (int i = 0; i < 4; ++i)
      if (inside(f.corners[i]) != inside(f.corners[(i + 1) % 4])) crossing[n++] = i;
    if (n == 2) {
      connect(f.edges[crossing[0]], f.edges[crossing[1]]);
    } else if (n == 4) {
      // Cut off each inside corner on its own. Corner i+1 lies between edges
      // i and i+1.
      if (inside(f.corners[1])) {
        connect(f.edges[0], f.edges[1]);
        connect(f.edges[2], f.edges[3]);
      } else {
        connect(f.edges[3], f.edges[0]);
        connect(f.edges[1], f.edges[2]);
      }
    }
  }

  std::vector<Triangle> tris;
  std::array<bool, 12> used{};
  for (int start = 0; start < 12; ++start) {
    if (used[start] || link_count[start] == 0) continue;
    std::vector<int> loop;
    int prev = -1, cur = start;
    do {
      loop.push_back(cur);
      used[cur] = true;
      const int next = link[cur][0] != prev ? link[cur][0] : link[cur][1];
      prev = cur;
      cur = next;
    } while (cur != start);

    // Orient the loop so its normal points from inside corners to outside.
    Eigen::Vector3d newell = Eigen::Vector3d::Zero();
    Eigen::Vector3d outward = Eigen::Vector3d::Zero();
    for (std::size_t i = 0; i < loop.size(); ++i) {
      const Eigen::Vector3d a = edge_mid(loop[i]);
      const Eigen::Vector3d b = edge_mid(loop[(i + 1) % loop.size()]);
      newell += a.cross(b);
      const int c0 = kEdgeCorners[loop[i]][0], c1 = kEdgeCorners[loop[i]][1];
      outward += inside(c0) ? corner_pos(c1) - corner_pos(c0) : corner_pos(c0) - corner_pos(c1);
    }
    if (newell.dot(outward) < 0.0) std::reverse(loop.begin(), loop.end());
    for (std::size_t i = 1; i + 1 < loop.size(); ++i)
      tris.push_back({static_cast<std::uint8_t>(loop[0]), static_cast<std::uint8_t>(loop[i]),
                      static_cast<std::uint8_t>(loop[i + 1])});
  }
  return tris;
}

}  // namespace

const std::array<std::vector<Triangle>, 256>& case_table() {
  static const auto table = [] {
    std::array<std::vector<Triangle>, 256> t;
    for (int c = 0; c < 256; ++c) t[c] = polygonize(c);
    return t;
  }();
  return table;
}

std::uint16_t edge_mask(int cube_case) {
  std::uint16_t mask = 0;
  for (int e = 0; e < 12; ++e) {
    const bool a = (cube_case >> kEdgeCorners[e][0]) & 1;
    const bool b = (cube_case >> kEdgeCorners[e][1]) & 1;
    if (a != b) mask |= static_cast<std::uint16_t>(1u << e);
  }
  return mask;
}

}  // namespace gpfield::mc
