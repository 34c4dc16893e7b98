#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace gpfield::mc {

// Usual corner ordering: 0..3 counter-clockwise on z = 0, 4..7 above them.
inline constexpr std::array<std::array<int, 3>, 8> kCornerOffsets{{
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}}};

inline constexpr std::array<std::array<int, 2>, 12> kEdgeCorners{{
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}}};

using Triangle = std::array<std::uint8_t, 3>;  // edge indices

/// Case table: for each of the 256 inside/outside corner patterns (bit c set
/// when corner c is inside), the triangles as triples of crossing edges,
/// wound so the geometric normal points toward the outside corners.
/// Ambiguous faces always separate the inside corners, which depends only on
/// the face itself, so neighbouring cells agree and the surface has no cracks.
const std::array<std::vector<Triangle>, 256>& case_table();

/// Bitmask of crossing edges per case.
std::uint16_t edge_mask(int cube_case);

}  // namespace gpfield::mc
