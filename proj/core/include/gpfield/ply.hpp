#pragma once

#include <filesystem>

#include "gpfield/meshing.hpp"

namespace gpfield {

/// Binary little-endian PLY. Vertices carry double x,y,z plus uchar
/// red/green/blue for three channels or a float intensity for one; faces are
/// uchar-counted uint index lists. Throws IoFailure.
void export_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

/// Reads vertex positions, colour or intensity and faces from an ASCII or
/// binary little-endian PLY. Other properties and elements are skipped.
/// Colours given as uchar are scaled to [0, 1].
TriangleMesh read_ply(const std::filesystem::path& path);

}  // namespace gpfield
