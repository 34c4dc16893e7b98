#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gpfield/local_field.hpp"
#include "gpfield/types.hpp"

namespace gpfield {

struct StampedPose {
  double timestamp = 0.0;
  Pose pose;
};

/// Whitespace-delimited "x y z [p1 [p2 p3]]" lines; '#' starts a comment.
/// The channel count is taken from the first point line.
Frame read_xyz_frame(std::istream& in);
Frame load_xyz_frame(const std::filesystem::path& path);

/// Point cloud from a PLY vertex element (faces ignored).
Frame load_ply_frame(const std::filesystem::path& path);

/// Dispatches on the extension: .ply, otherwise XYZ text.
Frame load_frame(const std::filesystem::path& path);

void write_xyz_frame(std::ostream& out, const Frame& frame);

/// Lines "timestamp tx ty tz qx qy qz qw" (scalar-last quaternion).
std::vector<StampedPose> read_trajectory(std::istream& in);
std::vector<StampedPose> load_trajectory(const std::filesystem::path& path);
void write_trajectory(std::ostream& out, const std::vector<StampedPose>& poses);

/// Frame files (.ply, .xyz, .txt) in a directory, sorted by name.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path& dir);

}  // namespace gpfield
