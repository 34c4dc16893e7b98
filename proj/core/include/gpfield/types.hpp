#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace gpfield {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Maximum number of surface-property channels carried per voxel (RGB).
inline constexpr int kMaxChannels = 3;
using Properties = std::array<float, kMaxChannels>;

/// Integer voxel address in grid space.
struct GridCoord {
  std::int32_t i = 0;
  std::int32_t j = 0;
  std::int32_t k = 0;

  friend constexpr bool operator==(const GridCoord&, const GridCoord&) = default;
  friend constexpr auto operator<=>(const GridCoord&, const GridCoord&) = default;

  constexpr GridCoord operator+(const GridCoord& o) const { return {i + o.i, j + o.j, k + o.k}; }
  constexpr GridCoord operator-(const GridCoord& o) const { return {i - o.i, j - o.j, k - o.k}; }
  constexpr std::int32_t operator[](int axis) const { return axis == 0 ? i : (axis == 1 ? j : k); }
  constexpr std::int32_t& operator[](int axis) { return axis == 0 ? i : (axis == 1 ? j : k); }
};

struct GridCoordHash {
  std::size_t operator()(const GridCoord& c) const noexcept {
    // Large-prime spatial hash.
    const auto x = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.i));
    const auto y = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.j));
    const auto z = static_cast<std::uint64_t>(static_cast<std::uint32_t>(c.k));
    std::uint64_t h = x * 73856093ULL ^ y * 19349663ULL ^ z * 83492791ULL;
    h ^= h >> 29;
    h *= 0xbf58476d1ce4e5b9ULL;
    h ^= h >> 32;
    return static_cast<std::size_t>(h);
  }
};

inline GridCoord world_to_grid(const Vec3& p, double voxel_size) {
  return {static_cast<std::int32_t>(std::floor(p.x() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.y() / voxel_size)),
          static_cast<std::int32_t>(std::floor(p.z() / voxel_size))};
}

/// Voxel center in world coordinates.
inline Vec3 grid_to_world(const GridCoord& c, double voxel_size) {
  return {(c.i + 0.5) * voxel_size, (c.j + 0.5) * voxel_size, (c.k + 0.5) * voxel_size};
}

/// Rigid sensor-to-world transform.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  bool is_valid(double tol = 1e-6) const {
    return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
           std::abs(rotation.determinant() - 1.0) < tol;
  }
  static Pose from_quaternion(const Vec3& t, double qx, double qy, double qz, double qw) {
    Eigen::Quaterniond q(qw, qx, qy, qz);
    q.normalize();
    return {q.toRotationMatrix(), t};
  }
};

// Error hierarchy. Every failure surfaced by the library derives from Error so
// the CLI can print one machine-readable line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct FactorizationFailure : Error {
  explicit FactorizationFailure(const std::string& w) : Error("FactorizationFailure", w) {}
};
struct EmptyFrame : Error {
  explicit EmptyFrame(const std::string& w) : Error("EmptyFrame", w) {}
};
struct EmptyField : Error {
  explicit EmptyField(const std::string& w) : Error("EmptyField", w) {}
};
struct EmptyInput : Error {
  explicit EmptyInput(const std::string& w) : Error("EmptyInput", w) {}
};
struct IoFailure : Error {
  explicit IoFailure(const std::string& w) : Error("IoFailure", w) {}
};
struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w) : Error("InvalidArgument", w) {}
};

}  // namespace gpfield
