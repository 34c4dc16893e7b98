#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "gpfield/local_field.hpp"
#include "gpfield/types.hpp"

namespace gpfield {

struct Primitive {
  enum class Kind { Sphere, Box, Plane };

  Kind kind = Kind::Sphere;
  Vec3 center = Vec3::Zero();
  double radius = 1.0;               // sphere
  Vec3 half_extents = Vec3::Ones();  // box
  Vec3 normal = Vec3::UnitZ();       // plane, unit
  double offset = 0.0;               // plane: dot(normal, p) = offset
  Properties property{};
  double active_from = -std::numeric_limits<double>::infinity();
  double active_until = std::numeric_limits<double>::infinity();  // exclusive

  bool active(double t) const { return t >= active_from && t < active_until; }
  double sdf(const Vec3& p) const;

  static Primitive sphere(const Vec3& c, double r);
  static Primitive box(const Vec3& c, const Vec3& half);
  static Primitive plane(const Vec3& n, double offset);
};

struct SyntheticScene {
  std::vector<Primitive> primitives;
  int channels = 0;
};

/// Minimum over the primitives active at time t; +infinity when none is.
double scene_sdf(const SyntheticScene& scene, const Vec3& p, double t = 0.0);

/// Index of the active primitive with the smallest SDF at p, or -1.
int closest_primitive(const SyntheticScene& scene, const Vec3& p, double t = 0.0);

struct SensorModel {
  enum class Kind { Pinhole, Lidar };

  Kind kind = Kind::Pinhole;
  // Pinhole: optical frame, x right, y down, z forward.
  int width = 64;
  int height = 48;
  double focal = 50.0;  // pixels
  // Lidar: x forward, z up; beams at the given elevations, evenly spaced in azimuth.
  int azimuth_count = 360;
  std::vector<double> elevations_deg{-15.0, -5.0, 5.0, 15.0};
  double max_range = 10.0;
  double noise_sigma = 0.0;  // metres, Gaussian range noise
  std::uint64_t seed = 0;

  /// Unit ray directions in the sensor frame, in ray-index order.
  std::vector<Vec3> ray_directions() const;
};

/// Sphere-traces every sensor ray from the pose. Points are returned in the
/// sensor frame, in ray order, with the hit primitive's property.
Frame render_frame(const SyntheticScene& scene, const SensorModel& sensor, const Pose& pose, double t = 0.0);

/// Pinhole pose at `eye` looking at `target` with world `up`.
Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

/// n poses evenly spaced on a horizontal circle around `center`, raised by
/// `height`, each looking at `center`.
std::vector<Pose> orbit_trajectory(const Vec3& center, double radius, int n_frames, double height = 0.0);

/// Deterministic, near-uniform points on a sphere (Fibonacci lattice).
std::vector<Vec3> sample_sphere_surface(const Vec3& center, double radius, int n);

/// Scene description file: primitive, sensor and trajectory lines.
struct SceneDescription {
  SyntheticScene scene;
  SensorModel sensor;
  std::vector<Pose> trajectory;  // frame i is rendered at time i
};

SceneDescription parse_scene(const std::string& text);
SceneDescription load_scene(const std::filesystem::path& path);

}  // namespace gpfield
