#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "gpfield/global_field.hpp"
#include "gpfield/sparse_grid.hpp"
#include "gpfield/types.hpp"

namespace gpfield {

using DistanceOracle = std::function<double(const Vec3&)>;

struct Box3 {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

/// Cell centers of a regular lattice over `region`, round(extent / resolution)
/// cells per axis.
std::vector<Vec3> lattice_points(const Box3& region, double resolution);

struct RmseResult {
  double rmse = 0.0;
  double max_error = 0.0;
  std::size_t samples = 0;
};

/// RMSE of |field| against |oracle| over lattice points whose oracle distance
/// lies in [band_min, band_max]. Throws EmptyField for an empty field and
/// EmptyInput when no lattice point survives the mask.
RmseResult eval_distance_rmse(const GlobalField& field, const DistanceOracle& oracle, const Box3& region,
                              double resolution, double band_min = 0.0,
                              double band_max = std::numeric_limits<double>::infinity());

/// Same metric over explicit sample points.
RmseResult eval_distance_rmse(const GlobalField& field, const DistanceOracle& oracle, std::span<const Vec3> points);

struct ChamferResult {
  double chamfer = 0.0;       // mean of the two directed mean distances
  double accuracy = 0.0;      // mean distance mesh -> reference
  double completion = 0.0;    // mean distance reference -> mesh
  double completeness = 0.0;  // fraction of reference points within `threshold` of the mesh
};

/// Throws EmptyInput if either set is empty.
ChamferResult eval_chamfer(std::span<const Vec3> mesh_points, std::span<const Vec3> reference, double threshold);

struct SliceSample {
  double u = 0.0;  // first in-plane coordinate
  double v = 0.0;  // second in-plane coordinate
  FieldQueryResult result;
  std::optional<double> error;  // |distance| - |oracle|
};

struct Slice {
  int axis = 2;  // normal axis of the slice plane
  double offset = 0.0;
  int nu = 0;
  int nv = 0;
  std::vector<SliceSample> samples;  // row-major, u fastest

  const SliceSample& at(int iu, int iv) const { return samples[static_cast<std::size_t>(iv) * nu + iu]; }
};

/// Samples the field on the plane x[axis] = offset over [lo, hi] (in-plane
/// coordinates, endpoints included) every `resolution` metres.
Slice compute_slice(const GlobalField& field, const GlobalGrid* grid, int axis, double offset,
                    const Eigen::Vector2d& lo, const Eigen::Vector2d& hi, double resolution,
                    const DistanceOracle* oracle = nullptr);

/// CSV with in-plane coordinates, distance, in-plane gradient, whether the
/// sign is known, and the oracle error when available.
void write_slice_csv(std::ostream& out, const Slice& slice);
void export_slice(const Slice& slice, const std::filesystem::path& path);

/// Points where the signed distance changes sign between neighbouring slice
/// samples, linearly interpolated. Only pairs with a known sign count.
std::vector<Eigen::Vector2d> slice_zero_crossings(const Slice& slice);

}  // namespace gpfield
