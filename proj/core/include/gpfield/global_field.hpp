#pragma once

#include <array>
#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "gpfield/gp.hpp"
#include "gpfield/kdtree.hpp"
#include "gpfield/meshing.hpp"
#include "gpfield/sparse_grid.hpp"
#include "gpfield/types.hpp"

namespace gpfield {

/// How per-node gradients are combined. Average is the plain mean of the unit
/// gradients, Weighted uses the smooth-minimum weights, Blend differentiates
/// the smooth-minimum itself.
enum class GradientMode { Average, Weighted, Blend };
inline constexpr std::array<std::string_view, 3> kGradientModeNames{"average", "weighted", "blend"};

struct GlobalFieldConfig {
  double voxel_size = 0.05;   // crossings are reduced to one point per voxel
  KernelParams kernel{.d_max = 2.0};
  int nodes_per_query = 3;     // Q
  double lambda = 100.0;       // smooth-minimum sharpness, 1/m
  int sign_radius = 5;         // voxels searched for an observed voxel to sign the result
  GradientMode gradient_mode = GradientMode::Blend;
};

struct FieldQueryResult {
  double distance = 0.0;           // signed when has_sign, unsigned otherwise
  double variance = 0.0;
  Vec3 gradient = Vec3::Zero();    // unit gradient of `distance`
  Properties property{};
  double property_variance = 0.0;
  bool has_sign = false;           // false: no observed voxel nearby, reported as free space
  int nodes = 0;
};

/// Smooth minimum of per-node distances with weights exp(-lambda (d_q - min d)).
/// Writes the normalised weights to `weights` when given.
double smooth_min(std::span<const double> distances, double lambda, std::vector<double>* weights = nullptr);

/// Trilinear interpolation of the fused distance at x, if all eight
/// surrounding voxels are observed.
std::optional<double> interpolated_distance(const GlobalGrid& grid, const Vec3& x);

/// Continuous distance field made of one GP per leaf, trained lazily on the
/// leaf's mesh zero crossings.
class GlobalField {
 public:
  explicit GlobalField(GlobalFieldConfig cfg = {});
  GlobalField(GlobalField&&) noexcept;
  GlobalField& operator=(GlobalField&&) noexcept;

  /// Replaces the crossing list of each given leaf. An empty list removes the
  /// node. Training is deferred to the first query that needs the node.
  void update(const CrossingLists& lists);

  /// Trains every dirty node now.
  void train_all();

  /// Blended inference at x. The grid provides sign and properties; pass
  /// nullptr for an unsigned result. Throws EmptyField without nodes.
  FieldQueryResult query(const Vec3& x, const GlobalGrid* grid = nullptr) const;
  std::vector<FieldQueryResult> query_batch(std::span<const Vec3> xs, const GlobalGrid* grid = nullptr) const;

  /// Per-node unsigned distances of the Q nearest nodes, nearest centroid first.
  std::vector<double> node_distances(const Vec3& x) const;

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t dirty_count() const;
  std::size_t training_count() const { return trainings_.load(); }
  const GlobalFieldConfig& config() const { return cfg_; }
  const CrossingLists& crossings() const { return crossings_; }

 private:
  struct Node {
    GridCoord origin;
    std::vector<Vec3> points;
    Vec3 centroid = Vec3::Zero();
    std::unique_ptr<std::once_flag> trained = std::make_unique<std::once_flag>();
    mutable GpLeafModel model;
    mutable std::atomic<bool> ready{false};
  };

  const GpLeafModel& model(const Node& n) const;
  void refresh_index() const;
  std::vector<const Node*> nearest_nodes(const Vec3& x) const;

  GlobalFieldConfig cfg_;
  CrossingLists crossings_;                 // downsampled, as trained
  std::map<GridCoord, std::unique_ptr<Node>> nodes_;
  mutable std::atomic<std::size_t> trainings_{0};

  mutable std::mutex index_mutex_;
  mutable bool index_stale_ = true;
  mutable std::vector<const Node*> index_nodes_;
  mutable KdTree centroids_;
  std::vector<GridCoord> sign_offsets_;
};

}  // namespace gpfield
