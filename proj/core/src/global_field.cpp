#include "gpfield/global_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <tbb/parallel_for.h>

namespace gpfield {

double smooth_min(std::span<const double> distances, double lambda, std::vector<double>* weights) {
  if (distances.empty()) throw EmptyField("smooth_min over no distances");
  // Shifting by the minimum leaves the normalised weights unchanged and keeps
  // exp() in range.
  const double dmin = *std::min_element(distances.begin(), distances.end());
  double sum_w = 0.0, sum_wd = 0.0;
  if (weights) weights->assign(distances.size(), 0.0);
  for (std::size_t q = 0; q < distances.size(); ++q) {
    const double w = std::exp(-lambda * (distances[q] - dmin));
    sum_w += w;
    sum_wd += w * distances[q];
    if (weights) (*weights)[q] = w;
  }
  if (weights)
    for (double& w : *weights) w /= sum_w;
  return sum_wd / sum_w;
}

std::optional<double> interpolated_distance(const GlobalGrid& grid, const Vec3& x) {
  const double vs = grid.voxel_size();
  // Voxel values sit at centers, so shift by half a voxel to find the cell.
  const Vec3 g = x / vs - Vec3::Constant(0.5);
  const GridCoord base{static_cast<std::int32_t>(std::floor(g.x())), static_cast<std::int32_t>(std::floor(g.y())),
                       static_cast<std::int32_t>(std::floor(g.z()))};
  const Vec3 f(g.x() - base.i, g.y() - base.j, g.z() - base.k);
  double d = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const VoxelState* s = grid.find(base + GridCoord{dx, dy, dz});
    if (!s || !s->observed) return std::nullopt;
    d += (dx ? f.x() : 1.0 - f.x()) * (dy ? f.y() : 1.0 - f.y()) * (dz ? f.z() : 1.0 - f.z()) * s->distance;
  }
  return d;
}

GlobalField::GlobalField(GlobalFieldConfig cfg) : cfg_(cfg) {
  const int r = cfg_.sign_radius;
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j)
      for (int k = -r; k <= r; ++k)
        if (i * i + j * j + k * k <= r * r) sign_offsets_.push_back({i, j, k});
  std::stable_sort(sign_offsets_.begin(), sign_offsets_.end(), [](const GridCoord& a, const GridCoord& b) {
    return a.i * a.i + a.j * a.j + a.k * a.k < b.i * b.i + b.j * b.j + b.k * b.k;
  });
}

GlobalField::GlobalField(GlobalField&& o) noexcept
    : cfg_(o.cfg_),
      crossings_(std::move(o.crossings_)),
      nodes_(std::move(o.nodes_)),
      trainings_(o.trainings_.load()),
      index_stale_(true),
      sign_offsets_(std::move(o.sign_offsets_)) {}

GlobalField& GlobalField::operator=(GlobalField&& o) noexcept {
  if (this != &o) {
    cfg_ = o.cfg_;
    crossings_ = std::move(o.crossings_);
    nodes_ = std::move(o.nodes_);
    trainings_ = o.trainings_.load();
    index_stale_ = true;
    index_nodes_.clear();
    centroids_ = KdTree();
    sign_offsets_ = std::move(o.sign_offsets_);
  }
  return *this;
}

void GlobalField::update(const CrossingLists& lists) {
  for (const auto& [origin, raw] : lists) {
    std::vector<Vec3> points;
    if (!raw.empty()) points = downsample_crossings(raw, cfg_.voxel_size);
    if (points.empty()) {
      nodes_.erase(origin);
      crossings_.erase(origin);
      continue;
    }
    auto node = std::make_unique<Node>();
    node->origin = origin;
    for (const Vec3& p : points) node->centroid += p;
    node->centroid /= static_cast<double>(points.size());
    node->points = points;
    crossings_[origin] = std::move(points);
    nodes_[origin] = std::move(node);
  }
  std::lock_guard lock(index_mutex_);
  index_stale_ = true;
}

const GpLeafModel& GlobalField::model(const Node& n) const {
  std::call_once(*n.trained, [&] {
    try {
      n.model = GpLeafModel::train(n.points, cfg_.kernel);
    } catch (const FactorizationFailure& e) {
      throw FactorizationFailure("global node (" + std::to_string(n.origin.i) + "," + std::to_string(n.origin.j) +
                                 "," + std::to_string(n.origin.k) + "): " + e.what());
    }
    trainings_.fetch_add(1);
    n.ready.store(true);
  });
  return n.model;
}

void GlobalField::train_all() {
  std::vector<const Node*> pending;
  for (const auto& [o, n] : nodes_)
    if (!n->ready.load()) pending.push_back(n.get());
  tbb::parallel_for(std::size_t{0}, pending.size(), [&](std::size_t i) { model(*pending[i]); });
}

std::size_t GlobalField::dirty_count() const {
  std::size_t n = 0;
  for (const auto& [o, node] : nodes_) n += node->ready.load() ? 0 : 1;
  return n;
}

void GlobalField::refresh_index() const {
  std::lock_guard lock(index_mutex_);
  if (!index_stale_) return;
  index_nodes_.clear();
  std::vector<Vec3> centroids;
  for (const auto& [o, n] : nodes_) {
    index_nodes_.push_back(n.get());
    centroids.push_back(n->centroid);
  }
  centroids_.build(centroids);
  index_stale_ = false;
}

std::vector<const GlobalField::Node*> GlobalField::nearest_nodes(const Vec3& x) const {
  if (nodes_.empty()) throw EmptyField("global field has no nodes");
  refresh_index();
  std::vector<const Node*> out;
  for (const Neighbor& nb : centroids_.knn(x, static_cast<std::size_t>(std::max(cfg_.nodes_per_query, 1))))
    out.push_back(index_nodes_[nb.index]);
  return out;
}

std::vector<double> GlobalField::node_distances(const Vec3& x) const {
  std::vector<double> d;
  for (const Node* n : nearest_nodes(x)) d.push_back(model(*n).infer_distance(x));
  return d;
}

FieldQueryResult GlobalField::query(const Vec3& x, const GlobalGrid* grid) const {
  const std::vector<const Node*> near = nearest_nodes(x);
  const std::size_t q_count = near.size();

  std::vector<double> dist(q_count);
  std::vector<OccupancyEstimate> occ(q_count);
  std::vector<GradientEstimate> grad(q_count);
  for (std::size_t q = 0; q < q_count; ++q) {
    const GpLeafModel& m = model(*near[q]);
    occ[q] = m.infer_occupancy(x);
    dist[q] = revert_distance(occ[q].occupancy, m.params());
    grad[q] = m.infer_distance_gradient(x);
  }

  std::vector<double> w;
  FieldQueryResult r;
  r.nodes = static_cast<int>(q_count);
  r.distance = smooth_min(dist, cfg_.lambda, &w);

  const std::size_t winner = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
  r.variance = propagate_variance(occ[winner].variance, occ[winner].occupancy, cfg_.kernel);

  Vec3 g = Vec3::Zero();
  switch (cfg_.gradient_mode) {
    case GradientMode::Average:
      for (const GradientEstimate& e : grad) g += e.direction;
      break;
    case GradientMode::Weighted:
      for (std::size_t q = 0; q < q_count; ++q) g += w[q] * grad[q].direction;
      break;
    case GradientMode::Blend:
      // d/dx of sum w_q d_q with w_q = exp(-lambda d_q) / sum exp(-lambda d_j).
      for (std::size_t q = 0; q < q_count; ++q)
        g += w[q] * (1.0 - cfg_.lambda * (dist[q] - r.distance)) * grad[q].magnitude * grad[q].direction;
      break;
  }
  const double gn = g.norm();
  r.gradient = gn > cfg_.kernel.gradient_eps ? Vec3(g / gn) : Vec3::Zero();

  if (grid) {
    // Nearest observed voxel center. Offsets are visited by increasing integer
    // length; a center at offset o is at least (|o| - sqrt(3)/2) voxels away.
    const double vs = grid->voxel_size();
    const GridCoord c = world_to_grid(x, vs);
    const VoxelState* best = nullptr;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (const GridCoord& off : sign_offsets_) {
      const double len = std::sqrt(static_cast<double>(off.i * off.i + off.j * off.j + off.k * off.k));
      const double bound = std::max(0.0, len - 0.8660254037844386) * vs;
      if (best && bound * bound > best_d2) break;
      const VoxelState* s = grid->find(c + off);
      if (!s || !s->observed) continue;
      const double d2 = (grid_to_world(c + off, vs) - x).squaredNorm();
      if (d2 < best_d2) {
        best = s;
        best_d2 = d2;
      }
    }
    if (best) {
      r.has_sign = true;
      const std::optional<double> inside = interpolated_distance(*grid, x);
      if (inside ? *inside < 0.0 : best->distance < 0.0f) {
        r.distance = -r.distance;
        r.gradient = -r.gradient;
      }
      r.property = best->property;
      r.property_variance = best->property_weight > 0.0f ? 1.0 / best->property_weight : 1.0;
    }
  }
  return r;
}

std::vector<FieldQueryResult> GlobalField::query_batch(std::span<const Vec3> xs, const GlobalGrid* grid) const {
  if (nodes_.empty()) throw EmptyField("global field has no nodes");
  refresh_index();
  std::vector<FieldQueryResult> out(xs.size());
  tbb::parallel_for(std::size_t{0}, xs.size(), [&](std::size_t i) { out[i] = query(xs[i], grid); });
  return out;
}

}  // namespace gpfield
